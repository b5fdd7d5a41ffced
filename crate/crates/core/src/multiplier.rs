//! Discrete Lagrange multiplier and contact classification of elements.

use crate::assembly::SparseOperator;
use crate::error::{Error, Result};
use crate::mesh::{EdgeSet, Mesh};
use crate::space::{lumped_masses, NodalField};

/// `σ_h(z) = (F(z) - (K u_h)(z)) / m_z` at interior vertices, zero on the
/// boundary, where `m_z` is the lumped vertex mass.
pub fn compute_sigma_h(
    u_h: &NodalField,
    load: &NodalField,
    stiffness: &SparseOperator,
    mesh: &Mesh,
) -> Result<NodalField> {
    u_h.check(mesh)?;
    load.check(mesh)?;
    let masses = lumped_masses(mesh);
    let ku = stiffness.mul(&u_h.values);
    let mut sigma = vec![0.0; mesh.num_vertices()];
    for z in 0..mesh.num_vertices() {
        if mesh.is_boundary_vertex(z) {
            continue;
        }
        if !(masses[z] > 0.0) {
            return Err(Error::InvalidParameter(format!("vertex {z} has zero lumped mass")));
        }
        sigma[z] = (load.values[z] - ku[z]) / masses[z];
    }
    Ok(NodalField::new(sigma))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    /// Some vertex in contact and some vertex strictly above the obstacle.
    FreeBoundary,
    /// Every vertex in contact.
    Contact,
    /// No vertex in contact.
    NonContact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElementClassification {
    pub kinds: Vec<ElementKind>,
    pub free_boundary: Vec<usize>,
    pub contact: Vec<usize>,
    pub non_contact: Vec<usize>,
    /// Interior edges containing a contact vertex of a free-boundary element.
    pub free_boundary_edges: Vec<usize>,
    /// Per-vertex contact flag used for the classification.
    pub in_contact: Vec<bool>,
}

/// Default contact tolerance `1e-10 (1 + ‖u_h‖_∞)`.
pub fn default_contact_tolerance(u_h: &NodalField) -> f64 {
    1e-10 * (1.0 + u_h.max_abs())
}

/// Classifies every triangle by comparing `u_h` and `χ_h` at its vertices;
/// `|u_h(z) - χ(z)| ≤ tol` counts as contact.
pub fn classify_elements(
    u_h: &NodalField,
    chi_h: &NodalField,
    mesh: &Mesh,
    edges: &EdgeSet,
    tol: f64,
) -> Result<ElementClassification> {
    u_h.check(mesh)?;
    chi_h.check(mesh)?;
    let in_contact: Vec<bool> = u_h
        .values
        .iter()
        .zip(&chi_h.values)
        .map(|(u, c)| (u - c).abs() <= tol)
        .collect();

    let mut kinds = Vec::with_capacity(mesh.num_triangles());
    let (mut free_boundary, mut contact, mut non_contact) = (Vec::new(), Vec::new(), Vec::new());
    let mut star_vertex = vec![false; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let touching = tri.iter().filter(|&&v| in_contact[v]).count();
        let kind = match touching {
            0 => ElementKind::NonContact,
            3 => ElementKind::Contact,
            _ => ElementKind::FreeBoundary,
        };
        match kind {
            ElementKind::FreeBoundary => {
                free_boundary.push(t);
                for &v in tri {
                    if in_contact[v] {
                        star_vertex[v] = true;
                    }
                }
            }
            ElementKind::Contact => contact.push(t),
            ElementKind::NonContact => non_contact.push(t),
        }
        kinds.push(kind);
    }
    let free_boundary_edges = edges
        .interior
        .iter()
        .enumerate()
        .filter(|(_, e)| star_vertex[e.vertices[0]] || star_vertex[e.vertices[1]])
        .map(|(i, _)| i)
        .collect();
    Ok(ElementClassification {
        kinds,
        free_boundary,
        contact,
        non_contact,
        free_boundary_edges,
        in_contact,
    })
}
