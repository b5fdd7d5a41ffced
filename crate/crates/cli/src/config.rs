//! `key = value` problem files.
//!
//! ```text
//! # criss-cross contact example
//! load = constant -12
//! obstacle = constant -0.5
//! dirichlet = constant 0
//! geometry = polygonal
//! ```
//!
//! Field kinds: `constant c`, `affine c0 cx cy`,
//! `quadratic c0 cx cy cxx cxy cyy`, `bowl c0 k` (`c0 - k r²`), and the
//! disk benchmark fields `disk_load`, `disk_obstacle`, `disk_exact`.
//! `exact` is optional; `geometry` is `polygonal` (default) or `unit_circle`.

use std::sync::Arc;

use obstacle_afem::driver::{disk_exact, disk_load, disk_obstacle};
use obstacle_afem::prelude::*;

use crate::CliError;

fn bad(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config {
        line,
        message: message.into(),
    }
}

fn numbers(args: &[&str], n: usize, kind: &str, line: usize) -> Result<Vec<f64>, CliError> {
    if args.len() != n {
        return Err(bad(line, format!("`{kind}` takes {n} numbers, got {}", args.len())));
    }
    args.iter()
        .map(|a| {
            a.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line, format!("`{a}` is not a finite number")))
        })
        .collect()
}

pub fn parse_field(spec: &str, line: usize) -> Result<SharedField, CliError> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    let (&kind, args) = words.split_first().ok_or_else(|| bad(line, "missing field kind"))?;
    let field: SharedField = match kind {
        "constant" => Arc::new(Constant(numbers(args, 1, kind, line)?[0])),
        "affine" => {
            let c = numbers(args, 3, kind, line)?;
            Arc::new(Affine {
                c0: c[0],
                cx: c[1],
                cy: c[2],
            })
        }
        "quadratic" => {
            let c = numbers(args, 6, kind, line)?;
            Arc::new(Quadratic {
                c0: c[0],
                cx: c[1],
                cy: c[2],
                cxx: c[3],
                cxy: c[4],
                cyy: c[5],
            })
        }
        "bowl" => {
            let c = numbers(args, 2, kind, line)?;
            Arc::new(Quadratic {
                c0: c[0],
                cxx: -c[1],
                cyy: -c[1],
                ..Default::default()
            })
        }
        "disk_load" | "disk_obstacle" | "disk_exact" => {
            numbers(args, 0, kind, line)?;
            Arc::new(match kind {
                "disk_load" => disk_load(),
                "disk_obstacle" => disk_obstacle(),
                _ => disk_exact(),
            })
        }
        other => return Err(bad(line, format!("unknown field kind `{other}`"))),
    };
    Ok(field)
}

pub fn parse_problem(text: &str) -> Result<ProblemData, CliError> {
    let mut load = None;
    let mut obstacle = None;
    let mut dirichlet = None;
    let mut exact = None;
    let mut geometry = Geometry::Polygonal;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let (key, value) = l.split_once('=').ok_or_else(|| bad(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let slot = match key {
            "load" => &mut load,
            "obstacle" => &mut obstacle,
            "dirichlet" => &mut dirichlet,
            "exact" => &mut exact,
            "geometry" => {
                geometry = match value {
                    "polygonal" => Geometry::Polygonal,
                    "unit_circle" => Geometry::UnitCircle,
                    other => return Err(bad(line, format!("unknown geometry `{other}`"))),
                };
                continue;
            }
            other => return Err(bad(line, format!("unknown key `{other}`"))),
        };
        if slot.is_some() {
            return Err(bad(line, format!("duplicate key `{key}`")));
        }
        *slot = Some(parse_field(value, line)?);
    }
    let missing = |name: &str| bad(0, format!("missing `{name}`"));
    Ok(ProblemData {
        load: load.ok_or_else(|| missing("load"))?,
        obstacle: obstacle.ok_or_else(|| missing("obstacle"))?,
        dirichlet: dirichlet.ok_or_else(|| missing("dirichlet"))?,
        exact,
        geometry,
    })
}
