//! Built-in example scenarios: source geometry, mesh pair, shift and
//! solver defaults for each named run.
//!
//! The shape coordinates are this crate's choices (the references the
//! scenarios reproduce describe the shapes only qualitatively); the same
//! geometries ship as editable config files under `scenarios/`.

use crate::error::Error;
use crate::experiments::source::{Shape, ShapeKind, SourceSpec};

/// Everything a named example needs to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub spec: SourceSpec,
    pub epsilon: f64,
    /// Inverse-side meshes (the model the solver sees).
    pub state_grid: usize,
    pub source_grid: usize,
    /// Data-side meshes.  Equal to the inverse grids for inverse-crime
    /// runs; finer for crime-free runs.
    pub data_state_grid: usize,
    pub data_source_grid: usize,
    /// Regularization weight at zero noise (noisy runs pick alpha by the
    /// discrepancy principle instead).
    pub alpha: f64,
    /// Box bound; infinity means unconstrained from above.
    pub s: f64,
    pub rank: usize,
}

pub const SCENARIO_NAMES: [&str; 6] = ["ex1", "ex1mag", "ex2", "ex3", "ex4", "ex5"];

fn point(x: f64, y: f64, strength: f64) -> Shape {
    Shape { kind: ShapeKind::Point { x, y }, strength }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Shape {
    Shape { kind: ShapeKind::Rectangle { x0, y0, x1, y1 }, strength: 1.0 }
}

/// Five point sources in a quincunx.
fn quincunx(strengths: [f64; 5]) -> SourceSpec {
    SourceSpec {
        shapes: vec![
            point(0.25, 0.25, strengths[0]),
            point(0.75, 0.25, strengths[1]),
            point(0.5, 0.5, strengths[2]),
            point(0.25, 0.75, strengths[3]),
            point(0.75, 0.75, strengths[4]),
        ],
    }
}

/// Looks up a built-in scenario by name.
pub fn scenario(name: &str) -> Result<Scenario, Error> {
    let inverse_crime = |name, spec, epsilon, s| Scenario {
        name,
        spec,
        epsilon,
        state_grid: 33,
        source_grid: 17,
        data_state_grid: 33,
        data_source_grid: 17,
        alpha: 1e-4,
        s,
        rank: 20,
    };
    let crime_free = |name, spec, s| Scenario {
        name,
        spec,
        epsilon: -1.0,
        state_grid: 49,
        source_grid: 49,
        data_state_grid: 97,
        data_source_grid: 97,
        alpha: 1e-4,
        s,
        rank: 20,
    };
    match name {
        // Neutral base for config-driven runs: inverse-crime mesh pair and
        // solver defaults, but no source — the caller must supply shapes
        // through overrides or a config file.
        "custom" => Ok(inverse_crime(
            "custom",
            SourceSpec { shapes: Vec::new() },
            -1.0,
            f64::INFINITY,
        )),
        "ex1" => Ok(inverse_crime("ex1", quincunx([1.0; 5]), 1.0, f64::INFINITY)),
        "ex1mag" => Ok(inverse_crime(
            "ex1mag",
            quincunx([0.5, 0.75, 1.0, 1.25, 1.5]),
            1.0,
            f64::INFINITY,
        )),
        "ex2" => Ok(inverse_crime(
            "ex2",
            SourceSpec {
                shapes: vec![
                    rect(0.4375, 0.375, 0.625, 0.5625),
                    rect(0.1875, 0.125, 0.25, 0.1875),
                    rect(0.8125, 0.75, 0.875, 0.8125),
                ],
            },
            -1.0,
            1.0,
        )),
        // A square, a rectangle and a disk, aligned to the 49-grid (spacing
        // 1/48) and kept small: the rank-20 model tells shapes apart only
        // when their node supports are comparable to the rank, and compact
        // well-separated supports keep the bound sweep's L-curve readable.
        "ex3" => Ok(crime_free(
            "ex3",
            SourceSpec {
                shapes: vec![
                    rect(9.0 / 48.0, 9.0 / 48.0, 12.0 / 48.0, 12.0 / 48.0),
                    rect(30.0 / 48.0, 12.0 / 48.0, 34.0 / 48.0, 14.0 / 48.0),
                    Shape { kind: ShapeKind::Disk { cx: 0.5, cy: 0.75, r: 0.055 }, strength: 1.0 },
                ],
            },
            1.2,
        )),
        "ex4" => Ok(crime_free(
            "ex4",
            SourceSpec {
                shapes: vec![Shape {
                    kind: ShapeKind::Horseshoe {
                        x0: 0.3,
                        y0: 0.3,
                        x1: 0.7,
                        y1: 0.7,
                        thickness: 0.12,
                    },
                    strength: 1.0,
                }],
            },
            1.0,
        )),
        "ex5" => Ok(crime_free(
            "ex5",
            SourceSpec {
                shapes: vec![Shape {
                    kind: ShapeKind::HollowRectangle {
                        x0: 0.28,
                        y0: 0.33,
                        x1: 0.72,
                        y1: 0.67,
                        thickness: 0.1,
                    },
                    strength: 1.0,
                }],
            },
            1.0,
        )),
        other => Err(Error::InvalidArgument(format!(
            "unknown example {other:?}; expected one of {SCENARIO_NAMES:?}"
        ))),
    }
}
