//! Source geometry: shape specifications and their nodal rasterization.

use crate::error::Error;
use crate::fem::TriMesh;
use crate::DenseVector;
use serde::Serialize;

/// Slack for boundary-inclusive containment tests, absorbing the rounding
/// of node coordinates k/(n-1).
const GEOM_TOL: f64 = 1e-9;

/// Geometry of a single source component, in unit-square coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ShapeKind {
    /// Snaps to the nearest mesh node.
    Point { x: f64, y: f64 },
    Rectangle { x0: f64, y0: f64, x1: f64, y1: f64 },
    Disk { cx: f64, cy: f64, r: f64 },
    /// U-shape opening upward: a bottom bar plus two vertical arms of the
    /// given thickness inside the outer rectangle.
    Horseshoe { x0: f64, y0: f64, x1: f64, y1: f64, thickness: f64 },
    /// Picture frame: the outer rectangle minus a centered cavity, bars of
    /// the given thickness.
    HollowRectangle { x0: f64, y0: f64, x1: f64, y1: f64, thickness: f64 },
}

/// One shape with its source strength.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shape {
    pub kind: ShapeKind,
    pub strength: f64,
}

/// An ordered list of shapes; later shapes overwrite earlier ones where
/// they overlap.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SourceSpec {
    pub shapes: Vec<Shape>,
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl ShapeKind {
    fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match *self {
            ShapeKind::Point { x, y } => {
                if !in_unit(x) || !in_unit(y) {
                    return bad(format!("point ({x}, {y}) outside the unit square"));
                }
            }
            ShapeKind::Rectangle { x0, y0, x1, y1 } => {
                if !(in_unit(x0) && in_unit(y0) && in_unit(x1) && in_unit(y1)) {
                    return bad(format!("rectangle ({x0},{y0})-({x1},{y1}) leaves the unit square"));
                }
                if x0 >= x1 || y0 >= y1 {
                    return bad(format!("rectangle ({x0},{y0})-({x1},{y1}) has no interior"));
                }
            }
            ShapeKind::Disk { cx, cy, r } => {
                if !(r > 0.0) {
                    return bad(format!("disk radius must be positive, got {r}"));
                }
                if !in_unit(cx - r) || !in_unit(cx + r) || !in_unit(cy - r) || !in_unit(cy + r) {
                    return bad(format!("disk ({cx},{cy}) radius {r} leaves the unit square"));
                }
            }
            ShapeKind::Horseshoe { x0, y0, x1, y1, thickness }
            | ShapeKind::HollowRectangle { x0, y0, x1, y1, thickness } => {
                if !(in_unit(x0) && in_unit(y0) && in_unit(x1) && in_unit(y1)) {
                    return bad(format!("frame ({x0},{y0})-({x1},{y1}) leaves the unit square"));
                }
                if x0 >= x1 || y0 >= y1 {
                    return bad(format!("frame ({x0},{y0})-({x1},{y1}) has no interior"));
                }
                if !(thickness > 0.0) || 2.0 * thickness >= x1 - x0 || 2.0 * thickness >= y1 - y0 {
                    return bad(format!(
                        "frame thickness {thickness} leaves no cavity in ({x0},{y0})-({x1},{y1})"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Boundary-inclusive containment; `Point` never contains (it snaps).
    fn contains(&self, x: f64, y: f64) -> bool {
        let inside_rect = |x0: f64, y0: f64, x1: f64, y1: f64| {
            x >= x0 - GEOM_TOL && x <= x1 + GEOM_TOL && y >= y0 - GEOM_TOL && y <= y1 + GEOM_TOL
        };
        match *self {
            ShapeKind::Point { .. } => false,
            ShapeKind::Rectangle { x0, y0, x1, y1 } => inside_rect(x0, y0, x1, y1),
            ShapeKind::Disk { cx, cy, r } => {
                let (dx, dy) = (x - cx, y - cy);
                (dx * dx + dy * dy).sqrt() <= r + GEOM_TOL
            }
            ShapeKind::Horseshoe { x0, y0, x1, y1, thickness } => {
                inside_rect(x0, y0, x1, y1)
                    && (x <= x0 + thickness + GEOM_TOL
                        || x >= x1 - thickness - GEOM_TOL
                        || y <= y0 + thickness + GEOM_TOL)
            }
            ShapeKind::HollowRectangle { x0, y0, x1, y1, thickness } => {
                inside_rect(x0, y0, x1, y1)
                    && !(x > x0 + thickness + GEOM_TOL
                        && x < x1 - thickness - GEOM_TOL
                        && y > y0 + thickness + GEOM_TOL
                        && y < y1 - thickness - GEOM_TOL)
            }
        }
    }
}

impl SourceSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.shapes.is_empty() {
            return Err(Error::InvalidArgument("source spec has no shapes".into()));
        }
        for shape in &self.shapes {
            if !(shape.strength > 0.0) || !shape.strength.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "shape strength must be positive and finite, got {}",
                    shape.strength
                )));
            }
            shape.kind.validate()?;
        }
        Ok(())
    }
}

/// Nodal coefficient vector of the spec on `mesh`: strength on nodes a
/// shape covers (boundary-inclusive), zero elsewhere.  Point shapes snap
/// to the nearest node (ties to the lower index).  Later shapes overwrite
/// earlier ones.
pub fn rasterize_source(spec: &SourceSpec, mesh: &TriMesh) -> Result<DenseVector, Error> {
    spec.validate()?;
    let coords = mesh.node_coords();
    let mut x = DenseVector::zeros(mesh.n_nodes());
    for shape in &spec.shapes {
        match shape.kind {
            ShapeKind::Point { x: px, y: py } => {
                let mut best = (0usize, f64::INFINITY);
                for (i, c) in coords.iter().enumerate() {
                    let d2 = (c[0] - px).powi(2) + (c[1] - py).powi(2);
                    if d2 < best.1 {
                        best = (i, d2);
                    }
                }
                x[best.0] = shape.strength;
            }
            _ => {
                for (i, c) in coords.iter().enumerate() {
                    if shape.kind.contains(c[0], c[1]) {
                        x[i] = shape.strength;
                    }
                }
            }
        }
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::EmptySupport);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_mesh;

    fn unit_points() -> SourceSpec {
        let ps = [(0.25, 0.25), (0.75, 0.25), (0.5, 0.5), (0.25, 0.75), (0.75, 0.75)];
        SourceSpec {
            shapes: ps
                .iter()
                .map(|&(x, y)| Shape { kind: ShapeKind::Point { x, y }, strength: 1.0 })
                .collect(),
        }
    }

    #[test]
    fn five_points_land_on_the_expected_nodes() {
        let mesh = build_mesh(17).unwrap();
        let x = rasterize_source(&unit_points(), &mesh).unwrap();
        let support: Vec<usize> =
            (0..x.len()).filter(|&i| x[i] != 0.0).collect();
        // Row-major indices of the quincunx on the 17x17 node grid.
        assert_eq!(support, vec![72, 80, 144, 208, 216]);
        for &i in &support {
            assert_eq!(x[i], 1.0);
        }
    }

    #[test]
    fn off_node_point_snaps_to_nearest() {
        let mesh = build_mesh(17).unwrap();
        let spec = SourceSpec {
            shapes: vec![Shape { kind: ShapeKind::Point { x: 0.26, y: 0.24 }, strength: 2.0 }],
        };
        let x = rasterize_source(&spec, &mesh).unwrap();
        assert_eq!(x[mesh.node_index(4, 4)], 2.0);
        assert_eq!(x.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn rectangle_covering_domain_is_all_ones() {
        let mesh = build_mesh(9).unwrap();
        let spec = SourceSpec {
            shapes: vec![Shape {
                kind: ShapeKind::Rectangle { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 },
                strength: 1.0,
            }],
        };
        let x = rasterize_source(&spec, &mesh).unwrap();
        assert!(x.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rectangle_boundary_nodes_included() {
        let mesh = build_mesh(17).unwrap();
        let spec = SourceSpec {
            shapes: vec![Shape {
                kind: ShapeKind::Rectangle { x0: 0.125, y0: 0.125, x1: 0.3125, y1: 0.3125 },
                strength: 1.0,
            }],
        };
        let x = rasterize_source(&spec, &mesh).unwrap();
        // Grid-aligned corners: nodes (2..=5) x (2..=5), 16 in total.
        let count = x.iter().filter(|&&v| v != 0.0).count();
        assert_eq!(count, 16);
        assert_eq!(x[mesh.node_index(2, 2)], 1.0);
        assert_eq!(x[mesh.node_index(5, 5)], 1.0);
        assert_eq!(x[mesh.node_index(6, 5)], 0.0);
    }

    #[test]
    fn disk_support_count_tracks_area() {
        let mesh = build_mesh(49).unwrap();
        let r = 0.2;
        let spec = SourceSpec {
            shapes: vec![Shape {
                kind: ShapeKind::Disk { cx: 0.5, cy: 0.5, r },
                strength: 1.0,
            }],
        };
        let x = rasterize_source(&spec, &mesh).unwrap();
        let count = x.iter().filter(|&&v| v != 0.0).count() as f64;
        let expected = std::f64::consts::PI * r * r * 48.0 * 48.0;
        assert!(
            (count - expected).abs() <= 0.15 * expected,
            "disk covers {count} nodes, area predicts {expected:.1}"
        );
    }

    #[test]
    fn later_shapes_overwrite() {
        let mesh = build_mesh(9).unwrap();
        let spec = SourceSpec {
            shapes: vec![
                Shape {
                    kind: ShapeKind::Rectangle { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 },
                    strength: 1.0,
                },
                Shape {
                    kind: ShapeKind::Rectangle { x0: 0.4, y0: 0.4, x1: 0.6, y1: 0.6 },
                    strength: 3.0,
                },
            ],
        };
        let x = rasterize_source(&spec, &mesh).unwrap();
        assert_eq!(x[mesh.node_index(4, 4)], 3.0);
        assert_eq!(x[mesh.node_index(0, 0)], 1.0);
    }

    #[test]
    fn horseshoe_has_an_open_cavity() {
        let mesh = build_mesh(49).unwrap();
        let spec = SourceSpec {
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
        };
        let x = rasterize_source(&spec, &mesh).unwrap();
        let at = |cx: f64, cy: f64| {
            let col = (cx * 48.0).round() as usize;
            let row = (cy * 48.0).round() as usize;
            x[mesh.node_index(col, row)]
        };
        assert_eq!(at(0.5, 0.35), 1.0, "bottom bar");
        assert_eq!(at(0.35, 0.6), 1.0, "left arm");
        assert_eq!(at(0.65, 0.6), 1.0, "right arm");
        assert_eq!(at(0.5, 0.6), 0.0, "cavity");
        assert_eq!(at(0.5, 0.75), 0.0, "above the opening");
    }

    #[test]
    fn hollow_rectangle_is_a_frame() {
        let mesh = build_mesh(49).unwrap();
        let spec = SourceSpec {
            shapes: vec![Shape {
                kind: ShapeKind::HollowRectangle {
                    x0: 0.3,
                    y0: 0.35,
                    x1: 0.7,
                    y1: 0.65,
                    thickness: 0.1,
                },
                strength: 1.0,
            }],
        };
        let x = rasterize_source(&spec, &mesh).unwrap();
        let at = |cx: f64, cy: f64| {
            let col = (cx * 48.0).round() as usize;
            let row = (cy * 48.0).round() as usize;
            x[mesh.node_index(col, row)]
        };
        assert_eq!(at(0.31, 0.5), 1.0, "left bar");
        assert_eq!(at(0.69, 0.5), 1.0, "right bar");
        assert_eq!(at(0.5, 0.36), 1.0, "bottom bar");
        assert_eq!(at(0.5, 0.64), 1.0, "top bar");
        assert_eq!(at(0.5, 0.5), 0.0, "cavity");
    }

    #[test]
    fn bad_specs_rejected() {
        let mesh = build_mesh(9).unwrap();
        let empty = SourceSpec { shapes: vec![] };
        assert!(matches!(rasterize_source(&empty, &mesh), Err(Error::InvalidArgument(_))));
        let negative = SourceSpec {
            shapes: vec![Shape { kind: ShapeKind::Point { x: 0.5, y: 0.5 }, strength: -1.0 }],
        };
        assert!(matches!(rasterize_source(&negative, &mesh), Err(Error::InvalidArgument(_))));
        let outside = SourceSpec {
            shapes: vec![Shape { kind: ShapeKind::Point { x: 1.5, y: 0.5 }, strength: 1.0 }],
        };
        assert!(matches!(rasterize_source(&outside, &mesh), Err(Error::InvalidArgument(_))));
        let thick = SourceSpec {
            shapes: vec![Shape {
                kind: ShapeKind::HollowRectangle {
                    x0: 0.3,
                    y0: 0.3,
                    x1: 0.7,
                    y1: 0.7,
                    thickness: 0.2,
                },
                strength: 1.0,
            }],
        };
        assert!(matches!(rasterize_source(&thick, &mesh), Err(Error::InvalidArgument(_))));
    }
}
