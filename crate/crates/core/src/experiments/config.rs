//! Flat `key = value` configuration files.
//!
//! Lines whose first non-blank character is `#` are comments.  Scalar keys
//! override run defaults; `shape.N.*` groups define a source geometry.  The
//! box bound `s` accepts `inf`/`infinity` for the unbounded case.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::admm::ObjectiveMode;
use crate::error::Error;
use crate::experiments::source::{Shape, ShapeKind, SourceSpec};

/// Parsed configuration; every field is optional and `None` means "keep
/// the default".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    pub s: Option<f64>,
    pub rank: Option<usize>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub noise_level: Option<f64>,
    pub threshold_frac: Option<f64>,
    pub mode: Option<ObjectiveMode>,
    pub unit_weights: Option<bool>,
    pub state_grid: Option<usize>,
    pub source_grid: Option<usize>,
    pub data_state_grid: Option<usize>,
    pub data_source_grid: Option<usize>,
    pub delta: Option<f64>,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub s_count: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub shapes: Option<SourceSpec>,
}

pub fn load_config(path: &Path) -> Result<ConfigFile, Error> {
    parse_config(&fs::read_to_string(path)?)
}

struct RawShape {
    line_no: usize,
    fields: BTreeMap<String, (f64, usize)>,
    kind: Option<(String, usize)>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile, Error> {
    let mut cfg = ConfigFile::default();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut shapes: BTreeMap<usize, RawShape> = BTreeMap::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Format(format!("line {line_no}: expected `key = value`, got {line:?}"))
        })?;
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return Err(Error::Format(format!("line {line_no}: empty value for {key:?}")));
        }
        if let Some(prev) = seen.insert(key.to_string(), line_no) {
            return Err(Error::Format(format!(
                "line {line_no}: duplicate key {key:?} (first set on line {prev})"
            )));
        }

        if let Some(rest) = key.strip_prefix("shape.") {
            let (index, field) = rest.split_once('.').ok_or_else(|| {
                Error::Format(format!(
                    "line {line_no}: shape keys look like shape.N.field, got {key:?}"
                ))
            })?;
            let index: usize = index.parse().map_err(|_| {
                Error::Format(format!("line {line_no}: bad shape index in {key:?}"))
            })?;
            let entry = shapes.entry(index).or_insert_with(|| RawShape {
                line_no,
                fields: BTreeMap::new(),
                kind: None,
            });
            if field == "kind" {
                entry.kind = Some((value.to_string(), line_no));
            } else {
                let v = parse_number(value, line_no, false)?;
                entry.fields.insert(field.to_string(), (v, line_no));
            }
            continue;
        }

        match key {
            "epsilon" => cfg.epsilon = Some(parse_number(value, line_no, false)?),
            "alpha" => cfg.alpha = Some(parse_number(value, line_no, false)?),
            "s" => cfg.s = Some(parse_number(value, line_no, true)?),
            "rank" => cfg.rank = Some(parse_unsigned(value, line_no)?),
            "iters" => cfg.iters = Some(parse_unsigned(value, line_no)?),
            "seed" => cfg.seed = Some(parse_unsigned(value, line_no)? as u64),
            "noise_level" => cfg.noise_level = Some(parse_number(value, line_no, false)?),
            "threshold_frac" => cfg.threshold_frac = Some(parse_number(value, line_no, false)?),
            "mode" => {
                cfg.mode = Some(match value {
                    "projected" => ObjectiveMode::Projected,
                    "direct" => ObjectiveMode::Direct,
                    other => {
                        return Err(Error::Format(format!(
                            "line {line_no}: mode is `projected` or `direct`, got {other:?}"
                        )))
                    }
                })
            }
            "unit_weights" => cfg.unit_weights = Some(parse_bool(value, line_no)?),
            "state_grid" => cfg.state_grid = Some(parse_unsigned(value, line_no)?),
            "source_grid" => cfg.source_grid = Some(parse_unsigned(value, line_no)?),
            "data_state_grid" => cfg.data_state_grid = Some(parse_unsigned(value, line_no)?),
            "data_source_grid" => cfg.data_source_grid = Some(parse_unsigned(value, line_no)?),
            "delta" => cfg.delta = Some(parse_number(value, line_no, false)?),
            "s_min" => cfg.s_min = Some(parse_number(value, line_no, false)?),
            "s_max" => cfg.s_max = Some(parse_number(value, line_no, true)?),
            "s_count" => cfg.s_count = Some(parse_unsigned(value, line_no)?),
            "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Format(format!("line {line_no}: unknown key {other:?}")))
            }
        }
    }

    if !shapes.is_empty() {
        let mut list = Vec::with_capacity(shapes.len());
        for (index, raw) in shapes {
            list.push(build_shape(index, raw)?);
        }
        cfg.shapes = Some(SourceSpec { shapes: list });
    }
    Ok(cfg)
}

fn parse_number(value: &str, line_no: usize, allow_inf: bool) -> Result<f64, Error> {
    if allow_inf {
        let lower = value.to_ascii_lowercase();
        if lower == "inf" || lower == "infinity" {
            return Ok(f64::INFINITY);
        }
    }
    let v: f64 = value
        .parse()
        .map_err(|_| Error::Format(format!("line {line_no}: expected a number, got {value:?}")))?;
    if !v.is_finite() {
        return Err(Error::Format(format!("line {line_no}: {value:?} is not finite")));
    }
    Ok(v)
}

fn parse_unsigned(value: &str, line_no: usize) -> Result<usize, Error> {
    value.parse().map_err(|_| {
        Error::Format(format!("line {line_no}: expected a non-negative integer, got {value:?}"))
    })
}

fn parse_bool(value: &str, line_no: usize) -> Result<bool, Error> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Format(format!("line {line_no}: expected a boolean, got {other:?}"))),
    }
}

fn build_shape(index: usize, raw: RawShape) -> Result<Shape, Error> {
    let (kind_name, _) = raw.kind.as_ref().ok_or_else(|| {
        Error::Format(format!(
            "line {}: shape.{index} never sets shape.{index}.kind",
            raw.line_no
        ))
    })?;
    let mut fields = raw.fields;
    let strength = fields.remove("strength").map(|(v, _)| v).unwrap_or(1.0);
    let mut take = |name: &str| -> Result<f64, Error> {
        fields.remove(name).map(|(v, _)| v).ok_or_else(|| {
            Error::Format(format!(
                "line {}: shape.{index} ({kind_name}) is missing shape.{index}.{name}",
                raw.line_no
            ))
        })
    };
    let kind = match kind_name.as_str() {
        "point" => ShapeKind::Point { x: take("x")?, y: take("y")? },
        "rectangle" => ShapeKind::Rectangle {
            x0: take("x0")?,
            y0: take("y0")?,
            x1: take("x1")?,
            y1: take("y1")?,
        },
        "disk" => ShapeKind::Disk { cx: take("cx")?, cy: take("cy")?, r: take("r")? },
        "horseshoe" => ShapeKind::Horseshoe {
            x0: take("x0")?,
            y0: take("y0")?,
            x1: take("x1")?,
            y1: take("y1")?,
            thickness: take("thickness")?,
        },
        "hollow_rectangle" => ShapeKind::HollowRectangle {
            x0: take("x0")?,
            y0: take("y0")?,
            x1: take("x1")?,
            y1: take("y1")?,
            thickness: take("thickness")?,
        },
        other => {
            return Err(Error::Format(format!(
                "line {}: unknown shape kind {other:?} for shape.{index}",
                raw.line_no
            )))
        }
    };
    if let Some((name, (_, line_no))) = fields.into_iter().next() {
        return Err(Error::Format(format!(
            "line {line_no}: shape.{index}.{name} does not apply to kind {kind_name:?}"
        )));
    }
    Ok(Shape { kind, strength })
}
