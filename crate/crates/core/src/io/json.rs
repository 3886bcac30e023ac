//! JSON scene, demo and result documents.
//!
//! Serialization goes through [`write_value`], which sorts object keys (the
//! default serde_json map is ordered) and prints every float with 17
//! significant digits, so documents are deterministic and round-trip doubles
//! exactly. Parsing walks `serde_json::Value` by hand to report schema errors
//! with a JSON-pointer-style location.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{Curve, Point};
use crate::pipeline::{GripperStatus, Keyframe, Trajectory};
use crate::scenario::{StepDemo, TaskDemo, ValidationReport};

pub const FORMAT_VERSION: u64 = 1;

fn schema(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        location: location.into(),
        message: message.into(),
    }
}

/// Render a JSON value deterministically: sorted keys, floats with 17
/// significant digits (`{:.16e}`), newline-free.
pub fn write_value(v: &Value) -> String {
    let mut out = String::new();
    render(v, &mut out);
    out
}

fn render(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                out.push_str(&format!("{:.16e}", n.as_f64().expect("finite f64")));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                render(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push(':');
                render(item, out);
            }
            out.push('}');
        }
    }
}

fn finite(x: f64, loc: &str) -> Result<Value> {
    if !x.is_finite() {
        return Err(Error::NonFinite(loc.to_string()));
    }
    Ok(json!(x))
}

fn point_value(p: Point, loc: &str) -> Result<Value> {
    Ok(Value::Array(vec![
        finite(p[0], loc)?,
        finite(p[1], loc)?,
    ]))
}

fn points_value(pts: &[Point], loc: &str) -> Result<Value> {
    pts.iter()
        .enumerate()
        .map(|(i, &p)| point_value(p, &format!("{loc}/{i}")))
        .collect::<Result<Vec<_>>>()
        .map(Value::Array)
}

// ---- parsing helpers -------------------------------------------------------

fn want_object<'a>(v: &'a Value, loc: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| schema(loc, "expected object"))
}

fn want_array<'a>(v: &'a Value, loc: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(loc, "expected array"))
}

fn want_f64(v: &Value, loc: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| schema(loc, "expected finite number"))?;
    if !x.is_finite() {
        return Err(schema(loc, "expected finite number"));
    }
    Ok(x)
}

fn want_u64(v: &Value, loc: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| schema(loc, "expected non-negative integer"))
}

fn field<'a>(map: &'a Map<String, Value>, key: &str, loc: &str) -> Result<&'a Value> {
    map.get(key)
        .ok_or_else(|| schema(format!("{loc}/{key}"), "missing field"))
}

fn parse_points(v: &Value, loc: &str) -> Result<Vec<Point>> {
    let arr = want_array(v, loc)?;
    let mut pts = Vec::with_capacity(arr.len());
    for (i, item) in arr.iter().enumerate() {
        let pair = want_array(item, &format!("{loc}/{i}"))?;
        if pair.len() != 2 {
            return Err(schema(format!("{loc}/{i}"), "expected [x, y]"));
        }
        pts.push([
            want_f64(&pair[0], &format!("{loc}/{i}/0"))?,
            want_f64(&pair[1], &format!("{loc}/{i}/1"))?,
        ]);
    }
    Ok(pts)
}

// ---- scenes ----------------------------------------------------------------

pub fn scene_to_value(curve: &Curve, role: Option<&str>) -> Result<Value> {
    let mut map = Map::new();
    map.insert("version".into(), json!(FORMAT_VERSION));
    map.insert("delta_l".into(), finite(curve.delta_l(), "delta_l")?);
    map.insert("nodes".into(), points_value(curve.nodes(), "nodes")?);
    if let Some(r) = role {
        map.insert("role".into(), json!(r));
    }
    Ok(Value::Object(map))
}

fn scene_from_value(v: &Value, loc: &str) -> Result<Curve> {
    let obj = want_object(v, loc)?;
    want_u64(field(obj, "version", loc)?, &format!("{loc}/version"))?;
    let delta_l = want_f64(field(obj, "delta_l", loc)?, &format!("{loc}/delta_l"))?;
    let nodes = parse_points(field(obj, "nodes", loc)?, &format!("{loc}/nodes"))?;
    Curve::new(nodes, delta_l)
}

pub fn save_scene(path: impl AsRef<Path>, curve: &Curve, role: Option<&str>) -> Result<()> {
    let v = scene_to_value(curve, role)?;
    fs::write(path, write_value(&v) + "\n")?;
    Ok(())
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Curve> {
    let text = fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    scene_from_value(&v, "")
}

// ---- demos -----------------------------------------------------------------

fn keyframe_to_value(k: &Keyframe, loc: &str) -> Result<Value> {
    let mut map = Map::new();
    map.insert(
        "grasp_node".into(),
        k.grasp_node.map_or(Value::Null, |n| json!(n)),
    );
    map.insert("position".into(), point_value(k.position, loc)?);
    map.insert(
        "status".into(),
        json!(match k.status {
            GripperStatus::Open => "open",
            GripperStatus::Closed => "closed",
        }),
    );
    Ok(Value::Object(map))
}

fn keyframe_from_value(v: &Value, loc: &str) -> Result<Keyframe> {
    let obj = want_object(v, loc)?;
    let pair = parse_points(
        &Value::Array(vec![field(obj, "position", loc)?.clone()]),
        &format!("{loc}/position"),
    )?;
    let status = match field(obj, "status", loc)?.as_str() {
        Some("open") => GripperStatus::Open,
        Some("closed") => GripperStatus::Closed,
        _ => return Err(schema(format!("{loc}/status"), "expected \"open\" or \"closed\"")),
    };
    let grasp_node = match field(obj, "grasp_node", loc)? {
        Value::Null => None,
        v => Some(want_u64(v, &format!("{loc}/grasp_node"))? as usize),
    };
    Ok(Keyframe {
        position: pair[0],
        status,
        grasp_node,
    })
}

pub fn demo_to_value(demo: &TaskDemo) -> Result<Value> {
    let mut steps = Vec::new();
    for (i, step) in demo.steps().iter().enumerate() {
        let loc = format!("/steps/{i}");
        let mut map = Map::new();
        map.insert("after".into(), scene_to_value(&step.after, None)?);
        map.insert("before".into(), scene_to_value(&step.before, None)?);
        map.insert(
            "keyframes".into(),
            Value::Array(
                step.trajectory
                    .keyframes
                    .iter()
                    .enumerate()
                    .map(|(j, k)| keyframe_to_value(k, &format!("{loc}/keyframes/{j}")))
                    .collect::<Result<Vec<_>>>()?,
            ),
        );
        steps.push(Value::Object(map));
    }
    let mut map = Map::new();
    map.insert("steps".into(), Value::Array(steps));
    map.insert("version".into(), json!(FORMAT_VERSION));
    Ok(Value::Object(map))
}

pub fn save_demo(path: impl AsRef<Path>, demo: &TaskDemo) -> Result<()> {
    let v = demo_to_value(demo)?;
    fs::write(path, write_value(&v) + "\n")?;
    Ok(())
}

pub fn load_demo(path: impl AsRef<Path>) -> Result<TaskDemo> {
    let text = fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    let obj = want_object(&v, "")?;
    want_u64(field(obj, "version", "")?, "/version")?;
    let steps_v = want_array(field(obj, "steps", "")?, "/steps")?;
    let mut steps = Vec::with_capacity(steps_v.len());
    for (i, sv) in steps_v.iter().enumerate() {
        let loc = format!("/steps/{i}");
        let sobj = want_object(sv, &loc)?;
        let before = scene_from_value(field(sobj, "before", &loc)?, &format!("{loc}/before"))?;
        let after = scene_from_value(field(sobj, "after", &loc)?, &format!("{loc}/after"))?;
        let kfs_v = want_array(field(sobj, "keyframes", &loc)?, &format!("{loc}/keyframes"))?;
        let keyframes = kfs_v
            .iter()
            .enumerate()
            .map(|(j, kv)| keyframe_from_value(kv, &format!("{loc}/keyframes/{j}")))
            .collect::<Result<Vec<_>>>()?;
        steps.push(StepDemo {
            before,
            after,
            trajectory: Trajectory { keyframes },
        });
    }
    TaskDemo::new(steps)
}

// ---- results ---------------------------------------------------------------

/// Registration and conservation diagnostics attached to a result document.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub sigma2: f64,
    pub objective_trace: Vec<f64>,
    pub length_error: f64,
    pub segment_deviation: f64,
}

/// Output of a warp or register run, ready for serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultDoc {
    pub mode: String,
    pub target_nodes: Vec<Point>,
    pub target_angles_deg: Vec<f64>,
    /// Row-major correspondence matrix, emitted only when requested.
    pub correspondence: Option<Vec<Vec<f64>>>,
    pub grasp_map: Vec<(usize, usize)>,
    pub keyframes: Vec<Keyframe>,
    pub diagnostics: Diagnostics,
}

pub fn result_to_value(doc: &ResultDoc) -> Result<Value> {
    let mut diag = Map::new();
    diag.insert("converged".into(), json!(doc.diagnostics.converged));
    diag.insert("iterations".into(), json!(doc.diagnostics.iterations as u64));
    diag.insert(
        "length_error".into(),
        finite(doc.diagnostics.length_error, "diagnostics/length_error")?,
    );
    diag.insert(
        "objective_trace".into(),
        Value::Array(
            doc.diagnostics
                .objective_trace
                .iter()
                .enumerate()
                .map(|(i, &x)| finite(x, &format!("diagnostics/objective_trace/{i}")))
                .collect::<Result<Vec<_>>>()?,
        ),
    );
    diag.insert(
        "segment_deviation".into(),
        finite(
            doc.diagnostics.segment_deviation,
            "diagnostics/segment_deviation",
        )?,
    );
    diag.insert("sigma2".into(), finite(doc.diagnostics.sigma2, "diagnostics/sigma2")?);

    let mut map = Map::new();
    map.insert("diagnostics".into(), Value::Object(diag));
    map.insert("mode".into(), json!(doc.mode));
    map.insert(
        "grasp_map".into(),
        Value::Array(
            doc.grasp_map
                .iter()
                .map(|&(m, n)| json!([m as u64, n as u64]))
                .collect(),
        ),
    );
    map.insert(
        "keyframes".into(),
        Value::Array(
            doc.keyframes
                .iter()
                .enumerate()
                .map(|(i, k)| keyframe_to_value(k, &format!("keyframes/{i}")))
                .collect::<Result<Vec<_>>>()?,
        ),
    );
    map.insert(
        "target_angles_deg".into(),
        Value::Array(
            doc.target_angles_deg
                .iter()
                .enumerate()
                .map(|(i, &x)| finite(x, &format!("target_angles_deg/{i}")))
                .collect::<Result<Vec<_>>>()?,
        ),
    );
    map.insert(
        "target_nodes".into(),
        points_value(&doc.target_nodes, "target_nodes")?,
    );
    if let Some(rows) = &doc.correspondence {
        map.insert(
            "correspondence".into(),
            Value::Array(
                rows.iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(j, &x)| finite(x, &format!("correspondence/{i}/{j}")))
                            .collect::<Result<Vec<_>>>()
                            .map(Value::Array)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        );
    }
    map.insert("version".into(), json!(FORMAT_VERSION));
    Ok(Value::Object(map))
}

pub fn save_result(path: impl AsRef<Path>, doc: &ResultDoc) -> Result<()> {
    let v = result_to_value(doc)?;
    fs::write(path, write_value(&v) + "\n")?;
    Ok(())
}

pub fn load_result(path: impl AsRef<Path>) -> Result<ResultDoc> {
    let text = fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    let obj = want_object(&v, "")?;
    want_u64(field(obj, "version", "")?, "/version")?;
    let mode = field(obj, "mode", "")?
        .as_str()
        .ok_or_else(|| schema("/mode", "expected string"))?
        .to_string();
    let target_nodes = parse_points(field(obj, "target_nodes", "")?, "/target_nodes")?;
    let target_angles_deg = want_array(field(obj, "target_angles_deg", "")?, "/target_angles_deg")?
        .iter()
        .enumerate()
        .map(|(i, x)| want_f64(x, &format!("/target_angles_deg/{i}")))
        .collect::<Result<Vec<_>>>()?;
    let correspondence = match obj.get("correspondence") {
        None => None,
        Some(v) => Some(
            want_array(v, "/correspondence")?
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    want_array(row, &format!("/correspondence/{i}"))?
                        .iter()
                        .enumerate()
                        .map(|(j, x)| want_f64(x, &format!("/correspondence/{i}/{j}")))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let grasp_map = want_array(field(obj, "grasp_map", "")?, "/grasp_map")?
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            let loc = format!("/grasp_map/{i}");
            let arr = want_array(pair, &loc)?;
            if arr.len() != 2 {
                return Err(schema(loc, "expected [m, n]"));
            }
            Ok((
                want_u64(&arr[0], &format!("{loc}/0"))? as usize,
                want_u64(&arr[1], &format!("{loc}/1"))? as usize,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let keyframes = want_array(field(obj, "keyframes", "")?, "/keyframes")?
        .iter()
        .enumerate()
        .map(|(i, kv)| keyframe_from_value(kv, &format!("/keyframes/{i}")))
        .collect::<Result<Vec<_>>>()?;
    let dobj = want_object(field(obj, "diagnostics", "")?, "/diagnostics")?;
    let diagnostics = Diagnostics {
        iterations: want_u64(field(dobj, "iterations", "/diagnostics")?, "/diagnostics/iterations")?
            as usize,
        converged: field(dobj, "converged", "/diagnostics")?
            .as_bool()
            .ok_or_else(|| schema("/diagnostics/converged", "expected bool"))?,
        sigma2: want_f64(field(dobj, "sigma2", "/diagnostics")?, "/diagnostics/sigma2")?,
        objective_trace: want_array(
            field(dobj, "objective_trace", "/diagnostics")?,
            "/diagnostics/objective_trace",
        )?
        .iter()
        .enumerate()
        .map(|(i, x)| want_f64(x, &format!("/diagnostics/objective_trace/{i}")))
        .collect::<Result<Vec<_>>>()?,
        length_error: want_f64(
            field(dobj, "length_error", "/diagnostics")?,
            "/diagnostics/length_error",
        )?,
        segment_deviation: want_f64(
            field(dobj, "segment_deviation", "/diagnostics")?,
            "/diagnostics/segment_deviation",
        )?,
    };
    Ok(ResultDoc {
        mode,
        target_nodes,
        target_angles_deg,
        correspondence,
        grasp_map,
        keyframes,
        diagnostics,
    })
}

// ---- validation reports ----------------------------------------------------

pub fn validation_to_value(report: &ValidationReport) -> Result<Value> {
    let mut map = Map::new();
    map.insert(
        "grasp_indices".into(),
        Value::Array(report.grasp_indices.iter().map(|&n| json!(n as u64)).collect()),
    );
    map.insert(
        "length_errors".into(),
        Value::Array(
            report
                .length_errors
                .iter()
                .enumerate()
                .map(|(i, &x)| finite(x, &format!("length_errors/{i}")))
                .collect::<Result<Vec<_>>>()?,
        ),
    );
    map.insert(
        "max_segment_deviation".into(),
        finite(report.max_segment_deviation, "max_segment_deviation")?,
    );
    map.insert("over_compression".into(), json!(report.over_compression));
    map.insert("over_stretch".into(), json!(report.over_stretch));
    map.insert("threshold".into(), finite(report.threshold, "threshold")?);
    map.insert("version".into(), json!(FORMAT_VERSION));
    Ok(Value::Object(map))
}
