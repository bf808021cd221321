//! A constructed CNO on disk: `bundle.json` plus the woven hypernetwork in `weave.bin`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::sha256_hex;
use crate::cno::{CnoModel, TimeGrid};
use crate::error::{Error, Result};
use crate::net::NetSpec;
use crate::spaces::SchauderSpace;
use crate::weave::{aspect_ratio, horizon_capacity, hyper_report, HyperReport, WeaveModel};

pub const BUNDLE_SCHEMA: u32 = 1;
pub const BUNDLE_FILE: &str = "bundle.json";
pub const WEAVE_FILE: &str = "weave.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleHeader {
    pub schema_version: u32,
    pub grid: TimeGrid,
    pub memory: usize,
    pub initial: Vec<f64>,
    pub input_spaces: Vec<SchauderSpace>,
    pub output_spaces: Vec<SchauderSpace>,
    pub window_seeds: Vec<u64>,
    pub synced: NetSpec,
    pub weave_file: String,
    pub weave_sha256: String,
    pub weave_bytes: u64,
}

/// Serialized `(bundle.json, weave.bin)` contents.
pub fn encode_bundle(model: &CnoModel) -> Result<(Vec<u8>, Vec<u8>)> {
    let weave = model.weave.to_bytes();
    let header = BundleHeader {
        schema_version: BUNDLE_SCHEMA,
        grid: model.grid.clone(),
        memory: model.memory,
        initial: model.initial.clone(),
        input_spaces: model.input_spaces.clone(),
        output_spaces: model.output_spaces.clone(),
        window_seeds: model.window_seeds.clone(),
        synced: model.synced.clone(),
        weave_file: WEAVE_FILE.into(),
        weave_sha256: sha256_hex(&weave),
        weave_bytes: weave.len() as u64,
    };
    let mut json = serde_json::to_string_pretty(&header).map_err(|e| Error::Format(e.to_string()))?;
    json.push('\n');
    Ok((json.into_bytes(), weave))
}

fn integrity(path: &Path, detail: impl Into<String>) -> Error {
    Error::Integrity { path: path.display().to_string(), detail: detail.into() }
}

pub fn load_bundle(dir: &Path) -> Result<CnoModel> {
    let hpath = dir.join(BUNDLE_FILE);
    let text = std::fs::read_to_string(&hpath).map_err(|e| integrity(&hpath, e.to_string()))?;
    let h: BundleHeader = serde_json::from_str(&text).map_err(|e| integrity(&hpath, e.to_string()))?;
    if h.schema_version != BUNDLE_SCHEMA {
        return Err(integrity(&hpath, format!("unknown bundle schema version {}", h.schema_version)));
    }
    let wpath = dir.join(&h.weave_file);
    let bytes = std::fs::read(&wpath).map_err(|e| integrity(&wpath, e.to_string()))?;
    let got = sha256_hex(&bytes);
    if got != h.weave_sha256 {
        return Err(integrity(&wpath, format!("sha256 {got} does not match recorded {}", h.weave_sha256)));
    }
    let weave = WeaveModel::from_bytes(&bytes).map_err(|e| integrity(&wpath, e.to_string()))?;
    if weave.p != h.synced.param_count() {
        return Err(integrity(&wpath, format!("weave carries {} parameters, filter spec needs {}", weave.p, h.synced.param_count())));
    }
    if h.output_spaces.len() != weave.horizon() || h.input_spaces.len() != weave.horizon() {
        return Err(integrity(&hpath, "space lists do not match the woven horizon"));
    }
    Ok(CnoModel {
        weave,
        synced: h.synced,
        grid: h.grid,
        memory: h.memory,
        initial: h.initial,
        input_spaces: h.input_spaces,
        output_spaces: h.output_spaces,
        window_seeds: h.window_seeds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingStats {
    pub points: usize,
    pub min_separation: f64,
    pub aspect_ratio: Option<f64>,
    /// `√5 R / δ`
    pub aspect_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InspectSummary {
    pub schema_version: u32,
    pub windows: usize,
    pub memory: usize,
    pub synced_dims: Vec<usize>,
    /// Recounted from `synced_dims`.
    pub param_count: usize,
    pub q: usize,
    pub delta: f64,
    pub capacity: usize,
    pub m_t: f64,
    pub anchor_residual: f64,
    pub packing: PackingStats,
    pub hyper: HyperReport,
}

pub fn inspect_model(model: &CnoModel) -> Result<InspectSummary> {
    let w = &model.weave;
    let pts = &w.packing.points;
    let aspect = if pts.len() >= 2 { Some(aspect_ratio(pts)?) } else { None };
    let p = model.synced.param_count();
    Ok(InspectSummary {
        schema_version: BUNDLE_SCHEMA,
        windows: w.horizon(),
        memory: model.memory,
        synced_dims: model.synced.dims().to_vec(),
        param_count: p,
        q: w.q,
        delta: w.delta,
        capacity: horizon_capacity(w.delta, w.q),
        m_t: w.m_t,
        anchor_residual: w.anchor_residual,
        packing: PackingStats {
            points: pts.len(),
            min_separation: w.packing.min_separation(),
            aspect_ratio: aspect,
            aspect_bound: 5f64.sqrt() * w.radius / w.delta,
        },
        hyper: hyper_report(p, w.q, w.delta, w.horizon())?.with_measured(w),
    })
}

impl InspectSummary {
    pub fn render(&self) -> String {
        let t = &self.hyper;
        let mut s = String::new();
        s += &format!("windows            {}\n", self.windows);
        s += &format!("memory             {}\n", self.memory);
        s += &format!("filter dims        {:?}\n", self.synced_dims);
        s += &format!("P([d*])            {}\n", self.param_count);
        s += &format!("Q                  {}\n", self.q);
        s += &format!("delta              {}\n", self.delta);
        s += &format!("capacity I         {}\n", self.capacity);
        s += &format!("M_T                {:e}\n", self.m_t);
        s += &format!("anchor residual    {:e}\n", self.anchor_residual);
        s += &format!("packing            {} points, min separation {:.6}", self.packing.points, self.packing.min_separation);
        match self.packing.aspect_ratio {
            Some(a) => s += &format!(", aspect ratio {:.4} (bound {:.4})\n", a, self.packing.aspect_bound),
            None => s += "\n",
        }
        s += &format!("width bound        {}\n", t.width_bound);
        if let Some(m) = &t.measured {
            s += &format!("measured hyper     width {}, depth {}, params {}\n", m.width, m.depth, m.params);
        }
        s
    }
}
