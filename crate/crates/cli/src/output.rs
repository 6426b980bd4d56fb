//! File emission. Each run writes into `output_dir/<command>-<run id>/`, where
//! the run id is a hash of the canonical header, so identical configurations
//! land in the same directory and produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use spdense_core::certify::SweepReport;
use spdense_core::{separation_report, symmetry_defect, DensityCertificate, LyapunovEstimate, VERSION};

pub const TOOL: &str = "spdense";

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct Header {
    pub command: String,
    pub config: Map<String, Value>,
}

impl Header {
    pub fn new(command: &str, config: Map<String, Value>) -> Self {
        Self {
            command: command.to_string(),
            config,
        }
    }

    fn canonical(&self) -> Value {
        json!({
            "tool": TOOL,
            "version": VERSION,
            "command": self.command,
            "config": self.config,
        })
    }

    pub fn run_id(&self) -> String {
        // serde_json maps are key-sorted, so this string is canonical.
        let digest = Sha256::digest(self.canonical().to_string().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.canonical();
        v["run_id"] = Value::String(self.run_id());
        v
    }

    fn csv_lines(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# tool = {TOOL}\n# version = {VERSION}\n"));
        s.push_str(&format!("# command = {}\n# run_id = {}\n", self.command, self.run_id()));
        for (k, v) in &self.config {
            let v = match v {
                Value::Number(n) => n
                    .as_f64()
                    .filter(|_| n.is_f64())
                    .map(fmt_f64)
                    .unwrap_or_else(|| n.to_string()),
                Value::Array(xs) => xs
                    .iter()
                    .map(|x| x.as_f64().map(fmt_f64).unwrap_or_else(|| x.to_string()))
                    .collect::<Vec<_>>()
                    .join(";"),
                other => other.to_string(),
            };
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s
    }

    pub fn run_dir(&self, output_dir: &Path) -> PathBuf {
        output_dir.join(format!("{}-{}", self.command, self.run_id()))
    }
}

/// A table with a `#` header block followed by one column-name row.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn render(&self, header: &Header) -> Result<Vec<u8>> {
        let mut out = header.csv_lines().into_bytes();
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Ok(out)
    }
}

pub fn json_document<T: Serialize>(header: &Header, key: &str, body: &T) -> Result<Vec<u8>> {
    let mut doc = Map::new();
    doc.insert("header".into(), header.to_json());
    doc.insert(key.into(), serde_json::to_value(body)?);
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(doc))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(path)
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn certificate_table(certs: &[DensityCertificate]) -> Table {
    let mut t = Table::new(vec![
        "energy",
        "certified",
        "rank",
        "rank_margin",
        "closure_depth",
        "det_v1",
        "det_v2",
        "det_v1_rel",
        "det_v2_rel",
        "explicit_independent",
        "m_00",
        "m_10",
        "m_01",
        "m_11",
        "dist_00",
        "dist_10",
        "dist_01",
        "dist_11",
        "implication",
        "diagnostic",
    ]);
    for c in certs {
        let mut row = vec![
            fmt_f64(c.e),
            c.certified.to_string(),
            c.rank.to_string(),
            fmt_f64(c.rank_margin),
            c.closure_depth.to_string(),
            fmt_f64(c.det_v1),
            fmt_f64(c.det_v2),
            fmt_f64(c.det_v1_rel),
            fmt_f64(c.det_v2_rel),
            c.explicit_independent.to_string(),
        ];
        row.extend(c.exponents().iter().map(u64::to_string));
        row.extend(c.dists.iter().map(|d| opt_f64(*d)));
        row.push(format!("{:?}", c.implication));
        row.push(c.diagnostic.clone().unwrap_or_default());
        t.rows.push(row);
    }
    t
}

/// Plot-ready sweep table: grid rows first, then refinement evaluations.
pub fn sweep_table(report: &SweepReport) -> Table {
    let mut t = Table::new(vec![
        "energy",
        "rank",
        "rank_margin",
        "det_v1",
        "det_v2",
        "certified",
        "m_00",
        "m_10",
        "m_01",
        "m_11",
        "source",
    ]);
    let tagged = report
        .certificates
        .iter()
        .map(|c| (c, "grid"))
        .chain(report.refinements.iter().map(|c| (c, "refine")));
    for (c, source) in tagged {
        let mut row = vec![
            fmt_f64(c.e),
            c.rank.to_string(),
            fmt_f64(c.rank_margin),
            fmt_f64(c.det_v1),
            fmt_f64(c.det_v2),
            c.certified.to_string(),
        ];
        row.extend(c.exponents().iter().map(u64::to_string));
        row.push(source.to_string());
        t.rows.push(row);
    }
    t
}

pub fn interval_table(report: &SweepReport) -> Table {
    let mut t = Table::new(vec!["kind", "e_lo", "e_hi", "min_rank", "rank_margin", "grid_points"]);
    for s in &report.suspected_exceptional {
        let pts = s.grid_points.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        t.rows.push(vec![
            "suspected".into(),
            fmt_f64(s.e_lo),
            fmt_f64(s.e_hi),
            s.min_rank.to_string(),
            String::new(),
            pts,
        ]);
    }
    for m in &report.near_exceptional {
        t.rows.push(vec![
            "near".into(),
            fmt_f64(m.e),
            fmt_f64(m.e),
            String::new(),
            fmt_f64(m.rank_margin),
            m.grid_index.to_string(),
        ]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovRecord {
    pub estimate: LyapunovEstimate,
    pub symmetry_defect_14: f64,
    pub symmetry_defect_23: f64,
    pub gap12: f64,
    pub positivity_margin: f64,
    pub significant: bool,
}

impl LyapunovRecord {
    pub fn new(estimate: LyapunovEstimate) -> Self {
        let (d14, d23) = symmetry_defect(&estimate);
        let sep = separation_report(&estimate);
        Self {
            estimate,
            symmetry_defect_14: d14,
            symmetry_defect_23: d23,
            gap12: sep.gap12,
            positivity_margin: sep.positivity_margin,
            significant: sep.significant,
        }
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(vec![
            "energy",
            "gamma1",
            "gamma2",
            "gamma3",
            "gamma4",
            "stderr1",
            "stderr2",
            "stderr3",
            "stderr4",
            "symmetry_defect_14",
            "symmetry_defect_23",
            "gap12",
            "significant",
        ]);
        let e = &self.estimate;
        let mut row = vec![fmt_f64(e.e)];
        row.extend(e.gammas.iter().map(|x| fmt_f64(*x)));
        row.extend(e.stderrs.iter().map(|x| fmt_f64(*x)));
        row.push(fmt_f64(self.symmetry_defect_14));
        row.push(fmt_f64(self.symmetry_defect_23));
        row.push(fmt_f64(self.gap12));
        row.push(self.significant.to_string());
        t.rows.push(row);
        t
    }
}
