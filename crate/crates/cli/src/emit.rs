//! Report emission as aligned text, CSV or JSON.

use std::io::Write;

use anyhow::Result;
use clap::ValueEnum;
use medboot::simlab::{Mechanism, RejectionKind, SensitivityRow, StudyConfig, StudyMeta, StudyReport, StudyRow};
use medboot::{BootstrapReport, Dataset, MissingPattern, Param};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// A report with one row per line of output.
trait Tabular: Serialize {
    fn title(&self) -> String;
    fn header(&self) -> Vec<&'static str>;
    /// Text cells followed by numeric cells, per row.
    fn rows(&self) -> Vec<(Vec<String>, Vec<f64>)>;

    fn render(&self, w: &mut dyn Write, format: Format) -> Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *w, self)?;
                writeln!(w)?;
            }
            Format::Csv => {
                let mut csv = csv::Writer::from_writer(w);
                csv.write_record(self.header())?;
                for (text, nums) in self.rows() {
                    csv.write_record(text.into_iter().chain(nums.iter().map(|v| v.to_string())))?;
                }
                csv.flush()?;
            }
            Format::Table => {
                let cells: Vec<Vec<String>> = self
                    .rows()
                    .into_iter()
                    .map(|(text, nums)| text.into_iter().chain(nums.iter().map(|v| format!("{v:.5}"))).collect())
                    .collect();
                let header = self.header();
                let widths: Vec<usize> = (0..header.len())
                    .map(|j| cells.iter().map(|r| r[j].chars().count()).chain([header[j].len()]).max().unwrap_or(0))
                    .collect();
                writeln!(w, "{}", self.title())?;
                let line = |w: &mut dyn Write, row: &[&str]| -> std::io::Result<()> {
                    let mut parts = Vec::with_capacity(row.len());
                    for (j, cell) in row.iter().enumerate() {
                        // first column left-aligned, the rest right-aligned
                        parts.push(if j == 0 {
                            format!("{cell:<width$}", width = widths[j])
                        } else {
                            format!("{cell:>width$}", width = widths[j])
                        });
                    }
                    writeln!(w, "{}", parts.join("  ").trim_end())
                };
                line(w, &header)?;
                for r in &cells {
                    line(w, &r.iter().map(String::as_str).collect::<Vec<_>>())?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub param: Param,
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCount {
    /// `O` observed, `X` missing, for X, M, Y then auxiliaries.
    pub pattern: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisMeta {
    pub n: usize,
    pub x: String,
    pub m: String,
    pub y: String,
    pub aux: Vec<String>,
    pub patterns: Vec<PatternCount>,
    pub nimpute: usize,
    pub nboot: usize,
    pub nboot_effective: usize,
    pub retries: usize,
    pub level: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub params: Vec<AnalysisRow>,
    pub meta: AnalysisMeta,
}

impl AnalysisOutput {
    pub fn new(ds: &Dataset, patterns: &[MissingPattern], rep: &BootstrapReport, nimpute: usize, seed: u64) -> Self {
        let params = Param::REPORT_ORDER
            .iter()
            .map(|&p| {
                let (ci_lo, ci_hi) = rep.interval_of(p);
                AnalysisRow { param: p, estimate: rep.point.get(p), se: rep.se_of(p), ci_lo, ci_hi }
            })
            .collect();
        let aux = ds.bound_columns().skip(3).map(|c| c.name.clone()).collect();
        let meta = AnalysisMeta {
            n: ds.n_rows(),
            x: ds.x().name.clone(),
            m: ds.m().name.clone(),
            y: ds.y().name.clone(),
            aux,
            patterns: patterns.iter().map(|p| PatternCount { pattern: p.code(), count: p.count }).collect(),
            nimpute,
            nboot: rep.b_requested,
            nboot_effective: rep.b_effective,
            retries: rep.retries,
            level: rep.level,
            seed,
        };
        Self { params, meta }
    }

    pub fn render(&self, w: &mut dyn Write, format: Format) -> Result<()> {
        Tabular::render(self, w, format)
    }
}

impl Tabular for AnalysisOutput {
    fn title(&self) -> String {
        let m = &self.meta;
        let aux = if m.aux.is_empty() { "none".to_string() } else { m.aux.join(", ") };
        format!(
            "X = {}, M = {}, Y = {}, auxiliaries: {aux}\nN = {}, {} imputations, {} of {} bootstrap replicates, {}% BC intervals",
            m.x,
            m.m,
            m.y,
            m.n,
            m.nimpute,
            m.nboot_effective,
            m.nboot,
            m.level * 100.0
        )
    }

    fn header(&self) -> Vec<&'static str> {
        vec!["param", "estimate", "se", "ci_lo", "ci_hi"]
    }

    fn rows(&self) -> Vec<(Vec<String>, Vec<f64>)> {
        self.params.iter().map(|r| (vec![r.param.to_string()], vec![r.estimate, r.se, r.ci_lo, r.ci_hi])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub params: Vec<StudyRow>,
    pub meta: StudyMeta,
}

impl From<StudyReport> for SimulationOutput {
    fn from(r: StudyReport) -> Self {
        Self { params: r.rows, meta: r.meta }
    }
}

impl SimulationOutput {
    pub fn render(&self, w: &mut dyn Write, format: Format) -> Result<()> {
        Tabular::render(self, w, format)
    }
}

impl Tabular for SimulationOutput {
    fn title(&self) -> String {
        let m = &self.meta;
        format!(
            "{} {}% missing, {} auxiliaries, N = {}, {} replications ({} failed), B = {}, K = {}",
            m.mechanism.to_string().to_uppercase(),
            m.proportion * 100.0,
            if m.use_aux { "with" } else { "without" },
            m.n,
            m.reps,
            m.reps_failed,
            m.n_boot,
            m.n_imputations
        )
    }

    fn header(&self) -> Vec<&'static str> {
        vec!["param", "kind", "truth", "bias", "coverage", "rejection"]
    }

    fn rows(&self) -> Vec<(Vec<String>, Vec<f64>)> {
        self.params
            .iter()
            .map(|r| {
                let kind = match r.kind {
                    RejectionKind::Power => "power",
                    RejectionKind::TypeI => "type_i",
                };
                (vec![r.param.to_string(), kind.to_string()], vec![r.truth, r.bias, r.coverage, r.rejection_rate])
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMeta {
    pub mechanism: Mechanism,
    pub proportion: f64,
    pub use_aux: bool,
    pub n: usize,
    pub nboot: usize,
    pub k_ref: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityOutput {
    pub params: Vec<SensitivityRow>,
    pub meta: SensitivityMeta,
}

impl SensitivityOutput {
    pub fn new(cfg: &StudyConfig, k_ref: usize, rows: Vec<SensitivityRow>) -> Self {
        let meta = SensitivityMeta {
            mechanism: cfg.mechanism,
            proportion: cfg.proportion,
            use_aux: cfg.use_aux,
            n: cfg.n,
            nboot: cfg.n_boot,
            k_ref,
            seed: cfg.seed,
        };
        Self { params: rows, meta }
    }

    pub fn render(&self, w: &mut dyn Write, format: Format) -> Result<()> {
        Tabular::render(self, w, format)
    }
}

impl Tabular for SensitivityOutput {
    fn title(&self) -> String {
        let m = &self.meta;
        format!(
            "Deviance of ab relative to K = {}: {} {}% missing, {} auxiliaries, N = {}, B = {}",
            m.k_ref,
            m.mechanism.to_string().to_uppercase(),
            m.proportion * 100.0,
            if m.use_aux { "with" } else { "without" },
            m.n,
            m.nboot
        )
    }

    fn header(&self) -> Vec<&'static str> {
        vec!["k", "estimate", "se", "estimate_deviance", "se_deviance"]
    }

    fn rows(&self) -> Vec<(Vec<String>, Vec<f64>)> {
        self.params
            .iter()
            .map(|r| (vec![r.k.to_string()], vec![r.estimate, r.se, r.estimate_deviance, r.se_deviance]))
            .collect()
    }
}
