//! Probe campaigns over the commutator and product estimates, the Bony
//! reconstruction check, and pinned baselines for the ratio statistics.

use std::path::{Path, PathBuf};

use ptt_core::probes::{bony_reconstruct, probe_radius, run_probe, ProbeFamily, ProbeReport, DEFAULT_CEILING};
use ptt_core::random::RandomFields;
use ptt_core::{DyadicBank, Grid};
use serde::{Deserialize, Serialize};

use crate::error::RunnerError;
use crate::verify::CheckResult;

/// Allowed relative drift of `ratio_max` from its baseline.
pub const BASELINE_TOLERANCE: f64 = 0.2;

pub fn default_baseline_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("baselines").join("probes.json")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub n: usize,
    pub cutoff: i32,
    pub seed: u64,
    pub samples: usize,
    pub ps: Vec<f64>,
    pub ceiling: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            n: 32,
            cutoff: 2,
            seed: 0,
            samples: 100,
            ps: vec![2.0, 3.0, 4.0],
            ceiling: DEFAULT_CEILING,
        }
    }
}

/// Both families at every exponent, commutator first.
pub fn run_campaign(opts: &ProbeOptions) -> Result<Vec<ProbeReport>, RunnerError> {
    let g = Grid::new(opts.n)?;
    let bank = DyadicBank::new(&g, opts.cutoff)?;
    let mut out = Vec::new();
    for fam in [ProbeFamily::Commutator, ProbeFamily::Product] {
        out.extend(run_probe(fam, &bank, opts.seed, opts.samples, &opts.ps, opts.ceiling)?);
    }
    Ok(out)
}

/// Largest Bony reconstruction defect over `count` seeded pairs.
pub fn bony_defect(n: usize, seed: u64, count: usize) -> Result<f64, RunnerError> {
    let g = Grid::new(n)?;
    let bank = DyadicBank::new(&g, 0)?;
    let radius = probe_radius(&g);
    let mut worst = 0.0f64;
    for i in 0..count {
        let mut rf = RandomFields::new(seed.wrapping_mul(1_000_003).wrapping_add(i as u64)).with_radius(radius);
        let u = rf.scalar(&g);
        let v = rf.scalar(&g);
        worst = worst.max(bony_reconstruct(&bank, &u, &v));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub estimate_id: String,
    pub p: f64,
    pub seed: u64,
    pub n: usize,
    pub samples: usize,
    pub ratio_max: f64,
}

impl BaselineEntry {
    fn matches(&self, r: &ProbeReport) -> bool {
        self.estimate_id == r.estimate_id && self.p == r.p && self.seed == r.seed && self.n == r.n && self.samples == r.sample_count
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub entries: Vec<BaselineEntry>,
}

impl Baselines {
    pub fn load(path: &Path) -> Result<Option<Self>, RunnerError> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    pub fn save(&self, path: &Path) -> Result<(), RunnerError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn find(&self, r: &ProbeReport) -> Option<&BaselineEntry> {
        self.entries.iter().find(|e| e.matches(r))
    }
}

fn entry_of(r: &ProbeReport) -> BaselineEntry {
    BaselineEntry {
        estimate_id: r.estimate_id.clone(),
        p: r.p,
        seed: r.seed,
        n: r.n,
        samples: r.sample_count,
        ratio_max: r.ratio_max,
    }
}

/// Compares reports with pinned baselines. Reports without a pinned entry
/// are recorded into the file (created when absent) and pass.
pub fn compare_with_baseline(reports: &[ProbeReport], path: &Path) -> Result<Vec<CheckResult>, RunnerError> {
    const S: &str = "probes";
    let mut base = Baselines::load(path)?.unwrap_or_default();
    let mut recorded = 0;
    let mut out = Vec::new();
    for r in reports {
        let name = format!("{}_p{}_baseline", r.estimate_id, r.p);
        match base.find(r) {
            Some(e) => {
                let drift = (r.ratio_max / e.ratio_max - 1.0).abs();
                out.push(CheckResult::at_most(
                    S,
                    &name,
                    if drift.is_finite() { drift } else { f64::INFINITY },
                    BASELINE_TOLERANCE,
                    format!("ratio_max {:.6e} against pinned {:.6e}", r.ratio_max, e.ratio_max),
                ));
            }
            None => {
                base.entries.push(entry_of(r));
                recorded += 1;
                out.push(CheckResult::at_most(
                    S,
                    &name,
                    0.0,
                    BASELINE_TOLERANCE,
                    format!("recorded ratio_max {:.6e} as new baseline", r.ratio_max),
                ));
            }
        }
    }
    if recorded > 0 {
        base.save(path)?;
    }
    Ok(out)
}

/// Bony reconstruction, ceiling checks for every report and, when a
/// baseline path is given, drift against the pinned values.
pub fn probe_checks(opts: &ProbeOptions, baseline: Option<&Path>) -> Result<Vec<CheckResult>, RunnerError> {
    const S: &str = "probes";
    let mut out = vec![CheckResult::at_most(
        S,
        "bony_reconstruction",
        bony_defect(opts.n, opts.seed, 50)?,
        1e-8,
        format!("max over 50 pairs at n = {}", opts.n),
    )];
    let reports = run_campaign(opts)?;
    for r in &reports {
        let value = if r.ratio_max.is_finite() { r.ratio_max } else { f64::INFINITY };
        let mut c = CheckResult::at_most(
            S,
            &format!("{}_p{}_bounded", r.estimate_id, r.p),
            value,
            r.ceiling,
            format!(
                "{} samples, {} skipped, median {:.3e}",
                r.sample_count, r.skipped, r.ratio_median
            ),
        );
        c.pass = r.pass;
        out.push(c);
    }
    if let Some(path) = baseline {
        out.extend(compare_with_baseline(&reports, path)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: &str, max: f64) -> ProbeReport {
        ProbeReport {
            estimate_id: id.into(),
            p: 2.0,
            seed: 1,
            n: 16,
            sample_count: 4,
            skipped: 0,
            ratio_min: max / 2.0,
            ratio_median: max / 1.5,
            ratio_max: max,
            ceiling: DEFAULT_CEILING,
            pass: true,
        }
    }

    #[test]
    fn baseline_records_then_compares() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.json");
        let first = compare_with_baseline(&[report("product_1", 0.5)], &path).unwrap();
        assert!(first[0].pass && first[0].detail.contains("recorded"));
        assert!(path.exists());
        let same = compare_with_baseline(&[report("product_1", 0.55)], &path).unwrap();
        assert!(same[0].pass);
        let drifted = compare_with_baseline(&[report("product_1", 0.7)], &path).unwrap();
        assert!(!drifted[0].pass);
        let base = Baselines::load(&path).unwrap().unwrap();
        assert_eq!(base.entries.len(), 1);
    }

    #[test]
    fn small_campaign_is_finite() {
        let opts = ProbeOptions {
            n: 16,
            cutoff: 0,
            samples: 3,
            ps: vec![2.0],
            ..ProbeOptions::default()
        };
        let reports = run_campaign(&opts).unwrap();
        assert_eq!(reports.len(), 8);
        for r in &reports {
            assert!(r.ratio_max.is_finite(), "{r:?}");
        }
    }
}
