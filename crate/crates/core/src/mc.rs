//! Seeded Monte Carlo experiments.
//!
//! Replicate `r` of a run with master seed `s` draws everything from
//! `replicate_seed(s, r)`, so results do not depend on scheduling.

use crate::analytic::csv_field;
use crate::configs::{poisson, replicate_seed, rng_for};
use crate::error::{domain, Error, Result};
use crate::metrics::{normalized_length, stretch_with, PairFilter, StretchMode, StretchOptions, DEFAULT_MARGIN};
use crate::nets::BuilderSpec;
use crate::Rect;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const RESULTS_CSV_HEADER: &str = "estimator,params_json,mean,se,n,seed,schema_version";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub estimator: String,
    pub params: BTreeMap<String, Value>,
    pub replicates: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(replicates)`.
    pub se: f64,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub wall_time_s: f64,
}

impl ExperimentResult {
    fn from_values(estimator: &str, params: BTreeMap<String, Value>, master_seed: u64, values: Vec<f64>, start: Instant) -> Self {
        let (mean, se) = mean_se(&values);
        Self {
            estimator: estimator.to_string(),
            params,
            replicates: values.len(),
            mean,
            se,
            master_seed,
            seeds: (0..values.len() as u64).map(|r| replicate_seed(master_seed, r)).collect(),
            values,
            wall_time_s: start.elapsed().as_secs_f64(),
        }
    }

    pub fn csv_row(&self) -> String {
        let params = serde_json::to_string(&self.params).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            csv_field(&self.estimator),
            csv_field(&params),
            self.mean,
            self.se,
            self.replicates,
            self.master_seed,
            RESULTS_SCHEMA_VERSION
        )
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Appends results to `path`: JSON lines when it ends in `.jsonl` or `.json`,
/// CSV (with a header for a new file) otherwise.
pub fn append_results(path: &Path, results: &[ExperimentResult]) -> Result<()> {
    let json = matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "json"));
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut out = String::new();
    if json {
        for r in results {
            let mut v = serde_json::to_value(r)?;
            v["schema_version"] = RESULTS_SCHEMA_VERSION.into();
            out.push_str(&serde_json::to_string(&v)?);
            out.push('\n');
        }
    } else {
        if fresh {
            out.push_str(RESULTS_CSV_HEADER);
            out.push('\n');
        }
        for r in results {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
    }
    f.write_all(out.as_bytes())?;
    Ok(())
}

fn params(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn check_replicates(n: usize) -> Result<()> {
    if n == 0 {
        return domain("at least one replicate is needed");
    }
    Ok(())
}

/// Settings for [`estimate_psi_ave_upper`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiAveOptions {
    pub builder: BuilderSpec,
    pub side: f64,
    pub replicates: usize,
    pub master_seed: u64,
    pub mode: StretchMode,
    /// Toroidal configurations; otherwise planar with the default margin.
    pub torus: bool,
}

impl PsiAveOptions {
    pub fn new(builder: BuilderSpec, side: f64, replicates: usize, master_seed: u64) -> Self {
        Self {
            builder,
            side,
            replicates,
            master_seed,
            mode: StretchMode::Steiner,
            torus: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiAveEstimate {
    /// Normalized length per replicate.
    pub length: ExperimentResult,
    /// Stretch per replicate, in replicate order.
    pub stretches: Vec<f64>,
    pub max_stretch: f64,
}

/// Length and stretch of a builder on rate-1 Poisson configurations.
pub fn estimate_psi_ave_upper(opts: &PsiAveOptions) -> Result<PsiAveEstimate> {
    check_replicates(opts.replicates)?;
    if !(opts.side * opts.side >= 100.0) {
        return domain(format!("window area must be at least 100, got {}", opts.side * opts.side));
    }
    let start = Instant::now();
    let rows: Vec<(f64, f64)> = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(opts.master_seed, r);
            let mut cfg = poisson(Rect::square(opts.side), 1.0, seed)?;
            if opts.torus {
                cfg = cfg.into_torus()?;
            }
            let net = opts.builder.build(&cfg)?;
            let margin = if opts.torus { 0.0 } else { DEFAULT_MARGIN };
            let len = normalized_length(&net, margin)?;
            let mut so = StretchOptions::new(opts.mode, PairFilter::default_for(&net));
            so.seed = seed;
            let st = stretch_with(&net, &so)?;
            Ok((len, st.max_ratio))
        })
        .collect::<Result<_>>()?;
    let p = params(&[
        ("builder", serde_json::to_value(&opts.builder)?),
        ("side", opts.side.into()),
        ("mode", serde_json::to_value(opts.mode)?),
        ("torus", opts.torus.into()),
    ]);
    let stretches: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let max_stretch = stretches.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PsiAveEstimate {
        length: ExperimentResult::from_values(
            "psi_ave_upper",
            p,
            opts.master_seed,
            rows.iter().map(|r| r.0).collect(),
            start,
        ),
        stretches,
        max_stretch,
    })
}

/// Mean normalized length of a builder on rate-1 Poisson configurations.
pub fn length_experiment(spec: &BuilderSpec, side: f64, replicates: usize, master_seed: u64, torus: bool) -> Result<ExperimentResult> {
    check_replicates(replicates)?;
    let start = Instant::now();
    let values: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut cfg = poisson(Rect::square(side), 1.0, replicate_seed(master_seed, r))?;
            if torus {
                cfg = cfg.into_torus()?;
            }
            let margin = if torus { 0.0 } else { DEFAULT_MARGIN };
            normalized_length(&spec.build(&cfg)?, margin)
        })
        .collect::<Result<_>>()?;
    let p = params(&[
        ("builder", serde_json::to_value(spec)?),
        ("side", side.into()),
        ("torus", torus.into()),
    ]);
    Ok(ExperimentResult::from_values("length", p, master_seed, values, start))
}

/// Length per unit area of the θ_m graph on the torus.
pub fn empirical_lm(m: u32, side: f64, replicates: usize, master_seed: u64) -> Result<ExperimentResult> {
    if m < 6 || m % 2 == 1 {
        return domain(format!("empirical L_m needs an even m >= 6, got {m}"));
    }
    let mut r = length_experiment(&BuilderSpec::Theta { m }, side, replicates, master_seed, true)?;
    r.estimator = "empirical_lm".into();
    Ok(r)
}

/// Length per unit area of one direction network `N_0` of the cone roads on the torus.
pub fn empirical_lk(k: u32, side: f64, replicates: usize, master_seed: u64) -> Result<ExperimentResult> {
    let mut r = length_experiment(&BuilderSpec::ConeDirection { k, i: 0 }, side, replicates, master_seed, true)?;
    r.estimator = "empirical_lk".into();
    Ok(r)
}

/// The length experiment repeated at each window side.
pub fn window_sweep(spec: &BuilderSpec, sides: &[f64], replicates: usize, master_seed: u64, torus: bool) -> Result<Vec<ExperimentResult>> {
    sides
        .iter()
        .map(|&side| {
            let mut r = length_experiment(spec, side, replicates, master_seed, torus)?;
            r.estimator = "window_sweep".into();
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingResult {
    pub h: f64,
    pub l: f64,
    pub width: f64,
    pub replicates: usize,
    pub mean_n: f64,
    pub se_n: f64,
    pub mean_n2: f64,
    pub se_n2: f64,
    pub master_seed: u64,
}

impl CrossingResult {
    pub fn results(&self) -> [ExperimentResult; 2] {
        let p = params(&[("h", self.h.into()), ("l", self.l.into()), ("width", self.width.into())]);
        let row = |name: &str, mean, se| ExperimentResult {
            estimator: name.into(),
            params: p.clone(),
            replicates: self.replicates,
            mean,
            se,
            master_seed: self.master_seed,
            seeds: Vec::new(),
            values: Vec::new(),
            wall_time_s: 0.0,
        };
        [row("crossing_n", self.mean_n, self.se_n), row("crossing_n2", self.mean_n2, self.se_n2)]
    }
}

pub fn default_crossing_width(h: f64, l: f64) -> f64 {
    40.0 * h.max(l).max(1.0)
}

/// Number of friend-pair crossing positions in `[0, l]` for one Poisson
/// sample of the strip `[-w/2, w/2] × [-h, h]`.
fn crossings_once(h: f64, l: f64, w: f64, seed: u64) -> Result<u64> {
    let mut rng = rng_for(seed, 0);
    let mean = w * 2.0 * h;
    let n = if mean > 0.0 {
        Poisson::new(mean).map_err(|e| Error::Domain(format!("Poisson mean {mean}: {e}")))?.sample(&mut rng) as usize
    } else {
        0
    };
    let mut pts: Vec<(f64, f64)> = (0..n)
        .map(|_| ((rng.random::<f64>() - 0.5) * w, (2.0 * rng.random::<f64>() - 1.0) * h))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut count = 0;
    for i in 0..pts.len() {
        let (x1, y1) = pts[i];
        for &(x2, y2) in &pts[i + 1..] {
            // |dx| < |dy| < 2h
            if x2 - x1 >= 2.0 * h {
                break;
            }
            if (y1 < 0.0) == (y2 < 0.0) || (x2 - x1).abs() >= (y2 - y1).abs() {
                continue;
            }
            let chi = x1 + (x2 - x1) * (-y1) / (y2 - y1);
            if (0.0..=l).contains(&chi) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// First two moments of the crossing count `N(h, L)`.
pub fn crossing_experiment(h: f64, l: f64, width: Option<f64>, replicates: usize, master_seed: u64) -> Result<CrossingResult> {
    check_replicates(replicates)?;
    if !(h >= 0.0 && l > 0.0 && h.is_finite() && l.is_finite()) {
        return domain(format!("crossing experiment needs h >= 0 and L > 0, got h = {h}, L = {l}"));
    }
    let w = width.unwrap_or_else(|| default_crossing_width(h, l));
    if w < 20.0 * h.max(l) {
        return domain(format!("strip width {w} is below 20 max(h, L)"));
    }
    let counts: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| crossings_once(h, l, w, replicate_seed(master_seed, r)).map(|c| c as f64))
        .collect::<Result<_>>()?;
    let squares: Vec<f64> = counts.iter().map(|c| c * c).collect();
    let (mean_n, se_n) = mean_se(&counts);
    let (mean_n2, se_n2) = mean_se(&squares);
    Ok(CrossingResult {
        h,
        l,
        width: w,
        replicates,
        mean_n,
        se_n,
        mean_n2,
        se_n2,
        master_seed,
    })
}
