//! Benchmark orchestration: relative mean error against the sample
//! covariance over replicated scenarios, and the error-versus-dimension
//! sweep.
//!
//! Reports are keyed by cell and append-only: rerunning a completed cell
//! is a no-op, so interrupted table runs resume where they stopped.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sample_covariance, DataSample, MatrixNorm, SymMatrix};
use crate::mom::{mom_covariance, MomConfig};
use crate::sim::generate::{generate_with_sqrt, CovStructure, GenModel, ModelKind, StructureKind};
use crate::tuning;

/// The estimators the harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Sample covariance (also the RME baseline).
    Sample,
    /// Element-wise Huber M-estimator, one threshold for all entries,
    /// five-fold cross-validated.
    HuberCv,
    /// Data-adaptive Huber covariance (per-entry coupled system).
    AdaptiveHuber,
    /// Element-wise truncated estimator with per-entry adaptive
    /// thresholds.
    AdaptiveTruncated,
    /// Spectrum-wise truncated estimator, five-fold cross-validated.
    SpectrumTruncatedCv,
    /// Spectrum-wise truncated estimator with the adaptive fixed-point
    /// threshold.
    SpectrumTruncatedAdaptive,
    /// Median of means.
    Mom,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Sample => "sample",
            Method::HuberCv => "huber_cv",
            Method::AdaptiveHuber => "adaptive_huber",
            Method::AdaptiveTruncated => "adaptive_truncated",
            Method::SpectrumTruncatedCv => "spectrum_truncated_cv",
            Method::SpectrumTruncatedAdaptive => "spectrum_truncated_adaptive",
            Method::Mom => "mom",
        }
    }

    pub fn all_table_methods() -> Vec<Method> {
        vec![
            Method::HuberCv,
            Method::AdaptiveHuber,
            Method::AdaptiveTruncated,
            Method::SpectrumTruncatedCv,
        ]
    }

    /// Run the estimator; `seed` derives any internal randomness (fold
    /// assignment), so results are reproducible per replication.
    pub fn estimate(self, x: &DataSample, seed: u64) -> Result<SymMatrix> {
        let t = tuning::default_t(x.n());
        match self {
            Method::Sample => Ok(sample_covariance(x)),
            Method::HuberCv => tuning::cv_elementwise_huber(x, seed),
            Method::AdaptiveHuber => {
                let cfg = tuning::HuberSystemConfig::default();
                Ok(tuning::adaptive_huber_covariance(x, t, &cfg)?.sigma)
            }
            Method::AdaptiveTruncated => Ok(tuning::adaptive_elementwise_truncated(x, t)?.sigma),
            Method::SpectrumTruncatedCv => tuning::cv_spectrum_truncated(x, seed),
            Method::SpectrumTruncatedAdaptive => tuning::adaptive_spectrum_truncated(x, t),
            Method::Mom => mom_covariance(x, &MomConfig::default_for(x.n())),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(Method::Sample),
            "huber_cv" => Ok(Method::HuberCv),
            "adaptive_huber" => Ok(Method::AdaptiveHuber),
            "adaptive_truncated" => Ok(Method::AdaptiveTruncated),
            "spectrum_truncated_cv" => Ok(Method::SpectrumTruncatedCv),
            "spectrum_truncated_adaptive" => Ok(Method::SpectrumTruncatedAdaptive),
            "mom" => Ok(Method::Mom),
            other => Err(Error::InvalidParameter(format!(
                "unknown method '{other}' (expected one of: sample, huber_cv, adaptive_huber, \
                 adaptive_truncated, spectrum_truncated_cv, spectrum_truncated_adaptive, mom)"
            ))),
        }
    }
}

/// Relative mean error: summed estimator error over summed baseline error,
/// both against the same truth and norm.
pub fn rme(
    estimates: &[SymMatrix],
    baselines: &[SymMatrix],
    truth: &SymMatrix,
    norm: MatrixNorm,
) -> Result<f64> {
    if estimates.is_empty() || estimates.len() != baselines.len() {
        return Err(Error::InvalidParameter(
            "rme needs equal-length nonempty estimate and baseline lists".into(),
        ));
    }
    let num: f64 = estimates.iter().map(|e| e.sub(truth).norm(norm)).sum();
    let den: f64 = baselines.iter().map(|b| b.sub(truth).norm(norm)).sum();
    if den == 0.0 {
        return Err(Error::Degenerate("baseline errors sum to zero".into()));
    }
    Ok(num / den)
}

/// One report cell key: everything that identifies an RME value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub model: String,
    pub structure: String,
    pub n: usize,
    pub d: usize,
    pub method: String,
    pub norm: String,
}

/// One report cell value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellValue {
    /// Relative mean error versus the sample covariance; `None` when the
    /// method failed on this scenario.
    pub rme: Option<f64>,
    pub reps: usize,
    /// Standard error of the per-replication error ratios.
    pub stderr: Option<f64>,
    /// Mean raw error (the sweep consumes this; empty for table cells).
    pub mean_error: Option<f64>,
    /// Standard deviation of the raw errors across replications.
    pub error_spread: Option<f64>,
    /// First failure message when the cell failed.
    pub error: Option<String>,
}

/// Append-only benchmark report keyed by cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "FlatReport", into = "FlatReport")]
pub struct BenchmarkReport {
    pub seed: u64,
    pub cells: BTreeMap<CellKey, CellValue>,
}

/// Serde surface for the report: a flat list of rows, which JSON can
/// carry (struct-keyed maps cannot).
#[derive(Serialize, Deserialize)]
struct FlatReport {
    seed: u64,
    cells: Vec<FlatCell>,
}

#[derive(Serialize, Deserialize)]
struct FlatCell {
    #[serde(flatten)]
    key: CellKey,
    #[serde(flatten)]
    value: CellValue,
}

impl From<BenchmarkReport> for FlatReport {
    fn from(r: BenchmarkReport) -> FlatReport {
        FlatReport {
            seed: r.seed,
            cells: r.cells.into_iter().map(|(key, value)| FlatCell { key, value }).collect(),
        }
    }
}

impl From<FlatReport> for BenchmarkReport {
    fn from(r: FlatReport) -> BenchmarkReport {
        BenchmarkReport {
            seed: r.seed,
            cells: r.cells.into_iter().map(|c| (c.key, c.value)).collect(),
        }
    }
}

impl BenchmarkReport {
    pub fn new(seed: u64) -> Self {
        BenchmarkReport { seed, cells: BTreeMap::new() }
    }

    pub fn contains(&self, key: &CellKey) -> bool {
        self.cells.contains_key(key)
    }

    /// CSV, one row per cell, seed recorded in a header comment line.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# seed={}\n", self.seed);
        out.push_str("model,structure,n,d,method,norm,rme,reps,stderr,mean_error,error_spread,status\n");
        for (k, v) in &self.cells {
            let fmt = |o: Option<f64>| o.map(|x| format!("{x}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                k.model,
                k.structure,
                k.n,
                k.d,
                k.method,
                k.norm,
                fmt(v.rme),
                v.reps,
                fmt(v.stderr),
                fmt(v.mean_error),
                fmt(v.error_spread),
                if v.error.is_some() { "failed" } else { "ok" },
            ));
        }
        out
    }

    /// JSON grouped by scenario `(model, structure, n, d)`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct JsonCell<'a> {
            method: &'a str,
            norm: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            rme: Option<f64>,
            reps: usize,
            #[serde(skip_serializing_if = "Option::is_none")]
            stderr: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            mean_error: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            error_spread: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            error: Option<&'a str>,
        }
        #[derive(Serialize)]
        struct JsonScenario<'a> {
            model: &'a str,
            structure: &'a str,
            n: usize,
            d: usize,
            cells: Vec<JsonCell<'a>>,
        }
        #[derive(Serialize)]
        struct JsonReport<'a> {
            seed: u64,
            scenarios: Vec<JsonScenario<'a>>,
        }

        let mut scenarios: Vec<JsonScenario> = Vec::new();
        for (k, v) in &self.cells {
            let cell = JsonCell {
                method: &k.method,
                norm: &k.norm,
                rme: v.rme,
                reps: v.reps,
                stderr: v.stderr,
                mean_error: v.mean_error,
                error_spread: v.error_spread,
                error: v.error.as_deref(),
            };
            match scenarios.iter_mut().find(|s| {
                s.model == k.model && s.structure == k.structure && s.n == k.n && s.d == k.d
            }) {
                Some(s) => s.cells.push(cell),
                None => scenarios.push(JsonScenario {
                    model: &k.model,
                    structure: &k.structure,
                    n: k.n,
                    d: k.d,
                    cells: vec![cell],
                }),
            }
        }
        serde_json::to_string_pretty(&JsonReport { seed: self.seed, scenarios })
            .expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        // The resume format is the flat serde form of the struct itself.
        serde_json::from_str(s)
            .map_err(|e| Error::InvalidParameter(format!("cannot parse report: {e}")))
    }

    /// Flat serde form used for resuming.
    pub fn to_resume_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// Text table in the layout of the published tables: one row per
    /// method, norms as columns, grouped by scenario.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let mut scenarios: Vec<(String, String, usize, usize)> = Vec::new();
        for k in self.cells.keys() {
            let sc = (k.model.clone(), k.structure.clone(), k.n, k.d);
            if !scenarios.contains(&sc) {
                scenarios.push(sc);
            }
        }
        for (model, structure, n, d) in scenarios {
            out.push_str(&format!("\n{model} model, {structure} structure, n={n}, d={d}\n"));
            out.push_str(&format!("{:<28} {:>8} {:>8} {:>8}\n", "method", "2", "max", "F"));
            let mut methods: Vec<String> = Vec::new();
            for k in self.cells.keys() {
                if k.model == model && k.structure == structure && k.n == n && k.d == d
                    && !methods.contains(&k.method)
                {
                    methods.push(k.method.clone());
                }
            }
            for method in methods {
                let get = |norm: &str| -> String {
                    let key = CellKey {
                        model: model.clone(),
                        structure: structure.clone(),
                        n,
                        d,
                        method: method.clone(),
                        norm: norm.to_string(),
                    };
                    match self.cells.get(&key) {
                        Some(CellValue { rme: Some(r), .. }) => format!("{r:.2}"),
                        Some(_) => "fail".to_string(),
                        None => "-".to_string(),
                    }
                };
                out.push_str(&format!(
                    "{:<28} {:>8} {:>8} {:>8}\n",
                    method,
                    get("2"),
                    get("max"),
                    get("F")
                ));
            }
        }
        out
    }
}

/// Scenario grid for table reproduction.
#[derive(Debug, Clone)]
pub struct TableConfig {
    pub scenarios: Vec<(usize, usize)>,
    pub models: Vec<ModelKind>,
    pub structures: Vec<StructureKind>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
}

impl TableConfig {
    /// The published grid: `(50,100), (50,200), (100,200)`, all models,
    /// the given structure, four methods.
    pub fn published(structure: StructureKind, reps: usize, seed: u64) -> Self {
        TableConfig {
            scenarios: vec![(50, 100), (50, 200), (100, 200)],
            models: vec![
                ModelKind::Normal,
                ModelKind::StudentT3,
                ModelKind::Pareto3,
                ModelKind::LogNormal,
            ],
            structures: vec![structure],
            methods: Method::all_table_methods(),
            reps,
            seed,
        }
    }
}

const TABLE_NORMS: [MatrixNorm; 3] =
    [MatrixNorm::Spectral, MatrixNorm::Max, MatrixNorm::Frobenius];

/// Run every cell of the scenario grid that is not already in the report.
/// Replications parallelize; per-replication seeds derive from the report
/// seed, the scenario, and the replication index, so completed cells are
/// reproducible independently of run order.
pub fn run_table(cfg: &TableConfig, report: &mut BenchmarkReport) -> Result<()> {
    if cfg.reps == 0 {
        return Err(Error::InvalidParameter("reps must be >= 1".into()));
    }
    for &(n, d) in &cfg.scenarios {
        for &model in &cfg.models {
            for &structure in &cfg.structures {
                let st = CovStructure::new(structure, d);
                let truth = st.matrix();
                let sqrt = st.sqrt_matrix()?;
                let scenario_seed = scenario_seed(cfg.seed, model, structure, n, d);

                let todo: Vec<Method> = cfg
                    .methods
                    .iter()
                    .copied()
                    .filter(|m| {
                        TABLE_NORMS.iter().any(|norm| {
                            !report.contains(&CellKey {
                                model: model.label().into(),
                                structure: structure.label().into(),
                                n,
                                d,
                                method: m.label().into(),
                                norm: norm.label().into(),
                            })
                        })
                    })
                    .collect();
                if todo.is_empty() {
                    continue;
                }

                // Per replication: data, baseline errors, method errors.
                struct RepOut {
                    base: [f64; 3],
                    per_method: Vec<std::result::Result<[f64; 3], String>>,
                }
                let reps: Vec<RepOut> = (0..cfg.reps)
                    .into_par_iter()
                    .map(|rep| {
                        let gm = GenModel::new(model, scenario_seed).for_replication(rep as u64);
                        let x = generate_with_sqrt(&gm, &sqrt, n).expect("generation");
                        let baseline = sample_covariance(&x);
                        let base = norm_errors(&baseline, &truth);
                        let per_method = todo
                            .iter()
                            .map(|m| {
                                m.estimate(&x, gm.seed)
                                    .map(|est| norm_errors(&est, &truth))
                                    .map_err(|e| e.to_string())
                            })
                            .collect();
                        RepOut { base, per_method }
                    })
                    .collect();

                for (mi, m) in todo.iter().enumerate() {
                    let failure = reps.iter().find_map(|r| r.per_method[mi].as_ref().err());
                    for (ni, norm) in TABLE_NORMS.iter().enumerate() {
                        let key = CellKey {
                            model: model.label().into(),
                            structure: structure.label().into(),
                            n,
                            d,
                            method: m.label().into(),
                            norm: norm.label().into(),
                        };
                        if report.contains(&key) {
                            continue;
                        }
                        let value = match failure {
                            Some(msg) => CellValue {
                                rme: None,
                                reps: cfg.reps,
                                stderr: None,
                                mean_error: None,
                                error_spread: None,
                                error: Some(msg.clone()),
                            },
                            None => {
                                let num: f64 = reps
                                    .iter()
                                    .map(|r| r.per_method[mi].as_ref().unwrap()[ni])
                                    .sum();
                                let den: f64 = reps.iter().map(|r| r.base[ni]).sum();
                                let ratios: Vec<f64> = reps
                                    .iter()
                                    .map(|r| {
                                        r.per_method[mi].as_ref().unwrap()[ni] / r.base[ni]
                                    })
                                    .collect();
                                CellValue {
                                    rme: Some(num / den),
                                    reps: cfg.reps,
                                    stderr: Some(stderr_of(&ratios)),
                                    mean_error: None,
                                    error_spread: None,
                                    error: None,
                                }
                            }
                        };
                        report.cells.insert(key, value);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Error-versus-dimension sweep: centered Gamma(3,1) coordinates with
/// `Sigma = 3 I_d`, max-norm errors for the sample covariance and the two
/// adaptively tuned truncated estimators.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n: usize,
    pub d_list: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n: 200,
            d_list: (1..=10).map(|k| k * 50).collect(),
            reps: 50,
            seed: 0x1a2b3c4d,
        }
    }
}

/// Run the dimension sweep. Each cell records the mean and spread of the
/// raw max-norm error plus the RME against the sample covariance.
pub fn run_dimension_sweep(cfg: &SweepConfig, report: &mut BenchmarkReport) -> Result<()> {
    if cfg.reps == 0 {
        return Err(Error::InvalidParameter("reps must be >= 1".into()));
    }
    // The spectrum-wise estimator is CV-tuned here: the adaptive spectral
    // equation only has solutions in the tall-data regime, far from these
    // (n, d).
    let methods = [Method::Sample, Method::AdaptiveTruncated, Method::SpectrumTruncatedCv];
    let scale = 3.0f64.sqrt();
    for &d in &cfg.d_list {
        let todo: Vec<Method> = methods
            .iter()
            .copied()
            .filter(|m| {
                !report.contains(&CellKey {
                    model: "gamma31".into(),
                    structure: "scaled_identity_3".into(),
                    n: cfg.n,
                    d,
                    method: m.label().into(),
                    norm: "max".into(),
                })
            })
            .collect();
        if todo.is_empty() {
            continue;
        }
        let truth = SymMatrix::from_diag(&vec![3.0; d]);
        let scenario_seed =
            scenario_seed(cfg.seed, ModelKind::Gamma31, StructureKind::Diagonal, cfg.n, d);

        struct RepOut {
            base: f64,
            per_method: Vec<std::result::Result<f64, String>>,
        }
        let reps: Vec<RepOut> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let gm = GenModel::new(ModelKind::Gamma31, scenario_seed)
                    .for_replication(rep as u64);
                // Centered Gamma(3,1) coordinates: standardized draws
                // scaled by sqrt(3), so Sigma = 3 I.
                let raw = gm.draw_standardized(cfg.n, d).mapv(|v| v * scale);
                let x = DataSample::new(raw).expect("generation");
                let baseline = sample_covariance(&x);
                let base = baseline.sub(&truth).norm(MatrixNorm::Max);
                let per_method = todo
                    .iter()
                    .map(|m| {
                        m.estimate(&x, gm.seed)
                            .map(|est| est.sub(&truth).norm(MatrixNorm::Max))
                            .map_err(|e| e.to_string())
                    })
                    .collect();
                RepOut { base, per_method }
            })
            .collect();

        for (mi, m) in todo.iter().enumerate() {
            let key = CellKey {
                model: "gamma31".into(),
                structure: "scaled_identity_3".into(),
                n: cfg.n,
                d,
                method: m.label().into(),
                norm: "max".into(),
            };
            let failure = reps.iter().find_map(|r| r.per_method[mi].as_ref().err());
            let value = match failure {
                Some(msg) => CellValue {
                    rme: None,
                    reps: cfg.reps,
                    stderr: None,
                    mean_error: None,
                    error_spread: None,
                    error: Some(msg.clone()),
                },
                None => {
                    let errs: Vec<f64> = reps
                        .iter()
                        .map(|r| *r.per_method[mi].as_ref().unwrap())
                        .collect();
                    let num: f64 = errs.iter().sum();
                    let den: f64 = reps.iter().map(|r| r.base).sum();
                    let mean = num / errs.len() as f64;
                    let spread = (errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                        / errs.len() as f64)
                        .sqrt();
                    CellValue {
                        rme: Some(num / den),
                        reps: cfg.reps,
                        stderr: None,
                        mean_error: Some(mean),
                        error_spread: Some(spread),
                        error: None,
                    }
                }
            };
            report.cells.insert(key, value);
        }
    }
    Ok(())
}

fn norm_errors(est: &SymMatrix, truth: &SymMatrix) -> [f64; 3] {
    let diff = est.sub(truth);
    [
        diff.norm(MatrixNorm::Spectral),
        diff.norm(MatrixNorm::Max),
        diff.norm(MatrixNorm::Frobenius),
    ]
}

fn stderr_of(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (var / n).sqrt()
}

/// Deterministic scenario seed mixing the run seed with the scenario
/// coordinates.
fn scenario_seed(seed: u64, model: ModelKind, structure: StructureKind, n: usize, d: usize) -> u64 {
    let mut h = seed ^ 0x517c_c1b7_2722_0a95;
    for byte in model
        .label()
        .bytes()
        .chain(structure.label().bytes())
        .chain(n.to_le_bytes())
        .chain(d.to_le_bytes())
    {
        h = (h ^ byte as u64).wrapping_mul(0x100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rme_trivial_values() {
        let truth = SymMatrix::eye(2);
        let a = SymMatrix::from_array(&array![[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let b = SymMatrix::from_array(&array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
        // estimates == baselines -> exactly 1.
        let r = rme(
            &[a.clone(), b.clone()],
            &[a.clone(), b.clone()],
            &truth,
            MatrixNorm::Frobenius,
        )
        .unwrap();
        assert_eq!(r, 1.0);
        // estimates == truth -> 0.
        let r = rme(&[truth.clone(), truth.clone()], &[a.clone(), b], &truth, MatrixNorm::Max)
            .unwrap();
        assert_eq!(r, 0.0);
        // errors (1, 3) vs (2, 2) -> 1.0.
        let e1 = SymMatrix::from_diag(&[2.0, 1.0]); // err 1 in 2-norm
        let e3 = SymMatrix::from_diag(&[4.0, 1.0]); // err 3
        let b2 = SymMatrix::from_diag(&[3.0, 1.0]); // err 2
        let r = rme(&[e1, e3], &[b2.clone(), b2], &truth, MatrixNorm::Spectral).unwrap();
        assert_eq!(r, 1.0);
        // Degenerate baseline errors.
        assert!(rme(
            &[SymMatrix::eye(2)],
            &[truth.clone()],
            &truth,
            MatrixNorm::Max
        )
        .is_err());
    }

    #[test]
    fn single_rep_table_is_deterministic() {
        let cfg = TableConfig {
            scenarios: vec![(12, 4)],
            models: vec![ModelKind::StudentT3],
            structures: vec![StructureKind::Diagonal],
            methods: vec![Method::AdaptiveTruncated, Method::Mom],
            reps: 1,
            seed: 99,
        };
        let mut r1 = BenchmarkReport::new(cfg.seed);
        run_table(&cfg, &mut r1).unwrap();
        let mut r2 = BenchmarkReport::new(cfg.seed);
        run_table(&cfg, &mut r2).unwrap();
        assert_eq!(r1.to_csv(), r2.to_csv());
        // 2 methods x 3 norms cells.
        assert_eq!(r1.cells.len(), 6);
    }

    #[test]
    fn completed_cells_are_not_rerun() {
        let cfg = TableConfig {
            scenarios: vec![(10, 3)],
            models: vec![ModelKind::Normal],
            structures: vec![StructureKind::Diagonal],
            methods: vec![Method::Mom],
            reps: 2,
            seed: 5,
        };
        let mut report = BenchmarkReport::new(cfg.seed);
        run_table(&cfg, &mut report).unwrap();
        let key = CellKey {
            model: "normal".into(),
            structure: "diagonal".into(),
            n: 10,
            d: 3,
            method: "mom".into(),
            norm: "max".into(),
        };
        let before = report.cells.get(&key).unwrap().rme;
        // Poison the cell; a rerun must keep the poisoned value.
        report.cells.get_mut(&key).unwrap().rme = Some(-123.0);
        run_table(&cfg, &mut report).unwrap();
        assert_eq!(report.cells.get(&key).unwrap().rme, Some(-123.0));
        assert_ne!(before, Some(-123.0));
    }

    #[test]
    fn report_roundtrips_through_resume_json() {
        let cfg = TableConfig {
            scenarios: vec![(10, 3)],
            models: vec![ModelKind::Normal],
            structures: vec![StructureKind::PowerDecay],
            methods: vec![Method::Mom],
            reps: 2,
            seed: 17,
        };
        let mut report = BenchmarkReport::new(cfg.seed);
        run_table(&cfg, &mut report).unwrap();
        let json = report.to_resume_json();
        let back = BenchmarkReport::from_json(&json).unwrap();
        assert_eq!(report.to_csv(), back.to_csv());
    }

    #[test]
    fn sweep_produces_row_per_method_per_dimension() {
        let cfg = SweepConfig { n: 20, d_list: vec![3, 5], reps: 2, seed: 1 };
        let mut report = BenchmarkReport::new(cfg.seed);
        run_dimension_sweep(&cfg, &mut report).unwrap();
        assert_eq!(report.cells.len(), 6); // 2 dims x 3 methods
        for v in report.cells.values() {
            assert!(v.mean_error.unwrap() > 0.0);
            assert!(v.error_spread.unwrap() >= 0.0);
        }
    }
}
