//! Rough timings of the estimator hot paths at benchmark sizes.

use std::time::Instant;

use tailrobust::sim::{CovStructure, GenModel, ModelKind, StructureKind};
use tailrobust::tuning;
use tailrobust::{sample_covariance, DataSample};

fn time<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    println!("{label}: {:.2?}", t0.elapsed());
    out
}

fn main() {
    let model = GenModel::new(ModelKind::Gamma31, 7);
    let st = CovStructure::new(StructureKind::Diagonal, 500);
    let x500 = tailrobust::sim::generate(&model, &st, 200).unwrap();

    time("sample_covariance (200, 500)", || sample_covariance(&x500));
    time("adaptive_elementwise_truncated (200, 500)", || {
        tuning::adaptive_elementwise_truncated(&x500, tuning::default_t(200)).unwrap()
    });
    time("solve_spectral_tau (200, 500, unsolvable regime)", || {
        tuning::solve_spectral_tau(&x500, tuning::default_t(200)).unwrap()
    });
    time("cv_spectrum_truncated (200, 500)", || {
        tuning::cv_spectrum_truncated(&x500, 5).unwrap()
    });

    let st100 = CovStructure::new(StructureKind::Diagonal, 100);
    let t3 = GenModel::new(ModelKind::StudentT3, 9);
    let x100 = tailrobust::sim::generate(&t3, &st100, 50).unwrap();
    time("adaptive_huber_covariance (50, 100)", || {
        tuning::adaptive_huber_covariance(
            &x100,
            tuning::default_t(50),
            &tuning::HuberSystemConfig::default(),
        )
        .unwrap()
    });
    time("cv_elementwise_huber (50, 100)", || {
        tuning::cv_elementwise_huber(&x100, 3).unwrap()
    });
    time("cv_spectrum_truncated (50, 100)", || {
        tuning::cv_spectrum_truncated(&x100, 3).unwrap()
    });

    let x300 = tailrobust::sim::generate(&t3, &st100, 300).unwrap();
    time("adaptive_huber_covariance (300, 100)", || {
        tuning::adaptive_huber_covariance(
            &x300,
            tuning::default_t(300),
            &tuning::HuberSystemConfig::default(),
        )
        .unwrap()
    });

    let st400 = CovStructure::new(StructureKind::Diagonal, 400);
    let x400 = tailrobust::sim::generate(&t3, &st400, 300).unwrap();
    time("adaptive_elementwise_truncated (300, 400)", || {
        tuning::adaptive_elementwise_truncated(&x400, tuning::default_t(300)).unwrap()
    });

    let d200 = CovStructure::new(StructureKind::PowerDecay, 200);
    let big = tailrobust::sim::generate(&model, &d200, 100).unwrap();
    let cov = sample_covariance(&big);
    time("eig d=200", || cov.eig().unwrap());
    let x = DataSample::new(x500.values().clone()).unwrap();
    let cov500 = sample_covariance(&x);
    time("eig d=500", || cov500.eig().unwrap());
}
