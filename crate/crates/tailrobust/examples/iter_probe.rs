use tailrobust::sim::{CovStructure, GenModel, ModelKind, StructureKind};
use tailrobust::tuning;
use std::time::Instant;
fn main() {
    let model = GenModel::new(ModelKind::Gamma31, 7);
    let st = CovStructure::new(StructureKind::Diagonal, 500);
    let x = tailrobust::sim::generate(&model, &st, 200).unwrap();
    let t0 = Instant::now();
    let r = tuning::solve_spectral_tau(&x, tuning::default_t(200)).unwrap();
    println!("d=500: iters {} converged {} tau {:.3} in {:.2?}", r.iterations, r.converged, r.tau, t0.elapsed());
    for _ in 0..2 {
        let t0 = Instant::now();
        let e = tuning::adaptive_elementwise_truncated(&x, tuning::default_t(200)).unwrap();
        println!("adaptive elementwise: {:.2?} (fallbacks {})", t0.elapsed(), e.diagnostics.fallback_count);
    }
}
