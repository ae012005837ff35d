//! Per-kernel timings at sweep sizes.

use std::time::Instant;

use tailrobust::sim::{CovStructure, GenModel, ModelKind, StructureKind};

fn main() {
    let model = GenModel::new(ModelKind::Gamma31, 7);
    let st = CovStructure::new(StructureKind::Diagonal, 500);
    let x = tailrobust::sim::generate(&model, &st, 200).unwrap();
    let cols = x.columns_major();
    let n_entries = 2000usize;

    let mut buf = Vec::new();
    let mut squares = Vec::new();
    let t0 = Instant::now();
    let mut acc = 0.0;
    for e in 0..n_entries {
        let (k, l) = (e % 500, (e * 7 + 3) % 500);
        tailrobust::bench_probe::fill_pair_products_probe(
            cols.row(k).as_slice().unwrap(),
            cols.row(l).as_slice().unwrap(),
            &mut buf,
        );
        acc += buf[0];
    }
    println!("fill_pair_products: {:.2?} / entry (acc {acc:.3})", t0.elapsed() / n_entries as u32);

    let t0 = Instant::now();
    for _ in 0..n_entries {
        let (t, _, _) = tailrobust::bench_probe::fill_squares_probe(&buf, &mut squares);
        acc += t;
    }
    println!("fill_squares_with_stats: {:.2?} / entry", t0.elapsed() / n_entries as u32);

    let t0 = Instant::now();
    let mut total_iters = 0usize;
    for e in 0..n_entries {
        let (k, l) = (e % 500, (e * 7 + 3) % 500);
        tailrobust::bench_probe::fill_pair_products_probe(
            cols.row(k).as_slice().unwrap(),
            cols.row(l).as_slice().unwrap(),
            &mut buf,
        );
        let res = tailrobust::tuning::solve_truncation_tau(&buf, 500, (200.0f64).ln(), 100).unwrap();
        total_iters += res.iterations;
        acc += res.tau;
    }
    println!(
        "full entry solve: {:.2?} / entry, mean newton iters {:.1} (acc {acc:.3})",
        t0.elapsed() / n_entries as u32,
        total_iters as f64 / n_entries as f64
    );

    let t0 = Instant::now();
    let reps = 20000usize;
    let mut c = 0usize;
    for r in 0..reps {
        let s = tailrobust::bench_probe::capped_sum_probe(&squares, 1.0 + r as f64);
        acc += s;
        c += 1;
    }
    println!("capped_sum pass: {:.2?} (c {c})", t0.elapsed() / reps as u32);
}
