//! Criterion benchmarks for the data-parallel hot paths.
//!
//! With the default `parallel` feature each group is measured twice: on the
//! default rayon pool and pinned to a single thread, so the parallel speedup
//! is visible in one run. To measure the true dependency-free sequential
//! fallback, save a baseline and rebuild without default features:
//!
//! ```text
//! cargo bench -p lmd-core -- --save-baseline parallel
//! cargo bench -p lmd-core --no-default-features -- --baseline parallel
//! ```

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lmd_core::fitting::{block_candidates, fit_cubic};
use lmd_core::graph::{build_lmd, forward};
use lmd_core::grouping::{connected_components, group_supermarkings, BinaryMask, Connectivity};
use lmd_core::ops;
use lmd_core::tensor::{ConvParams, Tensor};
use lmd_core::weights::WeightStore;

fn random_tensor(r: &mut ChaCha8Rng, n: usize, c: usize, h: usize, w: usize) -> Tensor {
    let data = (0..n * c * h * w).map(|_| r.gen_range(-1.0f32..1.0)).collect();
    Tensor::from_vec(n, c, h, w, data).unwrap()
}

/// Benchmarks `f` on the default pool and on one thread (parallel builds),
/// or as-is (sequential builds).
fn bench_both<F: Fn() + Sync>(c: &mut Criterion, name: &str, sample_size: usize, f: F) {
    let mut group = c.benchmark_group(name);
    group.sample_size(sample_size.max(10));
    #[cfg(feature = "parallel")]
    {
        group.bench_function("threads_all", |b| b.iter(&f));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        group.bench_function("threads_1", |b| b.iter(|| pool.install(&f)));
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(&f));
    group.finish();
}

fn bench_conv(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let input = random_tensor(&mut r, 1, 64, 90, 120);
    let kernel = random_tensor(&mut r, 64, 64, 3, 3);
    let plain = ConvParams::new(kernel.clone(), vec![0.0; 64], 1, 1, 1).unwrap();
    let dilated = ConvParams::new(kernel, vec![0.0; 64], 1, 2, 2).unwrap();
    bench_both(c, "conv2d_64x90x120_d1", 20, || {
        black_box(ops::conv2d(black_box(&input), &plain).unwrap());
    });
    bench_both(c, "conv2d_64x90x120_d2", 20, || {
        black_box(ops::conv2d(black_box(&input), &dilated).unwrap());
    });
}

fn bench_pool_and_upsample(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let input = random_tensor(&mut r, 1, 128, 90, 120);
    bench_both(c, "maxpool_128x90x120", 30, || {
        black_box(ops::maxpool2x2(black_box(&input)).unwrap());
    });
    let small = random_tensor(&mut r, 1, 64, 45, 60);
    bench_both(c, "upsample2x_64x45x60", 30, || {
        black_box(ops::upsample2x_bilinear(black_box(&small)));
    });
}

fn bench_forward(c: &mut Criterion) {
    let net = build_lmd(3).unwrap();
    let weights = WeightStore::random_init(&net, 3);
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let image = random_tensor(&mut r, 1, 3, 32, 48);
    bench_both(c, "forward_32x48", 10, || {
        black_box(forward(&net, &weights, black_box(&image)).unwrap());
    });
}

fn bench_postprocess(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let (h, w) = (128usize, 128usize);
    let mut mask = BinaryMask::new(h, w);
    for p in 0..h * w {
        if r.gen_bool(0.3) {
            mask.set(p / w, p % w, true);
        }
    }
    bench_both(c, "ccl_128x128", 30, || {
        black_box(connected_components(black_box(&mask), Connectivity::Eight, 8));
    });

    // dashed diagonal lanes: realistic herd of small supermarkings
    let mut lane_mask = BinaryMask::new(256, 256);
    for lane in 0..6 {
        for t in (0..240).step_by(20) {
            for dy in 0..10 {
                let y = t + dy;
                let x = 20 + lane * 38 + y / 4;
                if x + 2 < 256 {
                    for dx in 0..2 {
                        lane_mask.set(y, x + dx, true);
                    }
                }
            }
        }
    }
    let (labels, marks) = connected_components(&lane_mask, Connectivity::Eight, 8);
    bench_both(c, "group_and_fit_6_lanes", 30, || {
        let groups = group_supermarkings(black_box(&marks), 25.0);
        let n_groups = groups.iter().copied().max().unwrap_or(0);
        let regrouped = lmd_core::grouping::regroup_labels(&labels, &groups);
        for gid in 1..=n_groups {
            let cands = block_candidates(&regrouped, 256, 256, gid, 32).unwrap();
            black_box(fit_cubic(&cands).unwrap());
        }
    });
}

criterion_group!(benches, bench_conv, bench_pool_and_upsample, bench_forward, bench_postprocess);
criterion_main!(benches);
