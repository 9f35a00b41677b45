use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;

use rough_manifold::grid_paths::{make_uniform_grid, PairPolicy, SampledPath};
use rough_manifold::rough_lift::{
    check_chen, check_chen_exhaustive, levy_area_dyadic, lift_smooth, rough_distance, sample_fbm, sample_fbm_with, shift,
    temperedness_diagnostic, two_sided_fbm, FbmMethod, FbmSampler, FbmSpec, RoughPath, RoughPathJson,
};

fn linear_path(n: usize, slope: &[f64], t0: f64, t1: f64) -> SampledPath<f64> {
    let grid = make_uniform_grid(n, t0, t1).unwrap();
    let d = slope.len();
    SampledPath::from_fn(grid, d, |t, out| {
        for p in 0..d {
            out[p] = slope[p] * t;
        }
    })
}

fn ww(rp: &RoughPath<f64>, s: usize, t: usize) -> Vec<f64> {
    let d = rp.dim();
    let mut out = vec![0.0; d * d];
    rp.ww(s, t, &mut out);
    out
}

fn fbm(seed: u64, steps: usize, dim: usize, hurst: f64) -> SampledPath<f64> {
    let grid = make_uniform_grid(steps + 1, 0.0, 1.0).unwrap();
    sample_fbm(&FbmSpec { hurst, dim, seed, grid }).unwrap()
}

#[test]
fn smooth_lift_of_identity() {
    let rp = lift_smooth(&linear_path(65, &[1.0], 0.0, 1.0), 0.45).unwrap();
    let t = rp.grid().points().to_vec();
    for s in 0..65 {
        for u in s..65 {
            assert_relative_eq!(ww(&rp, s, u)[0], (t[u] - t[s]).powi(2) / 2.0, epsilon = 1e-15);
        }
    }
}

#[test]
fn smooth_lift_of_diagonal_path() {
    let rp = lift_smooth(&linear_path(33, &[1.0, 1.0], 0.0, 1.0), 0.45).unwrap();
    let t = rp.grid().points().to_vec();
    for (s, u) in [(0, 32), (3, 17), (10, 11)] {
        for v in ww(&rp, s, u) {
            assert_relative_eq!(v, (t[u] - t[s]).powi(2) / 2.0, epsilon = 1e-15);
        }
    }
}

#[test]
fn circle_loop_area_is_pi() {
    // Signed area of the inscribed polygon is (n/2) sin(2π/n).
    let n = 4096;
    let grid = make_uniform_grid(n + 1, 0.0, 2.0 * PI).unwrap();
    let path = SampledPath::from_fn(grid, 2, |t, out| {
        out[0] = t.cos() - 1.0;
        out[1] = t.sin();
    });
    let rp = lift_smooth(&path, 0.5).unwrap();
    let w = ww(&rp, 0, n);
    let area = 0.5 * (w[1] - w[2]);
    let polygon = n as f64 / 2.0 * (2.0 * PI / n as f64).sin();
    assert_relative_eq!(area, polygon, max_relative = 1e-12);
    assert!((area - PI).abs() < 2e-6);
}

#[test]
fn fbm_starts_at_zero() {
    for h in [0.3, 0.4, 0.5, 0.7] {
        assert!(fbm(3, 64, 2, h).at(0).iter().all(|&v| v == 0.0));
    }
    let two = two_sided_fbm::<f64>(0.4, 2, 5, 2, 16).unwrap();
    let o = two.grid().index_of(0.0).unwrap();
    assert_eq!(o, 32);
    assert!(two.at(o).iter().all(|&v| v == 0.0));
}

#[test]
fn fbm_is_deterministic_per_seed() {
    assert_eq!(fbm(11, 128, 2, 0.4), fbm(11, 128, 2, 0.4));
    assert_ne!(fbm(11, 128, 2, 0.4), fbm(12, 128, 2, 0.4));
}

#[test]
fn fbm_terminal_variance_is_one() {
    let n = 10_000;
    let mut sum = 0.0;
    for seed in 0..n {
        sum += fbm(seed, 16, 1, 0.4).at(16)[0].powi(2);
    }
    let var = sum / n as f64;
    assert!((var - 1.0).abs() < 0.05, "E B_1² = {var}");
}

#[test]
fn brownian_increments_have_step_variance_and_no_correlation() {
    let n = 10_000;
    let (mut v1, mut v2, mut c) = (0.0, 0.0, 0.0);
    for seed in 0..n {
        let p = fbm(seed, 8, 1, 0.5);
        let a = p.at(1)[0] - p.at(0)[0];
        let b = p.at(5)[0] - p.at(4)[0];
        v1 += a * a;
        v2 += b * b;
        c += a * b;
    }
    let (v1, v2, c) = (v1 / n as f64, v2 / n as f64, c / n as f64);
    assert!((v1 / 0.125 - 1.0).abs() < 0.05, "{v1}");
    assert!((v2 / 0.125 - 1.0).abs() < 0.05, "{v2}");
    let rho = c / (v1 * v2).sqrt();
    assert!(rho.abs() < 0.05, "ρ = {rho}");
}

#[test]
fn cholesky_and_circulant_agree_in_law() {
    // Same covariance: compare the empirical variance of B_1 for both samplers.
    let grid = make_uniform_grid(65, 0.0, 1.0).unwrap();
    let n = 4000;
    for method in [FbmMethod::Cholesky, FbmMethod::Circulant] {
        let mut sum = 0.0;
        for seed in 0..n {
            let p: SampledPath<f64> = sample_fbm_with(&FbmSpec { hurst: 0.4, dim: 1, seed, grid: grid.clone() }, method).unwrap();
            sum += p.at(64)[0].powi(2);
        }
        let var = sum / n as f64;
        assert!((var - 1.0).abs() < 0.08, "{method:?}: {var}");
    }
}

#[test]
fn dyadic_lift_of_linear_path() {
    let path = linear_path(33, &[1.0], 0.0, 1.0);
    let t = path.grid().points().to_vec();
    for level in 0..=5 {
        let rp = levy_area_dyadic(&path, level, 0.45).unwrap();
        for (s, u) in [(0, 32), (5, 9), (7, 30)] {
            assert_relative_eq!(ww(&rp, s, u)[0], (t[u] - t[s]).powi(2) / 2.0, epsilon = 1e-14);
        }
    }
}

#[test]
fn level_zero_is_the_chord() {
    let path = fbm(4, 32, 2, 0.4);
    let rp = levy_area_dyadic(&path, 0, 0.45).unwrap();
    let mut w = vec![0.0; 2];
    rp.w(0, 32, &mut w);
    let full = ww(&rp, 0, 32);
    for p in 0..2 {
        for q in 0..2 {
            assert_relative_eq!(full[p * 2 + q], 0.5 * w[p] * w[q], epsilon = 1e-14);
        }
    }
    // 1D: 𝕎 = ½ W² on every pair
    let rp1 = levy_area_dyadic(&fbm(4, 32, 1, 0.4), 3, 0.45).unwrap();
    let mut w1 = [0.0];
    for (s, u) in [(0, 32), (4, 12), (1, 31)] {
        rp1.w(s, u, &mut w1);
        assert_relative_eq!(ww(&rp1, s, u)[0], 0.5 * w1[0] * w1[0], epsilon = 1e-13);
    }
}

#[test]
fn dyadic_levels_converge() {
    // d(lift_L, lift_{L+1}) restricted to the fixed level-3 dyadic times
    // shrinks with L (median over 20 seeds).
    let depth = 10;
    let stride = 1 << (depth - 3);
    let grid = make_uniform_grid((1 << depth) + 1, 0.0, 1.0).unwrap();
    let sampler = FbmSampler::new(0.4, 1 << depth, FbmMethod::Cholesky).unwrap();
    let paths: Vec<SampledPath<f64>> = (0..20).map(|seed| sampler.sample_path(&grid, 0, 2, seed).unwrap()).collect();
    let mut medians = Vec::new();
    for level in 3..depth {
        let mut d: Vec<f64> = paths
            .iter()
            .map(|path| {
                let a = levy_area_dyadic(path, level, 0.35).unwrap().subsample(stride).unwrap();
                let b = levy_area_dyadic(path, level + 1, 0.35).unwrap().subsample(stride).unwrap();
                rough_distance(&a, &b, PairPolicy::AllPairs).unwrap()
            })
            .collect();
        d.sort_by(f64::total_cmp);
        medians.push((d[9] + d[10]) / 2.0);
    }
    for w in medians.windows(2) {
        assert!(w[1] < w[0], "{medians:?}");
    }
}

#[test]
fn chen_holds_for_constructed_lifts_and_detects_defects() {
    let path = fbm(9, 64, 2, 0.4);
    let rp = levy_area_dyadic(&path, 6, 0.45).unwrap();
    let rep = check_chen_exhaustive(&rp, 1e-10);
    assert!(rep.pass && rep.max_residual <= 1e-12 * rp.scale().powi(2).max(1.0));
    assert!(check_chen(&rp, 1e-10).pass);

    let mut second = rp.second_dense();
    second.get_mut(10, 40)[1] += 1.0;
    let bad = RoughPath::from_parts(path.clone(), second, 0.45).unwrap();
    let rep = check_chen(&bad, 1e-10);
    assert!(!rep.pass);
    assert!(rep.max_residual >= 1.0 - 1e-10);

    // 𝕎 + f_t − f_s with f(t) = t in every entry is again Chen-consistent.
    let t = rp.grid().points().to_vec();
    let mut moved = rp.second_dense();
    for s in 0..rp.len() {
        for u in s..rp.len() {
            for v in moved.get_mut(s, u) {
                *v += t[u] - t[s];
            }
        }
    }
    let moved = RoughPath::from_parts(path, moved, 0.45).unwrap();
    assert!(check_chen_exhaustive(&moved, 1e-10).pass);
}

#[test]
fn shift_is_a_flow() {
    let path = two_sided_fbm::<f64>(0.4, 2, 1, 2, 32).unwrap();
    let rp = levy_area_dyadic(&path, 7, 0.45).unwrap();
    assert_eq!(shift(&rp, 0.0).unwrap(), rp);
    let a = shift(&shift(&rp, 0.5).unwrap(), 0.25).unwrap();
    let b = shift(&rp, 0.75).unwrap();
    let wa = a.window(-1.0, 1.0).unwrap();
    let wb = b.window(-1.0, 1.0).unwrap();
    for s in (0..wa.len()).step_by(7) {
        for u in (s..wa.len()).step_by(5) {
            let (x, y) = (ww(&wa, s, u), ww(&wb, s, u));
            for k in 0..4 {
                assert!((x[k] - y[k]).abs() <= 1e-12);
            }
        }
        for k in 0..2 {
            assert!((wa.first().at(s)[k] - wb.first().at(s)[k]).abs() <= 1e-14);
        }
    }
    let shifted = shift(&rp, 1.0).unwrap();
    assert!(check_chen(&shifted, 1e-10).pass);
    assert!(shift(&rp, 0.01).is_err());
}

#[test]
fn lifting_commutes_with_shift() {
    let path = two_sided_fbm::<f64>(0.4, 2, 8, 2, 16).unwrap();
    let tau = 0.75;
    let a = path.grid().index_of(tau).unwrap();
    let wa = path.at(a).to_vec();
    let mut values = path.values().to_vec();
    for v in values.chunks_mut(2) {
        v[0] -= wa[0];
        v[1] -= wa[1];
    }
    let raw_shifted = SampledPath::new(path.grid().translated(tau), 2, values).unwrap();
    let lift_then_shift = shift(&lift_smooth(&path, 0.45).unwrap(), tau).unwrap();
    let shift_then_lift = lift_smooth(&raw_shifted, 0.45).unwrap();
    let scale = lift_then_shift.scale().powi(2);
    for s in (0..path.len()).step_by(3) {
        for u in (s..path.len()).step_by(4) {
            let (x, y) = (ww(&lift_then_shift, s, u), ww(&shift_then_lift, s, u));
            for k in 0..4 {
                assert!((x[k] - y[k]).abs() <= 1e-12 * scale, "({s},{u})");
            }
        }
    }
}

#[test]
fn rough_distance_examples() {
    let a = lift_smooth(&linear_path(129, &[1.0], 0.0, 1.0), 0.34).unwrap().with_alpha(1.0 / 3.0 + 1e-15).unwrap();
    let b = lift_smooth(&linear_path(129, &[2.0], 0.0, 1.0), 0.34).unwrap().with_alpha(1.0 / 3.0 + 1e-15).unwrap();
    let d = rough_distance(&a, &b, PairPolicy::AllPairs).unwrap();
    assert_relative_eq!(d, 2.5, max_relative = 1e-12);
    assert_eq!(rough_distance(&a, &a, PairPolicy::AllPairs).unwrap(), 0.0);
    assert_eq!(
        rough_distance(&a, &b, PairPolicy::AllPairs).unwrap(),
        rough_distance(&b, &a, PairPolicy::AllPairs).unwrap()
    );
}

#[test]
fn temperedness_examples() {
    let flat: Vec<(i64, f64)> = (-20..=0).map(|i| (i, 3.0)).collect();
    let rep = temperedness_diagnostic(&flat, 0.05).unwrap();
    assert_eq!(rep.slope, 0.0);
    assert!(rep.pass);
    let exp: Vec<(i64, f64)> = (-20i64..=0).map(|i| (i, (i.abs() as f64).exp())).collect();
    let rep = temperedness_diagnostic(&exp, 0.05).unwrap();
    assert!((rep.slope - 1.0).abs() < 1e-12);
    assert!(!rep.pass);
}

#[test]
fn json_round_trip() {
    let rp = levy_area_dyadic(&fbm(2, 16, 2, 0.4), 4, 0.4).unwrap();
    let text = serde_json::to_string(&rp.to_json()).unwrap();
    let back: RoughPathJson = serde_json::from_str(&text).unwrap();
    let rp2 = RoughPath::<f64>::from_json(&back).unwrap();
    assert_eq!(rp2.first(), rp.first());
    assert_eq!(rp2.second_dense(), rp.second_dense());
    assert_eq!(back.ww.len(), 17 * 18 / 2 * 4);
}

fn arb_lift() -> impl Strategy<Value = RoughPath<f64>> {
    prop::collection::vec(-1.0f64..1.0, 9 * 2).prop_map(|v| {
        let grid = make_uniform_grid(9, 0.0, 1.0).unwrap();
        lift_smooth(&SampledPath::new(grid, 2, v).unwrap(), 0.4).unwrap()
    })
}

proptest! {
    #[test]
    fn rough_distance_triangle(a in arb_lift(), b in arb_lift(), c in arb_lift()) {
        let p = PairPolicy::AllPairs;
        let ab = rough_distance(&a, &b, p).unwrap();
        let bc = rough_distance(&b, &c, p).unwrap();
        let ac = rough_distance(&a, &c, p).unwrap();
        prop_assert!(ac <= (ab + bc) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn every_smooth_lift_is_chen_exact(a in arb_lift()) {
        let rep = check_chen_exhaustive(&a, 1e-12);
        prop_assert!(rep.pass, "{:?}", rep);
    }
}
