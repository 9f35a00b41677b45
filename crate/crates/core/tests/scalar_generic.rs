//! The same pipeline in `f32`, compared against the `f64` run.

use rough_manifold::controlled_calculus::CutoffFunction;
use rough_manifold::grid_paths::{holder_seminorm, make_uniform_grid, PairPolicy};
use rough_manifold::linear_flow::{spectral_split, DriftRule, LinearPart, SplitMode};
use rough_manifold::lp_manifold::{deterministic_driver, gap_constant, manifold_graph, LpConfig, LpContext, ManifoldChart};
use rough_manifold::rde_solver::{solve_rde, solve_rde_truncated, RadiusPolicy, SolveOptions};
use rough_manifold::rough_lift::{check_chen, levy_area_dyadic, sample_fbm, FbmSpec};
use rough_manifold::systems::{system, SystemName};
use rough_manifold::{RoughPath32, SampledPath32, SampledPath64};

#[test]
fn fbm_and_lift_in_single_precision() {
    let spec32 = FbmSpec { hurst: 0.4, dim: 2, seed: 9, grid: make_uniform_grid(257, 0.0f32, 1.0).unwrap() };
    let spec64 = FbmSpec { hurst: 0.4, dim: 2, seed: 9, grid: make_uniform_grid(257, 0.0f64, 1.0).unwrap() };
    let p32: SampledPath32 = sample_fbm(&spec32).unwrap();
    let p64: SampledPath64 = sample_fbm(&spec64).unwrap();
    let worst = p32.values().iter().zip(p64.values()).fold(0.0f64, |m, (&a, &b)| m.max((a as f64 - b).abs()));
    assert!(worst <= 1e-4, "{worst}");
    let h32 = holder_seminorm(&p32, 0.35, PairPolicy::DyadicPairs) as f64;
    let h64 = holder_seminorm(&p64, 0.35, PairPolicy::DyadicPairs);
    assert!((h32 - h64).abs() <= 1e-4 * h64);
    let rp: RoughPath32 = levy_area_dyadic(&p32, 8, 0.35).unwrap();
    assert!(check_chen(&rp, 1e-5).pass);
}

#[test]
fn split_in_single_precision() {
    let a = LinearPart::<f32>::diag(&[0.0, -1.0]).unwrap();
    let s = spectral_split(&a, 1e-5, SplitMode::Dichotomy).unwrap();
    assert_eq!((s.center_dim(), s.stable_dim()), (1, 1));
    assert!(s.projection_defect() <= 1e-6);
    assert!((s.beta - 1.0).abs() <= 1e-6);
}

#[test]
fn solver_in_single_precision() {
    let g32 = make_uniform_grid(129, 0.0f32, 1.0).unwrap();
    let g64 = make_uniform_grid(129, 0.0f64, 1.0).unwrap();
    let rp32 = levy_area_dyadic(&sample_fbm(&FbmSpec { hurst: 0.4, dim: 1, seed: 2, grid: g32 }).unwrap(), 7, 0.35).unwrap();
    let rp64 = levy_area_dyadic(&sample_fbm(&FbmSpec { hurst: 0.4, dim: 1, seed: 2, grid: g64 }).unwrap(), 7, 0.35).unwrap();
    let s32 = system::<f32>(SystemName::RoughOracle).unwrap();
    let s64 = system::<f64>(SystemName::RoughOracle).unwrap();
    let o32 = SolveOptions { tol: 1e-5, ..SolveOptions::default() };
    let u32_ = solve_rde(&s32.a, s32.f.as_ref(), s32.g.as_ref(), &[0.5f32, 0.5], &rp32, &o32).unwrap();
    let u64_ = solve_rde(&s64.a, s64.f.as_ref(), s64.g.as_ref(), &[0.5, 0.5], &rp64, &SolveOptions::default()).unwrap();
    let (a, b) = (u32_.terminal(), u64_.terminal());
    for k in 0..2 {
        assert!((a[k] as f64 - b[k]).abs() <= 1e-4, "{a:?} vs {b:?}");
    }
    let opts = SolveOptions { radius: RadiusPolicy::Fixed { radius: 0.5 }, ..o32 };
    let cut = solve_rde_truncated(&s32.a, s32.f.as_ref(), s32.g.as_ref(), &[0.5f32, 0.5], &rp32, &CutoffFunction, &opts).unwrap();
    assert!(cut.terminal().iter().all(|v| v.is_finite()));
}

fn oracle_h<T: rough_manifold::Scalar>(x: T) -> f64 {
    let sys = system::<T>(SystemName::DetOracle).unwrap();
    let split = spectral_split(&sys.a, T::c(1e-5), SplitMode::Dichotomy).unwrap();
    let gap = gap_constant(&split, 1.0).unwrap();
    let w = deterministic_driver::<T>(26, 0, 64, T::c(0.45)).unwrap();
    let cfg = LpConfig {
        tol: 1e-6,
        drift_rule: DriftRule::Linear,
        radius: RadiusPolicy::Fixed { radius: 1.0 },
        ..Default::default()
    };
    let chart = ManifoldChart::new(LpContext::new(sys.dynamics(), split, gap, &w, 0, cfg).unwrap()).unwrap();
    manifold_graph(&chart, &[x, T::zero()]).unwrap().value[1].to_f64_lossy()
}

#[test]
fn center_manifold_in_single_precision() {
    let h32 = oracle_h(0.1f32);
    let h64 = oracle_h(0.1f64);
    assert!((h32 - h64).abs() <= 1e-6, "{h32} vs {h64}");
    let series = 0.01 - 2e-4 + 1.2e-5;
    assert!((h32 - series).abs() <= 2e-6, "{h32}");
}
