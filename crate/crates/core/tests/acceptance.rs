//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines reach stdout. The process
//! exits non-zero when a criterion fails, except for criterion 6 whose stated
//! tolerance is below the true fourth-order remainder of the oracle series;
//! there the suite instead requires agreement with the longer series.

use std::time::{Duration, Instant};

use rough_manifold::controlled_calculus::{
    gubinelli_integral, gubinelli_sum, ControlledPath, CutoffFunction,
};
use rough_manifold::grid_paths::{make_uniform_grid, PairPolicy, SampledPath};
use rough_manifold::linear_flow::{spectral_split, DriftRule, LinearPart, SplitMode};
use rough_manifold::lp_manifold::{
    calibrate_radius_constants, deterministic_driver, gap_constant, gap_lhs, lp_contraction_probe,
    manifold_graph, tangency_check, tempered_radius, trichotomy_gap_from_constants, trichotomy_gap_lhs,
    verify_invariance, LpConfig, LpContext, ManifoldChart, TrichotomyConvention,
};
use rough_manifold::rde_solver::{
    cocycle_check, mild_residual, random_controlled_path, solve_rde, solve_rde_truncated, truncated_lipschitz,
    RadiusPolicy, SolveOptions,
};
use rough_manifold::rough_lift::{
    check_chen, levy_area_dyadic, lift_smooth, sample_fbm, temperedness_diagnostic, two_sided_fbm, FbmSpec,
    RoughPath,
};
use rough_manifold::systems::{
    system, ConstantCoefficient, LinearCoefficient, SystemName, ZeroCoefficient,
};
use rough_manifold::{Splitting64, TwoParamField64};

/// Criterion id, time budget in seconds and the check itself.
type Criterion = (usize, u64, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fbm_lift(seed: u64, horizon: usize, per_unit: usize, dim: usize, alpha: f64) -> RoughPath<f64> {
    let path = two_sided_fbm::<f64>(0.4, dim, seed, horizon, per_unit).unwrap();
    let level = (2 * horizon * per_unit).trailing_zeros();
    levy_area_dyadic(&path, level, alpha).unwrap()
}

/// Least-squares slope of `ln err` against `ln h`.
fn empirical_order(h: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|x| x.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn oracle_split(beta: f64) -> Splitting64 {
    let a = LinearPart::diag(&[0.0, -1.0]).unwrap();
    let mut split = spectral_split(&a, 1e-8, SplitMode::Dichotomy).unwrap();
    split.beta = beta;
    split
}

fn oracle_chart(name: SystemName, w: &RoughPath<f64>, radius: f64) -> ManifoldChart<f64> {
    let sys = system::<f64>(name).unwrap();
    let split = spectral_split(&sys.a, 1e-8, SplitMode::Dichotomy).unwrap();
    let gap = gap_constant(&split, 1.0).unwrap();
    let cfg = LpConfig {
        tol: 1e-13,
        drift_rule: DriftRule::Linear,
        radius: RadiusPolicy::Fixed { radius },
        ..Default::default()
    };
    ManifoldChart::new(LpContext::new(sys.dynamics(), split, gap, w, 0, cfg).unwrap()).unwrap()
}

fn criterion_1() -> Outcome {
    let n = 1024;
    let grid = make_uniform_grid(n + 1, 0.0, 1.0).unwrap();
    let smooth = SampledPath::from_fn(grid.clone(), 2, |t, v| {
        v[0] = (2.0 * std::f64::consts::PI * t).sin();
        v[1] = (3.0 * t).cos() - 1.0;
    });
    let rp = lift_smooth(&smooth, 0.45).unwrap();
    let mut worst = check_chen(&rp, 1e-10);
    let mut all = worst.pass;
    for seed in 0..20 {
        let path = sample_fbm(&FbmSpec { hurst: 0.4, dim: 2, seed, grid: grid.clone() }).unwrap();
        let lift = levy_area_dyadic(&path, 10, 0.35).unwrap();
        let rep = check_chen(&lift, 1e-10);
        all &= rep.pass;
        if rep.max_residual / rep.threshold > worst.max_residual / worst.threshold {
            worst = rep;
        }
    }
    let mut field: TwoParamField64 = rp.second_dense();
    field.get_mut(100, 700)[1] += 1.0;
    let bad = RoughPath::from_parts(rp.first().clone(), field, 0.45).unwrap();
    let defect = check_chen(&bad, 1e-10);
    let detected = !defect.pass && defect.max_residual >= 1.0 - 1e-10;
    outcome(
        all && detected,
        format!(
            "worst residual/threshold {:.2e}, injected defect residual {:.3}",
            worst.max_residual / worst.threshold,
            defect.max_residual
        ),
    )
}

fn criterion_2() -> Outcome {
    let rp = fbm_lift(4, 1, 1024, 2, 0.4).window(0.0, 1.0).unwrap();
    let cp = ControlledPath::from_rough(&rp);
    let finest: Vec<usize> = (0..rp.len()).collect();
    let reference = gubinelli_sum(&cp, &rp, &finest).unwrap();
    let scale = reference.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut invariance = 0.0f64;
    for stride in [2usize, 8, 64, 1024] {
        let part: Vec<usize> = (0..rp.len()).step_by(stride).collect();
        let v = gubinelli_sum(&cp, &rp, &part).unwrap();
        for (a, b) in v.iter().zip(&reference) {
            invariance = invariance.max((a - b).abs() / scale);
        }
    }
    let irregular = [0usize, 3, 17, 18, 500, 777, 1000, 1024];
    for (a, b) in gubinelli_sum(&cp, &rp, &irregular).unwrap().iter().zip(&reference) {
        invariance = invariance.max((a - b).abs() / scale);
    }
    let alpha = 0.45;
    let (mut hs, mut errs) = (Vec::new(), Vec::new());
    for k in 6..=11 {
        let steps = 1usize << k;
        let grid = make_uniform_grid(steps + 1, 0.0, 1.0).unwrap();
        let w = lift_smooth(&SampledPath::from_fn(grid.clone(), 1, |t, v| v[0] = t), alpha).unwrap();
        let y = SampledPath::from_fn(grid.clone(), 1, |t, v| v[0] = t * t);
        let yp = SampledPath::from_fn(grid, 1, |t, v| v[0] = 2.0 * t);
        let cp = ControlledPath::new(y, yp, 1).unwrap();
        let value: f64 = gubinelli_integral(&cp, &w, 0.0, 1.0).unwrap().value[0];
        hs.push(1.0 / steps as f64);
        errs.push((value - 1.0 / 3.0).abs());
    }
    let order = empirical_order(&hs, &errs);
    let decreasing = errs.windows(2).all(|e| e[1] < e[0]);
    outcome(
        invariance <= 1e-12 && decreasing && order >= 3.0 * alpha - 1.0,
        format!("partition invariance {invariance:.2e}, order {order:.3} (need {:.2})", 3.0 * alpha - 1.0),
    )
}

fn criterion_3() -> Outcome {
    let opts = SolveOptions::default();
    let rp = fbm_lift(8, 1, 1024, 2, 0.4).window(0.0, 1.0).unwrap();
    let a0 = LinearPart::diag(&[0.0, 0.0]).unwrap();
    let xi = [0.3, -0.2];
    let zero2 = ZeroCoefficient { input_dim: 2, rows: 2, cols: 1 };
    let id = ConstantCoefficient::<f64>::identity(2);
    let sol = solve_rde(&a0, &zero2, &id, &xi, &rp, &opts).unwrap();
    let mut additive = 0.0f64;
    for j in 0..rp.len() {
        let w = rp.first().at(j);
        let w0 = rp.first().at(0);
        for k in 0..2 {
            additive = additive.max((sol.path.y().at(j)[k] - (xi[k] + w[k] - w0[k])).abs());
        }
    }
    let grid = make_uniform_grid(1025, 0.0, 1.0).unwrap();
    let smooth = SampledPath::from_fn(grid, 1, |t, v| v[0] = 0.5 * (2.0 * std::f64::consts::PI * t).sin() + t);
    let w = lift_smooth(&smooth, 0.45).unwrap();
    let a1 = LinearPart::diag(&[0.0]).unwrap();
    let zero1 = ZeroCoefficient { input_dim: 1, rows: 1, cols: 1 };
    let g = LinearCoefficient::<f64>::identity(1);
    let sol = solve_rde(&a1, &zero1, &g, &[0.7], &w, &opts).unwrap();
    let mut geometric = 0.0f64;
    for j in 0..w.len() {
        let exact = 0.7 * w.first().at(j)[0].exp();
        geometric = geometric.max((sol.path.y().at(j)[0] - exact).abs());
    }
    let sys = system::<f64>(SystemName::RoughOracle).unwrap();
    let rp1 = fbm_lift(9, 1, 1024, 1, 0.35).window(0.0, 1.0).unwrap();
    let xi = [0.4, 0.3];
    let sol = solve_rde(&sys.a, sys.f.as_ref(), sys.g.as_ref(), &xi, &rp1, &opts).unwrap();
    let res = mild_residual(&sys.a, sys.f.as_ref(), sys.g.as_ref(), &xi, &rp1, &sol, opts.drift_rule).unwrap();
    let mild = res.value.max(res.derivative);
    outcome(
        additive <= 1e-12 && geometric <= 1e-4 && mild <= opts.tol,
        format!("additive {additive:.2e}, geometric {geometric:.2e}, mild residual {mild:.2e} (tol {:.0e})", opts.tol),
    )
}

/// Gaps that never exceed this are exact to solver tolerance at every mesh.
const COCYCLE_FLOOR: f64 = 1e-10;

fn criterion_4() -> Outcome {
    let opts = SolveOptions::default();
    let alpha = 0.35;
    let lin = system::<f64>(SystemName::Linear).unwrap();
    let sys = system::<f64>(SystemName::RoughOracle).unwrap();
    let xi = [0.5, 0.2];
    let mut linear_gap = 0.0f64;
    let levels = [8u32, 9, 10, 11];
    let mut gaps = vec![Vec::new(); levels.len()];
    for seed in 0..10 {
        let fine = fbm_lift(100 + seed, 2, 1 << 11, 1, alpha);
        for (j, &k) in levels.iter().enumerate() {
            let rp = fine.subsample(1 << (11 - k)).unwrap();
            let r = cocycle_check(&lin.a, lin.f.as_ref(), lin.g.as_ref(), &xi, &rp, 0.5, 0.5, 1e-10, &opts).unwrap();
            linear_gap = linear_gap.max(r.gap);
            let r = cocycle_check(&sys.a, sys.f.as_ref(), sys.g.as_ref(), &xi, &rp, 0.5, 0.5, 1e-3, &opts).unwrap();
            gaps[j].push(r.gap);
        }
    }
    let medians: Vec<f64> = gaps.iter_mut().map(|g| median(g)).collect();
    let worst = gaps.iter().flatten().fold(0.0f64, |m, &g| m.max(g));
    let hs: Vec<f64> = levels.iter().map(|&k| 0.5f64.powi(k as i32)).collect();
    let at_floor = worst <= COCYCLE_FLOOR;
    let order = if medians.iter().all(|&m| m > 0.0) { empirical_order(&hs, &medians) } else { f64::NAN };
    let rough_ok = at_floor || order >= alpha;
    outcome(
        linear_gap <= 1e-10 && rough_ok,
        format!(
            "linear gap {linear_gap:.2e}; rough median gaps {:?}, max {worst:.2e}, {}",
            medians.iter().map(|m| format!("{m:.1e}")).collect::<Vec<_>>(),
            if at_floor {
                format!("exact to the {COCYCLE_FLOOR:.0e} floor at every mesh")
            } else {
                format!("order {order:.3}")
            }
        ),
    )
}

fn criterion_5() -> Outcome {
    let sys = system::<f64>(SystemName::RoughOracle).unwrap();
    let split = oracle_split(1.0);
    let gap = gap_constant(&split, 1.0).unwrap();
    let k_oracle = 1.0 / (4.0 * 0.5f64.exp() * (2.0 * 0.5f64.exp() + 1.0) / (1.0 - (-0.5f64).exp()));
    let w = fbm_lift(3, 32, 64, 1, 0.35);
    let fiber = w.fiber(-1.0, 1.0).unwrap();
    let cal = calibrate_radius_constants(&sys.dynamics(), &fiber, 0.5, 10, 11, &SolveOptions::default()).unwrap();
    let cfg = LpConfig { radius: RadiusPolicy::Tempered { k: gap.k, cf: cal.cf, cg: cal.cg }, ..Default::default() };
    let ctx = LpContext::new(sys.dynamics(), split, gap, &w, 0, cfg).unwrap();
    let mut worst = 0.0f64;
    for s in 0..20u64 {
        let u = ctx.random_sequence(0.6, 2 * s).unwrap();
        let v = ctx.random_sequence(0.6, 2 * s + 1).unwrap();
        worst = worst.max(lp_contraction_probe(&ctx, &u, &v, &[0.0, 0.0]).unwrap());
    }
    outcome(
        (gap.k - k_oracle).abs() <= 1e-12 && worst <= 0.30,
        format!("K = {:.6} (oracle {k_oracle:.6}), worst factor {worst:.4}", gap.k),
    )
}

/// `h(x) = x² − 2x⁴ + 12x⁶ − 112x⁸ + 1360x¹⁰` from `h′(x)·x·h(x) = x² − h(x)`.
fn oracle_series(x: f64, terms: usize) -> f64 {
    let c = [1.0, -2.0, 12.0, -112.0, 1360.0];
    c.iter().take(terms).enumerate().map(|(k, c)| c * x.powi(2 * k as i32 + 2)).sum()
}

fn criterion_6() -> (Outcome, bool) {
    let w = deterministic_driver::<f64>(30, 2, 1 << 10, 0.45).unwrap();
    let chart = oracle_chart(SystemName::DetOracle, &w, 1.0);
    let mut literal = true;
    let mut long = true;
    let mut lines = Vec::new();
    for x in [0.01, 0.02, 0.05, 0.1] {
        let h = manifold_graph(&chart, &[x, 0.0]).unwrap().value[1];
        let e2 = (h - oracle_series(x, 2)).abs();
        let e5 = (h - oracle_series(x, 5)).abs();
        literal &= e2 <= 5.0 * x.powi(6);
        long &= e5 <= 20_000.0 * x.powi(12) + 1e-12;
        lines.push(format!("x={x}: |h−(x²−2x⁴)|={e2:.2e} vs 5x⁶={:.2e}, |h−series₁₀|={e5:.1e}", 5.0 * x.powi(6)));
    }
    (outcome(literal, lines.join("; ")), long)
}

fn criterion_7() -> Outcome {
    let w = deterministic_driver::<f64>(30, 2, 1 << 10, 0.45).unwrap();
    let chart = oracle_chart(SystemName::DetOracle, &w, 1.0);
    let h0 = manifold_graph(&chart, &[0.0, 0.0]).unwrap().value;
    let h0n = h0.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let t = tangency_check(&chart, 1e-3).unwrap();
    let ratio_ok = t.ratio.iter().all(|r| (r - 2.0).abs() <= 0.05);
    let central_ok = t.central.iter().all(|&c| c <= 1e-4);
    let second = t.half_second[0][1];
    let rough = oracle_chart(SystemName::RoughOracle, &fbm_lift(21, 32, 256, 1, 0.35), 0.5);
    let rh0 = manifold_graph(&rough, &[0.0, 0.0]).unwrap().value;
    let rt = tangency_check(&rough, 1e-3).unwrap();
    let rough_ok = rh0.iter().all(|x| x.abs() <= 1e-10)
        && rt.central.iter().all(|&c| c <= 1e-4)
        && rt.ratio.iter().all(|r| (r - 2.0).abs() <= 0.05);
    let lip_ok = chart.l_gamma.is_finite() && rough.l_gamma.is_finite();
    outcome(
        h0n <= 1e-10 && central_ok && ratio_ok && (second - 1.0).abs() <= 1e-2 && rough_ok && lip_ok,
        format!(
            "h(0)={h0n:.1e}, central {:.1e}, ratio {:.4}, D²h/2 {second:.5}, L_Γ {:.4}; rough chart central {:.1e}, ratio {:.4}, L_Γ {:.4}",
            t.central[0], t.ratio[0], chart.l_gamma, rt.central[0], rt.ratio[0], rough.l_gamma
        ),
    )
}

fn criterion_8() -> Outcome {
    let lin_w = fbm_lift(31, 32, 256, 1, 0.35);
    let lin = oracle_chart(SystemName::Linear, &lin_w, 1.0);
    let lin_rep = verify_invariance(&lin, &lin_w, &[0.3, 0.0], 3, 1e-10, None).unwrap();
    let det_w = deterministic_driver::<f64>(30, 4, 1 << 10, 0.45).unwrap();
    let det = oracle_chart(SystemName::DetOracle, &det_w, 1.0);
    let det_rep = verify_invariance(&det, &det_w, &[0.05, 0.0], 3, 1e-6, None).unwrap();
    let levels = [5u32, 6, 7, 8];
    let mut gaps = vec![Vec::new(); levels.len()];
    for seed in 0..20 {
        let fine = fbm_lift(200 + seed, 32, 1 << 10, 1, 0.35);
        for (j, &k) in levels.iter().enumerate() {
            let rp = fine.subsample(1 << (10 - k)).unwrap();
            let chart = oracle_chart(SystemName::RoughOracle, &rp, 0.5);
            let rep = verify_invariance(&chart, &rp, &[0.1, 0.0], 1, 1e-3, Some(&fine)).unwrap();
            gaps[j].push(rep.max_gap);
        }
    }
    let medians: Vec<f64> = gaps.iter_mut().map(|g| median(g)).collect();
    let decreasing = medians.windows(2).all(|m| m[1] < m[0]);
    outcome(
        lin_rep.max_gap <= 1e-10 && det_rep.max_gap <= 1e-6 && decreasing,
        format!(
            "linear {:.1e}, det-oracle {:.1e}, rough medians {:?}",
            lin_rep.max_gap,
            det_rep.max_gap,
            medians.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_9() -> Outcome {
    let sys = system::<f64>(SystemName::RoughOracle).unwrap();
    let gap = gap_constant(&oracle_split(0.9), 1.0).unwrap();
    let reference = fbm_lift(3, 32, 64, 1, 0.35).fiber(-1.0, 1.0).unwrap();
    let cal = calibrate_radius_constants(&sys.dynamics(), &reference, 0.5, 10, 11, &SolveOptions::default()).unwrap();
    let (mut sw, mut sr) = (0.0, 0.0);
    let seeds = 20;
    for seed in 0..seeds {
        let w = fbm_lift(300 + seed, 32, 64, 2, 0.35);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for i in -32i64..32 {
            let f = w.fiber(i as f64, 1.0).unwrap();
            let wn = f.w_norm(PairPolicy::DyadicPairs);
            let wwn = f.ww_norm(PairPolicy::DyadicPairs);
            a.push((i, wn));
            b.push((i, 1.0 / tempered_radius(gap.k, cal.cf, cal.cg, wn, wwn).unwrap()));
        }
        sw += temperedness_diagnostic(&a, 0.05).unwrap().slope;
        sr += temperedness_diagnostic(&b, 0.05).unwrap().slope;
    }
    let (mw, mr) = (sw / seeds as f64, sr / seeds as f64);
    outcome(mw < 0.05 && mr < 0.05, format!("mean slope ‖Θ_iB‖_α {mw:.4}, 1/R(Θ_iW) {mr:.4}"))
}

fn criterion_10() -> Outcome {
    let sys = system::<f64>(SystemName::RoughOracle).unwrap();
    let w = fbm_lift(5, 2, 1 << 10, 1, 0.35);
    let fiber = w.fiber(0.0, 1.0).unwrap();
    let opts = SolveOptions { radius: RadiusPolicy::Fixed { radius: 4.0 }, ..Default::default() };
    let xi = [0.1, 0.05];
    let plain = solve_rde(&sys.a, sys.f.as_ref(), sys.g.as_ref(), &xi, &fiber, &opts).unwrap();
    let cut = solve_rde_truncated(&sys.a, sys.f.as_ref(), sys.g.as_ref(), &xi, &fiber, &CutoffFunction, &opts).unwrap();
    let norm = cut.segments.iter().map(|s| s.norm).fold(0.0, f64::max);
    let diff = plain
        .path
        .y()
        .values()
        .iter()
        .zip(cut.path.y().values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut ratios = Vec::new();
    for r in [1.0, 0.25, 0.0625, 0.015625] {
        let mut worst = 0.0f64;
        for s in 0..10u64 {
            let p = random_controlled_path(&fiber, 2, r / 4.0, 2 * s).unwrap();
            let q = random_controlled_path(&fiber, 2, r / 4.0, 2 * s + 1).unwrap();
            let l = truncated_lipschitz(&sys.a, sys.f.as_ref(), sys.g.as_ref(), &fiber, r, &CutoffFunction, (&p, &q), &opts)
                .unwrap();
            worst = worst.max(l.full);
        }
        ratios.push(worst);
    }
    let monotone = ratios.windows(2).all(|r| r[1] < r[0]);
    outcome(
        norm <= 2.0 && diff <= opts.tol && monotone,
        format!(
            "norm {norm:.3} ≤ R/2 = 2, |plain − truncated| {diff:.1e}, Lipschitz ratios {:?}",
            ratios.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut worst = 0.0f64;
    let cases = [(1.0, 0.0, 1.0, 1.0, 1.0), (2.0, 0.3, 2.5, 1.7, 1.2), (0.7, 0.1, 0.4, 3.0, 1.0)];
    for &(beta, gamma, c_s, ms, mc) in &cases {
        let k = 0.01;
        for eta in [-0.5 * (beta - gamma), -0.2 * beta, -0.8 * beta] {
            let d = gap_lhs(k, beta, gamma, eta, c_s, ms, mc);
            let t = trichotomy_gap_lhs(k, beta, -gamma, beta, -eta, c_s, mc, None, ms, TrichotomyConvention::NegativeWeight);
            worst = worst.max((d - t).abs());
        }
    }
    let split = oracle_split(1.0);
    let g = gap_constant(&split, 1.0).unwrap();
    let t = trichotomy_gap_from_constants(1.0, 0.0, 1.0, 1.0, None, 1.0, 1.0, Some(-g.eta), TrichotomyConvention::NegativeWeight)
        .unwrap();
    let at_k = trichotomy_gap_lhs(g.k, 1.0, 0.0, 1.0, -g.eta, 1.0, 1.0, None, 1.0, TrichotomyConvention::NegativeWeight);
    worst = worst.max((at_k - g.lhs).abs());
    let boundary = (t.k_boundary - 0.25 / (g.lhs / g.k)).abs() / t.k_boundary;
    outcome(worst <= 1e-12 && boundary <= 1e-12, format!("max |dichotomy − trichotomy| {worst:.1e}"))
}

fn report(id: usize, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed();
    let pass = o.pass && elapsed <= limit;
    println!(
        "criterion {id:>2}: {} ({:.1}s / {}s) {}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        o.detail
    );
    pass
}

fn main() {
    let secs = Duration::from_secs;
    let mut failed = Vec::new();
    let runs: [Criterion; 5] = [
        (1, 10, criterion_1),
        (2, 30, criterion_2),
        (3, 30, criterion_3),
        (4, 120, criterion_4),
        (5, 120, criterion_5),
    ];
    for (id, limit, f) in runs {
        if !report(id, secs(limit), f) {
            failed.push(id);
        }
    }
    let mut long_series = false;
    let pass6 = report(6, secs(60), || {
        let (o, long) = criterion_6();
        long_series = long;
        o
    });
    println!(
        "criterion  6 (extended series x² − 2x⁴ + 12x⁶ − 112x⁸ + 1360x¹⁰): {}",
        if long_series { "PASS" } else { "FAIL" }
    );
    if !long_series {
        failed.push(6);
    } else if !pass6 {
        println!("criterion  6: stated tolerance 5|x|⁶ is below the series remainder 12x⁶; not counted");
    }
    let runs: [Criterion; 5] = [
        (7, 60, criterion_7),
        (8, 300, criterion_8),
        (9, 120, criterion_9),
        (10, 60, criterion_10),
        (11, 10, criterion_11),
    ];
    for (id, limit, f) in runs {
        if !report(id, secs(limit), f) {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
