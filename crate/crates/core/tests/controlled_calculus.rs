use approx::assert_relative_eq;
use proptest::prelude::*;

use rough_manifold::controlled_calculus::{
    compose_smooth, controlled_norms, cutoff, gubinelli_integral, gubinelli_sum, lipschitz_gap_bound,
    ControlledPath, CutoffFunction,
};
use rough_manifold::grid_paths::{make_uniform_grid, PairPolicy, SampledPath};
use rough_manifold::linalg::Mat;
use rough_manifold::rough_lift::{levy_area_dyadic, lift_smooth, sample_fbm, FbmSpec, RoughPath};
use rough_manifold::systems::{LinearCoefficient, PowerCoefficient};

const ALL: PairPolicy = PairPolicy::AllPairs;

fn fbm_lift(seed: u64, steps: usize, dim: usize) -> RoughPath<f64> {
    let grid = make_uniform_grid(steps + 1, 0.0, 1.0).unwrap();
    let path = sample_fbm(&FbmSpec { hurst: 0.4, dim, seed, grid }).unwrap();
    levy_area_dyadic(&path, steps.trailing_zeros(), 0.4).unwrap()
}

fn identity_lift(n: usize) -> RoughPath<f64> {
    let grid = make_uniform_grid(n, 0.0, 1.0).unwrap();
    lift_smooth(&SampledPath::from_fn(grid, 1, |t, o| o[0] = t), 0.45).unwrap()
}

fn scalar_cp(rp: &RoughPath<f64>, y: impl Fn(f64) -> f64, yp: impl Fn(f64) -> f64) -> ControlledPath<f64> {
    let g = rp.grid().clone();
    ControlledPath::new(
        SampledPath::from_fn(g.clone(), 1, |t, o| o[0] = y(t)),
        SampledPath::from_fn(g, 1, |t, o| o[0] = yp(t)),
        1,
    )
    .unwrap()
}

#[test]
fn norms_of_the_driver_itself() {
    let rp = fbm_lift(1, 64, 2);
    let cp = ControlledPath::from_rough(&rp);
    let n = controlled_norms(&cp, &rp, ALL).unwrap();
    assert_eq!(n.remainder_holder, 0.0);
    assert_eq!(n.yp_holder, 0.0);
    assert_eq!(n.y0, 0.0);
    assert_relative_eq!(n.yp0, 2f64.sqrt(), epsilon = 1e-15);
    assert_relative_eq!(n.norm, 2f64.sqrt(), epsilon = 1e-15);

    let z = ControlledPath::zeros(&rp, 3);
    let n = controlled_norms(&z, &rp, ALL).unwrap();
    assert_eq!((n.y0, n.yp0, n.seminorm, n.norm), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn remainder_of_a_drift_path() {
    let rp = fbm_lift(2, 32, 1);
    let v = [0.3, -0.4];
    let g = rp.grid().clone();
    let cp = ControlledPath::new(
        SampledPath::from_fn(g.clone(), 2, |t, o| {
            o[0] = t * v[0];
            o[1] = t * v[1];
        }),
        SampledPath::zeros(g, 2),
        1,
    )
    .unwrap();
    let alpha: f64 = rp.alpha();
    let t = rp.grid().points();
    let mut brute = 0.0f64;
    for s in 0..t.len() {
        for u in s + 1..t.len() {
            brute = brute.max((t[u] - t[s]) * 0.5 / (t[u] - t[s]).powf(2.0 * alpha));
        }
    }
    let n = controlled_norms(&cp, &rp, ALL).unwrap();
    assert_relative_eq!(n.remainder_holder, brute, max_relative = 1e-13);
}

#[test]
fn driver_integral_is_partition_invariant() {
    let rp = fbm_lift(3, 128, 2);
    let cp = ControlledPath::from_rough(&rp);
    let (s, t) = (16, 112);
    let mut w = [0.0; 2];
    rp.w(s, t, &mut w);
    let mut ww = [0.0; 4];
    rp.ww(s, t, &mut ww);
    let ws = rp.first().at(s).to_vec();
    let exact: Vec<f64> = (0..4).map(|k| ws[k / 2] * w[k % 2] + ww[k]).collect();
    let scale = rp.scale().powi(2);
    for partition in [vec![s, t], (s..=t).collect(), (s..=t).step_by(8).collect::<Vec<_>>(), vec![s, 17, 50, 51, 99, t]] {
        let v = gubinelli_sum(&cp, &rp, &partition).unwrap();
        for k in 0..4 {
            assert!((v[k] - exact[k]).abs() <= 1e-12 * scale, "{partition:?}");
        }
    }
}

#[test]
fn smooth_integrals() {
    let rp = identity_lift(1025);
    let half = gubinelli_integral(&scalar_cp(&rp, |t| t, |_| 1.0), &rp, 0.0, 1.0).unwrap();
    assert_relative_eq!(half.value[0], 0.5, epsilon = 1e-14);
    // the compensated sum of t² dt is Σ t_j² h + t_j h², which is 1/3 − h²/3
    let h = 1.0 / 1024.0;
    let third = gubinelli_integral(&scalar_cp(&rp, |t| t * t, |t| 2.0 * t), &rp, 0.0, 1.0).unwrap();
    assert_relative_eq!(third.value[0], 1.0 / 3.0 - h * h / 3.0, epsilon = 1e-14);
    assert!((third.value[0] - 1.0 / 3.0).abs() <= third.error_estimate);
}

#[test]
fn integral_is_additive_on_the_grid() {
    let rp = fbm_lift(4, 64, 2);
    let cp = ControlledPath::from_rough(&rp);
    let t = rp.grid().points().to_vec();
    let whole = gubinelli_integral(&cp, &rp, t[5], t[60]).unwrap().value;
    let a = gubinelli_integral(&cp, &rp, t[5], t[33]).unwrap().value;
    let b = gubinelli_integral(&cp, &rp, t[33], t[60]).unwrap().value;
    for k in 0..4 {
        assert!((whole[k] - a[k] - b[k]).abs() <= 1e-14);
    }
}

#[test]
fn composition_examples() {
    let rp = fbm_lift(5, 32, 1);
    let g = rp.grid().clone();
    let cp = ControlledPath::new(
        SampledPath::from_fn(g.clone(), 2, |t, o| {
            o[0] = t.sin();
            o[1] = t * t;
        }),
        SampledPath::from_fn(g, 2, |t, o| {
            o[0] = t;
            o[1] = 1.0;
        }),
        1,
    )
    .unwrap();
    let b = Mat::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
    let lin = LinearCoefficient::new(b.clone(), 2, 1).unwrap();
    let (out, rep) = compose_smooth(&lin, &cp, &rp).unwrap();
    for i in 0..cp.len() {
        let by = b.apply(cp.y().at(i));
        let byp = b.apply(cp.yp().at(i));
        assert_eq!(out.y().at(i), by.as_slice());
        assert_eq!(out.yp().at(i), byp.as_slice());
    }
    assert!(rep.measured <= rep.bound);

    let zero = ControlledPath::zeros(&rp, 1);
    let (z, _) = compose_smooth(&PowerCoefficient { power: 3 }, &zero, &rp).unwrap();
    assert!(z.y().values().iter().chain(z.yp().values()).all(|&v| v == 0.0));

    let w = ControlledPath::from_rough(&rp);
    let (sq, _) = compose_smooth(&PowerCoefficient { power: 2 }, &w, &rp).unwrap();
    for i in 0..w.len() {
        assert_eq!(sq.yp().at(i)[0], 2.0 * w.y().at(i)[0]);
    }
}

#[test]
fn cutoff_profile_and_regions() {
    let f = CutoffFunction;
    assert_eq!(f.value(0.0), 1.0);
    assert_eq!(f.value(0.5), 1.0);
    assert_relative_eq!(f.value(0.75), 0.5, epsilon = 1e-15);
    assert_eq!(f.value(1.0), 0.0);
    assert_eq!(f.value(3.0), 0.0);
    for k in 0..100 {
        let x = 0.5 + k as f64 / 200.0;
        assert!(f.value(x + 0.005) <= f.value(x));
    }

    let rp = fbm_lift(6, 32, 1);
    let cp = scalar_cp(&rp, |t| 0.1 * t, |_| 0.05);
    let norm = controlled_norms(&cp, &rp, ALL).unwrap().norm;
    let (same, c) = cutoff(&cp, &rp, 2.0 * norm, &f, ALL).unwrap();
    assert_eq!(c, 1.0);
    assert_eq!(same, cp);
    let (gone, c) = cutoff(&cp, &rp, norm, &f, ALL).unwrap();
    assert_eq!(c, 0.0);
    assert!(gone.y().values().iter().all(|&v| v == 0.0));
    assert!(cutoff(&cp, &rp, 0.0, &f, ALL).is_err());
}

#[test]
fn lipschitz_gap_examples() {
    let sq = PowerCoefficient { power: 2 };
    assert_eq!(lipschitz_gap_bound(&sq, &[0.4], &[0.4]).unwrap(), 0.0);
    let bound = lipschitz_gap_bound(&sq, &[0.3], &[0.1]).unwrap();
    assert_relative_eq!(bound, 0.12, epsilon = 1e-15);
    assert!((0.09f64 - 0.01).abs() <= bound);
    assert!(lipschitz_gap_bound(&PowerCoefficient { power: 1 }, &[0.3], &[0.1]).is_err());
}

#[test]
fn cubic_lipschitz_gap_on_random_pairs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let cube = PowerCoefficient { power: 3 };
    for _ in 0..1000 {
        let x: f64 = rng.random_range(-0.5..0.5);
        let y: f64 = rng.random_range(-0.5..0.5);
        let bound = lipschitz_gap_bound(&cube, &[x], &[y]).unwrap();
        assert!((x.powi(3) - y.powi(3)).abs() <= bound * (1.0 + 1e-12) + 1e-18);
    }
}

fn arb_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let v = || prop::collection::vec(-2.0f64..2.0, 17);
    (v(), v(), v(), v())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integral_is_linear((y1, d1, y2, d2) in arb_pair(), a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..50) {
        let rp = fbm_lift(seed, 16, 1);
        let g = rp.grid().clone();
        let mk = |y: &[f64], d: &[f64]| ControlledPath::new(
            SampledPath::new(g.clone(), 1, y.to_vec()).unwrap(),
            SampledPath::new(g.clone(), 1, d.to_vec()).unwrap(),
            1,
        ).unwrap();
        let (p, q) = (mk(&y1, &d1), mk(&y2, &d2));
        let combo = p.scaled(a).add(&q.scaled(b)).unwrap();
        let part: Vec<usize> = (0..17).collect();
        let lhs = gubinelli_sum(&combo, &rp, &part).unwrap()[0];
        let rhs = a * gubinelli_sum(&p, &rp, &part).unwrap()[0] + b * gubinelli_sum(&q, &rp, &part).unwrap()[0];
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn cutoff_never_increases_the_norm((y, d, _, _) in arb_pair(), r in 0.01f64..50.0, seed in 0u64..50) {
        let rp = fbm_lift(seed, 16, 1);
        let g = rp.grid().clone();
        let cp = ControlledPath::new(SampledPath::new(g.clone(), 1, y).unwrap(), SampledPath::new(g, 1, d).unwrap(), 1).unwrap();
        let f = CutoffFunction;
        let before = controlled_norms(&cp, &rp, ALL).unwrap().norm;
        let (out, c) = cutoff(&cp, &rp, r, &f, ALL).unwrap();
        let after = controlled_norms(&out, &rp, ALL).unwrap().norm;
        prop_assert!(after <= before * (1.0 + 1e-12));
        prop_assert!((0.0..=1.0).contains(&c));
        if before <= r / 2.0 {
            // plateau: applying the cut-off again changes nothing
            let (again, _) = cutoff(&out, &rp, r, &f, ALL).unwrap();
            prop_assert_eq!(again, cp);
        }
        if before >= r {
            prop_assert!(after == 0.0);
        }
    }
}
