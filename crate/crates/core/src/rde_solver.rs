//! Picard solution of the mild equation
//! `U_t = S(t)ξ + ∫₀ᵗ S(t−r)F(U_r)dr + ∫₀ᵗ S(t−r)G(U_r)dW_r`,
//! plain and with the path-level cut-off, and the cocycle check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::controlled_calculus::{controlled_norms, ControlledPath, CutoffFunction, SmoothCoefficient};
use crate::error::{invalid, Error, Result};
use crate::grid_paths::{PairPolicy, SampledPath};
use crate::linear_flow::{rough_germ, uniform_kernel, DriftRule, LinearPart, StepKernel};
use crate::lp_manifold::tempered_radius;
use crate::rough_lift::{shift, RoughPath};
use crate::scalar::{dist2, Scalar};

/// How the cut-off radius of a unit fiber is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RadiusPolicy {
    Fixed { radius: f64 },
    /// `R(W) = min(K / (CF + CG (1+‖W‖_α)(‖W‖_α + ‖𝕎‖_{2α})), 1)` per fiber.
    Tempered { k: f64, cf: f64, cg: f64 },
}

impl Default for RadiusPolicy {
    fn default() -> Self {
        RadiusPolicy::Fixed { radius: 1.0 }
    }
}

impl RadiusPolicy {
    pub fn radius<T: Scalar>(&self, fiber: &RoughPath<T>, policy: PairPolicy) -> Result<f64> {
        match *self {
            RadiusPolicy::Fixed { radius } => {
                if !(radius > 0.0) {
                    return invalid("cut-off radius must be positive");
                }
                Ok(radius)
            }
            RadiusPolicy::Tempered { k, cf, cg } => tempered_radius(
                k,
                cf,
                cg,
                fiber.w_norm(policy).to_f64_lossy(),
                fiber.ww_norm(policy).to_f64_lossy(),
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Picard update tolerance in the controlled-path norm.
    pub tol: f64,
    /// Initial number of subintervals of the plain solver.
    pub subintervals: usize,
    /// Smallest subinterval (in grid cells) reached by halving.
    pub min_cells: usize,
    /// Halve the subinterval when a Picard update ratio exceeds this.
    pub contraction_limit: f64,
    pub drift_rule: DriftRule,
    pub pair_policy: PairPolicy,
    pub radius: RadiusPolicy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-10,
            subintervals: 1,
            min_cells: 4,
            contraction_limit: 0.9,
            drift_rule: DriftRule::LeftPoint,
            pair_policy: PairPolicy::DyadicPairs,
            radius: RadiusPolicy::default(),
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || self.subintervals == 0 || self.min_cells == 0 {
            return invalid("solver options need tol > 0 and positive counts");
        }
        Ok(())
    }
}

/// Diagnostics of one subinterval (plain solver) or unit fiber (truncated solver).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentReport {
    pub start: usize,
    pub end: usize,
    pub iterations: usize,
    /// Controlled-path norm of the solution on the segment.
    pub norm: f64,
    /// Largest ratio of successive Picard updates.
    pub contraction: f64,
    pub final_update: f64,
    pub halvings: usize,
    pub radius: Option<f64>,
    pub cutoff: Option<f64>,
}

/// Solution pair `(U, U′ = G(U))` with diagnostics.
#[derive(Clone, Debug)]
pub struct RdeSolution<T> {
    pub path: ControlledPath<T>,
    /// Picard update norms, concatenated over segments.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub segments: Vec<SegmentReport>,
}

impl<T: Scalar> RdeSolution<T> {
    pub fn terminal(&self) -> &[T] {
        self.path.y().at(self.path.len() - 1)
    }
}

/// The mild map on grid indices `a..=b` of a fixed rough path.
pub(crate) struct MildMap<'a, T: Scalar> {
    pub f: &'a dyn SmoothCoefficient<T>,
    pub g: &'a dyn SmoothCoefficient<T>,
    pub rp: &'a RoughPath<T>,
    pub kernel: StepKernel<T>,
    pub rule: DriftRule,
    pub n: usize,
    pub d: usize,
}

/// Which parts of the mild map to include.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Parts {
    pub drift: bool,
    pub rough: bool,
}

pub(crate) const ALL_PARTS: Parts = Parts { drift: true, rough: true };

impl<'a, T: Scalar> MildMap<'a, T> {
    pub fn new(
        lp: &LinearPart<T>,
        f: &'a dyn SmoothCoefficient<T>,
        g: &'a dyn SmoothCoefficient<T>,
        rp: &'a RoughPath<T>,
        rule: DriftRule,
    ) -> Result<Self> {
        Self::with_kernel(uniform_kernel(lp, rp.grid())?, lp.dim(), f, g, rp, rule)
    }

    /// As [`MildMap::new`] with a precomputed kernel for the mesh of `rp`.
    pub fn with_kernel(
        kernel: StepKernel<T>,
        n: usize,
        f: &'a dyn SmoothCoefficient<T>,
        g: &'a dyn SmoothCoefficient<T>,
        rp: &'a RoughPath<T>,
        rule: DriftRule,
    ) -> Result<Self> {
        let d = rp.dim();
        if f.input_dim() != n || f.output_len() != n {
            return invalid(format!("drift {} must map ℝ^{n} to ℝ^{n}", f.name()));
        }
        if g.input_dim() != n || g.output_shape() != (n, d) {
            return invalid(format!("diffusion {} must map ℝ^{n} to ℝ^({n}x{d})", g.name()));
        }
        if kernel.prop.rows() != n {
            return invalid("step kernel dimension does not match the state");
        }
        Ok(Self { f, g, rp, kernel, rule, n, d })
    }

    /// `(S(·)u0 + ∫S F(cY) + ∫S G(cY) dW, G(cY))` on indices `a..=b` for the
    /// input pair `(Y, Y′)` given on the same indices.
    pub fn apply(&self, a: usize, u0: &[T], y: &[T], yp: &[T], c: T, parts: Parts) -> (Vec<T>, Vec<T>) {
        let (n, d) = (self.n, self.d);
        let nd = n * d;
        let len = y.len() / n;
        let mut fv = vec![T::zero(); len * n];
        let mut gv = vec![T::zero(); len * nd];
        let mut gd = vec![T::zero(); len * nd * d];
        let mut cy = vec![T::zero(); n];
        let mut v = vec![T::zero(); n];
        let mut dv = vec![T::zero(); nd];
        for j in 0..len {
            for (o, &x) in cy.iter_mut().zip(&y[j * n..(j + 1) * n]) {
                *o = c * x;
            }
            if parts.drift {
                self.f.eval(&cy, &mut fv[j * n..(j + 1) * n]);
            }
            self.g.eval(&cy, &mut gv[j * nd..(j + 1) * nd]);
            if parts.rough {
                let ypj = &yp[j * nd..(j + 1) * nd];
                for p in 0..d {
                    for b in 0..n {
                        v[b] = c * ypj[b * d + p];
                    }
                    self.g.deriv(&cy, &v, &mut dv);
                    for (row, &x) in dv.iter().enumerate() {
                        gd[j * nd * d + row * d + p] = x;
                    }
                }
            }
        }
        let mut out = vec![T::zero(); len * n];
        out[..n].copy_from_slice(u0);
        let mut w = vec![T::zero(); d];
        let mut ww = vec![T::zero(); d * d];
        let mut acc = vec![T::zero(); n];
        for j in 0..len - 1 {
            acc.copy_from_slice(&out[j * n..(j + 1) * n]);
            if parts.rough {
                self.rp.w(a + j, a + j + 1, &mut w);
                self.rp.ww(a + j, a + j + 1, &mut ww);
                let mut germ = vec![T::zero(); n];
                rough_germ(
                    &gv[j * nd..(j + 1) * nd],
                    &gd[j * nd * d..(j + 1) * nd * d],
                    &w,
                    &ww,
                    n,
                    d,
                    &mut germ,
                );
                for (x, g) in acc.iter_mut().zip(germ) {
                    *x += g;
                }
            }
            let next = &mut out[(j + 1) * n..(j + 2) * n];
            self.kernel.prop.matvec(&acc, next);
            if parts.drift {
                self.kernel.add_drift(self.rule, &fv[j * n..(j + 1) * n], &fv[(j + 1) * n..(j + 2) * n], next);
            }
        }
        if !parts.rough {
            gv.iter_mut().for_each(|x| *x = T::zero());
        }
        (out, gv)
    }
}

/// Controlled-path norm of the pair `(y, yp)` against `rp` (same length).
pub(crate) fn pair_norm<T: Scalar>(rp: &RoughPath<T>, n: usize, y: &[T], yp: &[T], policy: PairPolicy) -> Result<T> {
    let grid = rp.grid().clone();
    let d = rp.dim();
    let cp = ControlledPath::new(
        SampledPath::new(grid.clone(), n, y.to_vec())?,
        SampledPath::new(grid, n * d, yp.to_vec())?,
        d,
    )?;
    Ok(controlled_norms(&cp, rp, policy)?.norm)
}

pub(crate) fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

fn check_finite<T: Scalar>(v: &[T], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure(format!("{what} produced non-finite values")));
    }
    Ok(())
}

fn check_inputs<T: Scalar>(lp: &LinearPart<T>, xi: &[T], rp: &RoughPath<T>) -> Result<()> {
    if xi.len() != lp.dim() {
        return invalid(format!("ξ has length {}, expected {}", xi.len(), lp.dim()));
    }
    if rp.len() < 2 {
        return invalid("the rough path needs at least two grid points");
    }
    Ok(())
}

struct Segment<T> {
    y: Vec<T>,
    yp: Vec<T>,
    report: SegmentReport,
    residuals: Vec<f64>,
}

/// Picard iteration on indices `a..=b` starting from `start`, or from the
/// constant pair `(u0, G(u0))` without one. With a radius, the cut-off factor
/// is recomputed from each iterate's norm.
#[allow(clippy::too_many_arguments)]
fn picard_segment<T: Scalar>(
    map: &MildMap<'_, T>,
    a: usize,
    b: usize,
    u0: &[T],
    start: Option<(&[T], &[T])>,
    opts: &SolveOptions,
    radius: Option<(f64, &CutoffFunction)>,
    halve: bool,
) -> Result<std::result::Result<Segment<T>, usize>> {
    let (n, d) = (map.n, map.d);
    let len = b - a + 1;
    let sub_rp = map.rp.restrict(a, b)?;
    let mut g0 = vec![T::zero(); n * d];
    map.g.eval(u0, &mut g0);
    let (mut y, mut yp): (Vec<T>, Vec<T>) = match start {
        Some((y, yp)) => (y.to_vec(), yp.to_vec()),
        None => (u0.iter().copied().cycle().take(len * n).collect(), g0.iter().copied().cycle().take(len * n * d).collect()),
    };
    let mut residuals = Vec::new();
    let mut contraction = 0.0f64;
    let mut cutoff = None;
    for k in 1..=opts.max_iter {
        let c = match radius {
            Some((r, f)) => {
                let norm = pair_norm(&sub_rp, n, &y, &yp, opts.pair_policy)?;
                let c = f.value(norm / T::c(r));
                cutoff = Some(c.to_f64_lossy());
                c
            }
            None => T::one(),
        };
        let (yn, ypn) = map.apply(a, u0, &y, &yp, c, ALL_PARTS);
        check_finite(&yn, "Picard iteration")?;
        let r = pair_norm(&sub_rp, n, &sub(&yn, &y), &sub(&ypn, &yp), opts.pair_policy)?.to_f64_lossy();
        y = yn;
        yp = ypn;
        if let Some(&prev) = residuals.last() {
            if prev > 0.0 {
                contraction = contraction.max(r / prev);
            }
        }
        let ratio = residuals.last().map_or(0.0, |&p: &f64| if p > 0.0 { r / p } else { 0.0 });
        residuals.push(r);
        if r <= opts.tol {
            let norm = pair_norm(&sub_rp, n, &y, &yp, opts.pair_policy)?.to_f64_lossy();
            return Ok(Ok(Segment {
                y,
                yp,
                report: SegmentReport {
                    start: a,
                    end: b,
                    iterations: k,
                    norm,
                    contraction,
                    final_update: r,
                    halvings: 0,
                    radius: radius.map(|(r, _)| r),
                    cutoff,
                },
                residuals,
            }));
        }
        if halve && k >= 2 && ratio > opts.contraction_limit && b - a > opts.min_cells {
            return Ok(Err(k));
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: opts.max_iter,
        last_update: residuals.last().copied().unwrap_or(f64::NAN),
        detail: format!("segment [{a}, {b}] did not reach tol {:e}; largest update ratio {contraction:.3}", opts.tol),
    })
}

fn assemble<T: Scalar>(rp: &RoughPath<T>, n: usize, u: Vec<T>, up: Vec<T>) -> Result<ControlledPath<T>> {
    let grid = rp.grid().clone();
    let d = rp.dim();
    ControlledPath::new(SampledPath::new(grid.clone(), n, u)?, SampledPath::new(grid, n * d, up)?, d)
}

/// Solve the RDE on the grid of `rp` from `ξ` at its first grid point.
pub fn solve_rde<T: Scalar>(
    lp: &LinearPart<T>,
    f: &dyn SmoothCoefficient<T>,
    g: &dyn SmoothCoefficient<T>,
    xi: &[T],
    rp: &RoughPath<T>,
    opts: &SolveOptions,
) -> Result<RdeSolution<T>> {
    solve_plain(lp, f, g, xi, rp, None, opts)
}

/// As [`solve_rde`], with Picard started from `initial` on every subinterval
/// instead of the constant pair.
pub fn solve_rde_from<T: Scalar>(
    lp: &LinearPart<T>,
    f: &dyn SmoothCoefficient<T>,
    g: &dyn SmoothCoefficient<T>,
    xi: &[T],
    rp: &RoughPath<T>,
    initial: &ControlledPath<T>,
    opts: &SolveOptions,
) -> Result<RdeSolution<T>> {
    if initial.len() != rp.len() || initial.value_dim() != lp.dim() || initial.noise_dim() != rp.dim() {
        return Err(Error::GridMismatch("initial iterate does not match the state and the rough path".into()));
    }
    solve_plain(lp, f, g, xi, rp, Some(initial), opts)
}

fn solve_plain<T: Scalar>(
    lp: &LinearPart<T>,
    f: &dyn SmoothCoefficient<T>,
    g: &dyn SmoothCoefficient<T>,
    xi: &[T],
    rp: &RoughPath<T>,
    initial: Option<&ControlledPath<T>>,
    opts: &SolveOptions,
) -> Result<RdeSolution<T>> {
    opts.validate()?;
    check_inputs(lp, xi, rp)?;
    let map = MildMap::new(lp, f, g, rp, opts.drift_rule)?;
    let (n, d) = (map.n, map.d);
    let total = rp.len() - 1;
    let mut cells = total.div_ceil(opts.subintervals).max(1);
    let mut u = vec![T::zero(); rp.len() * n];
    let mut up = vec![T::zero(); rp.len() * n * d];
    u[..n].copy_from_slice(xi);
    g.eval(xi, &mut up[..n * d]);
    let mut segments = Vec::new();
    let mut residuals = Vec::new();
    let mut iterations = 0;
    let mut a = 0;
    let mut halvings = 0;
    while a < total {
        let b = (a + cells).min(total);
        let u0 = u[a * n..(a + 1) * n].to_vec();
        let start = initial.map(|cp| {
            (&cp.y().values()[a * n..(b + 1) * n], &cp.yp().values()[a * n * d..(b + 1) * n * d])
        });
        match picard_segment(&map, a, b, &u0, start, opts, None, true)? {
            Ok(mut seg) => {
                iterations += seg.report.iterations;
                residuals.extend_from_slice(&seg.residuals);
                u[a * n..(b + 1) * n].copy_from_slice(&seg.y);
                up[a * n * d..(b + 1) * n * d].copy_from_slice(&seg.yp);
                seg.report.halvings = halvings;
                segments.push(seg.report);
                halvings = 0;
                a = b;
            }
            Err(k) => {
                iterations += k;
                cells = ((b - a) / 2).max(opts.min_cells);
                halvings += 1;
            }
        }
    }
    Ok(RdeSolution { path: assemble(rp, n, u, up)?, residuals, iterations, segments })
}

/// Grid indices of the unit-time fiber boundaries of `rp`.
pub(crate) fn unit_boundaries<T: Scalar>(rp: &RoughPath<T>) -> Result<Vec<usize>> {
    let grid = rp.grid();
    let per_unit = (T::one() / grid.mesh()).round().to_f64_lossy() as usize;
    if per_unit == 0 || (T::from_usize_lossy(per_unit) * grid.mesh() - T::one()).abs() > T::c(1e-9) {
        return invalid("the truncated solver needs an integer number of grid cells per unit time");
    }
    let total = grid.len() - 1;
    let mut out: Vec<usize> = (0..total).step_by(per_unit).collect();
    out.push(total);
    Ok(out)
}

/// Solve with `F_R = F∘χ_R`, `G_R = G∘χ_R` on each unit fiber, the radius
/// taken from `opts.radius` on that fiber.
pub fn solve_rde_truncated<T: Scalar>(
    lp: &LinearPart<T>,
    f: &dyn SmoothCoefficient<T>,
    g: &dyn SmoothCoefficient<T>,
    xi: &[T],
    rp: &RoughPath<T>,
    cutoff: &CutoffFunction,
    opts: &SolveOptions,
) -> Result<RdeSolution<T>> {
    opts.validate()?;
    check_inputs(lp, xi, rp)?;
    let map = MildMap::new(lp, f, g, rp, opts.drift_rule)?;
    let (n, d) = (map.n, map.d);
    let bounds = unit_boundaries(rp)?;
    let mut u = vec![T::zero(); rp.len() * n];
    let mut up = vec![T::zero(); rp.len() * n * d];
    u[..n].copy_from_slice(xi);
    g.eval(xi, &mut up[..n * d]);
    let mut segments = Vec::new();
    let mut residuals = Vec::new();
    let mut iterations = 0;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let r = opts.radius.radius(&rp.restrict(a, b)?, opts.pair_policy)?;
        let u0 = u[a * n..(a + 1) * n].to_vec();
        let seg = match picard_segment(&map, a, b, &u0, None, opts, Some((r, cutoff)), false)? {
            Ok(seg) => seg,
            Err(_) => unreachable!("no halving in truncated mode"),
        };
        iterations += seg.report.iterations;
        residuals.extend_from_slice(&seg.residuals);
        u[a * n..(b + 1) * n].copy_from_slice(&seg.y);
        up[a * n * d..(b + 1) * n * d].copy_from_slice(&seg.yp);
        segments.push(seg.report);
    }
    Ok(RdeSolution { path: assemble(rp, n, u, up)?, residuals, iterations, segments })
}

/// Largest node-wise distance between `U` and one application of the plain
/// mild map to `(U, U′)`, and between `U′` and `G(U)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MildResidual {
    pub value: f64,
    pub derivative: f64,
}

pub fn mild_residual<T: Scalar>(
    lp: &LinearPart<T>,
    f: &dyn SmoothCoefficient<T>,
    g: &dyn SmoothCoefficient<T>,
    xi: &[T],
    rp: &RoughPath<T>,
    sol: &RdeSolution<T>,
    rule: DriftRule,
) -> Result<MildResidual> {
    check_inputs(lp, xi, rp)?;
    let map = MildMap::new(lp, f, g, rp, rule)?;
    let (n, d) = (map.n, map.d);
    let y = sol.path.y().values();
    let yp = sol.path.yp().values();
    let (out, gv) = map.apply(0, xi, y, yp, T::one(), ALL_PARTS);
    let mut value = 0.0f64;
    let mut derivative = 0.0f64;
    for j in 0..rp.len() {
        value = value.max(dist2(&out[j * n..(j + 1) * n], &y[j * n..(j + 1) * n]).to_f64_lossy());
        derivative = derivative.max(dist2(&gv[j * n * d..(j + 1) * n * d], &yp[j * n * d..(j + 1) * n * d]).to_f64_lossy());
    }
    Ok(MildResidual { value, derivative })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CocycleReport {
    pub t: f64,
    pub tau: f64,
    pub gap: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compare `φ(t+τ, W, ξ)` with `φ(t, Θ_τ W, φ(τ, W, ξ))`.
#[allow(clippy::too_many_arguments)]
pub fn cocycle_check<T: Scalar>(
    lp: &LinearPart<T>,
    f: &dyn SmoothCoefficient<T>,
    g: &dyn SmoothCoefficient<T>,
    xi: &[T],
    rp: &RoughPath<T>,
    t: T,
    tau: T,
    tol: f64,
    opts: &SolveOptions,
) -> Result<CocycleReport> {
    if t < T::zero() || tau < T::zero() {
        return invalid("cocycle check needs t, τ >= 0");
    }
    if t == T::zero() {
        return Ok(CocycleReport { t: 0.0, tau: tau.to_f64_lossy(), gap: 0.0, tol, pass: true });
    }
    let whole = solve_rde(lp, f, g, xi, &rp.window(T::zero(), t + tau)?, opts)?;
    let mid = if tau > T::zero() {
        solve_rde(lp, f, g, xi, &rp.window(T::zero(), tau)?, opts)?.terminal().to_vec()
    } else {
        xi.to_vec()
    };
    let shifted = shift(rp, tau)?.window(T::zero(), t)?;
    let second = solve_rde(lp, f, g, &mid, &shifted, opts)?;
    let gap = dist2(whole.terminal(), second.terminal()).to_f64_lossy();
    Ok(CocycleReport { t: t.to_f64_lossy(), tau: tau.to_f64_lossy(), gap, tol, pass: gap <= tol })
}

/// A controlled path `Y_t = y0 + B W_t + s(t)`, `Y′ = B`, with `s` a random
/// smooth curve; every component has size about `scale`.
pub fn random_controlled_path<T: Scalar>(rp: &RoughPath<T>, n: usize, scale: f64, seed: u64) -> Result<ControlledPath<T>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d = rp.dim();
    let mut sym = || T::c(scale * rng.random_range(-1.0..1.0));
    let y0: Vec<T> = (0..n).map(|_| sym()).collect();
    let b: Vec<T> = (0..n * d).map(|_| sym()).collect();
    let amp: Vec<T> = (0..n).map(|_| sym()).collect();
    let freq: Vec<T> = (0..n).map(|_| sym() / T::c(scale.max(f64::MIN_POSITIVE)) * T::c(3.0)).collect();
    let grid = rp.grid().clone();
    let t0 = grid.start();
    let w = rp.first();
    let mut values = vec![T::zero(); rp.len() * n];
    for j in 0..rp.len() {
        let t = grid.t(j) - t0;
        let wj = w.at(j);
        for a in 0..n {
            let bw: T = (0..d).map(|q| b[a * d + q] * (wj[q] - w.at(0)[q])).sum();
            values[j * n + a] = y0[a] + bw + amp[a] * (freq[a] * t).sin();
        }
    }
    let yp: Vec<T> = b.iter().copied().cycle().take(rp.len() * n * d).collect();
    ControlledPath::new(SampledPath::new(grid.clone(), n, values)?, SampledPath::new(grid, n * d, yp)?, d)
}

/// Measured ratios `‖T_R(Y) − T_R(Ỹ)‖ / ‖Y − Ỹ‖` of the truncated map
/// without the `S(·)ξ` term, split by part.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LipschitzSample {
    pub drift: f64,
    pub rough: f64,
    pub full: f64,
    pub input_distance: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn truncated_lipschitz<T: Scalar>(
    lp: &LinearPart<T>,
    f: &dyn SmoothCoefficient<T>,
    g: &dyn SmoothCoefficient<T>,
    fiber: &RoughPath<T>,
    radius: f64,
    cutoff: &CutoffFunction,
    pair: (&ControlledPath<T>, &ControlledPath<T>),
    opts: &SolveOptions,
) -> Result<LipschitzSample> {
    let map = MildMap::new(lp, f, g, fiber, opts.drift_rule)?;
    let n = map.n;
    let policy = opts.pair_policy;
    let (p, q) = pair;
    let zero = vec![T::zero(); n];
    let factor = |cp: &ControlledPath<T>| -> Result<T> {
        let norm = controlled_norms(cp, fiber, policy)?.norm;
        Ok(cutoff.value(norm / T::c(radius)))
    };
    let (cp_, cq) = (factor(p)?, factor(q)?);
    let input = pair_norm(fiber, n, &sub(p.y().values(), q.y().values()), &sub(p.yp().values(), q.yp().values()), policy)?
        .to_f64_lossy();
    if !(input > 0.0) {
        return invalid("Lipschitz probe needs two distinct controlled paths");
    }
    let ratio = |parts: Parts| -> Result<f64> {
        let (y1, d1) = map.apply(0, &zero, p.y().values(), p.yp().values(), cp_, parts);
        let (y2, d2) = map.apply(0, &zero, q.y().values(), q.yp().values(), cq, parts);
        Ok(pair_norm(fiber, n, &sub(&y1, &y2), &sub(&d1, &d2), policy)?.to_f64_lossy() / input)
    };
    Ok(LipschitzSample {
        drift: ratio(Parts { drift: true, rough: false })?,
        rough: ratio(Parts { drift: false, rough: true })?,
        full: ratio(ALL_PARTS)?,
        input_distance: input,
    })
}
