//! Gap constants, tempered cut-off radius, the discrete Lyapunov–Perron map
//! on a window of unit fibers, its fixed point and the center-manifold chart.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controlled_calculus::{controlled_norms, Coef, ControlledPath, CutoffFunction};
use crate::error::{invalid, Error, Result};
use crate::grid_paths::{make_uniform_grid, PairPolicy, SampledPath};
use crate::linalg::Mat;
use crate::linear_flow::{uniform_kernel, DriftRule, LinearPart, SplitMode, Splitting, StepKernel};
use crate::rde_solver::{
    pair_norm, random_controlled_path, solve_rde_truncated, sub, truncated_lipschitz, MildMap, RadiusPolicy,
    SolveOptions, ALL_PARTS,
};
use crate::rough_lift::{lift_smooth, RoughPath};
use crate::scalar::{dist2, norm2, Scalar};

/// The right-hand side `A`, `F`, `G` of the equation.
#[derive(Clone)]
pub struct Dynamics<T> {
    pub a: LinearPart<T>,
    pub f: Coef<T>,
    pub g: Coef<T>,
}

/// `e^{m}(C_S M s + 1) / (1 − e^{−m})`, one summand of the gap inequalities.
pub fn gap_term(margin: f64, m: f64, c_s: f64, shift: f64) -> f64 {
    margin.exp() * (c_s * m * shift + 1.0) / (1.0 - (-margin).exp())
}

/// Left side of the center/stable gap inequality (to be compared with 1/4).
#[allow(clippy::too_many_arguments)]
pub fn gap_lhs(k: f64, beta: f64, gamma: f64, eta: f64, c_s: f64, ms: f64, mc: f64) -> f64 {
    let s = (-eta).exp();
    k * (gap_term(beta + eta, ms, c_s, s) + gap_term(gamma - eta, mc, c_s, s))
}

/// Constants of the center/stable gap condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapConstants {
    #[serde(rename = "Mc")]
    pub mc: f64,
    pub gamma: f64,
    #[serde(rename = "Ms")]
    pub ms: f64,
    pub beta: f64,
    #[serde(rename = "C_S")]
    pub c_s: f64,
    pub eta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    /// Left side of the gap inequality at `(η, K)`.
    pub lhs: f64,
    pub satisfies_gap: bool,
}

fn split_exponents<T: Scalar>(split: &Splitting<T>) -> Result<(f64, f64, f64, f64)> {
    let (mc, gamma, ms, beta) =
        (split.mc.to_f64_lossy(), split.gamma.to_f64_lossy(), split.ms.to_f64_lossy(), split.beta.to_f64_lossy());
    if !(gamma >= 0.0 && gamma < beta) {
        return Err(Error::InvalidSplit(format!("need 0 <= γ < β, got γ = {gamma}, β = {beta}")));
    }
    Ok((mc, gamma, ms, beta))
}

/// `η = (γ − β)/2` and the closed-form
/// `K⁻¹ = 4 e^{(β+γ)/2} (e^{(β−γ)/2} C_S (Ms+Mc) + 1) / (1 − e^{−(β+γ)/2})`.
///
/// The left side of the gap inequality is evaluated at these values and
/// reported as is; `satisfies_gap` records whether it is below 1/4.
pub fn gap_constant<T: Scalar>(split: &Splitting<T>, c_s: f64) -> Result<GapConstants> {
    let (mc, gamma, ms, beta) = split_exponents(split)?;
    if !(c_s > 0.0) {
        return invalid("C_S must be positive");
    }
    let eta = (gamma - beta) / 2.0;
    let half_sum = (beta + gamma) / 2.0;
    let k_inv = 4.0 * half_sum.exp() * (((beta - gamma) / 2.0).exp() * c_s * (ms + mc) + 1.0) / (1.0 - (-half_sum).exp());
    let k = 1.0 / k_inv;
    let lhs = gap_lhs(k, beta, gamma, eta, c_s, ms, mc);
    Ok(GapConstants { mc, gamma, ms, beta, c_s, eta, k, lhs, satisfies_gap: lhs < 0.25 })
}

/// Largest `K` (shrunk by one part in 10⁶) for which the gap inequality
/// holds at the given `η ∈ (−β, min(0, γ))`... with `γ ≥ 0` this is `(−β, 0)`.
pub fn gap_constant_for_eta<T: Scalar>(split: &Splitting<T>, c_s: f64, eta: f64) -> Result<GapConstants> {
    let (mc, gamma, ms, beta) = split_exponents(split)?;
    if !(-beta < eta && eta < 0.0) {
        return Err(Error::InvalidSplit(format!("η = {eta} outside (−β, 0) = ({}, 0)", -beta)));
    }
    let per_k = gap_lhs(1.0, beta, gamma, eta, c_s, ms, mc);
    let k = 0.25 / per_k * (1.0 - 1e-6);
    let lhs = gap_lhs(k, beta, gamma, eta, c_s, ms, mc);
    Ok(GapConstants { mc, gamma, ms, beta, c_s, eta, k, lhs, satisfies_gap: lhs < 0.25 })
}

/// Sign convention for the three-term gap inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrichotomyConvention {
    /// `η > 0`, margins `η−ρ2`, `ρ1−η`, `ρ3−η`, shift factor `e^{−η}`.
    PositiveWeight,
    /// The same exponents read with the center/stable weight `e^{−η'(i−1)}`,
    /// `η' = −η < 0`: the shift factor becomes `e^{−η'} = e^{η}`. With `Pu = 0`,
    /// `γ = −ρ2` and `β = ρ3` this is the two-term inequality at `η'`.
    NegativeWeight,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrichotomyGap {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    #[serde(rename = "Mc")]
    pub mc: f64,
    #[serde(rename = "Ms")]
    pub ms: f64,
    /// `None` when the unstable part is empty.
    #[serde(rename = "Mu")]
    pub mu: Option<f64>,
    #[serde(rename = "C_S")]
    pub c_s: f64,
    pub eta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    /// `K` at which the left side equals 1/4.
    pub k_boundary: f64,
    pub lhs: f64,
    pub satisfies_gap: bool,
    pub convention: TrichotomyConvention,
}

/// Left side of the three-term gap inequality. The unstable term is dropped
/// when `mu` is `None`.
#[allow(clippy::too_many_arguments)]
pub fn trichotomy_gap_lhs(
    k: f64,
    rho1: f64,
    rho2: f64,
    rho3: f64,
    eta: f64,
    c_s: f64,
    mc: f64,
    mu: Option<f64>,
    ms: f64,
    convention: TrichotomyConvention,
) -> f64 {
    let s = match convention {
        TrichotomyConvention::PositiveWeight => (-eta).exp(),
        TrichotomyConvention::NegativeWeight => eta.exp(),
    };
    let mut sum = gap_term(rho3 - eta, ms, c_s, s) + gap_term(eta - rho2, mc, c_s, s);
    if let Some(mu) = mu {
        sum += gap_term(rho1 - eta, mu, c_s, s);
    }
    k * sum
}

/// Three-term gap constants for a trichotomy split; `η` defaults to the
/// midpoint of `(ρ2, min(ρ1, ρ3))`.
pub fn trichotomy_gap_constant<T: Scalar>(
    split: &Splitting<T>,
    c_s: f64,
    eta: Option<f64>,
    convention: TrichotomyConvention,
) -> Result<TrichotomyGap> {
    if split.mode != SplitMode::Trichotomy {
        return Err(Error::InvalidSplit("trichotomy gap needs a trichotomy split".into()));
    }
    let get = |x: Option<T>, name: &str| {
        x.map(|v| v.to_f64_lossy()).ok_or_else(|| Error::InvalidSplit(format!("{name} missing")))
    };
    let (rho1, rho2, rho3) = (get(split.rho1, "ρ1")?, get(split.rho2, "ρ2")?, get(split.rho3, "ρ3")?);
    let mu = if split.unstable_dim() > 0 { Some(get(split.mu, "Mu")?) } else { None };
    trichotomy_gap_from_constants(
        rho1,
        rho2,
        rho3,
        split.mc.to_f64_lossy(),
        mu,
        split.ms.to_f64_lossy(),
        c_s,
        eta,
        convention,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn trichotomy_gap_from_constants(
    rho1: f64,
    rho2: f64,
    rho3: f64,
    mc: f64,
    mu: Option<f64>,
    ms: f64,
    c_s: f64,
    eta: Option<f64>,
    convention: TrichotomyConvention,
) -> Result<TrichotomyGap> {
    let upper = rho1.min(rho3);
    if !(rho2 >= 0.0 && rho2 < upper) {
        return Err(Error::InvalidSplit(format!(
            "no admissible η: need ρ2 < min(ρ1, ρ3), got ρ2 = {rho2}, ρ1 = {rho1}, ρ3 = {rho3}"
        )));
    }
    let eta = eta.unwrap_or((rho2 + upper) / 2.0);
    if !(rho2 < eta && eta < upper) {
        return Err(Error::InvalidSplit(format!("η = {eta} outside ({rho2}, {upper})")));
    }
    let per_k = trichotomy_gap_lhs(1.0, rho1, rho2, rho3, eta, c_s, mc, mu, ms, convention);
    let k_boundary = 0.25 / per_k;
    let k = k_boundary * (1.0 - 1e-6);
    let lhs = trichotomy_gap_lhs(k, rho1, rho2, rho3, eta, c_s, mc, mu, ms, convention);
    Ok(TrichotomyGap {
        rho1,
        rho2,
        rho3,
        mc,
        ms,
        mu,
        c_s,
        eta,
        k,
        k_boundary,
        lhs,
        satisfies_gap: lhs < 0.25,
        convention,
    })
}

/// `R(W) = min(K / (CF + CG (1+w)(w+ww)), 1)`.
pub fn tempered_radius(k: f64, cf: f64, cg: f64, w_norm: f64, ww_norm: f64) -> Result<f64> {
    if !(k > 0.0) || cf < 0.0 || cg < 0.0 || w_norm < 0.0 || ww_norm < 0.0 {
        return invalid("tempered radius needs K > 0 and nonnegative constants and norms");
    }
    if cf == 0.0 && cg == 0.0 {
        return invalid("tempered radius needs CF or CG positive");
    }
    let r = k / (cf + cg * (1.0 + w_norm) * (w_norm + ww_norm));
    Ok(r.min(1.0))
}

/// Empirical `CF`, `CG` from measured Lipschitz ratios of the truncated map at
/// a reference radius, with a safety factor of 2.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiusCalibration {
    pub cf: f64,
    pub cg: f64,
    pub reference_radius: f64,
    pub w_norm: f64,
    pub ww_norm: f64,
    pub max_drift_ratio: f64,
    pub max_rough_ratio: f64,
    pub samples: usize,
}

pub const CALIBRATION_SAFETY: f64 = 2.0;

pub fn calibrate_radius_constants<T: Scalar>(
    dynamics: &Dynamics<T>,
    fiber: &RoughPath<T>,
    reference_radius: f64,
    samples: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<RadiusCalibration> {
    if samples == 0 || !(reference_radius > 0.0) {
        return invalid("calibration needs samples and a positive reference radius");
    }
    let n = dynamics.a.dim();
    let cutoff = CutoffFunction;
    let (mut md, mut mr) = (0.0f64, 0.0f64);
    for s in 0..samples {
        let scale = reference_radius * (0.1 + 0.8 * (s as f64 + 0.5) / samples as f64) / 4.0;
        let p = random_controlled_path(fiber, n, scale, seed.wrapping_add(2 * s as u64))?;
        let q = random_controlled_path(fiber, n, scale, seed.wrapping_add(2 * s as u64 + 1))?;
        let l = truncated_lipschitz(
            &dynamics.a,
            dynamics.f.as_ref(),
            dynamics.g.as_ref(),
            fiber,
            reference_radius,
            &cutoff,
            (&p, &q),
            opts,
        )?;
        md = md.max(l.drift);
        mr = mr.max(l.rough);
    }
    let policy = opts.pair_policy;
    let w = fiber.w_norm(policy).to_f64_lossy();
    let ww = fiber.ww_norm(policy).to_f64_lossy();
    let noise = ((1.0 + w) * (w + ww)).max(f64::MIN_POSITIVE);
    Ok(RadiusCalibration {
        cf: CALIBRATION_SAFETY * md / reference_radius,
        cg: CALIBRATION_SAFETY * mr / (reference_radius * noise),
        reference_radius,
        w_norm: w,
        ww_norm: ww,
        max_drift_ratio: md,
        max_rough_ratio: mr,
        samples,
    })
}

/// Options of the discrete Lyapunov–Perron fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpConfig {
    /// Number of unit fibers `N` kept in the window.
    pub window: usize,
    /// Depth of the stable sums; defaults to the window.
    pub tail_depth: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub drift_rule: DriftRule,
    pub pair_policy: PairPolicy,
    pub radius: RadiusPolicy,
    /// Center offset used to probe the Lipschitz constant of `ξ ↦ Γ`.
    pub lipschitz_probe: f64,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            window: 24,
            tail_depth: None,
            tol: 1e-12,
            max_iter: 200,
            drift_rule: DriftRule::LeftPoint,
            pair_policy: PairPolicy::DyadicPairs,
            radius: RadiusPolicy::default(),
            lipschitz_probe: 1e-2,
        }
    }
}

impl LpConfig {
    pub fn depth(&self) -> usize {
        self.tail_depth.unwrap_or(self.window)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            drift_rule: self.drift_rule,
            pair_policy: self.pair_policy,
            radius: self.radius,
            ..SolveOptions::default()
        }
    }
}

/// Per-fiber controlled paths; `fibers[f − 1]` is the path on fiber `−f`
/// (time window `[−f, −f+1]`), each on its own grid `[0, 1]`.
#[derive(Clone, Debug)]
pub struct FiberSequence<T> {
    pub fibers: Vec<ControlledPath<T>>,
    pub eta: f64,
}

impl<T: Scalar> FiberSequence<T> {
    pub fn window(&self) -> usize {
        self.fibers.len()
    }

    /// `sup_f e^{ηf} ‖U^{−f}‖_D`.
    pub fn weighted_norm(&self, rps: &[RoughPath<T>], policy: PairPolicy) -> Result<f64> {
        let mut best = 0.0f64;
        for (k, (cp, rp)) in self.fibers.iter().zip(rps).enumerate() {
            let norm = controlled_norms(cp, rp, policy)?.norm.to_f64_lossy();
            best = best.max((self.eta * (k + 1) as f64).exp() * norm);
        }
        Ok(best)
    }

    /// Weighted norm of `self − other`.
    pub fn weighted_distance(&self, other: &Self, rps: &[RoughPath<T>], policy: PairPolicy) -> Result<f64> {
        if self.window() != other.window() {
            return Err(Error::GridMismatch("fiber sequences have different windows".into()));
        }
        let mut best = 0.0f64;
        for (k, ((a, b), rp)) in self.fibers.iter().zip(&other.fibers).zip(rps).enumerate() {
            let n = a.value_dim();
            let dn = pair_norm(rp, n, &sub(a.y().values(), b.y().values()), &sub(a.yp().values(), b.yp().values()), policy)?;
            best = best.max((self.eta * (k + 1) as f64).exp() * dn.to_f64_lossy());
        }
        Ok(best)
    }

    /// `max_f |U^{−f}_1 − U^{−f+1}_0|` over adjacent fibers.
    pub fn endpoint_mismatch(&self) -> f64 {
        self.fibers
            .windows(2)
            .map(|w| {
                let later = &w[0];
                let earlier = &w[1];
                dist2(earlier.y().at(earlier.len() - 1), later.y().at(0)).to_f64_lossy()
            })
            .fold(0.0, f64::max)
    }
}

/// Everything the LP map needs for one base point: fiber lifts `Θ_{base−f}W`
/// on `[0, 1]`, their cut-off radii and the semigroup pieces.
pub struct LpContext<T: Scalar> {
    pub dynamics: Dynamics<T>,
    pub split: Splitting<T>,
    pub gap: GapConstants,
    pub config: LpConfig,
    pub base: i64,
    pub fibers: Vec<RoughPath<T>>,
    pub radii: Vec<f64>,
    kernel: StepKernel<T>,
    /// `S(−1) Pc`.
    back_c: Mat<T>,
    /// `S(k) Ps` for `k = 0..=depth`.
    stable_powers: Vec<Mat<T>>,
}

impl<T: Scalar> LpContext<T> {
    pub fn new(
        dynamics: Dynamics<T>,
        split: Splitting<T>,
        gap: GapConstants,
        w: &RoughPath<T>,
        base: i64,
        config: LpConfig,
    ) -> Result<Self> {
        if split.mode != SplitMode::Dichotomy {
            return invalid("the Lyapunov–Perron map is built for center/stable splittings");
        }
        if config.window == 0 || config.depth() == 0 {
            return invalid("window and tail depth must be at least 1");
        }
        if !(gap.eta < 0.0) {
            return invalid("the weight exponent η must be negative");
        }
        let n = dynamics.a.dim();
        if split.dim() != n {
            return Err(Error::GridMismatch("splitting and generator dimensions differ".into()));
        }
        let mut fibers = Vec::with_capacity(config.window);
        for f in 1..=config.window {
            let tau = T::c((base - f as i64) as f64);
            let fiber = w.fiber(tau, T::one()).map_err(|e| {
                Error::InvalidArgument(format!("window too small for fiber {}: {e}", base - f as i64))
            })?;
            fibers.push(fiber);
        }
        let radii = fibers
            .iter()
            .map(|rp| config.radius.radius(rp, config.pair_policy))
            .collect::<Result<Vec<_>>>()?;
        let kernel = uniform_kernel(&dynamics.a, fibers[0].grid())?;
        let back_c = &dynamics.a.exp(-T::one()) * &split.pc;
        let s1 = dynamics.a.exp(T::one());
        let mut stable_powers = vec![split.ps.clone()];
        for k in 1..=config.depth() {
            let next = &s1 * &stable_powers[k - 1];
            stable_powers.push(next);
        }
        Ok(Self { dynamics, split, gap, config, base, fibers, radii, kernel, back_c, stable_powers })
    }

    pub fn n(&self) -> usize {
        self.dynamics.a.dim()
    }

    pub fn zero_sequence(&self) -> FiberSequence<T> {
        FiberSequence {
            fibers: self.fibers.iter().map(|rp| ControlledPath::zeros(rp, self.n())).collect(),
            eta: self.gap.eta,
        }
    }

    /// `Pc ξ`.
    pub fn center_part(&self, xi: &[T]) -> Vec<T> {
        self.split.pc.apply(xi)
    }

    /// Random sequence with fiber norms around `scale · R_f`.
    pub fn random_sequence(&self, scale: f64, seed: u64) -> Result<FiberSequence<T>> {
        let fibers = self
            .fibers
            .iter()
            .zip(&self.radii)
            .enumerate()
            .map(|(k, (rp, &r))| random_controlled_path(rp, self.n(), scale * r, seed.wrapping_mul(1000).wrapping_add(k as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(FiberSequence { fibers, eta: self.gap.eta })
    }
}

/// Diagnostics of one application of the LP map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapDiagnostics {
    /// Cut-off factor of each fiber.
    pub cutoffs: Vec<f64>,
    /// `Ms e^{−β·depth} ‖U‖ / (1 − e^{−(β+η)})`.
    pub tail_bound: f64,
}

/// One application of the discrete Lyapunov–Perron map `J_{R,d}`.
pub fn lp_map_apply<T: Scalar>(
    ctx: &LpContext<T>,
    seq: &FiberSequence<T>,
    xi_c: &[T],
) -> Result<(FiberSequence<T>, MapDiagnostics)> {
    let n = ctx.n();
    if seq.window() != ctx.fibers.len() {
        return invalid(format!(
            "sequence has {} fibers, the window has {}",
            seq.window(),
            ctx.fibers.len()
        ));
    }
    if xi_c.len() != n {
        return invalid("center vector has the wrong dimension");
    }
    let cfg = &ctx.config;
    let cutoff = CutoffFunction;
    let zero = vec![T::zero(); n];
    let applied: Vec<(Vec<T>, Vec<T>, f64)> = ctx
        .fibers
        .par_iter()
        .zip(seq.fibers.par_iter())
        .zip(ctx.radii.par_iter())
        .map(|((rp, cp), &r)| -> Result<(Vec<T>, Vec<T>, f64)> {
            let norm = controlled_norms(cp, rp, cfg.pair_policy)?.norm;
            let c = cutoff.value(norm / T::c(r));
            let map = MildMap::with_kernel(
                ctx.kernel.clone(),
                n,
                ctx.dynamics.f.as_ref(),
                ctx.dynamics.g.as_ref(),
                rp,
                cfg.drift_rule,
            )?;
            let (t, gv) = map.apply(0, &zero, cp.y().values(), cp.yp().values(), c, ALL_PARTS);
            Ok((t, gv, c.to_f64_lossy()))
        })
        .collect::<Result<Vec<_>>>()?;
    let big_n = applied.len();
    let end = |t: &Vec<T>| t[t.len() - n..].to_vec();
    // center chain: a_f = S(−1)Pc c_f, c_1 = ξ^c − T_1[1], c_{f+1} = a_f − T_{f+1}[1]
    let xi_c = ctx.center_part(xi_c);
    let mut starts = vec![vec![T::zero(); n]; big_n];
    let mut carry = xi_c.clone();
    for (f, (t, _, _)) in applied.iter().enumerate() {
        let c_f: Vec<T> = carry.iter().zip(end(t)).map(|(&x, y)| x - y).collect();
        let a_f = ctx.back_c.apply(&c_f);
        starts[f] = a_f.clone();
        carry = a_f;
    }
    // stable sums: b_f = Σ_{g=f+1}^{min(N, f+depth)} S(g−f−1) Ps T_g[1]
    let depth = cfg.depth();
    let ends: Vec<Vec<T>> = applied.iter().map(|(t, _, _)| end(t)).collect();
    for (f, start) in starts.iter_mut().enumerate() {
        for g in f + 1..big_n.min(f + 1 + depth) {
            ctx.stable_powers[g - f - 1].matvec_add(&ends[g], start);
        }
    }
    let d = ctx.fibers[0].dim();
    let mut fibers = Vec::with_capacity(big_n);
    for (f, ((t, gv, _), rp)) in applied.iter().zip(&ctx.fibers).enumerate() {
        let len = rp.len();
        let mut y = vec![T::zero(); len * n];
        let mut x = starts[f].clone();
        let mut next = vec![T::zero(); n];
        for j in 0..len {
            for a in 0..n {
                y[j * n + a] = x[a] + t[j * n + a];
            }
            ctx.kernel.prop.matvec(&x, &mut next);
            std::mem::swap(&mut x, &mut next);
        }
        let grid = rp.grid().clone();
        fibers.push(ControlledPath::new(
            SampledPath::new(grid.clone(), n, y)?,
            SampledPath::new(grid, n * d, gv.clone())?,
            d,
        )?);
    }
    let input_norm = seq.weighted_norm(&ctx.fibers, cfg.pair_policy)?;
    let (beta, eta) = (ctx.gap.beta, ctx.gap.eta);
    let tail_bound = ctx.gap.ms * (-beta * depth as f64).exp() * input_norm / (1.0 - (-(beta + eta)).exp());
    Ok((
        FiberSequence { fibers, eta: seq.eta },
        MapDiagnostics { cutoffs: applied.iter().map(|a| a.2).collect(), tail_bound },
    ))
}

/// Ratio `‖J(U) − J(Ũ)‖ / ‖U − Ũ‖` in the weighted norm for one pair.
pub fn lp_contraction_probe<T: Scalar>(
    ctx: &LpContext<T>,
    u: &FiberSequence<T>,
    v: &FiberSequence<T>,
    xi_c: &[T],
) -> Result<f64> {
    let policy = ctx.config.pair_policy;
    let den = u.weighted_distance(v, &ctx.fibers, policy)?;
    if !(den > 0.0) {
        return invalid("contraction probe needs two distinct sequences");
    }
    let (ju, _) = lp_map_apply(ctx, u, xi_c)?;
    let (jv, _) = lp_map_apply(ctx, v, xi_c)?;
    Ok(ju.weighted_distance(&jv, &ctx.fibers, policy)? / den)
}

/// Fixed point `Γ(ξ, W)` and its read-outs.
#[derive(Clone, Debug)]
pub struct FixedPoint<T> {
    pub sequence: FiberSequence<T>,
    pub iterations: usize,
    pub updates: Vec<f64>,
    /// Largest ratio of successive updates after the first.
    pub contraction: f64,
    /// `h^c(ξ) = Ps Γ[−1, 1]`.
    pub h_c: Vec<T>,
    /// `|Pc Γ[−1, 1] − ξ^c|`.
    pub center_recovery: f64,
    pub tail_bound: f64,
    pub cutoffs: Vec<f64>,
}

/// Iterate the LP map from the zero sequence until the weighted update is
/// below `tol`.
pub fn lp_fixed_point<T: Scalar>(ctx: &LpContext<T>, xi_c: &[T]) -> Result<FixedPoint<T>> {
    let cfg = &ctx.config;
    let mut seq = ctx.zero_sequence();
    let mut updates: Vec<f64> = Vec::new();
    let mut contraction = 0.0f64;
    let mut growing = 0;
    for k in 1..=cfg.max_iter {
        let (next, diag) = lp_map_apply(ctx, &seq, xi_c)?;
        let upd = next.weighted_distance(&seq, &ctx.fibers, cfg.pair_policy)?;
        if !upd.is_finite() {
            return Err(Error::NumericalFailure("Lyapunov–Perron iteration diverged".into()));
        }
        if let Some(&prev) = updates.last() {
            if prev > 0.0 && upd > 0.0 {
                let ratio = upd / prev;
                contraction = contraction.max(ratio);
                growing = if ratio >= 1.0 { growing + 1 } else { 0 };
                if growing >= 3 {
                    return Err(Error::GapViolation { factor: ratio });
                }
            }
        }
        updates.push(upd);
        seq = next;
        if upd <= cfg.tol {
            let n = ctx.n();
            let first = &seq.fibers[0];
            let state = first.y().at(first.len() - 1).to_vec();
            let h_c = ctx.split.ps.apply(&state);
            let recovered = ctx.split.pc.apply(&state);
            let center_recovery = dist2(&recovered, &ctx.center_part(xi_c)).to_f64_lossy();
            debug_assert_eq!(h_c.len(), n);
            return Ok(FixedPoint {
                sequence: seq,
                iterations: k,
                updates,
                contraction,
                h_c,
                center_recovery,
                tail_bound: diag.tail_bound,
                cutoffs: diag.cutoffs,
            });
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: cfg.max_iter,
        last_update: updates.last().copied().unwrap_or(f64::NAN),
        detail: format!("Lyapunov–Perron iteration did not reach tol {:e}", cfg.tol),
    })
}

/// Diagnostics recorded when a chart is built.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartDiagnostics {
    pub contraction: f64,
    pub iterations: usize,
    pub tail_bound: f64,
    /// `R(Θ_{−1}W)`.
    pub radius: f64,
    pub lipschitz_probes: usize,
}

/// Local center-manifold chart `ξ^c ↦ h^c(ξ^c, W)` at one base point.
pub struct ManifoldChart<T: Scalar> {
    pub ctx: LpContext<T>,
    /// Measured Lipschitz constant of `ξ ↦ Γ(ξ, W)` in the weighted norm.
    pub l_gamma: f64,
    /// `ρ(W) = R(Θ_{−1}W) / (2 L_Γ e^{−η})`.
    pub rho: f64,
    pub diagnostics: ChartDiagnostics,
    cache: Mutex<HashMap<Vec<u64>, Vec<T>>>,
}

/// `h^c(ξ^c)` with the ball flag.
#[derive(Clone, Debug)]
pub struct GraphValue<T> {
    pub value: Vec<T>,
    pub inside_ball: bool,
}

impl<T: Scalar> ManifoldChart<T> {
    pub fn new(ctx: LpContext<T>) -> Result<Self> {
        let n = ctx.n();
        let probe = ctx.config.lipschitz_probe;
        let zero = vec![T::zero(); n];
        let base = lp_fixed_point(&ctx, &zero)?;
        let mut contraction = base.contraction;
        let mut iterations = base.iterations;
        let mut l_gamma = 0.0f64;
        let mut probes = 0;
        for k in 0..n {
            let mut e = vec![T::zero(); n];
            e[k] = T::one();
            let dir = ctx.center_part(&e);
            let len = norm2(&dir).to_f64_lossy();
            if len < 1e-12 {
                continue;
            }
            let xi: Vec<T> = dir.iter().map(|&x| x * T::c(probe / len)).collect();
            let fp = lp_fixed_point(&ctx, &xi)?;
            contraction = contraction.max(fp.contraction);
            iterations = iterations.max(fp.iterations);
            let dist = fp.sequence.weighted_distance(&base.sequence, &ctx.fibers, ctx.config.pair_policy)?;
            l_gamma = l_gamma.max(dist / probe);
            probes += 1;
        }
        let radius = ctx.radii[0];
        let rho = if l_gamma > 0.0 { radius / (2.0 * l_gamma * (-ctx.gap.eta).exp()) } else { f64::INFINITY };
        let mut cache = HashMap::new();
        cache.insert(key(&zero), base.h_c.clone());
        Ok(Self {
            diagnostics: ChartDiagnostics {
                contraction,
                iterations,
                tail_bound: base.tail_bound,
                radius,
                lipschitz_probes: probes,
            },
            ctx,
            l_gamma,
            rho,
            cache: Mutex::new(cache),
        })
    }

    /// Chart of the same system on the shifted noise `Θ_i W`.
    pub fn shifted(&self, w: &RoughPath<T>, base: i64) -> Result<Self> {
        let ctx = LpContext::new(
            self.ctx.dynamics.clone(),
            self.ctx.split.clone(),
            self.ctx.gap,
            w,
            base,
            self.ctx.config,
        )?;
        Self::new(ctx)
    }

    pub fn fixed_point(&self, xi_c: &[T]) -> Result<FixedPoint<T>> {
        lp_fixed_point(&self.ctx, xi_c)
    }
}

fn key<T: Scalar>(xi: &[T]) -> Vec<u64> {
    xi.iter().map(|x| x.to_f64_lossy().to_bits()).collect()
}

/// `h^c(ξ^c)`, solving the fixed point on first use and caching by `ξ^c`.
pub fn manifold_graph<T: Scalar>(chart: &ManifoldChart<T>, xi_c: &[T]) -> Result<GraphValue<T>> {
    let xi = chart.ctx.center_part(xi_c);
    let inside_ball = norm2(&xi).to_f64_lossy() <= chart.rho;
    let k = key(&xi);
    if let Some(v) = chart.cache.lock().expect("chart cache poisoned").get(&k) {
        return Ok(GraphValue { value: v.clone(), inside_ball });
    }
    let value = lp_fixed_point(&chart.ctx, &xi)?.h_c;
    chart.cache.lock().expect("chart cache poisoned").insert(k, value.clone());
    Ok(GraphValue { value, inside_ball })
}

/// Zero driver with `per_unit` cells per unit time on `[−back, forward]`.
pub fn deterministic_driver<T: Scalar>(back: usize, forward: usize, per_unit: usize, alpha: T) -> Result<RoughPath<T>> {
    let steps = (back + forward) * per_unit;
    let grid = make_uniform_grid(steps + 1, -T::from_usize_lossy(back), T::from_usize_lossy(forward))?;
    lift_smooth(&SampledPath::zeros(grid, 1), alpha)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceStep {
    pub step: usize,
    pub gap: f64,
    pub center_norm: f64,
    pub rho: f64,
    pub inside_ball: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub steps: Vec<InvarianceStep>,
    pub max_gap: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Flow the point `(ξ^c, h^c(ξ^c, W))` forward one unit at a time with the
/// truncated solver and compare the stable part with the chart of the
/// shifted noise. `flow_driver` (same time span, possibly finer grid) drives
/// the flow; by default the chart driver `w` is used.
pub fn verify_invariance<T: Scalar>(
    chart: &ManifoldChart<T>,
    w: &RoughPath<T>,
    xi_c: &[T],
    steps: usize,
    tol: f64,
    flow_driver: Option<&RoughPath<T>>,
) -> Result<InvarianceReport> {
    let ctx = &chart.ctx;
    let flow_w = flow_driver.unwrap_or(w);
    let mut state: Vec<T> = {
        let xi = ctx.center_part(xi_c);
        let h = manifold_graph(chart, &xi)?.value;
        xi.iter().zip(&h).map(|(&a, &b)| a + b).collect()
    };
    let cutoff = CutoffFunction;
    let mut out = Vec::with_capacity(steps);
    for i in 1..=steps {
        let next_chart = chart.shifted(w, ctx.base + i as i64)?;
        let t0 = T::c((ctx.base + i as i64 - 1) as f64);
        let window = flow_w.window(t0, t0 + T::one())?;
        let mut opts = ctx.config.solve_options();
        opts.radius = RadiusPolicy::Fixed { radius: next_chart.ctx.radii[0] };
        let sol = solve_rde_truncated(
            &ctx.dynamics.a,
            ctx.dynamics.f.as_ref(),
            ctx.dynamics.g.as_ref(),
            &state,
            &window,
            &cutoff,
            &opts,
        )?;
        let phi = sol.terminal().to_vec();
        let xc = next_chart.ctx.center_part(&phi);
        let h = manifold_graph(&next_chart, &xc)?;
        let ps_phi = ctx.split.ps.apply(&phi);
        let gap = dist2(&ps_phi, &h.value).to_f64_lossy();
        out.push(InvarianceStep {
            step: i,
            gap,
            center_norm: norm2(&xc).to_f64_lossy(),
            rho: next_chart.rho,
            inside_ball: h.inside_ball,
        });
        state = phi;
    }
    let max_gap = out.iter().map(|s| s.gap).fold(0.0, f64::max);
    Ok(InvarianceReport { steps: out, max_gap, tol, pass: max_gap <= tol })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TangencyReport {
    pub probe: f64,
    /// `|h^c(h e_k) − h^c(−h e_k)| / 2h` per center direction.
    pub central: Vec<f64>,
    /// `|h^c(h e_k) − h^c(0)| / h` and the same at `h/2`.
    pub forward: Vec<f64>,
    pub forward_half: Vec<f64>,
    /// `forward / forward_half`, about 2 when `Dh^c(0) = 0` and `D²h^c(0) ≠ 0`.
    pub ratio: Vec<f64>,
    /// `(h^c(h e_k) + h^c(−h e_k) − 2h^c(0)) / (2h²)`, signed per stable coordinate.
    pub half_second: Vec<Vec<f64>>,
    pub bound: f64,
    pub pass: bool,
}

/// Constant `C` of the tangency test `|Dh^c(0) e_k| <= C h`.
pub const TANGENCY_CONSTANT: f64 = 10.0;

/// Finite-difference check that `Dh^c(0) = 0`.
pub fn tangency_check<T: Scalar>(chart: &ManifoldChart<T>, h: f64) -> Result<TangencyReport> {
    if !(h > 0.0) {
        return invalid("probe scale must be positive");
    }
    let n = chart.ctx.n();
    let zero = vec![T::zero(); n];
    let h0 = manifold_graph(chart, &zero)?.value;
    let (mut central, mut forward, mut forward_half, mut ratio, mut half_second) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let eval = |dir: &[T], s: f64| -> Result<Vec<T>> {
        let xi: Vec<T> = dir.iter().map(|&x| x * T::c(s)).collect();
        Ok(manifold_graph(chart, &xi)?.value)
    };
    for k in 0..n {
        let mut e = vec![T::zero(); n];
        e[k] = T::one();
        let dir = chart.ctx.center_part(&e);
        let len = norm2(&dir).to_f64_lossy();
        if len < 1e-12 {
            continue;
        }
        let dir: Vec<T> = dir.iter().map(|&x| x / T::c(len)).collect();
        let plus = eval(&dir, h)?;
        let minus = eval(&dir, -h)?;
        let plus_half = eval(&dir, h / 2.0)?;
        central.push(dist2(&plus, &minus).to_f64_lossy() / (2.0 * h));
        let fw = dist2(&plus, &h0).to_f64_lossy() / h;
        let fh = dist2(&plus_half, &h0).to_f64_lossy() / (h / 2.0);
        forward.push(fw);
        forward_half.push(fh);
        ratio.push(if fh > 0.0 { fw / fh } else { f64::NAN });
        half_second.push(
            (0..n)
                .map(|a| {
                    (plus[a] + minus[a] - h0[a] - h0[a]).to_f64_lossy() / (2.0 * h * h)
                })
                .collect(),
        );
    }
    let bound = TANGENCY_CONSTANT * h;
    let pass = central.iter().all(|&c| c <= bound);
    Ok(TangencyReport { probe: h, central, forward, forward_half, ratio, half_second, bound, pass })
}
