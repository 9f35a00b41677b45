//! The linear semigroup `S(t) = e^{tA}`: exponentials, spectral splitting,
//! dichotomy constants and semigroup convolutions.

use serde::{Deserialize, Serialize};

use crate::controlled_calculus::{ControlledPath, SmoothCoefficient};
use crate::error::{invalid, Error, Result};
use crate::grid_paths::{pair_sup, PairPolicy, SampledPath, TimeGrid};
use crate::linalg::{exp_integrals, expm, Mat};
use crate::rough_lift::RoughPath;
use crate::scalar::{norm2, Scalar};
use crate::spectral::{spectral_projections, Group};

/// Default half-width of the band `|Re λ| <= center_tol` of center eigenvalues.
pub const DEFAULT_CENTER_TOL: f64 = 1e-8;
/// `β = (1 - margin) · min |Re λ_s|` for non-normal stable blocks; normal blocks use the abscissa itself.
pub const DEFAULT_BETA_MARGIN: f64 = 0.1;
pub const DEFAULT_CONSTANTS_HORIZON: f64 = 20.0;
/// Sampling step `10⁻³` on the default horizon.
pub const DEFAULT_CONSTANTS_SAMPLES: usize = 20_001;

/// The generator `A` with its induced Euclidean norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearPart<T> {
    a: Mat<T>,
    opnorm: T,
}

impl<T: Scalar> LinearPart<T> {
    pub fn new(a: Mat<T>) -> Result<Self> {
        if !a.is_square() || a.rows() == 0 {
            return invalid("A must be a nonempty square matrix");
        }
        if a.data().iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure("A has non-finite entries".into()));
        }
        let opnorm = a.norm_op2();
        Ok(Self { a, opnorm })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Mat::from_rows(rows)?)
    }

    pub fn diag(d: &[T]) -> Result<Self> {
        Self::new(Mat::diag(d))
    }

    pub fn a(&self) -> &Mat<T> {
        &self.a
    }

    pub fn opnorm(&self) -> T {
        self.opnorm
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn exp(&self, t: T) -> Mat<T> {
        expm(&self.a.scale(t))
    }
}

/// `e^{tA}`.
pub fn matrix_exponential<T: Scalar>(lp: &LinearPart<T>, t: T) -> Mat<T> {
    lp.exp(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    Dichotomy,
    Trichotomy,
}

/// One eigenvalue with its spectral group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub re: f64,
    pub im: f64,
    pub group: SpectralGroup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralGroup {
    Center,
    Stable,
    Unstable,
}

impl From<Group> for SpectralGroup {
    fn from(g: Group) -> Self {
        match g {
            Group::Center => Self::Center,
            Group::Stable => Self::Stable,
            Group::Unstable => Self::Unstable,
        }
    }
}

/// Invariant splitting of the state space with its exponential bounds:
/// `|S(t)Pc| <= Mc e^{γ|t|}` for `t <= 0` and `|S(t)Ps| <= Ms e^{-βt}` for
/// `t >= 0`; in trichotomy mode also `|S(t)Pu| <= Mu e^{ρ1 t}` for `t <= 0`
/// and the center bound holds for all `t` with `ρ2 = γ`, `ρ3 = β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Splitting<T> {
    pub mode: SplitMode,
    #[serde(rename = "Pc")]
    pub pc: Mat<T>,
    #[serde(rename = "Ps")]
    pub ps: Mat<T>,
    #[serde(rename = "Pu", default, skip_serializing_if = "Option::is_none")]
    pub pu: Option<Mat<T>>,
    #[serde(rename = "Ac")]
    pub ac: Mat<T>,
    #[serde(rename = "As")]
    pub as_: Mat<T>,
    #[serde(rename = "Au", default, skip_serializing_if = "Option::is_none")]
    pub au: Option<Mat<T>>,
    #[serde(rename = "Mc")]
    pub mc: T,
    pub gamma: T,
    #[serde(rename = "Ms")]
    pub ms: T,
    pub beta: T,
    #[serde(rename = "Mu", default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho1: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho2: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho3: Option<T>,
    pub center_tol: T,
    pub spectrum: Vec<SpectrumEntry>,
    /// Sampling used for `Mc`, `Ms` (and `Mu`): `[0, horizon]` at `samples` points.
    pub constants_horizon: T,
    pub constants_samples: usize,
}

impl<T: Scalar> Splitting<T> {
    pub fn dim(&self) -> usize {
        self.pc.rows()
    }

    pub fn center_dim(&self) -> usize {
        rank_of_projector(&self.pc)
    }

    pub fn stable_dim(&self) -> usize {
        rank_of_projector(&self.ps)
    }

    pub fn unstable_dim(&self) -> usize {
        self.pu.as_ref().map_or(0, rank_of_projector)
    }

    /// `Pu`, or the zero matrix in dichotomy mode.
    pub fn pu_or_zero(&self) -> Mat<T> {
        self.pu.clone().unwrap_or_else(|| Mat::zeros(self.dim(), self.dim()))
    }

    /// Largest entry of `Pc + Ps (+ Pu) − Id`, `P² − P` and the cross products.
    pub fn projection_defect(&self) -> T {
        let n = self.dim();
        let pu = self.pu_or_zero();
        let ps = [&self.pc, &self.ps, &pu];
        let mut worst = (&(&(&self.pc + &self.ps) + &pu) - &Mat::identity(n)).max_abs();
        for (i, p) in ps.iter().enumerate() {
            worst = worst.max((&(*p * *p) - *p).max_abs());
            for (j, q) in ps.iter().enumerate() {
                if i != j {
                    worst = worst.max((*p * *q).max_abs());
                }
            }
        }
        worst
    }

    /// Largest entry of `P e^{tA} − e^{tA} P` over the given times.
    pub fn commutation_defect(&self, lp: &LinearPart<T>, times: &[T]) -> T {
        let pu = self.pu_or_zero();
        let mut worst = T::zero();
        for &t in times {
            let e = lp.exp(t);
            for p in [&self.pc, &self.ps, &pu] {
                worst = worst.max((&(p * &e) - &(&e * p)).max_abs());
            }
        }
        worst
    }
}

fn rank_of_projector<T: Scalar>(p: &Mat<T>) -> usize {
    p.trace().round().to_f64_lossy().max(0.0) as usize
}

/// Center/stable(/unstable) splitting from the ordered real Schur form.
pub fn spectral_split<T: Scalar>(lp: &LinearPart<T>, center_tol: T, mode: SplitMode) -> Result<Splitting<T>> {
    let split = spectral_split_uncalibrated(lp, center_tol, mode)?;
    dichotomy_constants(split, lp, T::c(DEFAULT_CONSTANTS_HORIZON), DEFAULT_CONSTANTS_SAMPLES)
}

/// Projections and exponents only; `Mc = Ms = 1` until [`dichotomy_constants`] runs.
pub fn spectral_split_uncalibrated<T: Scalar>(lp: &LinearPart<T>, center_tol: T, mode: SplitMode) -> Result<Splitting<T>> {
    if !(center_tol > T::zero()) {
        return invalid("center_tol must be positive");
    }
    let a64 = lp.a().cast::<f64>();
    let tol = center_tol.to_f64_lossy();
    let sp = spectral_projections(&a64, tol)?;
    let has_unstable = sp.eigenvalues.iter().any(|e| e.group == Group::Unstable);
    if mode == SplitMode::Dichotomy && has_unstable {
        let worst = sp.eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::SpectrumViolation(format!(
            "eigenvalue with Re λ = {worst:e} > center_tol = {tol:e} in dichotomy mode"
        )));
    }
    let scale = 100.0 * f64::EPSILON * lp.opnorm().to_f64_lossy().max(1.0);
    let center_abscissa = sp
        .eigenvalues
        .iter()
        .filter(|e| e.group == Group::Center)
        .map(|e| e.re.abs())
        .fold(0.0, f64::max);
    let gamma = if center_abscissa <= scale { 0.0 } else { (center_abscissa / tol).ceil() * tol };
    let min_of = |g: Group| {
        sp.eigenvalues
            .iter()
            .filter(|e| e.group == g)
            .map(|e| e.re.abs())
            .fold(f64::INFINITY, f64::min)
    };
    let a = lp.a();
    let pc: Mat<T> = sp.pc.cast();
    let ps: Mat<T> = sp.ps.cast();
    let pu: Mat<T> = sp.pu.cast();
    let restrict = |p: &Mat<T>| &(p * a) * p;
    let normal_tol = 1e-12 * lp.opnorm().to_f64_lossy().powi(2).max(1.0);
    // a normal block obeys the pure exponential bound at its own abscissa
    let margin = |p: &Mat<T>| {
        let b = restrict(p).cast::<f64>();
        let bt = b.transpose();
        if (&(&b * &bt) - &(&bt * &b)).max_abs() <= normal_tol {
            1.0
        } else {
            1.0 - DEFAULT_BETA_MARGIN
        }
    };
    let min_stable = min_of(Group::Stable);
    // an empty stable part makes its bound vacuous; β = 1 keeps the exponents ordered
    let beta = if min_stable.is_finite() { margin(&ps) * min_stable } else { 1.0 };
    if !(gamma < beta) {
        return Err(Error::InvalidSplit(format!("need 0 <= γ < β, got γ = {gamma}, β = {beta}")));
    }
    let min_unstable = min_of(Group::Unstable);
    let (pu_opt, au, mu, rho1, rho2, rho3) = match mode {
        SplitMode::Dichotomy => (None, None, None, None, None, None),
        SplitMode::Trichotomy => {
            let rho1 = if min_unstable.is_finite() { margin(&pu) * min_unstable } else { beta };
            if !(rho1 > gamma) {
                return Err(Error::InvalidSplit(format!("need ρ1 > ρ2, got ρ1 = {rho1}, ρ2 = {gamma}")));
            }
            (
                Some(pu.clone()),
                Some(restrict(&pu)),
                Some(T::one()),
                Some(T::c(rho1)),
                Some(T::c(gamma)),
                Some(T::c(beta)),
            )
        }
    };
    Ok(Splitting {
        mode,
        ac: restrict(&pc),
        as_: restrict(&ps),
        pc,
        ps,
        pu: pu_opt,
        au,
        mc: T::one(),
        gamma: T::c(gamma),
        ms: T::one(),
        beta: T::c(beta),
        mu,
        rho1,
        rho2,
        rho3,
        center_tol,
        spectrum: sp
            .eigenvalues
            .iter()
            .map(|e| SpectrumEntry { re: e.re, im: e.im, group: e.group.into() })
            .collect(),
        constants_horizon: T::zero(),
        constants_samples: 0,
    })
}

/// Fit `Mc`, `Ms` (and `Mu`) as sampled suprema on `[0, horizon]`, floored at 1.
pub fn dichotomy_constants<T: Scalar>(
    mut split: Splitting<T>,
    lp: &LinearPart<T>,
    horizon: T,
    samples: usize,
) -> Result<Splitting<T>> {
    if !(horizon > T::zero()) || samples < 2 {
        return invalid("dichotomy constants need a positive horizon and at least two samples");
    }
    if lp.dim() != split.dim() {
        return Err(Error::GridMismatch("splitting and generator dimensions differ".into()));
    }
    let step = horizon / T::from_usize_lossy(samples - 1);
    let two_sided_center = split.mode == SplitMode::Trichotomy;
    let pu = split.pu.clone();
    // P e^{t PAP} P instead of e^{tA} P: rounding leakage of P into the other
    // spectral parts would otherwise grow exponentially over the horizon
    let ac = LinearPart::new(split.ac.clone())?;
    let as_ = LinearPart::new(split.as_.clone())?;
    let au = split.au.clone().map(LinearPart::new).transpose()?;
    let (mut mc, mut ms, mut mu) = (T::one(), T::one(), T::one());
    for k in 0..samples {
        let t = step * T::from_usize_lossy(k);
        mc = mc.max((&(&split.pc * &ac.exp(-t)) * &split.pc).norm_op2() * (-split.gamma * t).exp());
        if let (Some(pu), Some(au), Some(rho1)) = (&pu, &au, split.rho1) {
            mu = mu.max((&(pu * &au.exp(-t)) * pu).norm_op2() * (rho1 * t).exp());
        }
        ms = ms.max((&(&split.ps * &as_.exp(t)) * &split.ps).norm_op2() * (split.beta * t).exp());
        if two_sided_center {
            mc = mc.max((&(&split.pc * &ac.exp(t)) * &split.pc).norm_op2() * (-split.gamma * t).exp());
        }
    }
    for (name, v) in [("Mc", mc), ("Ms", ms), ("Mu", mu)] {
        if !v.is_finite() {
            return Err(Error::NumericalFailure(format!("{name} is not finite on the sampled horizon")));
        }
    }
    split.mc = mc;
    split.ms = ms;
    if pu.is_some() {
        split.mu = Some(mu);
    }
    split.constants_horizon = horizon;
    split.constants_samples = samples;
    Ok(split)
}

/// `C_S`: the largest value over basis vectors `x` of
/// `(sup_t |S(t)x| + |||S(·)x|||_{2α}) / |x|` on `[0, 1]`, sampled with `steps` cells.
pub fn estimate_cs<T: Scalar>(lp: &LinearPart<T>, alpha: T, steps: usize) -> Result<T> {
    if steps == 0 {
        return invalid("C_S needs at least one step");
    }
    let grid = crate::grid_paths::make_uniform_grid(steps + 1, T::zero(), T::one())?;
    let n = lp.dim();
    let s_h = lp.exp(grid.mesh());
    let mut best = T::zero();
    for k in 0..n {
        let mut values = vec![T::zero(); (steps + 1) * n];
        values[k] = T::one();
        for j in 0..steps {
            let (prev, next) = values.split_at_mut((j + 1) * n);
            s_h.matvec(&prev[j * n..], &mut next[..n]);
        }
        let path = SampledPath::new(grid.clone(), n, values)?;
        let holder = pair_sup(grid.points(), alpha + alpha, PairPolicy::AllPairs, |s, t| path.increment_norm(s, t)).0;
        best = best.max(path.sup_norm() + holder);
    }
    Ok(best)
}

/// Quadrature rule for `∫ S(t−r) F(Y_r) dr` between grid nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftRule {
    /// `F` frozen at the left node, exact exponential weights.
    #[default]
    LeftPoint,
    /// `F` linearly interpolated between nodes, exact exponential weights.
    Linear,
}

/// Per-step matrices on a uniform grid: `e^{hA}`, `∫₀ʰ e^{(h−s)A} ds` and
/// `h⁻¹ ∫₀ʰ e^{(h−s)A} s ds`.
#[derive(Clone, Debug)]
pub struct StepKernel<T> {
    pub h: T,
    pub prop: Mat<T>,
    pub w0: Mat<T>,
    pub w1: Mat<T>,
}

impl<T: Scalar> StepKernel<T> {
    pub fn new(lp: &LinearPart<T>, h: T) -> Self {
        let (prop, w0, e13) = exp_integrals(lp.a(), h);
        Self { h, prop, w0, w1: e13.scale(T::one() / h) }
    }

    /// Add the drift contribution of one step to `out`:
    /// `w0 F_j` (left point) or `(w0 − w1) F_j + w1 F_{j+1}` (linear).
    pub fn add_drift(&self, rule: DriftRule, f_left: &[T], f_right: &[T], out: &mut [T]) {
        match rule {
            DriftRule::LeftPoint => self.w0.matvec_add(f_left, out),
            DriftRule::Linear => {
                self.w0.matvec_add(f_left, out);
                let diff: Vec<T> = f_right.iter().zip(f_left).map(|(&r, &l)| r - l).collect();
                self.w1.matvec_add(&diff, out);
            }
        }
    }
}

pub(crate) fn uniform_kernel<T: Scalar>(lp: &LinearPart<T>, grid: &TimeGrid<T>) -> Result<StepKernel<T>> {
    if !grid.is_uniform() || grid.len() < 2 {
        return invalid("semigroup convolutions need a uniform grid with at least two points");
    }
    Ok(StepKernel::new(lp, grid.mesh()))
}

/// `t ↦ S(t)ξ + ∫₀ᵗ S(t−r) F(Y_r) dr` with zero Gubinelli derivative.
pub fn semigroup_convolve_drift<T: Scalar>(
    lp: &LinearPart<T>,
    f: &dyn SmoothCoefficient<T>,
    cp: &ControlledPath<T>,
    xi: &[T],
    rule: DriftRule,
) -> Result<ControlledPath<T>> {
    let n = lp.dim();
    if xi.len() != n || f.output_len() != n || f.input_dim() != cp.value_dim() {
        return invalid("drift convolution: dimensions of A, F, Y and ξ disagree");
    }
    let grid = cp.y().grid();
    let kernel = uniform_kernel(lp, grid)?;
    let len = cp.len();
    let mut fv = vec![T::zero(); len * n];
    for j in 0..len {
        f.eval(cp.y().at(j), &mut fv[j * n..(j + 1) * n]);
    }
    let mut out = vec![T::zero(); len * n];
    out[..n].copy_from_slice(xi);
    for j in 0..len - 1 {
        let (prev, next) = out.split_at_mut((j + 1) * n);
        let next = &mut next[..n];
        kernel.prop.matvec(&prev[j * n..], next);
        kernel.add_drift(rule, &fv[j * n..(j + 1) * n], &fv[(j + 1) * n..(j + 2) * n], next);
    }
    let d = cp.noise_dim();
    ControlledPath::new(
        SampledPath::new(grid.clone(), n, out)?,
        SampledPath::zeros(grid.clone(), n * d),
        d,
    )
}

/// Germ `Y_j W_{j,j+1} + Y′_j 𝕎_{j,j+1}` for an `n x d`-valued integrand.
pub(crate) fn rough_germ<T: Scalar>(
    y: &[T],
    yp: &[T],
    w: &[T],
    ww: &[T],
    n: usize,
    d: usize,
    out: &mut [T],
) {
    for a in 0..n {
        let mut s = T::zero();
        for q in 0..d {
            let row = a * d + q;
            s += y[row] * w[q];
            for p in 0..d {
                s += yp[row * d + p] * ww[p * d + q];
            }
        }
        out[a] = s;
    }
}

/// `t ↦ ∫₀ᵗ S(t−r) Y_r dW_r` for an `L(ℝ^d, ℝ^n)`-valued controlled path
/// `Y` (stored `n x d` row-major); the Gubinelli derivative of the result is `Y`.
///
/// The compensated sum of `Z^t_· = S(t−·)Y_·` over the grid is accumulated by
/// the recursion `I_{j+1} = e^{hA}(I_j + Y_j W_{j,j+1} + Y′_j 𝕎_{j,j+1})`,
/// which reproduces every per-output-time sum term by term.
pub fn semigroup_convolve_rough<T: Scalar>(
    lp: &LinearPart<T>,
    cp: &ControlledPath<T>,
    rp: &RoughPath<T>,
) -> Result<ControlledPath<T>> {
    let n = lp.dim();
    let d = rp.dim();
    if cp.value_dim() != n * d || cp.noise_dim() != d || cp.len() != rp.len() {
        return Err(Error::GridMismatch("rough convolution: integrand, A and W disagree".into()));
    }
    let kernel = uniform_kernel(lp, rp.grid())?;
    let len = cp.len();
    let mut out = vec![T::zero(); len * n];
    let mut w = vec![T::zero(); d];
    let mut ww = vec![T::zero(); d * d];
    let mut acc = vec![T::zero(); n];
    for j in 0..len - 1 {
        rp.w(j, j + 1, &mut w);
        rp.ww(j, j + 1, &mut ww);
        rough_germ(cp.y().at(j), cp.yp().at(j), &w, &ww, n, d, &mut acc);
        for (a, x) in acc.iter_mut().enumerate() {
            *x += out[j * n + a];
        }
        kernel.prop.matvec(&acc, &mut out[(j + 1) * n..(j + 2) * n]);
    }
    let grid = rp.grid().clone();
    ControlledPath::new(SampledPath::new(grid, n, out)?, cp.y().clone(), d)
}

/// Sup-norm distance `max_t |S(t)S(τ) − S(t+τ)|` over the given pairs.
pub fn semigroup_defect<T: Scalar>(lp: &LinearPart<T>, pairs: &[(T, T)]) -> T {
    pairs.iter().fold(T::zero(), |m, &(t, tau)| {
        let lhs = &lp.exp(t) * &lp.exp(tau);
        m.max((&lhs - &lp.exp(t + tau)).max_abs())
    })
}

/// `|x|` for the stable part of `x`.
pub fn stable_norm<T: Scalar>(split: &Splitting<T>, x: &[T]) -> T {
    norm2(&split.ps.apply(x))
}
