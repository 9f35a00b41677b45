//! Controlled rough paths, compensated Riemann sums, composition with smooth
//! coefficients and the norm cut-off χ_R.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid_paths::{pair_sup, PairPolicy, SampledPath};
use crate::linalg::Mat;
use crate::rough_lift::RoughPath;
use crate::scalar::{dist2, norm2, Scalar};

/// Sup bounds on the derivatives of a coefficient (operator norms into the
/// Frobenius norm of the output). `f64::INFINITY` marks an unbounded derivative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl CoefficientBounds {
    /// `‖G‖_{C²_b}` restricted to the derivative part.
    pub fn c2b(&self) -> f64 {
        self.d1.max(self.d2)
    }

    pub fn c3b(&self) -> f64 {
        self.d1.max(self.d2).max(self.d3)
    }
}

/// Which low-order Taylor coefficients vanish at the origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VanishingFlags {
    pub value: bool,
    pub first: bool,
    pub second: bool,
}

/// A smooth map `X → ℝ^{rows x cols}` (drift: `cols = 1`; diffusion: `cols = d`).
pub trait SmoothCoefficient<T: Scalar>: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_shape(&self) -> (usize, usize);
    fn eval(&self, y: &[T], out: &mut [T]);
    /// Directional derivative `DG(y)[v]`.
    fn deriv(&self, y: &[T], v: &[T], out: &mut [T]);
    fn bounds(&self) -> CoefficientBounds;
    fn flags(&self) -> VanishingFlags;
    /// Bound on `‖D²G‖` over the ball of the given radius.
    fn second_derivative_bound(&self, _radius: f64) -> f64 {
        self.bounds().d2
    }
    fn name(&self) -> String;

    fn output_len(&self) -> usize {
        let (r, c) = self.output_shape();
        r * c
    }
}

pub type Coef<T> = Arc<dyn SmoothCoefficient<T>>;

/// Numerically confirm the declared vanishing flags.
pub fn verify_flags<T: Scalar>(g: &dyn SmoothCoefficient<T>) -> Result<()> {
    let n = g.input_dim();
    let m = g.output_len();
    let zero = vec![T::zero(); n];
    let mut out = vec![T::zero(); m];
    let flags = g.flags();
    if flags.value {
        g.eval(&zero, &mut out);
        if norm2(&out).to_f64_lossy() > 1e-12 {
            return invalid(format!("{}: flagged G(0) = 0 but |G(0)| = {:e}", g.name(), norm2(&out).to_f64_lossy()));
        }
    }
    let mut e = vec![T::zero(); n];
    if flags.first {
        for i in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[i] = T::one();
            g.deriv(&zero, &e, &mut out);
            if norm2(&out).to_f64_lossy() > 1e-12 {
                return invalid(format!("{}: flagged DG(0) = 0 but it is not", g.name()));
            }
        }
    }
    if flags.second {
        let eps = T::c(1e-4);
        let mut plus = vec![T::zero(); m];
        let mut minus = vec![T::zero(); m];
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n {
                e.iter_mut().for_each(|x| *x = T::zero());
                e[j] = T::one();
                y.iter_mut().for_each(|x| *x = T::zero());
                y[i] = eps;
                g.deriv(&y, &e, &mut plus);
                y[i] = -eps;
                g.deriv(&y, &e, &mut minus);
                let d2 = dist2(&plus, &minus) / (eps + eps);
                if d2.to_f64_lossy() > 1e-6 {
                    return invalid(format!("{}: flagged D²G(0) = 0 but it is not", g.name()));
                }
            }
        }
    }
    Ok(())
}

/// A pair `(Y, Y′)` on the grid of a reference rough path. `Y` takes values
/// in `ℝ^p`, `Y′` in `ℝ^{p x d}` (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct ControlledPath<T> {
    y: SampledPath<T>,
    yp: SampledPath<T>,
    noise_dim: usize,
}

impl<T: Scalar> ControlledPath<T> {
    pub fn new(y: SampledPath<T>, yp: SampledPath<T>, noise_dim: usize) -> Result<Self> {
        if !y.grid().same_as(yp.grid()) {
            return Err(Error::GridMismatch("Y and Y′ grids differ".into()));
        }
        if yp.dim() != y.dim() * noise_dim {
            return invalid(format!(
                "Y′ must be {} x {} per point, got {} entries",
                y.dim(),
                noise_dim,
                yp.dim()
            ));
        }
        Ok(Self { y, yp, noise_dim })
    }

    /// `(W, Id)` for a rough path `W`.
    pub fn from_rough(rp: &RoughPath<T>) -> Self {
        let d = rp.dim();
        let id = Mat::<T>::identity(d);
        let yp = SampledPath::from_fn(rp.grid().clone(), d * d, |_, v| v.copy_from_slice(id.data()));
        Self { y: rp.first().clone(), yp, noise_dim: d }
    }

    /// Zero path with values in `ℝ^p`.
    pub fn zeros(rp: &RoughPath<T>, p: usize) -> Self {
        let g = rp.grid().clone();
        Self {
            y: SampledPath::zeros(g.clone(), p),
            yp: SampledPath::zeros(g, p * rp.dim()),
            noise_dim: rp.dim(),
        }
    }

    pub fn y(&self) -> &SampledPath<T> {
        &self.y
    }

    pub fn yp(&self) -> &SampledPath<T> {
        &self.yp
    }

    pub fn value_dim(&self) -> usize {
        self.y.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn into_parts(self) -> (SampledPath<T>, SampledPath<T>) {
        (self.y, self.yp)
    }

    /// `(c Y, c Y′)`.
    pub fn scaled(&self, c: T) -> Self {
        Self { y: self.y.scaled(c), yp: self.yp.scaled(c), noise_dim: self.noise_dim }
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    fn combine(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.value_dim() != other.value_dim() || self.len() != other.len() || self.noise_dim != other.noise_dim {
            return Err(Error::GridMismatch("controlled paths have different shapes".into()));
        }
        let mut y = self.y.clone();
        for (a, &b) in y.values_mut().iter_mut().zip(other.y.values()) {
            *a = f(*a, b);
        }
        let mut yp = self.yp.clone();
        for (a, &b) in yp.values_mut().iter_mut().zip(other.yp.values()) {
            *a = f(*a, b);
        }
        Ok(Self { y, yp, noise_dim: self.noise_dim })
    }

    /// Remainder `R^Y_{s,t} = Y_{s,t} − Y′_s W_{s,t}` into `out`.
    pub fn remainder(&self, rp: &RoughPath<T>, s: usize, t: usize, wbuf: &mut [T], out: &mut [T]) {
        let d = self.noise_dim;
        rp.w(s, t, wbuf);
        self.y.increment(s, t, out);
        let yps = self.yp.at(s);
        for (a, o) in out.iter_mut().enumerate() {
            let row = &yps[a * d..(a + 1) * d];
            *o -= row.iter().zip(wbuf.iter()).map(|(&x, &w)| x * w).sum::<T>();
        }
    }

    fn check_against(&self, rp: &RoughPath<T>) -> Result<()> {
        if self.len() != rp.len() || self.noise_dim != rp.dim() {
            return Err(Error::GridMismatch("controlled path and rough path do not match".into()));
        }
        Ok(())
    }
}

/// Seminorm `‖Y′‖_α + ‖R^Y‖_{2α}` and norm `|Y_0| + |Y′_0| + seminorm`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlledNorms<T> {
    pub y0: T,
    pub yp0: T,
    pub yp_holder: T,
    pub remainder_holder: T,
    pub seminorm: T,
    pub norm: T,
}

pub fn controlled_norms<T: Scalar>(
    cp: &ControlledPath<T>,
    rp: &RoughPath<T>,
    policy: PairPolicy,
) -> Result<ControlledNorms<T>> {
    cp.check_against(rp)?;
    let alpha = rp.alpha();
    let times = rp.grid().points();
    let yp_holder = pair_sup(times, alpha, policy, |s, t| cp.yp.increment_norm(s, t)).0;
    let mut wbuf = vec![T::zero(); cp.noise_dim];
    let mut rbuf = vec![T::zero(); cp.value_dim()];
    let remainder_holder = pair_sup(times, alpha + alpha, policy, |s, t| {
        cp.remainder(rp, s, t, &mut wbuf, &mut rbuf);
        norm2(&rbuf)
    })
    .0;
    let y0 = norm2(cp.y.at(0));
    let yp0 = norm2(cp.yp.at(0));
    let seminorm = yp_holder + remainder_holder;
    Ok(ControlledNorms { y0, yp0, yp_holder, remainder_holder, seminorm, norm: y0 + yp0 + seminorm })
}

/// Result of a compensated Riemann sum.
#[derive(Clone, Debug)]
pub struct GubinelliIntegral<T> {
    /// `∫_s^t Y ⊗ dW`, a `p x d` tensor (row-major).
    pub value: Vec<T>,
    /// Sewing bound on `|∫_s^t − Y_s W_{s,t} − Y′_s 𝕎_{s,t}|`.
    pub error_estimate: T,
    pub sewing_constant: T,
}

/// Sewing constant `1 / (1 − 2^{1−3α})`.
pub fn sewing_constant<T: Scalar>(alpha: T) -> T {
    T::one() / (T::one() - T::c(2.0).powf(T::one() - T::c(3.0) * alpha))
}

/// Add the compensated increment `Y_u ⊗ W_{u,v} + Y′_u 𝕎_{u,v}` to `acc`.
fn add_germ<T: Scalar>(cp: &ControlledPath<T>, rp: &RoughPath<T>, u: usize, v: usize, w: &mut [T], ww: &mut [T], acc: &mut [T]) {
    let d = cp.noise_dim;
    rp.w(u, v, w);
    rp.ww(u, v, ww);
    let yu = cp.y.at(u);
    let ypu = cp.yp.at(u);
    for a in 0..cp.value_dim() {
        for q in 0..d {
            let mut s = yu[a] * w[q];
            for p in 0..d {
                s += ypu[a * d + p] * ww[p * d + q];
            }
            acc[a * d + q] += s;
        }
    }
}

/// Compensated Riemann sum over an explicit partition (grid indices, increasing).
pub fn gubinelli_sum<T: Scalar>(cp: &ControlledPath<T>, rp: &RoughPath<T>, partition: &[usize]) -> Result<Vec<T>> {
    cp.check_against(rp)?;
    if partition.windows(2).any(|w| w[0] >= w[1]) || partition.last().is_some_and(|&t| t >= rp.len()) {
        return invalid("partition must be increasing grid indices");
    }
    let d = cp.noise_dim;
    let mut acc = vec![T::zero(); cp.value_dim() * d];
    let mut w = vec![T::zero(); d];
    let mut ww = vec![T::zero(); d * d];
    for pair in partition.windows(2) {
        add_germ(cp, rp, pair[0], pair[1], &mut w, &mut ww, &mut acc);
    }
    Ok(acc)
}

/// `∫_s^t Y ⊗ dW` by the compensated sum over every grid point of `[s, t]`.
pub fn gubinelli_integral<T: Scalar>(cp: &ControlledPath<T>, rp: &RoughPath<T>, s: T, t: T) -> Result<GubinelliIntegral<T>> {
    let grid = rp.grid();
    let (Some(a), Some(b)) = (grid.index_of(s), grid.index_of(t)) else {
        return invalid("integration limits must be grid points");
    };
    if a > b {
        return invalid("integration needs s <= t");
    }
    let partition: Vec<usize> = (a..=b).collect();
    let value = gubinelli_sum(cp, rp, &partition)?;
    let norms = controlled_norms(cp, rp, PairPolicy::AllPairs)?;
    let alpha = rp.alpha();
    let c = sewing_constant(alpha);
    let w_norm = rp.w_norm(PairPolicy::AllPairs);
    let ww_norm = rp.ww_norm(PairPolicy::AllPairs);
    let span = grid.t(b) - grid.t(a);
    let error_estimate =
        c * (w_norm * norms.remainder_holder + ww_norm * norms.yp_holder) * span.powf(T::c(3.0) * alpha);
    Ok(GubinelliIntegral { value, error_estimate, sewing_constant: c })
}

/// Contract a `p x d` tensor integral of an `n x d`-valued integrand
/// (`p = n·d`) to `∫ Z dW ∈ ℝ^n`.
pub fn contract_linear<T: Scalar>(tensor: &[T], n: usize, d: usize) -> Vec<T> {
    (0..n)
        .map(|a| (0..d).map(|q| tensor[(a * d + q) * d + q]).sum())
        .collect()
}

/// Constant in the composition bound.
pub const COMPOSITION_CONSTANT: f64 = 4.0;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CompositionReport {
    /// `|(G(Y))′_0| + ‖G(Y), (G(Y))′‖` seminorm part, measured on the grid.
    pub measured: f64,
    /// `C ‖G‖_{C²_b} M (|Y′_0| + ‖Y,Y′‖)(1 + ‖W‖_α)²` with `M = max(1, ‖Y,Y′‖)`.
    pub bound: f64,
    pub constant: f64,
}

/// `(G(Y), DG(Y) Y′)`.
pub fn compose_smooth<T: Scalar>(
    g: &dyn SmoothCoefficient<T>,
    cp: &ControlledPath<T>,
    rp: &RoughPath<T>,
) -> Result<(ControlledPath<T>, CompositionReport)> {
    cp.check_against(rp)?;
    let out = compose_unchecked(g, cp, T::one())?;
    let policy = PairPolicy::AllPairs;
    let nin = controlled_norms(cp, rp, policy)?;
    let nout = controlled_norms(&out, rp, policy)?;
    let w = rp.w_norm(policy).to_f64_lossy();
    let big_m = nin.norm.to_f64_lossy().max(1.0);
    let c2b = g.bounds().c2b();
    let bound = COMPOSITION_CONSTANT * c2b * big_m * (nin.yp0 + nin.norm).to_f64_lossy() * (1.0 + w).powi(2);
    let measured = (nout.yp0 + nout.seminorm).to_f64_lossy();
    Ok((out, CompositionReport { measured, bound, constant: COMPOSITION_CONSTANT }))
}

/// `(G(cY), DG(cY)(cY′))` without norm bookkeeping.
pub(crate) fn compose_unchecked<T: Scalar>(
    g: &dyn SmoothCoefficient<T>,
    cp: &ControlledPath<T>,
    c: T,
) -> Result<ControlledPath<T>> {
    let n = cp.value_dim();
    if g.input_dim() != n {
        return invalid(format!("{} expects inputs of dimension {}, got {n}", g.name(), g.input_dim()));
    }
    let d = cp.noise_dim;
    let m = g.output_len();
    let grid = cp.y.grid().clone();
    let mut vals = vec![T::zero(); cp.len() * m];
    let mut ders = vec![T::zero(); cp.len() * m * d];
    let mut y = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut dv = vec![T::zero(); m];
    for i in 0..cp.len() {
        for (yk, &x) in y.iter_mut().zip(cp.y.at(i)) {
            *yk = c * x;
        }
        g.eval(&y, &mut vals[i * m..(i + 1) * m]);
        let ypi = cp.yp.at(i);
        for k in 0..d {
            for a in 0..n {
                v[a] = c * ypi[a * d + k];
            }
            g.deriv(&y, &v, &mut dv);
            for (r, &x) in dv.iter().enumerate() {
                ders[i * m * d + r * d + k] = x;
            }
        }
    }
    ControlledPath::new(SampledPath::new(grid.clone(), m, vals)?, SampledPath::new(grid, m * d, ders)?, d)
}

/// Smooth profile `f` with `f = 1` on `[0, 1/2]` and `f = 0` on `[1, ∞)`:
/// `f(x) = f̃(1−x) / (f̃(x−1/2) + f̃(1−x))`, `f̃(u) = e^{−1/u}` for `u > 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CutoffFunction;

impl CutoffFunction {
    pub const PLATEAU: f64 = 0.5;
    pub const SUPPORT: f64 = 1.0;

    fn ftilde<T: Scalar>(u: T) -> T {
        if u > T::zero() {
            (-(T::one() / u)).exp()
        } else {
            T::zero()
        }
    }

    pub fn value<T: Scalar>(&self, x: T) -> T {
        let half = T::c(0.5);
        if x <= half {
            return T::one();
        }
        if x >= T::one() {
            return T::zero();
        }
        let a = Self::ftilde(T::one() - x);
        let b = Self::ftilde(x - half);
        a / (a + b)
    }

    /// `sup |f′|`, attained at the midpoint of the transition band.
    pub fn derivative_bound(&self) -> f64 {
        let h = 1e-6;
        (0..=1000)
            .map(|k| 0.5 + 0.5 * k as f64 / 1000.0)
            .map(|x| ((self.value(x + h) - self.value(x - h)) / (2.0 * h)).abs())
            .fold(0.0, f64::max)
    }
}

/// `χ_R(Y) = (Y c, Y′ c)` with `c = f(‖Y, Y′‖ / R)`; returns the factor `c`.
pub fn cutoff<T: Scalar>(
    cp: &ControlledPath<T>,
    rp: &RoughPath<T>,
    radius: T,
    f: &CutoffFunction,
    policy: PairPolicy,
) -> Result<(ControlledPath<T>, T)> {
    if !(radius > T::zero()) {
        return invalid("cut-off radius must be positive");
    }
    let norm = controlled_norms(cp, rp, policy)?.norm;
    let c = f.value(norm / radius);
    Ok((cp.scaled(c), c))
}

/// `C_H max(|x|,|y|) |x − y|`, checked against `|H(x) − H(y)|`.
pub fn lipschitz_gap_bound<T: Scalar>(h: &dyn SmoothCoefficient<T>, x: &[T], y: &[T]) -> Result<T> {
    let flags = h.flags();
    if !(flags.value && flags.first) {
        return invalid(format!("{} is not flagged with H(0) = DH(0) = 0", h.name()));
    }
    let r = norm2(x).max(norm2(y));
    let ch = T::c(h.second_derivative_bound(r.to_f64_lossy()));
    let bound = ch * r * dist2(x, y);
    let m = h.output_len();
    let mut hx = vec![T::zero(); m];
    let mut hy = vec![T::zero(); m];
    h.eval(x, &mut hx);
    h.eval(y, &mut hy);
    let gap = dist2(&hx, &hy);
    if gap > bound * (T::one() + T::c(1e-12)) + T::epsilon() {
        return Err(Error::NumericalFailure(format!(
            "{}: |H(x) − H(y)| = {gap} exceeds C_H max(|x|,|y|)|x − y| = {bound}",
            h.name()
        )));
    }
    Ok(bound)
}
