//! Rough paths: piecewise-linear and dyadic lifts, Chen's relation, time
//! shifts, the inhomogeneous rough-path metric and temperedness diagnostics.

mod fbm;

pub use fbm::{sample_fbm, sample_fbm_with, two_sided_fbm, FbmMethod, FbmSampler, FbmSpec};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid_paths::{pair_sup, PairPolicy, SampledPath, TimeGrid, TwoParamField};
use crate::scalar::{norm2, Scalar};

/// Default relative tolerance for Chen's relation.
pub const DEFAULT_CHEN_TOL: f64 = 1e-10;

/// Storage of the second level 𝕎.
#[derive(Clone, Debug, PartialEq)]
pub enum SecondLevel<T> {
    /// Every pair stored explicitly.
    Dense(TwoParamField<T>),
    /// Only `𝕎_{0,j}` is stored; other pairs follow from Chen's relation
    /// `𝕎_{s,t} = 𝕎_{0,t} - 𝕎_{0,s} - W_{0,s} ⊗ W_{s,t}`.
    Anchored(Vec<T>),
}

/// A sampled α-Hölder rough path `(W, 𝕎)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoughPath<T> {
    first: SampledPath<T>,
    second: SecondLevel<T>,
    alpha: T,
    chen_tol: T,
}

/// `out += a ⊗ b` for vectors of length `d` (row-major `d x d`).
#[inline]
fn outer_add<T: Scalar>(a: &[T], b: &[T], scale: T, out: &mut [T]) {
    let d = a.len();
    for p in 0..d {
        let ap = a[p] * scale;
        for q in 0..d {
            out[p * d + q] += ap * b[q];
        }
    }
}

impl<T: Scalar> RoughPath<T> {
    /// Assemble from an explicit second level.
    pub fn from_parts(first: SampledPath<T>, second: TwoParamField<T>, alpha: T) -> Result<Self> {
        let d = first.dim();
        if second.dim() != d * d {
            return invalid("second level must hold d x d tensors");
        }
        if !second.grid().same_as(first.grid()) {
            return Err(Error::GridMismatch("first and second level grids differ".into()));
        }
        check_alpha(alpha)?;
        Ok(Self { first, second: SecondLevel::Dense(second), alpha, chen_tol: T::c(DEFAULT_CHEN_TOL) })
    }

    fn from_anchors(first: SampledPath<T>, anchors: Vec<T>, alpha: T) -> Self {
        Self { first, second: SecondLevel::Anchored(anchors), alpha, chen_tol: T::c(DEFAULT_CHEN_TOL) }
    }

    pub fn first(&self) -> &SampledPath<T> {
        &self.first
    }

    pub fn second(&self) -> &SecondLevel<T> {
        &self.second
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        self.first.grid()
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.first.dim()
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn chen_tol(&self) -> T {
        self.chen_tol
    }

    pub fn with_chen_tol(mut self, tol: T) -> Self {
        self.chen_tol = tol;
        self
    }

    pub fn with_alpha(mut self, alpha: T) -> Result<Self> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    /// `W_{s,t}` into `out` (length `d`).
    pub fn w(&self, s: usize, t: usize, out: &mut [T]) {
        self.first.increment(s, t, out);
    }

    /// `𝕎_{s,t}` into `out` (length `d*d`, row-major).
    pub fn ww(&self, s: usize, t: usize, out: &mut [T]) {
        match &self.second {
            SecondLevel::Dense(f) => out.copy_from_slice(f.get(s, t)),
            SecondLevel::Anchored(a) => {
                let d = self.dim();
                let dd = d * d;
                for k in 0..dd {
                    out[k] = a[t * dd + k] - a[s * dd + k];
                }
                let w0 = self.first.at(0);
                let ws = self.first.at(s);
                let wt = self.first.at(t);
                for p in 0..d {
                    let x = ws[p] - w0[p];
                    for q in 0..d {
                        out[p * d + q] -= x * (wt[q] - ws[q]);
                    }
                }
            }
        }
    }

    /// Dense copy of the second level.
    pub fn second_dense(&self) -> TwoParamField<T> {
        match &self.second {
            SecondLevel::Dense(f) => f.clone(),
            SecondLevel::Anchored(_) => {
                let dd = self.dim() * self.dim();
                TwoParamField::from_fn(self.grid().clone(), dd, |s, t, out| self.ww(s, t, out))
            }
        }
    }

    /// Same rough path with explicitly stored second level.
    pub fn to_dense(&self) -> Self {
        Self { second: SecondLevel::Dense(self.second_dense()), ..self.clone() }
    }

    /// Grid α-Hölder seminorm of `W`.
    pub fn w_norm(&self, policy: PairPolicy) -> T {
        crate::grid_paths::holder_seminorm(&self.first, self.alpha, policy)
    }

    /// Grid 2α-Hölder seminorm of `𝕎`.
    pub fn ww_norm(&self, policy: PairPolicy) -> T {
        let dd = self.dim() * self.dim();
        let mut buf = vec![T::zero(); dd];
        pair_sup(self.grid().points(), self.alpha + self.alpha, policy, |s, t| {
            self.ww(s, t, &mut buf);
            norm2(&buf)
        })
        .0
    }

    /// `max_t |W_t - W_0|`, the scale used for relative Chen tolerances.
    pub fn scale(&self) -> T {
        (0..self.len()).fold(T::zero(), |m, t| m.max(self.first.increment_norm(0, t)))
    }

    /// Restriction to grid points `a..=b`.
    pub fn restrict(&self, a: usize, b: usize) -> Result<Self> {
        let first = self.first.slice(a, b)?;
        let second = match &self.second {
            SecondLevel::Dense(f) => {
                let grid = first.grid().clone();
                let dd = f.dim();
                SecondLevel::Dense(TwoParamField::from_fn(grid, dd, |s, t, out| {
                    out.copy_from_slice(f.get(a + s, a + t))
                }))
            }
            SecondLevel::Anchored(_) => {
                let dd = self.dim() * self.dim();
                let mut anchors = vec![T::zero(); (b - a + 1) * dd];
                for j in 0..=b - a {
                    self.ww(a, a + j, &mut anchors[j * dd..(j + 1) * dd]);
                }
                SecondLevel::Anchored(anchors)
            }
        };
        Ok(Self { first, second, alpha: self.alpha, chen_tol: self.chen_tol })
    }

    /// Every `stride`-th grid point; the second level is restricted, not re-lifted.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let first = self.first.subsample(stride)?;
        let dd = self.dim() * self.dim();
        let n = first.len();
        let second = match &self.second {
            SecondLevel::Dense(_) => SecondLevel::Dense(TwoParamField::from_fn(
                first.grid().clone(),
                dd,
                |s, t, out| self.ww(s * stride, t * stride, out),
            )),
            SecondLevel::Anchored(a) => {
                let mut anchors = Vec::with_capacity(n * dd);
                for j in 0..n {
                    anchors.extend_from_slice(&a[j * stride * dd..(j * stride + 1) * dd]);
                }
                SecondLevel::Anchored(anchors)
            }
        };
        Ok(Self { first, second, alpha: self.alpha, chen_tol: self.chen_tol })
    }

    /// Unit-length (or `len`-length) window of `Θ_τ W` on `[0, len]`.
    pub fn fiber(&self, tau: T, len: T) -> Result<Self> {
        shift(self, tau)?.window(T::zero(), len)
    }

    /// Restriction to the grid points inside `[t0, t1]` (both on the lattice).
    pub fn window(&self, t0: T, t1: T) -> Result<Self> {
        let grid = self.grid();
        let a = grid
            .index_of(t0)
            .ok_or_else(|| Error::InvalidArgument(format!("window start {t0} is off the grid")))?;
        let b = grid
            .index_of(t1)
            .ok_or_else(|| Error::InvalidArgument(format!("window end {t1} is off the grid")))?;
        self.restrict(a, b)
    }

    /// Index of time zero on the grid.
    pub fn origin(&self) -> Option<usize> {
        self.grid().index_of(T::zero())
    }
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if !(alpha > T::c(1.0 / 3.0) && alpha <= T::c(0.5)) {
        return invalid(format!("alpha = {alpha} outside (1/3, 1/2]"));
    }
    Ok(())
}

/// Lift by exact iterated integrals of the piecewise-linear interpolant.
pub fn lift_smooth<T: Scalar>(path: &SampledPath<T>, alpha: T) -> Result<RoughPath<T>> {
    check_alpha(alpha)?;
    let d = path.dim();
    let dd = d * d;
    let n = path.len();
    let mut anchors = vec![T::zero(); n * dd];
    let mut x = vec![T::zero(); d];
    let mut delta = vec![T::zero(); d];
    let half = T::c(0.5);
    for j in 0..n - 1 {
        let (done, rest) = anchors.split_at_mut((j + 1) * dd);
        let next = &mut rest[..dd];
        next.copy_from_slice(&done[j * dd..]);
        path.increment(0, j, &mut x);
        path.increment(j, j + 1, &mut delta);
        outer_add(&x, &delta, T::one(), next);
        outer_add(&delta, &delta, half, next);
    }
    Ok(RoughPath::from_anchors(path.clone(), anchors, alpha))
}

/// Lift of the dyadic piecewise-linear interpolant with `2^level` segments,
/// evaluated on the full grid of `path`.
///
/// The first level of the result is the interpolant itself, so Chen's
/// relation holds exactly on every grid triple.
pub fn levy_area_dyadic<T: Scalar>(path: &SampledPath<T>, level: u32, alpha: T) -> Result<RoughPath<T>> {
    let grid = path.grid();
    if !grid.is_dyadic() {
        return invalid("dyadic Lévy area needs a uniform grid with 2^J steps");
    }
    let depth = grid.steps().trailing_zeros();
    if level > depth {
        return invalid(format!("level {level} deeper than the grid depth {depth}"));
    }
    let stride = 1usize << (depth - level);
    let d = path.dim();
    let mut values = vec![T::zero(); path.len() * d];
    for (i, v) in values.chunks_mut(d).enumerate() {
        let k = i / stride;
        let r = i % stride;
        if r == 0 {
            v.copy_from_slice(path.at(i));
        } else {
            let w = T::from_usize_lossy(r) / T::from_usize_lossy(stride);
            let (a, b) = (path.at(k * stride), path.at((k + 1) * stride));
            for p in 0..d {
                v[p] = a[p] + (b[p] - a[p]) * w;
            }
        }
    }
    let interp = SampledPath::new(grid.clone(), d, values)?;
    lift_smooth(&interp, alpha)
}

/// Outcome of a Chen-relation check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChenReport {
    /// Largest residual actually evaluated.
    pub max_residual: f64,
    /// Certified upper bound on the residual over all grid triples.
    pub upper_bound: f64,
    /// Triple `(s, u, t)` attaining `max_residual`.
    pub argmax: (usize, usize, usize),
    /// Absolute threshold, `tol * scale²` (or `tol` for a constant path).
    pub threshold: f64,
    /// Whether every triple was enumerated.
    pub exhaustive: bool,
    pub pass: bool,
}

fn chen_residual<T: Scalar>(rp: &RoughPath<T>, s: usize, u: usize, t: usize, buf: &mut [Vec<T>; 4]) -> T {
    let d = rp.dim();
    let [st, su, ut, w] = buf;
    rp.ww(s, t, st);
    rp.ww(s, u, su);
    rp.ww(u, t, ut);
    let (wsu, wut) = w.split_at_mut(d);
    rp.w(s, u, wsu);
    rp.w(u, t, &mut wut[..d]);
    let mut acc = T::zero();
    for p in 0..d {
        for q in 0..d {
            let k = p * d + q;
            let r = st[k] - su[k] - ut[k] - wsu[p] * wut[q];
            acc += r * r;
        }
    }
    acc.sqrt()
}

fn chen_buffers<T: Scalar>(d: usize) -> [Vec<T>; 4] {
    [vec![T::zero(); d * d], vec![T::zero(); d * d], vec![T::zero(); d * d], vec![T::zero(); 2 * d]]
}

fn chen_threshold<T: Scalar>(rp: &RoughPath<T>, tol: T) -> T {
    let scale = rp.scale();
    if scale > T::zero() {
        tol * scale * scale
    } else {
        tol
    }
}

/// Chen's relation `𝕎_{s,t} − 𝕎_{s,u} − 𝕎_{u,t} − W_{s,u} ⊗ W_{u,t}` over all
/// grid triples, with relative tolerance `tol`.
///
/// The residuals `E_{u,t}` at triples `(0, u, t)` are evaluated directly.
/// Any other triple satisfies `res(s,u,t) = E_{s,u} + E_{u,t} − E_{s,t}`
/// algebraically, so `max|E| ≤ max res ≤ 3 max|E|`. The full cubic scan only
/// runs when that bracket straddles the threshold.
pub fn check_chen<T: Scalar>(rp: &RoughPath<T>, tol: T) -> ChenReport {
    let n = rp.len();
    let threshold = chen_threshold(rp, tol);
    let mut buf = chen_buffers(rp.dim());
    let mut best = T::zero();
    let mut arg = (0, 0, 0);
    let mut ww_max = T::zero();
    let mut tmp = vec![T::zero(); rp.dim() * rp.dim()];
    for u in 0..n {
        for t in u..n {
            let r = chen_residual(rp, 0, u, t, &mut buf);
            if r > best {
                best = r;
                arg = (0, u, t);
            }
            rp.ww(u, t, &mut tmp);
            ww_max = ww_max.max(norm2(&tmp));
        }
    }
    let scale = rp.scale();
    let slack = T::c(16.0) * T::epsilon() * (ww_max + scale * scale);
    let upper = T::c(3.0) * best + slack;
    if upper <= threshold || best > threshold {
        return ChenReport {
            max_residual: best.to_f64_lossy(),
            upper_bound: upper.to_f64_lossy(),
            argmax: arg,
            threshold: threshold.to_f64_lossy(),
            exhaustive: false,
            pass: upper <= threshold,
        };
    }
    check_chen_exhaustive(rp, tol)
}

/// Reference scan over every grid triple `s ≤ u ≤ t` (cubic cost).
pub fn check_chen_exhaustive<T: Scalar>(rp: &RoughPath<T>, tol: T) -> ChenReport {
    let n = rp.len();
    let threshold = chen_threshold(rp, tol);
    let mut buf = chen_buffers(rp.dim());
    let mut best = T::zero();
    let mut arg = (0, 0, 0);
    for s in 0..n {
        for u in s..n {
            for t in u..n {
                let r = chen_residual(rp, s, u, t, &mut buf);
                if r > best {
                    best = r;
                    arg = (s, u, t);
                }
            }
        }
    }
    ChenReport {
        max_residual: best.to_f64_lossy(),
        upper_bound: best.to_f64_lossy(),
        argmax: arg,
        threshold: threshold.to_f64_lossy(),
        exhaustive: true,
        pass: best <= threshold,
    }
}

/// Time shift `Θ_τ`: `W_t ↦ W_{t+τ} − W_τ`, `𝕎_{s,t} ↦ 𝕎_{s+τ,t+τ}` on the
/// translated window.
pub fn shift<T: Scalar>(rp: &RoughPath<T>, tau: T) -> Result<RoughPath<T>> {
    let a = rp
        .grid()
        .index_of(tau)
        .ok_or_else(|| Error::InvalidArgument(format!("shift {tau} is off the grid lattice")))?;
    let d = rp.dim();
    let grid = rp.grid().translated(tau);
    let wa = rp.first.at(a).to_vec();
    let mut values = rp.first.values().to_vec();
    for v in values.chunks_mut(d) {
        for p in 0..d {
            v[p] -= wa[p];
        }
    }
    for v in &mut values[a * d..(a + 1) * d] {
        *v = T::zero();
    }
    let first = SampledPath::new(grid.clone(), d, values)?;
    let second = match &rp.second {
        SecondLevel::Dense(f) => {
            SecondLevel::Dense(TwoParamField::from_flat(grid, f.dim(), f.flat().to_vec())?)
        }
        SecondLevel::Anchored(anchors) => SecondLevel::Anchored(anchors.clone()),
    };
    Ok(RoughPath { first, second, alpha: rp.alpha, chen_tol: rp.chen_tol })
}

/// Inhomogeneous rough-path distance: α-Hölder distance of the first levels
/// plus 2α-Hölder distance of the second levels.
pub fn rough_distance<T: Scalar>(a: &RoughPath<T>, b: &RoughPath<T>, policy: PairPolicy) -> Result<T> {
    if !a.grid().same_as(b.grid()) || a.dim() != b.dim() {
        return Err(Error::GridMismatch("rough paths live on different grids".into()));
    }
    if a.alpha != b.alpha {
        return Err(Error::GridMismatch("rough paths carry different alpha".into()));
    }
    let d = a.dim();
    let times = a.grid().points();
    let mut x = vec![T::zero(); d];
    let mut y = vec![T::zero(); d];
    let first = pair_sup(times, a.alpha, policy, |s, t| {
        a.w(s, t, &mut x);
        b.w(s, t, &mut y);
        crate::scalar::dist2(&x, &y)
    })
    .0;
    let mut xx = vec![T::zero(); d * d];
    let mut yy = vec![T::zero(); d * d];
    let second = pair_sup(times, a.alpha + a.alpha, policy, |s, t| {
        a.ww(s, t, &mut xx);
        b.ww(s, t, &mut yy);
        crate::scalar::dist2(&xx, &yy)
    })
    .0;
    Ok(first + second)
}

/// Outcome of the temperedness diagnostic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TemperednessReport {
    /// Least-squares slope of `ln⁺ X_i` against `|i|`.
    pub slope: f64,
    pub intercept: f64,
    pub threshold: f64,
    pub fibers: usize,
    pub pass: bool,
}

pub const DEFAULT_TEMPERED_THRESHOLD: f64 = 0.05;

/// Fit `ln⁺ X_i ≈ a + b|i|` by least squares; tempered from above when
/// `b ≤ threshold`.
pub fn temperedness_diagnostic<T: Scalar>(
    samples: &[(i64, T)],
    threshold: f64,
) -> Result<TemperednessReport> {
    if samples.len() < 3 {
        return invalid("temperedness needs at least three fibers");
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(i, x)| (i.unsigned_abs() as f64, x.to_f64_lossy().ln().max(0.0)))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("temperedness needs at least two distinct |i|");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(TemperednessReport {
        slope,
        intercept: my - slope * mx,
        threshold,
        fibers: samples.len(),
        pass: slope <= threshold,
    })
}

/// Interchange format: `{alpha, grid, W, WW}` with `WW` the flattened
/// upper-triangular list of `d x d` blocks (row `s`, columns `t ≥ s`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoughPathJson {
    pub alpha: f64,
    pub grid: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(rename = "WW")]
    pub ww: Vec<f64>,
}

impl<T: Scalar> RoughPath<T> {
    pub fn to_json(&self) -> RoughPathJson {
        let dense = self.second_dense();
        RoughPathJson {
            alpha: self.alpha.to_f64_lossy(),
            grid: self.grid().points().iter().map(|t| t.to_f64_lossy()).collect(),
            w: (0..self.len())
                .map(|i| self.first.at(i).iter().map(|v| v.to_f64_lossy()).collect())
                .collect(),
            ww: dense.flat().iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    pub fn from_json(j: &RoughPathJson) -> Result<Self> {
        let grid = TimeGrid::from_points(j.grid.iter().map(|&t| T::c(t)).collect())?;
        let d = j.w.first().map_or(0, Vec::len);
        if j.w.iter().any(|row| row.len() != d) {
            return invalid("ragged W rows");
        }
        let first = SampledPath::new(grid.clone(), d, j.w.concat().into_iter().map(T::c).collect())?;
        let second = TwoParamField::from_flat(grid, d * d, j.ww.iter().map(|&v| T::c(v)).collect())?;
        Self::from_parts(first, second, T::c(j.alpha))
    }
}
