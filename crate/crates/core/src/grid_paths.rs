//! Time grids, sampled paths and two-parameter fields, with discrete Hölder
//! seminorm estimators.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{norm2, Scalar};

/// Strictly increasing set of sample times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TimeGrid<T> {
    points: Vec<T>,
    mesh: T,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn from_points(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 {
            return invalid("a grid needs at least two points");
        }
        let mut mesh = T::zero();
        for w in points.windows(2) {
            let gap = w[1] - w[0];
            if !(gap > T::zero()) {
                return invalid("grid points must be strictly increasing");
            }
            mesh = mesh.max(gap);
        }
        Ok(Self { points, mesh })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn mesh(&self) -> T {
        self.mesh
    }

    pub fn t(&self, i: usize) -> T {
        self.points[i]
    }

    pub fn start(&self) -> T {
        self.points[0]
    }

    pub fn end(&self) -> T {
        self.points[self.points.len() - 1]
    }

    /// Number of steps, `len() - 1`.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    /// True when all gaps agree with the mesh to a relative `1e-9`.
    pub fn is_uniform(&self) -> bool {
        let tol = self.mesh * T::c(1e-9);
        self.points
            .windows(2)
            .all(|w| (w[1] - w[0] - self.mesh).abs() <= tol)
    }

    /// Uniform grid whose step count is a power of two.
    pub fn is_dyadic(&self) -> bool {
        self.is_uniform() && self.steps().is_power_of_two()
    }

    /// Index of the grid point equal to `t` (to a tenth of the smallest gap).
    pub fn index_of(&self, t: T) -> Option<usize> {
        let tol = self.min_gap() * T::c(0.1);
        let pos = self.points.partition_point(|&p| p < t - tol);
        (pos < self.points.len() && (self.points[pos] - t).abs() <= tol).then_some(pos)
    }

    pub fn min_gap(&self) -> T {
        self.points
            .windows(2)
            .fold(T::infinity(), |m, w| m.min(w[1] - w[0]))
    }

    /// Sub-grid of points `a..=b`.
    pub fn slice(&self, a: usize, b: usize) -> Result<Self> {
        if b <= a || b >= self.len() {
            return invalid(format!("slice {a}..={b} outside grid of {} points", self.len()));
        }
        Self::from_points(self.points[a..=b].to_vec())
    }

    /// Every `stride`-th point starting from the first.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.steps().is_multiple_of(stride) {
            return invalid("stride must divide the step count");
        }
        Self::from_points(self.points.iter().step_by(stride).copied().collect())
    }

    /// Same points translated by `-tau`.
    pub fn translated(&self, tau: T) -> Self {
        Self {
            points: self.points.iter().map(|&p| p - tau).collect(),
            mesh: self.mesh,
        }
    }

    /// Whether both grids carry the same points (to rounding).
    pub fn same_as(&self, other: &Self) -> bool {
        let tol = self.mesh * T::c(1e-9);
        self.len() == other.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(&a, &b)| (a - b).abs() <= tol)
    }
}

/// `n` equally spaced points from `t0` to `t1` inclusive.
pub fn make_uniform_grid<T: Scalar>(n: usize, t0: T, t1: T) -> Result<TimeGrid<T>> {
    if n < 2 {
        return invalid("uniform grid needs n >= 2");
    }
    if !(t0 < t1) {
        return invalid("uniform grid needs t0 < t1");
    }
    let steps = T::from_usize_lossy(n - 1);
    let h = (t1 - t0) / steps;
    let mut points: Vec<T> = (0..n)
        .map(|i| t0 + (t1 - t0) * (T::from_usize_lossy(i) / steps))
        .collect();
    points[n - 1] = t1;
    Ok(TimeGrid { points, mesh: h })
}

/// Which grid pairs a Hölder estimator scans.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairPolicy {
    /// Every pair `s < t`; the reference, O(n²).
    AllPairs,
    /// Pairs whose index gap is a power of two; O(n log n).
    ///
    /// For a one-parameter path on a uniform grid the all-pairs value is at
    /// most `1 / (1 - 2^{-α})` times this estimate (split any pair into
    /// dyadic pieces of decreasing length).
    #[default]
    DyadicPairs,
}

/// Supremum of `f(s, t) / (t_t - t_s)^exponent` over the selected pairs,
/// together with the maximizing pair.
pub fn pair_sup<T: Scalar>(
    times: &[T],
    exponent: T,
    policy: PairPolicy,
    mut f: impl FnMut(usize, usize) -> T,
) -> (T, (usize, usize)) {
    let n = times.len();
    let mut best = T::zero();
    let mut arg = (0, n.saturating_sub(1));
    let mut visit = |s: usize, t: usize, best: &mut T, arg: &mut (usize, usize)| {
        let r = f(s, t) / (times[t] - times[s]).powf(exponent);
        if r > *best {
            *best = r;
            *arg = (s, t);
        }
    };
    match policy {
        PairPolicy::AllPairs => {
            for s in 0..n {
                for t in s + 1..n {
                    visit(s, t, &mut best, &mut arg);
                }
            }
        }
        PairPolicy::DyadicPairs => {
            let mut gap = 1;
            while gap < n {
                for s in 0..n - gap {
                    visit(s, s + gap, &mut best, &mut arg);
                }
                gap *= 2;
            }
            // the full interval is always included
            if n >= 2 && !(n - 1).is_power_of_two() {
                visit(0, n - 1, &mut best, &mut arg);
            }
        }
    }
    (best, arg)
}

/// A path sampled on a grid: one `dim`-vector per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SampledPath<T> {
    grid: TimeGrid<T>,
    dim: usize,
    values: Vec<T>,
}

impl<T: Scalar> SampledPath<T> {
    /// `values` is row-major: point `i` occupies `values[i*dim..(i+1)*dim]`.
    pub fn new(grid: TimeGrid<T>, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return invalid("path dimension must be positive");
        }
        if values.len() != grid.len() * dim {
            return invalid(format!(
                "expected {} values ({} points x dim {}), got {}",
                grid.len() * dim,
                grid.len(),
                dim,
                values.len()
            ));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: TimeGrid<T>, dim: usize) -> Self {
        let values = vec![T::zero(); grid.len() * dim];
        Self { grid, dim, values }
    }

    pub fn from_fn(grid: TimeGrid<T>, dim: usize, mut f: impl FnMut(T, &mut [T])) -> Self {
        let mut values = vec![T::zero(); grid.len() * dim];
        for (i, chunk) in values.chunks_mut(dim).enumerate() {
            f(grid.t(i), chunk);
        }
        Self { grid, dim, values }
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn at(&self, i: usize) -> &[T] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn at_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `Y_t - Y_s` written into `out`.
    pub fn increment(&self, s: usize, t: usize, out: &mut [T]) {
        for ((o, &a), &b) in out.iter_mut().zip(self.at(t)).zip(self.at(s)) {
            *o = a - b;
        }
    }

    pub fn increment_norm(&self, s: usize, t: usize) -> T {
        self.at(t)
            .iter()
            .zip(self.at(s))
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    pub fn sup_norm(&self) -> T {
        self.values
            .chunks(self.dim)
            .fold(T::zero(), |m, v| m.max(norm2(v)))
    }

    /// Piecewise-linear interpolation at time `t` (clamped to the grid).
    pub fn eval_linear(&self, t: T, out: &mut [T]) {
        let pts = self.grid.points();
        let j = pts.partition_point(|&p| p <= t).clamp(1, pts.len() - 1);
        let (a, b) = (pts[j - 1], pts[j]);
        let w = ((t - a) / (b - a)).max(T::zero()).min(T::one());
        for k in 0..self.dim {
            out[k] = self.at(j - 1)[k] * (T::one() - w) + self.at(j)[k] * w;
        }
    }

    /// Values at points `a..=b` on the corresponding sub-grid.
    pub fn slice(&self, a: usize, b: usize) -> Result<Self> {
        let grid = self.grid.slice(a, b)?;
        let values = self.values[a * self.dim..(b + 1) * self.dim].to_vec();
        Ok(Self { grid, dim: self.dim, values })
    }

    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.subsample(stride)?;
        let values = self
            .values
            .chunks(self.dim)
            .step_by(stride)
            .flatten()
            .copied()
            .collect();
        Ok(Self { grid, dim: self.dim, values })
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn with_grid(mut self, grid: TimeGrid<T>) -> Result<Self> {
        if grid.len() != self.grid.len() {
            return Err(Error::GridMismatch("replacement grid has a different size".into()));
        }
        self.grid = grid;
        Ok(self)
    }

    /// CSV with header `t,v1,...,vd` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.dim).map(|k| format!("v{k}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut line = format!("{:.16e}", self.grid.t(i).to_f64_lossy());
            for &v in self.at(i) {
                line.push_str(&format!(",{:.16e}", v.to_f64_lossy()));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty csv".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return invalid("csv header must be t,v1,...,vd");
        }
        let dim = cols.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.trim().split(',');
            let parse = |s: Option<&str>| -> Result<T> {
                let s = s.ok_or_else(|| Error::InvalidArgument("short csv row".into()))?;
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad number {s:?}")))?;
                Ok(T::c(v))
            };
            times.push(parse(fields.next())?);
            for _ in 0..dim {
                values.push(parse(fields.next())?);
            }
        }
        Self::new(TimeGrid::from_points(times)?, dim, values)
    }
}

/// `max |Y_t - Y_s| / (t - s)^alpha` over the selected grid pairs.
pub fn holder_seminorm<T: Scalar>(path: &SampledPath<T>, alpha: T, policy: PairPolicy) -> T {
    pair_sup(path.grid().points(), alpha, policy, |s, t| path.increment_norm(s, t)).0
}

/// A function of ordered grid pairs `s <= t`, each value a `dim`-tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TwoParamField<T> {
    grid: TimeGrid<T>,
    dim: usize,
    values: Vec<T>,
}

impl<T: Scalar> TwoParamField<T> {
    fn pair_index(n: usize, s: usize, t: usize) -> usize {
        debug_assert!(s <= t && t < n);
        s * (2 * n - s + 1) / 2 + (t - s)
    }

    pub fn zeros(grid: TimeGrid<T>, dim: usize) -> Self {
        let n = grid.len();
        Self { values: vec![T::zero(); n * (n + 1) / 2 * dim], grid, dim }
    }

    pub fn from_fn(grid: TimeGrid<T>, dim: usize, mut f: impl FnMut(usize, usize, &mut [T])) -> Self {
        let mut field = Self::zeros(grid, dim);
        let n = field.grid.len();
        for s in 0..n {
            for t in s..n {
                let k = Self::pair_index(n, s, t) * dim;
                f(s, t, &mut field.values[k..k + dim]);
            }
        }
        field
    }

    /// Build from the flattened upper-triangular layout (row `s`, columns `t >= s`).
    pub fn from_flat(grid: TimeGrid<T>, dim: usize, values: Vec<T>) -> Result<Self> {
        let n = grid.len();
        if values.len() != n * (n + 1) / 2 * dim {
            return invalid("two-parameter field has the wrong number of entries");
        }
        Ok(Self { grid, dim, values })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flat(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, s: usize, t: usize) -> &[T] {
        let k = Self::pair_index(self.grid.len(), s, t) * self.dim;
        &self.values[k..k + self.dim]
    }

    pub fn get_mut(&mut self, s: usize, t: usize) -> &mut [T] {
        let k = Self::pair_index(self.grid.len(), s, t) * self.dim;
        &mut self.values[k..k + self.dim]
    }
}

/// `max |field(s,t)| / (t - s)^exponent` over grid pairs `s < t`.
pub fn two_param_seminorm<T: Scalar>(field: &TwoParamField<T>, exponent: T, policy: PairPolicy) -> T {
    pair_sup(field.grid().points(), exponent, policy, |s, t| norm2(field.get(s, t))).0
}
