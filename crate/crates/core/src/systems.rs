//! Concrete coefficients and the registry of named test systems.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controlled_calculus::{verify_flags, Coef, CoefficientBounds, SmoothCoefficient, VanishingFlags};
use crate::error::{invalid, Result};
use crate::linalg::Mat;
use crate::linear_flow::LinearPart;
use crate::lp_manifold::Dynamics;
use crate::scalar::Scalar;

/// `G ≡ 0` with the given shapes.
#[derive(Clone, Debug)]
pub struct ZeroCoefficient {
    pub input_dim: usize,
    pub rows: usize,
    pub cols: usize,
}

impl<T: Scalar> SmoothCoefficient<T> for ZeroCoefficient {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    fn eval(&self, _y: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
    }
    fn deriv(&self, _y: &[T], _v: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
    }
    fn bounds(&self) -> CoefficientBounds {
        CoefficientBounds { d1: 0.0, d2: 0.0, d3: 0.0 }
    }
    fn flags(&self) -> VanishingFlags {
        VanishingFlags { value: true, first: true, second: true }
    }
    fn name(&self) -> String {
        "zero".into()
    }
}

/// `G(x) = Bx`, reshaped row-major to `rows x cols`.
#[derive(Clone, Debug)]
pub struct LinearCoefficient<T> {
    b: Mat<T>,
    rows: usize,
    cols: usize,
}

impl<T: Scalar> LinearCoefficient<T> {
    pub fn new(b: Mat<T>, rows: usize, cols: usize) -> Result<Self> {
        if b.rows() != rows * cols {
            return invalid(format!("B has {} rows, expected {rows} x {cols}", b.rows()));
        }
        Ok(Self { b, rows, cols })
    }

    /// `G(x) = x` as an `n x 1` matrix (scalar noise acting on each coordinate).
    pub fn identity(n: usize) -> Self {
        Self { b: Mat::identity(n), rows: n, cols: 1 }
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.b
    }
}

impl<T: Scalar> SmoothCoefficient<T> for LinearCoefficient<T> {
    fn input_dim(&self) -> usize {
        self.b.cols()
    }
    fn output_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    fn eval(&self, y: &[T], out: &mut [T]) {
        self.b.matvec(y, out);
    }
    fn deriv(&self, _y: &[T], v: &[T], out: &mut [T]) {
        self.b.matvec(v, out);
    }
    fn bounds(&self) -> CoefficientBounds {
        CoefficientBounds { d1: self.b.norm_op2().to_f64_lossy(), d2: 0.0, d3: 0.0 }
    }
    fn flags(&self) -> VanishingFlags {
        let zero = self.b.max_abs() == T::zero();
        VanishingFlags { value: true, first: zero, second: true }
    }
    fn name(&self) -> String {
        "linear".into()
    }
}

/// Constant `G(x) = C` (e.g. additive noise `G ≡ Id`).
#[derive(Clone, Debug)]
pub struct ConstantCoefficient<T> {
    input_dim: usize,
    rows: usize,
    cols: usize,
    value: Vec<T>,
}

impl<T: Scalar> ConstantCoefficient<T> {
    pub fn new(input_dim: usize, rows: usize, cols: usize, value: Vec<T>) -> Result<Self> {
        if value.len() != rows * cols {
            return invalid("constant coefficient has the wrong number of entries");
        }
        Ok(Self { input_dim, rows, cols, value })
    }

    /// `G ≡ Id_n`: additive noise with `d = n`.
    pub fn identity(n: usize) -> Self {
        Self { input_dim: n, rows: n, cols: n, value: Mat::<T>::identity(n).data().to_vec() }
    }
}

impl<T: Scalar> SmoothCoefficient<T> for ConstantCoefficient<T> {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    fn eval(&self, _y: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.value);
    }
    fn deriv(&self, _y: &[T], _v: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
    }
    fn bounds(&self) -> CoefficientBounds {
        CoefficientBounds { d1: 0.0, d2: 0.0, d3: 0.0 }
    }
    fn flags(&self) -> VanishingFlags {
        let zero = self.value.iter().all(|&v| v == T::zero());
        VanishingFlags { value: zero, first: true, second: true }
    }
    fn name(&self) -> String {
        "constant".into()
    }
}

/// Scalar monomial `G(x) = x^p` on `ℝ`, as a `1 x 1` matrix.
#[derive(Clone, Debug)]
pub struct PowerCoefficient {
    pub power: u32,
}

impl<T: Scalar> SmoothCoefficient<T> for PowerCoefficient {
    fn input_dim(&self) -> usize {
        1
    }
    fn output_shape(&self) -> (usize, usize) {
        (1, 1)
    }
    fn eval(&self, y: &[T], out: &mut [T]) {
        out[0] = y[0].powi(self.power as i32);
    }
    fn deriv(&self, y: &[T], v: &[T], out: &mut [T]) {
        out[0] = match self.power {
            0 => T::zero(),
            p => T::from_usize_lossy(p as usize) * y[0].powi(p as i32 - 1) * v[0],
        };
    }
    fn bounds(&self) -> CoefficientBounds {
        let inf = f64::INFINITY;
        match self.power {
            0 => CoefficientBounds { d1: 0.0, d2: 0.0, d3: 0.0 },
            1 => CoefficientBounds { d1: 1.0, d2: 0.0, d3: 0.0 },
            2 => CoefficientBounds { d1: inf, d2: 2.0, d3: 0.0 },
            3 => CoefficientBounds { d1: inf, d2: inf, d3: 6.0 },
            _ => CoefficientBounds { d1: inf, d2: inf, d3: inf },
        }
    }
    fn flags(&self) -> VanishingFlags {
        VanishingFlags { value: self.power >= 1, first: self.power >= 2, second: self.power >= 3 }
    }
    fn second_derivative_bound(&self, radius: f64) -> f64 {
        let p = self.power as f64;
        if self.power < 2 {
            0.0
        } else {
            p * (p - 1.0) * radius.powi(self.power as i32 - 2)
        }
    }
    fn name(&self) -> String {
        format!("x^{}", self.power)
    }
}

/// Drift `F(x, y) = (xy, x²)` of the deterministic oracle system.
#[derive(Clone, Copy, Debug, Default)]
pub struct DetOracleDrift;

impl<T: Scalar> SmoothCoefficient<T> for DetOracleDrift {
    fn input_dim(&self) -> usize {
        2
    }
    fn output_shape(&self) -> (usize, usize) {
        (2, 1)
    }
    fn eval(&self, y: &[T], out: &mut [T]) {
        out[0] = y[0] * y[1];
        out[1] = y[0] * y[0];
    }
    fn deriv(&self, y: &[T], v: &[T], out: &mut [T]) {
        out[0] = y[1] * v[0] + y[0] * v[1];
        out[1] = (y[0] + y[0]) * v[0];
    }
    fn bounds(&self) -> CoefficientBounds {
        CoefficientBounds { d1: f64::INFINITY, d2: 5f64.sqrt(), d3: 0.0 }
    }
    fn flags(&self) -> VanishingFlags {
        VanishingFlags { value: true, first: true, second: false }
    }
    fn name(&self) -> String {
        "det-oracle-drift".into()
    }
}

/// `sup |φ^{(k)}|` for `φ(u) = u³/(1+u²)²`, `k = 1, 2, 3`, rounded up.
pub const SATURATED_CUBIC_BOUNDS: [f64; 3] = [0.37904, 0.98714, 6.0];

/// `φ(u) = u³/(1+u²)²`, which vanishes to third order at 0 and is bounded with
/// all derivatives.
pub fn saturated_cubic<T: Scalar>(u: T) -> T {
    let q = T::one() + u * u;
    u * u * u / (q * q)
}

pub fn saturated_cubic_prime<T: Scalar>(u: T) -> T {
    let u2 = u * u;
    let q = T::one() + u2;
    -u2 * (u2 - T::c(3.0)) / (q * q * q)
}

/// `G(x) = scale · (φ(x_1), …, φ(x_n))` as an `n x 1` matrix (scalar noise).
#[derive(Clone, Copy, Debug)]
pub struct CubicSaturatedDiffusion {
    pub dim: usize,
    pub scale: f64,
}

impl<T: Scalar> SmoothCoefficient<T> for CubicSaturatedDiffusion {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_shape(&self) -> (usize, usize) {
        (self.dim, 1)
    }
    fn eval(&self, y: &[T], out: &mut [T]) {
        let c = T::c(self.scale);
        for (o, &u) in out.iter_mut().zip(y) {
            *o = c * saturated_cubic(u);
        }
    }
    fn deriv(&self, y: &[T], v: &[T], out: &mut [T]) {
        let c = T::c(self.scale);
        for ((o, &u), &dv) in out.iter_mut().zip(y).zip(v) {
            *o = c * saturated_cubic_prime(u) * dv;
        }
    }
    fn bounds(&self) -> CoefficientBounds {
        let c = self.scale.abs();
        let [d1, d2, d3] = SATURATED_CUBIC_BOUNDS;
        CoefficientBounds { d1: c * d1, d2: c * d2, d3: c * d3 }
    }
    fn flags(&self) -> VanishingFlags {
        VanishingFlags { value: true, first: true, second: true }
    }
    fn name(&self) -> String {
        format!("cubic-saturated({})", self.scale)
    }
}

type EvalFn<T> = dyn Fn(&[T], &mut [T]) + Send + Sync;
type DerivFn<T> = dyn Fn(&[T], &[T], &mut [T]) + Send + Sync;

/// Coefficient from closures with caller-declared bounds and flags.
pub struct FnCoefficient<T> {
    pub name: String,
    pub input_dim: usize,
    pub shape: (usize, usize),
    pub eval: Box<EvalFn<T>>,
    pub deriv: Box<DerivFn<T>>,
    pub bounds: CoefficientBounds,
    pub flags: VanishingFlags,
}

impl<T: Scalar> SmoothCoefficient<T> for FnCoefficient<T> {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_shape(&self) -> (usize, usize) {
        self.shape
    }
    fn eval(&self, y: &[T], out: &mut [T]) {
        (self.eval)(y, out)
    }
    fn deriv(&self, y: &[T], v: &[T], out: &mut [T]) {
        (self.deriv)(y, v, out)
    }
    fn bounds(&self) -> CoefficientBounds {
        self.bounds
    }
    fn flags(&self) -> VanishingFlags {
        self.flags
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Names of the shipped test systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemName {
    /// `A = diag(0, −1)`, `F = G = 0`.
    Linear,
    /// `ẋ = xy`, `ẏ = −y + x²`, `G = 0`.
    DetOracle,
    /// The deterministic oracle drift plus a small saturated-cubic diffusion.
    RoughOracle,
}

impl SystemName {
    pub const ALL: [SystemName; 3] = [SystemName::Linear, SystemName::DetOracle, SystemName::RoughOracle];

    pub fn key(self) -> &'static str {
        match self {
            SystemName::Linear => "linear",
            SystemName::DetOracle => "det-oracle",
            SystemName::RoughOracle => "rough-oracle",
        }
    }

    pub fn parse(key: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.key() == key)
            .map_or_else(|| invalid(format!("unknown system {key:?}")), Ok)
    }
}

/// Default diffusion scale of the rough oracle system.
pub const ROUGH_ORACLE_SCALE: f64 = 0.2;

/// A registered system `dU = (AU + F(U))dt + G(U)dW` with `d`-dimensional noise.
#[derive(Clone)]
pub struct TestSystem<T> {
    pub name: SystemName,
    pub a: LinearPart<T>,
    pub f: Coef<T>,
    pub g: Coef<T>,
    pub noise_dim: usize,
}

impl<T: Scalar> TestSystem<T> {
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn dynamics(&self) -> Dynamics<T> {
        Dynamics { a: self.a.clone(), f: self.f.clone(), g: self.g.clone() }
    }
}

/// Build a registered system; flags of both coefficients are verified.
pub fn system<T: Scalar>(name: SystemName) -> Result<TestSystem<T>> {
    system_with_scale(name, ROUGH_ORACLE_SCALE)
}

/// As [`system`], with an explicit diffusion scale for the rough oracle.
pub fn system_with_scale<T: Scalar>(name: SystemName, scale: f64) -> Result<TestSystem<T>> {
    let a = LinearPart::diag(&[T::zero(), -T::one()])?;
    let zero_f: Coef<T> = Arc::new(ZeroCoefficient { input_dim: 2, rows: 2, cols: 1 });
    let zero_g: Coef<T> = Arc::new(ZeroCoefficient { input_dim: 2, rows: 2, cols: 1 });
    let oracle: Coef<T> = Arc::new(DetOracleDrift);
    let sys = match name {
        SystemName::Linear => TestSystem { name, a, f: zero_f, g: zero_g, noise_dim: 1 },
        SystemName::DetOracle => TestSystem { name, a, f: oracle, g: zero_g, noise_dim: 1 },
        SystemName::RoughOracle => TestSystem {
            name,
            a,
            f: oracle,
            g: Arc::new(CubicSaturatedDiffusion { dim: 2, scale }),
            noise_dim: 1,
        },
    };
    verify_flags(sys.f.as_ref())?;
    verify_flags(sys.g.as_ref())?;
    Ok(sys)
}
