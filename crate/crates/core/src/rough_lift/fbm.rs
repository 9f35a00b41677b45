//! Exact-in-law fractional Brownian motion on uniform grids.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::grid_paths::{make_uniform_grid, SampledPath, TimeGrid};
use crate::scalar::Scalar;

/// Largest step count sampled by dense Cholesky under [`FbmMethod::Auto`].
pub const CHOLESKY_MAX_STEPS: usize = 1024;

#[derive(Clone, Debug)]
pub struct FbmSpec<T> {
    pub hurst: f64,
    pub dim: usize,
    pub seed: u64,
    pub grid: TimeGrid<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FbmMethod {
    /// Cholesky up to [`CHOLESKY_MAX_STEPS`], circulant embedding beyond.
    #[default]
    Auto,
    Cholesky,
    /// Davies–Harte circulant embedding.
    Circulant,
}

/// Autocovariance of unit-step fractional Gaussian noise.
fn fgn_cov(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

enum Factor {
    Cholesky(Vec<f64>),
    Circulant(Vec<f64>),
}

/// Reusable sampler of unit-step fractional Gaussian noise of fixed length.
pub struct FbmSampler {
    hurst: f64,
    steps: usize,
    factor: Factor,
}

impl FbmSampler {
    pub fn new(hurst: f64, steps: usize, method: FbmMethod) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return invalid(format!("Hurst parameter {hurst} outside (0, 1)"));
        }
        if steps == 0 {
            return invalid("fBm needs at least one step");
        }
        let use_chol = match method {
            FbmMethod::Auto => steps <= CHOLESKY_MAX_STEPS,
            FbmMethod::Cholesky => true,
            FbmMethod::Circulant => false,
        };
        let factor = if use_chol { Self::cholesky(hurst, steps)? } else { Self::circulant(hurst, steps)? };
        Ok(Self { hurst, steps, factor })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn cholesky(h: f64, n: usize) -> Result<Factor> {
        let cov: Vec<f64> = (0..n).map(|k| fgn_cov(h, k)).collect();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = cov[i - j];
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                s -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::NumericalFailure("fGn covariance is not positive definite".into()));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Factor::Cholesky(l))
    }

    fn circulant(h: f64, n: usize) -> Result<Factor> {
        let m = 2 * n;
        let mut c: Vec<Complex<f64>> = (0..m)
            .map(|k| {
                let lag = if k <= n { k } else { m - k };
                Complex::new(fgn_cov(h, lag), 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut c);
        let scale = c.iter().fold(0.0f64, |a, z| a.max(z.re.abs()));
        let mut lam = Vec::with_capacity(m);
        for z in &c {
            if z.re < -1e-10 * scale {
                return Err(Error::NumericalFailure("circulant embedding has a negative eigenvalue".into()));
            }
            lam.push((z.re.max(0.0) / m as f64).sqrt());
        }
        Ok(Factor::Circulant(lam))
    }

    /// One unit-step noise vector from the given generator.
    pub fn sample_unit(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let n = self.steps;
        match &self.factor {
            Factor::Cholesky(l) => {
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                (0..n)
                    .map(|i| l[i * n..i * n + i + 1].iter().zip(&z).map(|(a, b)| a * b).sum())
                    .collect()
            }
            Factor::Circulant(lam) => {
                let m = lam.len();
                let mut buf: Vec<Complex<f64>> = lam
                    .iter()
                    .map(|&s| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                FftPlanner::new().plan_fft_forward(m).process(&mut buf);
                buf[..n].iter().map(|z| z.re).collect()
            }
        }
    }

    /// Fractional Brownian motion on a uniform grid with `steps` steps,
    /// pinned to zero at grid index `origin`.
    pub fn sample_path<T: Scalar>(&self, grid: &TimeGrid<T>, origin: usize, dim: usize, seed: u64) -> Result<SampledPath<T>> {
        if grid.steps() != self.steps || !grid.is_uniform() {
            return invalid("sampler length does not match the grid");
        }
        let h = grid.mesh().to_f64_lossy();
        let scale = h.powf(self.hurst);
        let n = grid.len();
        let mut values = vec![T::zero(); n * dim];
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for k in 0..dim {
            rng.set_stream(k as u64);
            rng.set_word_pos(0);
            let inc = self.sample_unit(&mut rng);
            let mut cum = vec![0.0; n];
            for j in 0..self.steps {
                cum[j + 1] = cum[j] + scale * inc[j];
            }
            let base = cum[origin];
            for j in 0..n {
                values[j * dim + k] = T::c(cum[j] - base);
            }
            values[origin * dim + k] = T::zero();
        }
        SampledPath::new(grid.clone(), dim, values)
    }
}

/// Exact-in-law fBm sample on `spec.grid`, pinned so that `B_0 = 0`.
pub fn sample_fbm<T: Scalar>(spec: &FbmSpec<T>) -> Result<SampledPath<T>> {
    sample_fbm_with(spec, FbmMethod::Auto)
}

pub fn sample_fbm_with<T: Scalar>(spec: &FbmSpec<T>, method: FbmMethod) -> Result<SampledPath<T>> {
    let grid = &spec.grid;
    if !grid.is_dyadic() {
        return invalid("fBm sampling needs a uniform grid with 2^J steps");
    }
    if spec.dim == 0 {
        return invalid("fBm dimension must be positive");
    }
    let origin = grid
        .index_of(T::zero())
        .ok_or_else(|| Error::InvalidArgument("time 0 must be a grid point".into()))?;
    let sampler = FbmSampler::new(spec.hurst, grid.steps(), method)?;
    sampler.sample_path(grid, origin, spec.dim, spec.seed)
}

/// Two-sided fBm on `[-horizon, horizon]` with `per_unit` steps per unit time.
pub fn two_sided_fbm<T: Scalar>(hurst: f64, dim: usize, seed: u64, horizon: usize, per_unit: usize) -> Result<SampledPath<T>> {
    let steps = 2 * horizon * per_unit;
    let grid = make_uniform_grid(steps + 1, -T::from_usize_lossy(horizon), T::from_usize_lossy(horizon))?;
    sample_fbm(&FbmSpec { hurst, dim, seed, grid })
}
