//! Versioned experiment configuration.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use rough_manifold::controlled_calculus::{verify_flags, Coef};
use rough_manifold::linalg::Mat;
use rough_manifold::linear_flow::{DriftRule, LinearPart};
use rough_manifold::lp_manifold::{Dynamics, LpConfig};
use rough_manifold::rde_solver::{RadiusPolicy, SolveOptions};
use rough_manifold::systems::{
    system_with_scale, ConstantCoefficient, CubicSaturatedDiffusion, DetOracleDrift, LinearCoefficient, SystemName,
    ZeroCoefficient, ROUGH_ORACLE_SCALE,
};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default = "default_system")]
    pub system: SystemSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub lp: LpOptions,
    #[serde(default)]
    pub run: RunSpec,
}

fn default_system() -> SystemSpec {
    SystemSpec::Named(SystemName::Linear.key().to_string())
}

/// A registry key or an inline `(A, F, G)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Named(String),
    Inline(InlineSystem),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    pub f: CoefficientSpec,
    #[serde(rename = "G")]
    pub g: CoefficientSpec,
    pub noise_dim: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Zero,
    /// `x ↦ B x` reshaped to `rows x cols`; `B` has `rows·cols` rows.
    Linear { b: Vec<Vec<f64>>, rows: usize, cols: usize },
    Constant { value: Vec<f64>, rows: usize, cols: usize },
    DetOracle,
    CubicSaturated { scale: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub hurst: f64,
    /// Noise dimension; defaults to the system's.
    pub dim: Option<usize>,
    pub seeds: Vec<u64>,
    /// Two-sided paths live on `[−horizon, horizon]`.
    pub horizon: usize,
    /// Grid mesh `2^{−mesh_log2}`.
    pub mesh_log2: u32,
    /// Dyadic depth of the Lévy-area interpolant; defaults to the full grid.
    pub levy_level: Option<u32>,
    pub alpha: f64,
    /// Replace the fBm sample by the zero path.
    pub deterministic: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            hurst: 0.4,
            dim: None,
            seeds: vec![0],
            horizon: 8,
            mesh_log2: 8,
            levy_level: None,
            alpha: 0.35,
            deterministic: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpOptions {
    pub window: usize,
    pub tail_depth: Option<usize>,
    /// Weight exponent; defaults to `(γ − β)/2`.
    pub eta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub drift_rule: DriftRule,
    pub radius: RadiusPolicy,
    /// `C_S`; estimated from the semigroup when absent.
    pub c_s: Option<f64>,
}

impl Default for LpOptions {
    fn default() -> Self {
        let d = LpConfig::default();
        Self {
            window: d.window,
            tail_depth: None,
            eta: None,
            tol: d.tol,
            max_iter: d.max_iter,
            drift_rule: DriftRule::Linear,
            radius: RadiusPolicy::Fixed { radius: 1.0 },
            c_s: None,
        }
    }
}

impl LpOptions {
    pub fn config(&self, solver: &SolveOptions) -> LpConfig {
        LpConfig {
            window: self.window,
            tail_depth: self.tail_depth,
            tol: self.tol,
            max_iter: self.max_iter,
            drift_rule: self.drift_rule,
            pair_policy: solver.pair_policy,
            radius: self.radius,
            ..LpConfig::default()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    /// Initial value; zero when absent.
    pub xi: Option<Vec<f64>>,
    /// End time of `solve-rde`.
    pub t_end: usize,
    pub truncated: bool,
    /// `cocycle-check` times.
    pub t: f64,
    pub tau: f64,
    pub cocycle_tol: f64,
    pub steps: usize,
    pub invariance_tol: f64,
    /// `h^c` is sampled at `points` values in `[−extent, extent]` per center direction.
    pub extent: f64,
    pub points: usize,
    pub tangency_probe: f64,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            xi: None,
            t_end: 1,
            truncated: false,
            t: 0.5,
            tau: 0.5,
            cocycle_tol: 1e-3,
            steps: 3,
            invariance_tol: 1e-6,
            extent: 0.1,
            points: 11,
            tangency_probe: 1e-3,
        }
    }
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub mesh: Option<f64>,
    pub levy_level: Option<u32>,
    pub window: Option<usize>,
    pub tail_depth: Option<usize>,
    pub tol: Option<f64>,
    pub hurst: Option<f64>,
    pub dim: Option<usize>,
    pub horizon: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.version == CONFIG_VERSION,
            "config version {} is not supported (expected {CONFIG_VERSION})",
            self.version
        );
        ensure!(!self.noise.seeds.is_empty(), "noise.seeds must not be empty");
        ensure!(self.noise.horizon >= 1, "noise.horizon must be at least 1");
        ensure!(self.run.points >= 1, "run.points must be positive");
        self.dynamics().map(|_| ())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = &o.seeds {
            self.noise.seeds = s.clone();
        }
        if let Some(h) = o.mesh {
            let inv = 1.0 / h;
            let k = inv.log2().round();
            ensure!(h > 0.0 && (k.exp2() - inv).abs() < 1e-9 * inv, "--mesh must be a power of two, got {h}");
            self.noise.mesh_log2 = k as u32;
        }
        if let Some(l) = o.levy_level {
            self.noise.levy_level = Some(l);
        }
        if let Some(w) = o.window {
            self.lp.window = w;
        }
        if let Some(t) = o.tail_depth {
            self.lp.tail_depth = Some(t);
        }
        if let Some(h) = o.hurst {
            self.noise.hurst = h;
        }
        if let Some(d) = o.dim {
            self.noise.dim = Some(d);
        }
        if let Some(l) = o.horizon {
            self.noise.horizon = l;
        }
        if let Some(t) = o.tol {
            self.solver.tol = t;
            self.lp.tol = t;
        }
        self.validate()
    }

    /// Resolved `(A, F, G)` and the noise dimension.
    pub fn dynamics(&self) -> Result<(Dynamics<f64>, usize)> {
        match &self.system {
            SystemSpec::Named(key) => {
                let name = SystemName::parse(key).map_err(|e| anyhow::anyhow!("config error: {e}"))?;
                let sys = system_with_scale::<f64>(name, ROUGH_ORACLE_SCALE)?;
                Ok((sys.dynamics(), sys.noise_dim))
            }
            SystemSpec::Inline(s) => {
                let a = LinearPart::from_rows(&s.a)?;
                let n = a.dim();
                let d = s.noise_dim;
                ensure!(d >= 1, "inline system needs noise_dim >= 1");
                let f = coefficient(&s.f, n, n, 1)?;
                let g = coefficient(&s.g, n, n, d)?;
                verify_flags(f.as_ref())?;
                verify_flags(g.as_ref())?;
                ensure!(f.output_shape() == (n, 1), "F must map R^{n} to R^{n}");
                ensure!(g.output_shape() == (n, d), "G must map R^{n} to R^({n} x {d})");
                Ok((Dynamics { a, f, g }, d))
            }
        }
    }

    pub fn noise_dim(&self) -> Result<usize> {
        let (_, d) = self.dynamics()?;
        Ok(self.noise.dim.unwrap_or(d))
    }
}

fn coefficient(spec: &CoefficientSpec, n: usize, rows: usize, cols: usize) -> Result<Coef<f64>> {
    Ok(match spec {
        CoefficientSpec::Zero => Arc::new(ZeroCoefficient { input_dim: n, rows, cols }),
        CoefficientSpec::Linear { b, rows: r, cols: c } => {
            ensure!((*r, *c) == (rows, cols), "linear coefficient shape {r} x {c}, expected {rows} x {cols}");
            Arc::new(LinearCoefficient::new(Mat::from_rows(b)?, *r, *c)?)
        }
        CoefficientSpec::Constant { value, rows: r, cols: c } => {
            ensure!((*r, *c) == (rows, cols), "constant coefficient shape {r} x {c}, expected {rows} x {cols}");
            Arc::new(ConstantCoefficient::new(n, *r, *c, value.clone())?)
        }
        CoefficientSpec::DetOracle => {
            if n != 2 || cols != 1 {
                bail!("det-oracle drift needs n = 2");
            }
            Arc::new(DetOracleDrift)
        }
        CoefficientSpec::CubicSaturated { scale } => {
            ensure!(cols == 1, "cubic-saturated diffusion needs scalar noise");
            Arc::new(CubicSaturatedDiffusion { dim: n, scale: *scale })
        }
    })
}
