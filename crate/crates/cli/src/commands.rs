//! Subcommand pipelines. Each seed runs independently and reports a
//! [`SeedRecord`]; artifacts are written under the output directory with the
//! seed in the file name.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};

use rough_manifold::grid_paths::{make_uniform_grid, SampledPath};
use rough_manifold::linear_flow::{estimate_cs, spectral_split, LinearPart, SplitMode, DEFAULT_CENTER_TOL};
use rough_manifold::lp_manifold::{
    gap_constant, gap_constant_for_eta, manifold_graph, tangency_check, trichotomy_gap_constant, verify_invariance,
    ChartDiagnostics, GapConstants, InvarianceReport, LpContext, ManifoldChart, TangencyReport, TrichotomyConvention,
    TrichotomyGap,
};
use rough_manifold::rde_solver::{cocycle_check, mild_residual, solve_rde, solve_rde_truncated, CocycleReport};
use rough_manifold::rough_lift::{check_chen, levy_area_dyadic, lift_smooth, sample_fbm, two_sided_fbm, FbmSpec, RoughPath};
use rough_manifold::controlled_calculus::CutoffFunction;
use rough_manifold::scalar::norm2;
use rough_manifold::Splitting64;

use crate::config::ExperimentConfig;

/// Constants logged in the run record, each copied from a module diagnostic.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "C_S", skip_serializing_if = "Option::is_none")]
    pub c_s: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(rename = "Mc", skip_serializing_if = "Option::is_none")]
    pub mc: Option<f64>,
    #[serde(rename = "Ms", skip_serializing_if = "Option::is_none")]
    pub ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl Constants {
    fn from_gap(gap: &GapConstants) -> Self {
        Self {
            c_s: Some(gap.c_s),
            k: Some(gap.k),
            r: None,
            mc: Some(gap.mc),
            ms: Some(gap.ms),
            gamma: Some(gap.gamma),
            beta: Some(gap.beta),
            eta: Some(gap.eta),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub pass: bool,
    pub constants: Constants,
    pub diagnostics: serde_json::Value,
    pub artifacts: Vec<String>,
}

fn write_json<S: Serialize>(out: &Path, name: &str, value: &S) -> Result<String> {
    let path = out.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    use std::io::Write;
    writeln!(w)?;
    Ok(name.to_string())
}

fn write_csv(out: &Path, name: &str, path: &SampledPath<f64>) -> Result<String> {
    let file = out.join(name);
    let f = File::create(&file).with_context(|| format!("creating {}", file.display()))?;
    path.write_csv(BufWriter::new(f))?;
    Ok(name.to_string())
}

/// Two-sided driver on `[−horizon, horizon]`.
pub fn driver(cfg: &ExperimentConfig, seed: u64, horizon: usize) -> Result<RoughPath<f64>> {
    let d = cfg.noise_dim()?;
    let per_unit = 1usize << cfg.noise.mesh_log2;
    let steps = 2 * horizon * per_unit;
    let alpha = cfg.noise.alpha;
    if cfg.noise.deterministic {
        let grid = make_uniform_grid(steps + 1, -(horizon as f64), horizon as f64)?;
        return Ok(lift_smooth(&SampledPath::zeros(grid, d), alpha)?);
    }
    let path = two_sided_fbm::<f64>(cfg.noise.hurst, d, seed, horizon, per_unit)?;
    let level = cfg.noise.levy_level.unwrap_or(steps.trailing_zeros());
    Ok(levy_area_dyadic(&path, level, alpha)?)
}

pub fn sample_fbm_cmd(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<SeedRecord> {
    let steps = 1usize << cfg.noise.mesh_log2;
    let grid = make_uniform_grid(steps + 1, 0.0, 1.0)?;
    let path = sample_fbm(&FbmSpec { hurst: cfg.noise.hurst, dim: cfg.noise_dim()?, seed, grid })?;
    let name = write_csv(out, &format!("fbm_seed{seed}.csv"), &path)?;
    let b0 = norm2(path.at(0));
    Ok(SeedRecord {
        seed,
        pass: b0 == 0.0,
        constants: Constants::default(),
        diagnostics: serde_json::json!({ "rows": path.len(), "B0": b0, "sup_norm": path.sup_norm() }),
        artifacts: vec![name],
    })
}

pub fn lift_cmd(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<SeedRecord> {
    let horizon = cfg.noise.horizon;
    let rp = driver(cfg, seed, horizon)?;
    let path = write_csv(out, &format!("path_seed{seed}.csv"), rp.first())?;
    let unit = rp.window(0.0, 1.0)?;
    let chen = check_chen(&unit, rp.chen_tol());
    let json = write_json(out, &format!("rough_path_seed{seed}.json"), &unit.to_json())?;
    let policy = cfg.solver.pair_policy;
    Ok(SeedRecord {
        seed,
        pass: chen.pass,
        constants: Constants::default(),
        diagnostics: serde_json::json!({
            "chen": chen,
            "w_norm": unit.w_norm(policy),
            "ww_norm": unit.ww_norm(policy),
            "horizon": horizon,
        }),
        artifacts: vec![path, json],
    })
}

fn initial_value(cfg: &ExperimentConfig, n: usize) -> Result<Vec<f64>> {
    match &cfg.run.xi {
        Some(xi) => {
            ensure!(xi.len() == n, "run.xi has {} entries, the system has dimension {n}", xi.len());
            Ok(xi.clone())
        }
        None => Ok(vec![0.0; n]),
    }
}

pub fn solve_rde_cmd(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<SeedRecord> {
    let (dy, _) = cfg.dynamics()?;
    let horizon = cfg.noise.horizon.max(cfg.run.t_end);
    let rp = driver(cfg, seed, horizon)?.window(0.0, cfg.run.t_end as f64)?;
    let xi = initial_value(cfg, dy.a.dim())?;
    let opts = &cfg.solver;
    let sol = if cfg.run.truncated {
        solve_rde_truncated(&dy.a, dy.f.as_ref(), dy.g.as_ref(), &xi, &rp, &CutoffFunction, opts)?
    } else {
        solve_rde(&dy.a, dy.f.as_ref(), dy.g.as_ref(), &xi, &rp, opts)?
    };
    let res = mild_residual(&dy.a, dy.f.as_ref(), dy.g.as_ref(), &xi, &rp, &sol, opts.drift_rule)?;
    let traj = write_csv(out, &format!("trajectory_seed{seed}.csv"), sol.path.y())?;
    let radius = sol.segments.iter().filter_map(|s| s.radius).next();
    Ok(SeedRecord {
        seed,
        pass: cfg.run.truncated || res.value.max(res.derivative) <= opts.tol,
        constants: Constants { r: radius, ..Constants::default() },
        diagnostics: serde_json::json!({
            "iterations": sol.iterations,
            "segments": sol.segments,
            "final_residual": sol.residuals.last(),
            "mild_residual": res,
            "terminal": sol.terminal(),
        }),
        artifacts: vec![traj],
    })
}

pub fn cocycle_cmd(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<SeedRecord> {
    let (dy, _) = cfg.dynamics()?;
    let span = (cfg.run.t + cfg.run.tau).ceil() as usize;
    let rp = driver(cfg, seed, cfg.noise.horizon.max(span))?;
    let xi = initial_value(cfg, dy.a.dim())?;
    let rep: CocycleReport = cocycle_check(
        &dy.a,
        dy.f.as_ref(),
        dy.g.as_ref(),
        &xi,
        &rp,
        cfg.run.t,
        cfg.run.tau,
        cfg.run.cocycle_tol,
        &cfg.solver,
    )?;
    let name = write_json(out, &format!("cocycle_seed{seed}.json"), &rep)?;
    Ok(SeedRecord {
        seed,
        pass: rep.pass,
        constants: Constants::default(),
        diagnostics: serde_json::to_value(&rep)?,
        artifacts: vec![name],
    })
}

/// Horizon covering the chart window and `steps` forward shifts.
pub fn chart_horizon(cfg: &ExperimentConfig) -> usize {
    cfg.noise.horizon.max(cfg.lp.window + 1).max(cfg.run.steps + 1)
}

fn splitting(a: &LinearPart<f64>) -> Result<Splitting64> {
    Ok(spectral_split(a, DEFAULT_CENTER_TOL, SplitMode::Dichotomy)?)
}

fn gap_for(cfg: &ExperimentConfig, split: &Splitting64, a: &LinearPart<f64>) -> Result<GapConstants> {
    let c_s = match cfg.lp.c_s {
        Some(c) => c,
        None => estimate_cs(a, cfg.noise.alpha, 1 << cfg.noise.mesh_log2)?,
    };
    Ok(match cfg.lp.eta {
        Some(eta) => gap_constant_for_eta(split, c_s, eta)?,
        None => gap_constant(split, c_s)?,
    })
}

pub fn build_chart(cfg: &ExperimentConfig, seed: u64) -> Result<(ManifoldChart<f64>, RoughPath<f64>)> {
    let (dy, _) = cfg.dynamics()?;
    let split = splitting(&dy.a)?;
    let gap = gap_for(cfg, &split, &dy.a)?;
    let w = driver(cfg, seed, chart_horizon(cfg))?;
    let ctx = LpContext::new(dy, split, gap, &w, 0, cfg.lp.config(&cfg.solver))?;
    Ok((ManifoldChart::new(ctx)?, w))
}

/// Unit vectors `Pc e_k / |Pc e_k|` for the coordinate axes with a center part.
fn center_directions(chart: &ManifoldChart<f64>) -> Vec<Vec<f64>> {
    let n = chart.ctx.n();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let v = chart.ctx.center_part(&e);
        let len = norm2(&v);
        if len > 1e-12 {
            dirs.push(v.iter().map(|x| x / len).collect());
        }
    }
    dirs
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphSample {
    pub direction: usize,
    pub s: f64,
    pub xi: Vec<f64>,
    pub h: Vec<f64>,
    pub inside_ball: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartFile {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub horizon: usize,
    pub gap: GapConstants,
    pub rho: f64,
    pub l_gamma: f64,
    pub radii: Vec<f64>,
    pub diagnostics: ChartDiagnostics,
    pub h_at_zero: Vec<f64>,
    pub tangency: TangencyReport,
    pub samples: Vec<GraphSample>,
}

pub fn center_manifold_cmd(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<SeedRecord> {
    let (chart, _) = build_chart(cfg, seed)?;
    let h0 = manifold_graph(&chart, &vec![0.0; chart.ctx.n()])?.value;
    let tangency = tangency_check(&chart, cfg.run.tangency_probe)?;
    let mut samples = Vec::new();
    let pts = cfg.run.points;
    for (k, dir) in center_directions(&chart).iter().enumerate() {
        for j in 0..pts {
            let s = if pts == 1 { 0.0 } else { -cfg.run.extent + 2.0 * cfg.run.extent * j as f64 / (pts - 1) as f64 };
            let xi: Vec<f64> = dir.iter().map(|x| x * s).collect();
            let g = manifold_graph(&chart, &xi)?;
            samples.push(GraphSample { direction: k, s, xi, h: g.value, inside_ball: g.inside_ball });
        }
    }
    let h0_norm = norm2(&h0);
    let file = ChartFile {
        config: cfg.clone(),
        seed,
        horizon: chart_horizon(cfg),
        gap: chart.ctx.gap,
        rho: chart.rho,
        l_gamma: chart.l_gamma,
        radii: chart.ctx.radii.clone(),
        diagnostics: chart.diagnostics.clone(),
        h_at_zero: h0,
        tangency: tangency.clone(),
        samples,
    };
    let name = write_json(out, &format!("chart_seed{seed}.json"), &file)?;
    let mut constants = Constants::from_gap(&chart.ctx.gap);
    constants.r = Some(chart.diagnostics.radius);
    Ok(SeedRecord {
        seed,
        pass: h0_norm <= 1e-10 && tangency.pass,
        constants,
        diagnostics: serde_json::json!({
            "chart": chart.diagnostics,
            "rho": chart.rho,
            "l_gamma": chart.l_gamma,
            "h_at_zero": h0_norm,
            "tangency_pass": tangency.pass,
        }),
        artifacts: vec![name],
    })
}

pub fn load_chart(path: &Path) -> Result<ChartFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let chart: ChartFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    chart.config.validate()?;
    Ok(chart)
}

pub fn verify_invariance_cmd(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<SeedRecord> {
    let (chart, w) = build_chart(cfg, seed)?;
    let xi = match &cfg.run.xi {
        Some(xi) => xi.clone(),
        None => {
            let dirs = center_directions(&chart);
            ensure!(!dirs.is_empty(), "the system has no center directions");
            dirs[0].iter().map(|x| x * cfg.run.extent / 2.0).collect()
        }
    };
    let rep: InvarianceReport = verify_invariance(&chart, &w, &xi, cfg.run.steps, cfg.run.invariance_tol, None)?;
    let name = write_json(out, &format!("invariance_seed{seed}.json"), &rep)?;
    let mut constants = Constants::from_gap(&chart.ctx.gap);
    constants.r = Some(chart.diagnostics.radius);
    Ok(SeedRecord {
        seed,
        pass: rep.pass,
        constants,
        diagnostics: serde_json::json!({
            "max_gap": rep.max_gap,
            "ball_exits": rep.steps.iter().filter(|s| !s.inside_ball).count(),
            "rho": chart.rho,
        }),
        artifacts: vec![name],
    })
}

/// Input of `gap-check`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C_S", default)]
    pub c_s: Option<f64>,
    #[serde(default)]
    pub mode: Option<SplitMode>,
    #[serde(default)]
    pub eta: Option<f64>,
    /// Hölder exponent for estimating `C_S`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_center_tol")]
    pub center_tol: f64,
}

fn default_alpha() -> f64 {
    0.35
}

fn default_center_tol() -> f64 {
    DEFAULT_CENTER_TOL
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapReport {
    pub splitting: Splitting64,
    #[serde(rename = "C_S")]
    pub c_s: f64,
    /// Closed-form `K` at `η = (γ − β)/2` with its evaluated left side.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<GapConstants>,
    /// Largest admissible `K` at the requested (or default) `η`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissible: Option<GapConstants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trichotomy: Option<TrichotomyGap>,
}

pub fn gap_check_cmd(m: &MatrixFile, out: &Path) -> Result<(bool, GapReport, Constants, String)> {
    let a = LinearPart::from_rows(&m.a)?;
    let mode = m.mode.unwrap_or(SplitMode::Dichotomy);
    let split = spectral_split(&a, m.center_tol, mode)?;
    let c_s = match m.c_s {
        Some(c) => c,
        None => estimate_cs(&a, m.alpha, 1024)?,
    };
    let report = match mode {
        SplitMode::Dichotomy => {
            let closed = gap_constant(&split, c_s)?;
            let eta = m.eta.unwrap_or(closed.eta);
            let admissible = gap_constant_for_eta(&split, c_s, eta)?;
            GapReport { splitting: split, c_s, closed_form: Some(closed), admissible: Some(admissible), trichotomy: None }
        }
        SplitMode::Trichotomy => {
            let t = trichotomy_gap_constant(&split, c_s, m.eta, TrichotomyConvention::PositiveWeight)?;
            GapReport { splitting: split, c_s, closed_form: None, admissible: None, trichotomy: Some(t) }
        }
    };
    let name = write_json(out, "gap.json", &report)?;
    let (pass, constants) = match (&report.admissible, &report.closed_form, &report.trichotomy) {
        (Some(adm), Some(closed), _) => (adm.satisfies_gap, Constants { k: Some(closed.k), ..Constants::from_gap(adm) }),
        (_, _, Some(t)) => (
            t.satisfies_gap,
            Constants { c_s: Some(t.c_s), k: Some(t.k), mc: Some(t.mc), ms: Some(t.ms), eta: Some(t.eta), ..Constants::default() },
        ),
        _ => unreachable!("one of the gap reports is always present"),
    };
    Ok((pass, report, constants, name))
}
