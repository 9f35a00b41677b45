//! Center manifold of `ẋ = xy, ẏ = −y + x²` next to its power series.

use rough_manifold::linear_flow::{spectral_split, DriftRule, SplitMode};
use rough_manifold::lp_manifold::{deterministic_driver, gap_constant, manifold_graph, LpConfig, LpContext, ManifoldChart};
use rough_manifold::rde_solver::RadiusPolicy;
use rough_manifold::systems::{system, SystemName};

fn main() -> rough_manifold::Result<()> {
    let sys = system::<f64>(SystemName::DetOracle)?;
    let split = spectral_split(&sys.a, 1e-8, SplitMode::Dichotomy)?;
    let gap = gap_constant(&split, 1.0)?;
    let w = deterministic_driver::<f64>(26, 0, 64, 0.45)?;
    let cfg = LpConfig {
        tol: 1e-13,
        drift_rule: DriftRule::Linear,
        radius: RadiusPolicy::Fixed { radius: 1.0 },
        ..Default::default()
    };
    let chart = ManifoldChart::new(LpContext::new(sys.dynamics(), split, gap, &w, 0, cfg)?)?;
    println!("K = {:.6}, L_Γ = {:.4}, ρ = {:.4}", gap.k, chart.l_gamma, chart.rho);
    println!("{:>6} {:>14} {:>14}", "x", "h(x)", "x²−2x⁴+12x⁶");
    for x in [0.01f64, 0.02, 0.05, 0.1] {
        let h = manifold_graph(&chart, &[x, 0.0])?.value[1];
        println!("{x:>6} {h:>14.6e} {:>14.6e}", x * x - 2.0 * x.powi(4) + 12.0 * x.powi(6));
    }
    Ok(())
}
