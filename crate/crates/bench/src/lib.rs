//! Fixed inputs shared by the kernel benchmarks.

use confgauge_core::solver::EnergyModel;
use confgauge_core::{bundled, GridMap, MetricSpec, SolverConfig, SynthConfig};

pub fn spec(name: &str) -> MetricSpec {
    bundled::bundled(name).expect("bundled specs are valid")
}

/// Interior point away from every axis plane.
pub fn point(spec: &MetricSpec) -> Vec<f64> {
    spec.bounds().iter().enumerate().map(|(a, [lo, hi])| lo + (hi - lo) * (0.3 + 0.1 * a as f64)).collect()
}

/// Energy model on the default 17-per-axis grid with the identity as state.
pub fn energy_fixture(name: &str) -> (EnergyModel, GridMap) {
    let s = spec(name);
    let cfg = SolverConfig::default();
    let grid = cfg.grid_for(&s).expect("bundled box");
    let model = EnergyModel::new(&s, &grid, cfg.eps_reg).expect("valid model");
    let u = GridMap::identity(&grid);
    (model, u)
}

/// The default one-dimensional smoothing input.
pub fn synth_config() -> SynthConfig {
    SynthConfig::default()
}
