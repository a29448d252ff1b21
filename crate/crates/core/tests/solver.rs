use confgauge_core::solver::{energy_gradient, min_jacobian, n_energy, pullback_gauge_check, solve_from, EnergyModel};
use confgauge_core::{parse, Error, Grid, GridMap, MetricSpec, SolveStatus, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn diag(n: usize, entries: &[&str]) -> MetricSpec {
    let g = (0..n * n)
        .map(|i| if i / n == i % n { parse(entries[i / n], n).unwrap() } else { parse("0", n).unwrap() })
        .collect();
    MetricSpec::new("diag", n, vec![[-0.4, 0.4]; n], g).unwrap()
}

fn skew() -> MetricSpec {
    diag(3, &["1", "1 + x1^2", "1"])
}

/// Identity with interior nodes moved by up to `amp · h`.
fn jiggled(grid: &Grid, amp: f64, seed: u64) -> GridMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = GridMap::identity(grid);
    let nodes = grid.node_count();
    let h = grid.spacing()[0];
    for node in grid.interior() {
        for j in 0..grid.dim() {
            u.values_mut()[j * nodes + node] += amp * h * rng.random_range(-1.0..1.0);
        }
    }
    u
}

fn small_config() -> SolverConfig {
    SolverConfig { grid: Some(vec![9, 9, 9]), gauge_check: false, ..Default::default() }
}

#[test]
fn gradient_matches_energy_differences_on_random_states() {
    let spec = skew();
    let grid = Grid::uniform(spec.bounds().to_vec(), 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..4 {
        let u = jiggled(&grid, 0.2, seed);
        let g = energy_gradient(&spec, &grid, &u, 1e-8).unwrap();
        let scale = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let interior = grid.interior();
        for _ in 0..12 {
            let node = interior[rng.random_range(0..interior.len())];
            let k = rng.random_range(0..3) * grid.node_count() + node;
            let step = 1e-6;
            let mut up = u.clone();
            up.values_mut()[k] += step;
            let mut dn = u.clone();
            dn.values_mut()[k] -= step;
            let fd = (n_energy(&spec, &grid, &up, 1e-8).unwrap() - n_energy(&spec, &grid, &dn, 1e-8).unwrap())
                / (2.0 * step);
            assert!((fd - g.values()[k]).abs() <= 1e-5 * scale, "{fd} vs {}", g.values()[k]);
        }
    }
}

#[test]
fn solve_is_monotone_and_keeps_the_boundary() {
    let spec = skew();
    let cfg = small_config();
    let grid = cfg.grid_for(&spec).unwrap();
    let model = EnergyModel::new(&spec, &grid, cfg.eps_reg).unwrap();
    let start = jiggled(&grid, 0.2, 3);
    let (u, rep) = solve_from(&model, start.clone(), &cfg).unwrap();
    assert_eq!(rep.status, SolveStatus::Converged);
    assert!(rep.energies.windows(2).all(|w| w[1] <= w[0]));
    let nodes = grid.node_count();
    for node in (0..nodes).filter(|k| grid.is_boundary(*k)) {
        for j in 0..3 {
            assert_eq!(u.get(j, node).to_bits(), start.get(j, node).to_bits());
        }
    }
    assert!(rep.min_jacobian > 0.0 && rep.diffeomorphic);
}

#[test]
fn constant_rescaling_leaves_the_minimizer_unchanged() {
    let (g1, g2) = (skew(), diag(3, &["2", "2 + 2*x1^2", "2"]));
    let cfg = small_config();
    let grid = cfg.grid_for(&g1).unwrap();
    let start = jiggled(&grid, 0.2, 5);
    let (u1, _) = solve_from(&EnergyModel::new(&g1, &grid, cfg.eps_reg).unwrap(), start.clone(), &cfg).unwrap();
    let (u2, _) = solve_from(&EnergyModel::new(&g2, &grid, cfg.eps_reg).unwrap(), start, &cfg).unwrap();
    assert!(u1.max_diff(&u2) < 1e-6, "{:e}", u1.max_diff(&u2));
}

#[test]
fn conformally_flat_metric_keeps_cartesian_coordinates() {
    let c = "4/(1 + x1^2 + x2^2 + x3^2)^2";
    let spec = diag(3, &[c, c, c]);
    let cfg = small_config();
    let grid = cfg.grid_for(&spec).unwrap();
    let model = EnergyModel::new(&spec, &grid, cfg.eps_reg).unwrap();
    let (u, _) = solve_from(&model, jiggled(&grid, 0.2, 9), &cfg).unwrap();
    let h = grid.spacing()[0];
    assert!(u.max_diff(&GridMap::identity(&grid)) <= 5.0 * h * h);
}

#[test]
fn folded_map_is_rejected_by_the_gauge_check() {
    let spec = skew();
    let grid = Grid::uniform(spec.bounds().to_vec(), 9).unwrap();
    let mut u = GridMap::identity(&grid);
    let center = grid.node_index(&[4, 4, 4]);
    u.values_mut()[center] += 3.0 * grid.spacing()[0];
    assert!(min_jacobian(&grid, &u) <= 0.0);
    assert!(matches!(pullback_gauge_check(&spec, &grid, &u), Err(Error::NotDiffeomorphic { .. })));
}

#[test]
fn config_rejects_unknown_keys() {
    let ok: SolverConfig = serde_json::from_str(r#"{"grid": [9, 9, 9], "tol": 1e-6}"#).unwrap();
    assert_eq!(ok.tol, 1e-6);
    assert!(serde_json::from_str::<SolverConfig>(r#"{"tolerance": 1e-6}"#).is_err());
}
