use rmtoolbox::dynamics::{draw_disorder, QuenchConfig};
use rmtoolbox::estimator::{group_by_time, mutual_information};
use rmtoolbox::qstate::SubsystemMask;
use rmtoolbox::randunitary::SeedStream;
use rmtoolbox::sampler::{run_protocol, ProtocolSpec};
use rmtoolbox::stats::linear_fit;
use rmtoolbox::studies::{
    disorder_study, exact_disorder_series, scaling_study, DisorderConfig, Grid, ScalingConfig, StateFamily,
};

fn small_scaling(seed: u64) -> ScalingConfig {
    ScalingConfig {
        family: StateFamily::ProductPure,
        subsystem_sizes: vec![2, 3],
        error_target: 0.12,
        trials: 8,
        grid: Grid::new(8),
        seed,
    }
}

#[test]
fn scaling_study_is_reproducible() {
    let a = scaling_study(&small_scaling(3)).unwrap();
    let b = scaling_study(&small_scaling(3)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, scaling_study(&small_scaling(4)).unwrap());
}

#[test]
fn error_surface_decreases_along_both_axes() {
    let res = scaling_study(&small_scaling(5)).unwrap();
    for s in &res.per_size {
        let err = |u: usize, m: u64| {
            s.surface.iter().find(|g| g.n_unitaries == u && g.n_shots == m).unwrap().mean_relative_error.ln()
        };
        let grid = Grid::new(8);
        let mut slopes_u = Vec::new();
        for &m in &grid.n_shots {
            let x: Vec<f64> = grid.n_unitaries.iter().map(|&u| (u as f64).ln()).collect();
            let y: Vec<f64> = grid.n_unitaries.iter().map(|&u| err(u, m)).collect();
            slopes_u.push(linear_fit(&x, &y).unwrap().slope);
        }
        let mut slopes_m = Vec::new();
        for &u in &grid.n_unitaries {
            let x: Vec<f64> = grid.n_shots.iter().map(|&m| (m as f64).ln()).collect();
            let y: Vec<f64> = grid.n_shots.iter().map(|&m| err(u, m)).collect();
            slopes_m.push(linear_fit(&x, &y).unwrap().slope);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&slopes_u) < 0.0, "N_A={} N_U slopes {slopes_u:?}", s.n_a);
        assert!(mean(&slopes_m) < 0.0, "N_A={} N_M slopes {slopes_m:?}", s.n_a);
    }
}

#[test]
fn zero_width_disorder_matches_clean_chain() {
    let mut quench = QuenchConfig::new(6, 420.0, 1.24);
    quench.times = vec![0.001, 0.003];
    quench.master_seed = 31;
    let cfg = DisorderConfig {
        quench,
        n_patterns: 4,
        n_unitaries_per_pattern: 60,
        n_shots: 150,
        width: 0.0,
        mask: SubsystemMask::range(1, 3).unwrap(),
        clean_unitaries: 0,
    };
    let study = disorder_study(&cfg).unwrap();
    for p in &study.points {
        assert!((p.exact_clean - p.exact_disordered).abs() < 1e-12);
        let (c, d) = (p.clean.s2.unwrap(), p.disordered.s2.unwrap());
        let se = (p.clean.stderr_s2.unwrap().powi(2) + p.disordered.stderr_s2.unwrap().powi(2)).sqrt();
        assert!((c - d).abs() <= 3.0 * se, "t={}: {c} vs {d} ± {se}", p.time_s);
    }
}

#[test]
fn mutual_information_decays_with_distance_under_disorder() {
    let n = 8;
    let j0 = 420.0;
    let mut q = QuenchConfig::new(n, j0, 1.24);
    q.times = vec![2.0 / j0];
    q.master_seed = 41;
    let stream = SeedStream::new(q.master_seed);
    let patterns: Vec<Vec<f64>> = (0..20).map(|p| draw_disorder(&stream, p, n, 3.0 * j0)).collect();
    let one = SubsystemMask::from_sites(&[1]).unwrap();
    let site = |j: usize| SubsystemMask::from_sites(&[j]).unwrap();

    // Exact oracle from pattern-averaged purities.
    let exact_mi = |j: usize| {
        let s = |m: SubsystemMask| -exact_disorder_series(&q, &patterns, m).unwrap()[0].log2();
        s(one) + s(site(j)) - s(one.union(site(j)))
    };
    let exact: Vec<f64> = [2, 4, 6].iter().map(|&j| exact_mi(j)).collect();
    assert!(exact[0] > exact[1] && exact[1] > exact[2], "exact {exact:?}");

    let set = run_protocol(&q, &ProtocolSpec { n_unitaries: 50, n_shots: 150, patterns }).unwrap();
    let (_, recs) = group_by_time(&set.records).remove(0);
    let mi: Vec<_> = [2, 4, 6].iter().map(|&j| mutual_information(&recs, one, site(j)).unwrap()).collect();
    assert!(mi[0].value > mi[1].value && mi[1].value > mi[2].value, "{mi:?}");
    let se = (mi[0].stderr.powi(2) + mi[2].stderr.powi(2)).sqrt();
    assert!(mi[0].value - mi[2].value > 3.0 * se, "{mi:?}");
}
