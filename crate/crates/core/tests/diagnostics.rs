use xorchaos::config::RunConfig;
use xorchaos::diagnostics::{
    coverage, diagnose, invariant_histogram, lyapunov, seed_points, verdict, Verdict,
};
use xorchaos::exec::Execution;
use xorchaos::map::{catalog_get, parse_map_expr};

fn small() -> RunConfig {
    RunConfig {
        seeds: 8,
        iterates: 50_000,
        grid_n: 2_000,
        basin_iterations: 2_000,
        ..RunConfig::default()
    }
}

#[test]
fn cubic_value_at_quarter() {
    assert_eq!(catalog_get("cubic", &[]).unwrap().eval(0.25).unwrap(), 1.0);
}

#[test]
fn expanding_map_fills_the_interval() {
    let w = parse_map_expr("xor(tent,inverted_tent)").unwrap();
    let seeds = seed_points(11, 10);
    assert_eq!(coverage(&w, &seeds, 1_000_000, 1000).unwrap(), 1.0);
    let h = invariant_histogram(&w, &seeds, 1_000_000, 100).unwrap();
    assert!(h.iter().all(|d| (d - 0.01).abs() < 0.0005), "{h:?}");
}

#[test]
fn attracting_point_collapses_coverage() {
    let h = parse_map_expr("xor(logistic(r=3.9),tent)").unwrap();
    let seeds = seed_points(11, 10);
    assert!(coverage(&h, &seeds, 100_000, 1000).unwrap() <= 0.005);
    let s = lyapunov(&h, &seeds, 100_000, 1000).unwrap();
    assert!((s.median - 0.1f64.ln()).abs() < 0.05);
}

#[test]
fn reports_are_identical_across_execution_modes() {
    let m = parse_map_expr("xor(cubic,logistic)").unwrap();
    let par = diagnose(&m, &small()).unwrap();
    let seq = diagnose(
        &m,
        &RunConfig {
            execution: Execution::Sequential,
            ..small()
        },
    )
    .unwrap();
    assert_eq!(par.to_json(), seq.to_json());
    assert_eq!(verdict(&par), par.verdict);
}

#[test]
fn different_seeds_give_different_orbits() {
    let m = parse_map_expr("xor(cubic,logistic)").unwrap();
    let a = diagnose(&m, &small()).unwrap();
    let b = diagnose(
        &m,
        &RunConfig {
            base_seed: 1,
            ..small()
        },
    )
    .unwrap();
    assert_ne!(a.lyapunov.per_seed, b.lyapunov.per_seed);
}

#[test]
fn zero_map_is_not_chaotic() {
    let z = parse_map_expr("xor(cubic,cubic)").unwrap();
    let r = diagnose(&z, &small()).unwrap();
    assert_eq!(r.verdict, Verdict::NonChaotic);
    assert_eq!(r.coverage, 1.0 / 1000.0);
    assert_eq!(r.histogram[0], 1.0);
    assert_eq!(r.zero_set.intervals, vec![(0.0, 1.0)]);
}
