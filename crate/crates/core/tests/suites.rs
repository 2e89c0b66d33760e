use geodissip::integrate::ControlMode;
use geodissip::verify::{self, parse_suites, VerifyConfig};

#[test]
fn all_suites_pass_with_seed_42() {
    let report = verify::run(&VerifyConfig::new(parse_suites("all").unwrap(), 42)).unwrap();
    assert!(report.passed, "{report}");
}

#[test]
fn rigid_body_runs_keep_energy() {
    let damped = verify::rb_benchmark(1e-3, ControlMode::V0).unwrap();
    assert!(damped.h_drift <= 1e-10);
    assert_eq!(damped.c0_violations, 0);
    assert!(damped.c0_gain > 0.0);
    let free = verify::rb_benchmark(1e-3, ControlMode::Off).unwrap();
    assert!(free.h_drift <= 1e-10 && free.c0_drift <= 1e-10);
}
