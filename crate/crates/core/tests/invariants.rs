use proptest::prelude::*;
use varfista::audit::{audit_run, CheckStatus};
use varfista::gallery::{QpInstance, QuadraticSpec};
use varfista::schedule::check_schedule_bounds;
use varfista::{run, Config, Termination};

fn spec() -> impl Strategy<Value = QuadraticSpec> {
    (1usize..12, -4.0f64..3.0, 0.5f64..8.0, any::<u64>())
        .prop_map(|(n, lo, width, seed)| QuadraticSpec::new(n, lo, lo + width, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_run_passes_the_audit(
        spec in spec(),
        lambda0 in 0.01f64..20.0,
        theta in 1.1f64..5.0,
        gamma in 0.1f64..0.999,
        start in proptest::collection::vec(-1.0f64..1.0, 12),
    ) {
        let inst = QpInstance::generate(&spec).unwrap();
        let p = inst.to_problem::<f64>().unwrap();
        let cfg = Config::new(1e-7).with_lambda0(lambda0).with_theta(theta).with_gamma(gamma).with_max_iterations(3000);
        let r = run(&p, &cfg, &start[..spec.n]).unwrap();
        let report = audit_run(&p, &cfg, &r, 1e-8);
        // the max-form inner-loop bound is known not to hold in general;
        // the sum form must
        let failures: Vec<_> = report.failures().map(|c| c.name).filter(|&n| n != "inner_loop_bound").collect();
        prop_assert!(failures.is_empty(), "{}", report);
        prop_assert_eq!(report.get("inner_loop_bound_sum").unwrap().status, CheckStatus::Pass);
        if inst.is_convex() {
            prop_assert!(r.trace.rows.iter().all(|row| row.xi == 0.0 && row.tau == 0.0));
        }
        if r.termination == Termination::Converged {
            prop_assert!(r.certificate.residual_norm <= 1e-7);
        }
    }

    #[test]
    fn runs_are_deterministic(spec in spec()) {
        let p = QpInstance::generate(&spec).unwrap().to_problem::<f64>().unwrap();
        let cfg = Config::new(1e-6).with_max_iterations(500);
        let y0 = vec![0.0; spec.n];
        let a = run(&p, &cfg, &y0).unwrap();
        let b = run(&p, &cfg, &y0).unwrap();
        prop_assert_eq!(a.certificate, b.certificate);
        prop_assert_eq!(a.trace.rows, b.trace.rows);
    }
}

#[test]
fn schedule_bounds_short_horizon() {
    let report = check_schedule_bounds::<f64>(1000).unwrap();
    assert!(report.all_hold(), "{report:?}");
    assert!(report.max_square_identity_error <= 1e-9);
}
