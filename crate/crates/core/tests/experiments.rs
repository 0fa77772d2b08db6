use shaperate::additive::{HClass, Shape};
use shaperate::domain::SignalSpec;
use shaperate::experiments::{
    optimal_m_for_identity, run_boundedness_probe, run_paired_lower_bound, run_risk_curve, BootstrapConfig,
    Estimator, ExperimentPlan, LossSummary, LowerBoundPlan,
};
use shaperate::noise::ErrorLaw;

fn grid() -> Vec<usize> {
    vec![64, 128, 256, 512]
}

#[test]
fn identical_plans_are_bit_identical() {
    for estimator in [
        Estimator::Isotonic,
        Estimator::Convex,
        Estimator::Additive {
            shape: Shape::Convex,
            hclass: HClass::BinnedSieve { bins: 4, bound: 1.0 },
            options: Default::default(),
        },
    ] {
        let plan = ExperimentPlan::new(estimator, SignalSpec::linear(0.0, 1.0), ErrorLaw::student_t(3.0, 0.5), grid(), 30, 9);
        let a = run_risk_curve(&plan).unwrap();
        let b = run_risk_curve(&plan).unwrap();
        assert_eq!(a, b);
        let other = run_risk_curve(&ExperimentPlan { base_seed: 1 << 40, ..plan }).unwrap();
        assert_ne!(a.losses, other.losses);
    }
    let lb = LowerBoundPlan::new(0.5, 0.25, vec![128, 256, 512, 1024], 30, 4);
    assert_eq!(run_paired_lower_bound(&lb).unwrap(), run_paired_lower_bound(&lb).unwrap());
}

#[test]
fn out_of_class_truth_is_projected() {
    let bump = SignalSpec::polynomial(vec![0.0, 4.0, -4.0]).unwrap();
    let plan = ExperimentPlan::new(Estimator::Isotonic, bump, ErrorLaw::gaussian(0.5), grid(), 30, 2);
    let curve = run_risk_curve(&plan).unwrap();
    assert!(!curve.target_in_class);
    assert!(curve.slope.unwrap() < 0.0);
}

#[test]
fn mean_summary_is_flagged() {
    let mut plan = ExperimentPlan::new(Estimator::Isotonic, SignalSpec::constant(0.0), ErrorLaw::gaussian(1.0), grid(), 30, 3);
    plan.loss_summary = LossSummary::Mean;
    assert!(run_risk_curve(&plan).unwrap().flagged);
    plan.loss_summary = LossSummary::Quantile { q: 0.9 };
    assert!(!run_risk_curve(&plan).unwrap().flagged);
}

#[test]
fn fits_stay_bounded() {
    let plan = ExperimentPlan::new(
        Estimator::Isotonic,
        SignalSpec::linear(0.0, 1.0),
        ErrorLaw::student_t(3.0, 1.0),
        vec![128, 256, 512, 1024, 2048],
        60,
        5,
    );
    let r = run_boundedness_probe(&plan, BootstrapConfig::default()).unwrap();
    assert!(r.bounded(0.0), "{r:?}");
}

#[test]
fn oracle_m_grows_like_cube_root() {
    let m1 = optimal_m_for_identity(1 << 10, 200);
    let m2 = optimal_m_for_identity(1 << 16, 200);
    assert!(m1 >= 1 && m2 > m1);
}
