use zoh_funnel_web::{compare, design, gap_study, Setup};

#[test]
fn default_setup_is_contained_and_thinned() {
    let setup = Setup::default();
    let c = compare(&setup).unwrap();
    assert!(c.free.feasible && c.deriv.feasible);
    assert!(c.free.t.len() <= setup.max_points + 1);
    assert_eq!(*c.free.t.last().unwrap(), setup.horizon);
    assert!(c.free.input_max <= c.input_bound);
    assert!(c.input_gap < 0.2);
}

#[test]
fn coarse_sampling_separates_inputs() {
    let setup = Setup {
        beta: 5.0,
        tau: 0.07,
        ..Setup::default()
    };
    let c = compare(&setup).unwrap();
    assert!(c.free.feasible && c.deriv.feasible);
    assert!(c.input_gap > 1.0);
}

#[test]
fn zero_start_reports_violation_time() {
    let setup = Setup {
        beta: 5.0,
        tau: 0.07,
        periodic_start: false,
        ..Setup::default()
    };
    let c = compare(&setup).unwrap();
    assert!(!c.free.feasible);
    assert!(c.free.violation_time.is_some());
}

#[test]
fn design_marks_benchmark_gains_uncertified() {
    let d = design(&Setup::default()).unwrap();
    assert!(!d.certified);
    assert_eq!(d.params.beta, 25.2);
    assert!(d.report.contains("<- binding"));
    let designed = d.designed.unwrap();
    assert!(designed.tau_max > 0.0 && designed.beta > 25.2);
}

#[test]
fn gap_study_is_first_order() {
    let study = gap_study(&Setup::default(), 1e-3, 1e-2, 3).unwrap();
    assert!((study.slope - 1.0).abs() < 0.15, "{}", study.slope);
}

#[test]
fn invalid_inputs_are_errors() {
    assert!(compare(&Setup {
        lambda: 1.5,
        ..Setup::default()
    })
    .is_err());
    assert!(compare(&Setup {
        theta: 2.0,
        ..Setup::default()
    })
    .is_err());
    assert!(compare(&Setup {
        tau: 1e-6,
        ..Setup::default()
    })
    .is_err());
    assert!(gap_study(&Setup::default(), 1e-2, 1e-3, 3).is_err());
}

#[test]
fn setup_json_accepts_partial_objects() {
    let s: Setup = serde_json::from_str(r#"{"beta": 5.0}"#).unwrap();
    assert_eq!(s.beta, 5.0);
    assert_eq!(s.tau, Setup::default().tau);
}
