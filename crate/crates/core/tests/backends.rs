//! The two SDP backends reach the same verdicts.

use lyapcert::algomodel::{tune_fg_estimating_sequences, tune_quadratic_optimal, tune_triple_momentum};
use lyapcert::certify::DEFAULT_BISECT_TOL;
use lyapcert::{
    certify_rate, certify_sensitivity, make_preset, AlgorithmRealization, BackendKind, FunctionClass, Preset,
    RateOptions, RateOutcome, SensitivityOptions,
};

fn algorithms(fc: &FunctionClass) -> Vec<(&'static str, AlgorithmRealization)> {
    let mk = |p, params| make_preset(p, &params).unwrap();
    vec![
        ("GD", mk(Preset::GD, tune_quadratic_optimal(Preset::GD, fc).unwrap())),
        ("HB", mk(Preset::HB, tune_quadratic_optimal(Preset::HB, fc).unwrap())),
        ("FG", mk(Preset::FG, tune_quadratic_optimal(Preset::FG, fc).unwrap())),
        ("FG*", mk(Preset::FG, tune_fg_estimating_sequences(fc).unwrap())),
        ("TMM", mk(Preset::TMM, tune_triple_momentum(fc).unwrap())),
    ]
}

fn rate(alg: &AlgorithmRealization, fc: &FunctionClass, backend: BackendKind) -> RateOutcome {
    let opts = RateOptions {
        backend,
        ..RateOptions::with_ell(1)
    };
    certify_rate(alg, fc, &opts).unwrap()
}

#[test]
fn rate_verdicts_agree_within_bisection_band() {
    for kappa in [2.0, 10.0, 100.0] {
        let fc = FunctionClass::with_kappa(kappa).unwrap();
        for (name, alg) in algorithms(&fc) {
            let a = rate(&alg, &fc, BackendKind::Ipm).r_upper();
            let b = rate(&alg, &fc, BackendKind::Barrier).r_upper();
            match (a, b) {
                (Some(a), Some(b)) => assert!(
                    (a - b).abs() <= 3.0 * DEFAULT_BISECT_TOL,
                    "{name} at kappa {kappa}: ipm {a} vs barrier {b}"
                ),
                (None, None) => {}
                _ => panic!("{name} at kappa {kappa}: verdicts differ ({a:?} vs {b:?})"),
            }
        }
    }
}

#[test]
fn sensitivity_bounds_agree_at_short_memory() {
    let fc = FunctionClass::new(1.0, 8.0).unwrap();
    for (name, alg) in algorithms(&fc) {
        let opts = |backend| SensitivityOptions {
            backend,
            ..SensitivityOptions::with_ell(1)
        };
        let a = certify_sensitivity(&alg, &fc, 1.0, 1, &opts(BackendKind::Ipm))
            .unwrap()
            .gamma();
        let b = certify_sensitivity(&alg, &fc, 1.0, 1, &opts(BackendKind::Barrier))
            .unwrap()
            .gamma();
        match (a, b) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-4 * a, "{name}: ipm {a} vs barrier {b}"),
            (None, None) => {}
            _ => panic!("{name}: verdicts differ ({a:?} vs {b:?})"),
        }
    }
}

/// The barrier backend may give up on harder problems, but a bound it does
/// return never undercuts the interior-point bound.
#[test]
fn barrier_never_contradicts_ipm_at_long_memory() {
    let fc = FunctionClass::new(1.0, 8.0).unwrap();
    for (name, alg) in algorithms(&fc) {
        let opts = |backend| SensitivityOptions {
            backend,
            ..SensitivityOptions::with_ell(6)
        };
        let ipm = certify_sensitivity(&alg, &fc, 1.0, 1, &opts(BackendKind::Ipm))
            .unwrap()
            .gamma();
        let barrier = certify_sensitivity(&alg, &fc, 1.0, 1, &opts(BackendKind::Barrier))
            .unwrap()
            .gamma();
        if let (Some(a), Some(b)) = (ipm, barrier) {
            assert!(b >= a * (1.0 - 1e-4), "{name}: barrier {b} below ipm {a}");
        }
    }
}
