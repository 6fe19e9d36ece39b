//! Longer lifting memory never loosens a certified bound beyond solver
//! accuracy.

use lyapcert::algomodel::{tune_quadratic_optimal, tune_triple_momentum};
use lyapcert::certify::DEFAULT_BISECT_TOL;
use lyapcert::{
    certify_rate, certify_sensitivity, make_preset, FunctionClass, Preset, RateOptions, SensitivityOptions,
};

#[test]
fn rate_is_nonincreasing_in_memory() {
    for kappa in [10.0, 100.0] {
        let fc = FunctionClass::with_kappa(kappa).unwrap();
        for preset in [Preset::GD, Preset::FG, Preset::TMM] {
            let params = match preset {
                Preset::TMM => tune_triple_momentum(&fc).unwrap(),
                p => tune_quadratic_optimal(p, &fc).unwrap(),
            };
            let alg = make_preset(preset, &params).unwrap();
            let rates: Vec<f64> = (0..=2)
                .map(|ell| {
                    certify_rate(&alg, &fc, &RateOptions::with_ell(ell))
                        .unwrap()
                        .r_upper()
                        .unwrap_or(1.0)
                })
                .collect();
            for w in rates.windows(2) {
                assert!(
                    w[1] <= w[0] + 3.0 * DEFAULT_BISECT_TOL,
                    "{preset} at kappa {kappa}: {rates:?}"
                );
            }
        }
    }
}

#[test]
fn sensitivity_is_nonincreasing_in_memory() {
    let fc = FunctionClass::new(1.0, 8.0).unwrap();
    let alg = make_preset(Preset::FG, &tune_quadratic_optimal(Preset::FG, &fc).unwrap()).unwrap();
    let gammas: Vec<f64> = [1, 2, 4, 6]
        .iter()
        .map(|&ell| {
            certify_sensitivity(&alg, &fc, 1.0, 1, &SensitivityOptions::with_ell(ell))
                .unwrap()
                .gamma()
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    for w in gammas.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-6), "{gammas:?}");
    }
}
