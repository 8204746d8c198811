//! Declarative trial specifications and simulation-truth cohort generation.

mod generate;
mod spec;

pub use generate::{
    generate_cohort, generate_cohort_sized, merge_datasets, stage_analysis_data, GenerateError,
};
pub use spec::{
    load_trial_spec, CovariateGenerator, CovariateSpec, DataAccumulation, DecisionRule,
    InterimRules, Noise, OutcomeSpec, SpecError, StagePlan, Threshold, TrialDesign, Violation,
};

/// Example models and trial specifications bundled with the library.
pub mod assets {
    pub const APPENDIX_MODEL: &str = include_str!("../../assets/appendix_model.bug");
    pub const APPENDIX_MODEL_3COEF: &str = include_str!("../../assets/appendix_model_3coef.bug");
    pub const APPENDIX_TRIAL: &str = include_str!("../../assets/appendix_trial.json");
    pub const APPENDIX_TRIAL_REGENERATE: &str =
        include_str!("../../assets/appendix_trial_regenerate.json");
    pub const APPENDIX_TRIAL_CORRECTED: &str =
        include_str!("../../assets/appendix_trial_corrected.json");
    pub const APPENDIX_TRIAL_3COEF: &str = include_str!("../../assets/appendix_trial_3coef.json");
    pub const LOGISTIC_TRIAL: &str = include_str!("../../assets/logistic_trial.json");
    pub const POISSON_TRIAL: &str = include_str!("../../assets/poisson_trial.json");

    pub const ALL_TRIALS: [(&str, &str); 6] = [
        ("appendix_trial.json", APPENDIX_TRIAL),
        ("appendix_trial_regenerate.json", APPENDIX_TRIAL_REGENERATE),
        ("appendix_trial_corrected.json", APPENDIX_TRIAL_CORRECTED),
        ("appendix_trial_3coef.json", APPENDIX_TRIAL_3COEF),
        ("logistic_trial.json", LOGISTIC_TRIAL),
        ("poisson_trial.json", POISSON_TRIAL),
    ];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::normal_cdf;
    use crate::rng::RandomStream;

    fn appendix() -> TrialDesign {
        load_trial_spec(assets::APPENDIX_TRIAL).unwrap()
    }

    fn edited(f: impl FnOnce(&mut serde_json::Value)) -> Result<TrialDesign, SpecError> {
        let mut v: serde_json::Value = serde_json::from_str(assets::APPENDIX_TRIAL).unwrap();
        f(&mut v);
        load_trial_spec(&v.to_string())
    }

    #[test]
    fn shipped_specs_load() {
        for (name, text) in assets::ALL_TRIALS {
            load_trial_spec(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn appendix_design_shape() {
        let d = appendix();
        assert_eq!(d.stages.len(), 2);
        assert_eq!(d.cumulative_per_arm(1), 100);
        assert_eq!(d.cumulative_per_arm(2), 200);
        let r = &d.rules;
        assert_eq!(
            (
                r.interim.efficacy.delta,
                r.interim.futility.delta,
                r.final_rule.delta
            ),
            (10.0, 5.0, 5.0)
        );
        assert_eq!(
            (
                r.interim.efficacy.prob_threshold,
                r.interim.futility.prob_threshold,
                r.final_rule.prob_threshold
            ),
            (0.95, 0.05, 0.95)
        );
        assert_eq!(d.data_accumulation, DataAccumulation::Accumulate);
        assert_eq!(d.mcmc.burn_in, 5000);
        assert_eq!(d.column_names(), vec!["Y", "X", "A"]);
    }

    #[test]
    fn threshold_out_of_range() {
        let err = edited(|v| v["rules"]["interim"]["efficacy"]["prob_threshold"] = 1.5.into())
            .unwrap_err();
        assert_eq!(err.paths(), vec!["rules.interim.efficacy.prob_threshold"]);
    }

    #[test]
    fn undeclared_covariate_in_truth() {
        let err = edited(|v| v["outcome"]["mean_expression"] = "intercept + effect * Z".into())
            .unwrap_err();
        assert_eq!(err.paths(), vec!["outcome.mean_expression"]);
        assert!(err.to_string().contains("Z"));
    }

    #[test]
    fn all_violations_reported() {
        let err = edited(|v| {
            v["outcome"]["noise"]["normal_by_sd"]["sd"] = 0.0.into();
            v["stages"][1]["stage_index"] = 5.into();
            v["rules"]["final"]["prob_threshold"] = (-0.1).into();
            v["rules"]["effect_parameter"] = "gamma".into();
        })
        .unwrap_err();
        assert_eq!(
            err.paths(),
            vec![
                "outcome.noise.normal_by_sd.sd",
                "stages[1].stage_index",
                "rules.final.prob_threshold",
                "rules.effect_parameter"
            ]
        );
    }

    #[test]
    fn structural_errors_carry_path() {
        let err = edited(|v| v["stages"][0]["n_per_arm"] = "many".into()).unwrap_err();
        assert_eq!(err.paths(), vec!["stages[0].n_per_arm"]);
        let err = edited(|v| v["covariates"][0]["colour"] = 1.into()).unwrap_err();
        assert_eq!(err.paths(), vec!["covariates[0].colour"]);
        assert!(load_trial_spec("not json").is_err());
    }

    #[test]
    fn model_errors_surface_with_span() {
        let err =
            edited(|v| v["analysis_model"] = "model { Y[1] ~ dnorm(0 1) }".into()).unwrap_err();
        assert_eq!(err.paths(), vec!["analysis_model"]);
        assert!(err.to_string().contains("1:24"), "{err}");
    }

    #[test]
    fn round_trips_through_json() {
        let d = appendix();
        assert_eq!(load_trial_spec(&d.to_json()).unwrap(), d);
    }

    #[test]
    fn stage_one_cohort() {
        let d = appendix();
        let ds = generate_cohort(&d, 1, &mut RandomStream::new(7)).unwrap();
        assert_eq!(ds.row_count(), 200);
        assert_eq!(ds.column_names().collect::<Vec<_>>(), vec!["Y", "X", "A"]);
        let x = ds.column("X").unwrap();
        assert!(x[..100].iter().all(|v| *v == Some(0.0)));
        assert!(x[100..].iter().all(|v| *v == Some(1.0)));
        assert!(ds.column("A").unwrap().iter().all(|v| v.unwrap() >= 3.0));
        assert!(matches!(
            generate_cohort(&d, 3, &mut RandomStream::new(7)),
            Err(GenerateError::NoSuchStage {
                stage: 3,
                stages: 2
            })
        ));
    }

    #[test]
    fn same_seed_same_cohort() {
        let d = appendix();
        let a = generate_cohort(&d, 1, &mut RandomStream::new(3)).unwrap();
        let b = generate_cohort(&d, 1, &mut RandomStream::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn null_effect_arm_means_close() {
        let d = edited(|v| v["outcome"]["truth_params"]["effect"] = 0.0.into()).unwrap();
        let bound = 4.0 * 20.0 * (2.0f64 / 100.0).sqrt();
        for seed in 0..20 {
            let ds = generate_cohort(&d, 1, &mut RandomStream::new(seed)).unwrap();
            let y: Vec<f64> = ds.column("Y").unwrap().iter().map(|v| v.unwrap()).collect();
            let m0 = y[..100].iter().sum::<f64>() / 100.0;
            let m1 = y[100..].iter().sum::<f64>() / 100.0;
            assert!((m1 - m0).abs() < bound);
        }
    }

    #[test]
    fn truncation_point_mass() {
        let d = appendix();
        let a = d.covariates[1].generate(50_000, &mut RandomStream::new(99));
        let frac = a.iter().filter(|&&x| x == 3.0).count() as f64 / a.len() as f64;
        assert!((frac - normal_cdf(-1.25)).abs() < 0.01, "{frac}");
    }

    #[test]
    fn accumulate_and_regenerate() {
        let d = appendix();
        let mut rng = RandomStream::new(1);
        let s1 = generate_cohort(&d, 1, &mut rng).unwrap();
        let s2 = stage_analysis_data(&d, 2, &s1, &mut rng).unwrap();
        assert_eq!(s2.row_count(), 400);
        for i in 0..200 {
            assert_eq!(s2.row(i), s1.row(i));
        }
        let r = load_trial_spec(assets::APPENDIX_TRIAL_REGENERATE).unwrap();
        let s2 = stage_analysis_data(&r, 2, &s1, &mut rng).unwrap();
        assert_eq!(s2.row_count(), 400);
        let x = s2.column("X").unwrap();
        assert!(x[..200].iter().all(|v| *v == Some(0.0)));
        assert!(x[200..].iter().all(|v| *v == Some(1.0)));
    }

    #[test]
    fn other_endpoints_generate() {
        let l = load_trial_spec(assets::LOGISTIC_TRIAL).unwrap();
        let ds = generate_cohort(&l, 1, &mut RandomStream::new(2)).unwrap();
        assert!(ds
            .column("Y")
            .unwrap()
            .iter()
            .all(|v| matches!(v, Some(y) if *y == 0.0 || *y == 1.0)));
        let p = load_trial_spec(assets::POISSON_TRIAL).unwrap();
        let ds = generate_cohort(&p, 1, &mut RandomStream::new(2)).unwrap();
        assert_eq!(ds.column_names().collect::<Vec<_>>(), vec!["Y", "X"]);
        assert!(ds
            .column("Y")
            .unwrap()
            .iter()
            .all(|v| v.unwrap().fract() == 0.0));
    }

    #[test]
    fn bernoulli_out_of_range_mean_fails() {
        let mut l = load_trial_spec(assets::LOGISTIC_TRIAL).unwrap();
        l.mean_ast = crate::dsl::parse_expression("2 + X").unwrap();
        assert!(matches!(
            generate_cohort(&l, 1, &mut RandomStream::new(2)),
            Err(GenerateError::Noise { row: 1, .. })
        ));
    }
}
