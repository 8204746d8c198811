use serde::Serialize;

use crate::design::{DecisionRule, Threshold};
use crate::inference::{posterior_probability, Comparator, PosteriorSamples, QueryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InterimVariant {
    EarlySuccess,
    EarlyFutility,
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterimDecision {
    pub variant: InterimVariant,
    /// Posterior probability that the effect exceeds the efficacy delta.
    pub p_eff: f64,
    /// Posterior probability that the effect exceeds the futility delta.
    pub p_fut: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FinalVariant {
    FinalSuccess,
    FinalFailure,
}

/// Efficacy is checked first; both comparisons are strict.
pub fn decide_interim(p_eff: f64, p_fut: f64, rules: &DecisionRule) -> InterimDecision {
    let variant = if p_eff > rules.interim.efficacy.prob_threshold {
        InterimVariant::EarlySuccess
    } else if p_fut < rules.interim.futility.prob_threshold {
        InterimVariant::EarlyFutility
    } else {
        InterimVariant::Continue
    };
    InterimDecision {
        variant,
        p_eff,
        p_fut,
    }
}

pub fn decide_final(final_prob: f64, rules: &DecisionRule) -> FinalVariant {
    if final_prob > rules.final_rule.prob_threshold {
        FinalVariant::FinalSuccess
    } else {
        FinalVariant::FinalFailure
    }
}

fn exceed(
    samples: &PosteriorSamples,
    rules: &DecisionRule,
    t: &Threshold,
) -> Result<f64, QueryError> {
    posterior_probability(samples, &rules.effect_parameter, Comparator::Gt, t.delta)
}

pub fn evaluate_interim(
    samples: &PosteriorSamples,
    rules: &DecisionRule,
) -> Result<InterimDecision, QueryError> {
    let p_eff = exceed(samples, rules, &rules.interim.efficacy)?;
    let p_fut = exceed(samples, rules, &rules.interim.futility)?;
    Ok(decide_interim(p_eff, p_fut, rules))
}

pub fn evaluate_final(
    samples: &PosteriorSamples,
    rules: &DecisionRule,
) -> Result<(FinalVariant, f64), QueryError> {
    let p = exceed(samples, rules, &rules.final_rule)?;
    Ok((decide_final(p, rules), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{InterimRules, Threshold};

    fn rules() -> DecisionRule {
        DecisionRule {
            effect_parameter: "beta1".into(),
            interim: InterimRules {
                efficacy: Threshold {
                    delta: 10.0,
                    prob_threshold: 0.95,
                },
                futility: Threshold {
                    delta: 5.0,
                    prob_threshold: 0.05,
                },
            },
            final_rule: Threshold {
                delta: 5.0,
                prob_threshold: 0.95,
            },
        }
    }

    #[test]
    fn interim_cases() {
        let r = rules();
        assert_eq!(
            decide_interim(0.97, 0.99, &r).variant,
            InterimVariant::EarlySuccess
        );
        assert_eq!(
            decide_interim(0.95, 0.99, &r).variant,
            InterimVariant::Continue
        );
        assert_eq!(
            decide_interim(0.95, 0.01, &r).variant,
            InterimVariant::EarlyFutility
        );
        assert_eq!(
            decide_interim(0.50, 0.30, &r).variant,
            InterimVariant::Continue
        );
        assert_eq!(
            decide_interim(0.0, 0.05, &r).variant,
            InterimVariant::Continue
        );
        // Efficacy wins when both would fire.
        assert_eq!(
            decide_interim(0.99, 0.0, &r).variant,
            InterimVariant::EarlySuccess
        );
    }

    #[test]
    fn final_cases() {
        let r = rules();
        assert_eq!(decide_final(0.96, &r), FinalVariant::FinalSuccess);
        assert_eq!(decide_final(0.95, &r), FinalVariant::FinalFailure);
        assert_eq!(decide_final(0.0, &r), FinalVariant::FinalFailure);
    }

    #[test]
    fn from_draws() {
        let s = PosteriorSamples::from_draws(
            vec!["beta1".into()],
            vec![[4.0, 6.0, 6.0, 12.0].iter().map(|&v| vec![v]).collect()],
        );
        let d = evaluate_interim(&s, &rules()).unwrap();
        assert_eq!((d.p_eff, d.p_fut), (0.25, 0.75));
        assert_eq!(d.variant, InterimVariant::Continue);
        assert_eq!(
            evaluate_final(&s, &rules()).unwrap(),
            (FinalVariant::FinalFailure, 0.75)
        );
        let mut r = rules();
        r.effect_parameter = "delta".into();
        assert!(evaluate_interim(&s, &r).is_err());
    }
}
