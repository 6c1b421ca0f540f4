//! Productivity, survival, conflict and the Stability Score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_AGENTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityBreakdown {
    pub p: f64,
    pub v: f64,
    pub c: f64,
    pub s: f64,
}

impl StabilityBreakdown {
    pub fn from_components(p: f64, v: f64, c: f64) -> Result<Self, ScoreError> {
        Ok(Self {
            p,
            v,
            c,
            s: stability(p, v, c)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ScoreError {
    #[error("component {name} = {value} outside [0, 1]")]
    ComponentOutOfRange { name: &'static str, value: f64 },
}

fn check(name: &'static str, value: f64) -> Result<(), ScoreError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ScoreError::ComponentOutOfRange { name, value })
    }
}

/// `max(0, min(1, 0.5 P + 0.3 V - 0.2 C))`.
pub fn stability(p: f64, v: f64, c: f64) -> Result<f64, ScoreError> {
    check("P", p)?;
    check("V", v)?;
    check("C", c)?;
    Ok((0.5 * p + 0.3 * v - 0.2 * c).clamp(0.0, 1.0))
}

pub fn clip01(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Per-agent Pareto wealth after `rounds` rounds of universal full contribution.
pub fn pareto_wealth(multiplier: f64, rounds: u32) -> f64 {
    rounds as f64 * 60.0 * multiplier / N_AGENTS as f64
}

/// Single-round payoff of one defector among five full contributors.
pub fn nash_freerider_payoff(multiplier: f64) -> f64 {
    10.0 + 50.0 * multiplier / N_AGENTS as f64
}

/// Mean final wealth over all agents (eliminated ones frozen) relative to the
/// Pareto benchmark, clipped to `[0, 1]`.
pub fn productivity_pgg(final_wealths: &[f64], multiplier: f64, rounds: u32) -> f64 {
    if final_wealths.is_empty() {
        return 0.0;
    }
    let avg = final_wealths.iter().sum::<f64>() / final_wealths.len() as f64;
    clip01(avg / pareto_wealth(multiplier, rounds))
}

/// Mean over projects of `min(1, deposited / required)`, each project given
/// as `(deposited, required)`.
pub fn productivity_grid(projects: &[(f64, f64)]) -> f64 {
    if projects.is_empty() {
        return 0.0;
    }
    projects
        .iter()
        .map(|&(done, req)| if req > 0.0 { (done / req).min(1.0) } else { 1.0 })
        .sum::<f64>()
        / projects.len() as f64
}

pub fn productivity_trading(completions: &[f64]) -> f64 {
    if completions.is_empty() {
        return 0.0;
    }
    clip01(completions.iter().sum::<f64>() / completions.len() as f64)
}

pub fn conflict_grid(events: u32) -> f64 {
    clip01(events as f64 / 10.0)
}

pub fn conflict_pgg(punish_tokens: u32, token_budget: u32) -> f64 {
    if token_budget == 0 {
        return 0.0;
    }
    clip01(punish_tokens as f64 / token_budget as f64)
}

pub fn conflict_trading(deceptive: u32, rejections: u32, proposals: u32) -> f64 {
    if proposals == 0 {
        return 0.0;
    }
    clip01((deceptive + rejections) as f64 / proposals as f64)
}

pub fn survival(alive_at_end: usize) -> f64 {
    alive_at_end as f64 / N_AGENTS as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn stability_examples() {
        assert!((stability(0.633, 0.0, 0.2).unwrap() - 0.2765).abs() < EPS);
        assert!((stability(0.75, 1.0 / 3.0, 0.0).unwrap() - 0.475).abs() < EPS);
        assert_eq!(stability(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(stability(0.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            stability(1.2, 0.0, 0.0),
            Err(ScoreError::ComponentOutOfRange { name: "P", .. })
        ));
    }

    #[test]
    fn pareto_and_nash() {
        assert!((pareto_wealth(1.5, 1) - 15.0).abs() < EPS);
        assert!((pareto_wealth(0.75, 40) - 300.0).abs() < EPS);
        assert!((pareto_wealth(1.0, 1) - 10.0).abs() < EPS);
        assert!((nash_freerider_payoff(1.5) - 22.5).abs() < EPS);
        assert!((nash_freerider_payoff(1.2) - 20.0).abs() < EPS);
        assert!((nash_freerider_payoff(0.0) - 10.0).abs() < EPS);
    }

    #[test]
    fn productivity_examples() {
        let frozen = [150.0, 300.0, 450.0, 600.0, 600.0, 600.0];
        assert!((productivity_pgg(&frozen, 1.5, 40) - 0.75).abs() < EPS);
        let keep_all = [100.0, 200.0, 300.0, 400.0, 400.0, 400.0];
        assert!((productivity_pgg(&keep_all, 0.75, 40) - 1.0).abs() < EPS);
        assert_eq!(productivity_pgg(&[0.0; 6], 1.5, 40), 0.0);

        let p = productivity_grid(&[(26.0, 30.0), (20.0, 30.0)]);
        assert!((p - (26.0 / 30.0 + 20.0 / 30.0) / 2.0).abs() < EPS);
        assert!((p - 0.767).abs() < 5e-4);
        assert_eq!(productivity_grid(&[(30.0, 30.0), (40.0, 30.0)]), 1.0);
        assert_eq!(productivity_grid(&[(0.0, 30.0), (0.0, 30.0)]), 0.0);
    }

    #[test]
    fn conflict_examples() {
        assert!((conflict_grid(2) - 0.2).abs() < EPS);
        assert_eq!(conflict_grid(12), 1.0);
        assert_eq!(conflict_pgg(0, 2400), 0.0);
        assert_eq!(conflict_trading(0, 0, 0), 0.0);
        assert!((conflict_trading(1, 2, 6) - 0.5).abs() < EPS);
    }

    #[test]
    fn survival_examples() {
        assert!((survival(2) - 1.0 / 3.0).abs() < EPS);
        assert_eq!(survival(0), 0.0);
        assert_eq!(survival(6), 1.0);
    }

    #[test]
    fn ceiling_under_overseer() {
        let v = 1.0 / 3.0;
        assert!((stability(1.0, v, 0.0).unwrap() - 0.6).abs() < EPS);
        assert!(stability(0.999, v, 0.0).unwrap() < 0.6);
    }

    proptest! {
        #[test]
        fn monotone_in_components(p in 0.0..=1.0f64, v in 0.0..=1.0f64, c in 0.0..=1.0f64, d in 0.0..=0.2f64) {
            let s = stability(p, v, c).unwrap();
            prop_assert!(stability((p + d).min(1.0), v, c).unwrap() >= s);
            prop_assert!(stability(p, (v + d).min(1.0), c).unwrap() >= s);
            prop_assert!(stability(p, v, (c + d).min(1.0)).unwrap() <= s);
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn survival_cap_bounds_score(p in 0.0..=1.0f64, c in 0.0..=1.0f64) {
            prop_assert!(stability(p, 1.0 / 3.0, c).unwrap() <= 0.6 + EPS);
        }
    }
}
