//! Evaluation quantities: average rate, rate gain, efficiency and signalling
//! overhead.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean per-UE rate.
pub fn r_avg(ue_rates: &[f64]) -> f64 {
    if ue_rates.is_empty() {
        return 0.0;
    }
    ue_rates.iter().sum::<f64>() / ue_rates.len() as f64
}

/// Percentage gain of `r_prop` over `r_ref`.
pub fn rate_gain(r_prop: f64, r_ref: f64) -> Result<f64> {
    if r_ref <= 0.0 {
        return Err(Error::Undefined("rate gain with zero reference rate"));
    }
    Ok((r_prop - r_ref) / r_ref * 100.0)
}

/// Ratio of an achieved rate to the optimum.
pub fn efficiency(r: f64, r_optm: f64) -> Result<f64> {
    if r_optm <= 0.0 {
        return Err(Error::Undefined("efficiency with zero optimum"));
    }
    Ok(r / r_optm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverheadCase {
    /// As many RBs as UEs.
    Square,
    /// More RBs than UEs.
    Wide,
    /// Fewer RBs than UEs; counted with the roles of RBs and UEs exchanged.
    Narrow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overhead {
    pub case: OverheadCase,
    /// Matching messages of one relay in one iteration.
    pub omega: u64,
    /// Matching plus X2 messages of one relay over `T` iterations.
    pub omega_max: u64,
}

/// Analytic per-relay message counts for `n` RBs, `u` UEs and `t` iterations.
pub fn signalling_overhead(n: u64, u: u64, t: u64) -> Overhead {
    let (case, omega) = match n.cmp(&u) {
        std::cmp::Ordering::Equal => (OverheadCase::Square, n * (n + 1) / 2),
        std::cmp::Ordering::Greater => (OverheadCase::Wide, (n + 1) * u - u * (u + 1) / 2),
        std::cmp::Ordering::Less => (OverheadCase::Narrow, (u + 1) * n - n * (n + 1) / 2),
    };
    // one X2 multicast per iteration on top of the matching messages
    Overhead {
        case,
        omega,
        omega_max: t * (omega + 1),
    }
}

/// Metrics of one realization in one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub r_avg_bps: f64,
    pub r_sum_bps: f64,
    pub rate_gain_pct: Option<f64>,
    pub efficiency: Option<f64>,
    pub iterations: usize,
    pub messages_matching: usize,
    pub messages_x2: usize,
}

impl MetricsReport {
    pub fn from_rates(ue_rates: &[f64], iterations: usize, messages_matching: usize, messages_x2: usize) -> Self {
        MetricsReport {
            r_avg_bps: r_avg(ue_rates),
            r_sum_bps: ue_rates.iter().sum(),
            rate_gain_pct: None,
            efficiency: None,
            iterations,
            messages_matching,
            messages_x2,
        }
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() == 1 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_examples() {
        assert!((rate_gain(1.30, 1.00).unwrap() - 30.0).abs() < 1e-9);
        assert!((rate_gain(1.24, 1.00).unwrap() - 24.0).abs() < 1e-9);
        assert_eq!(rate_gain(2.0, 2.0).unwrap(), 0.0);
        assert!(rate_gain(1.0, 0.0).is_err());
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(efficiency(0.8, 1.0).unwrap(), 0.8);
        assert_eq!(efficiency(3.0, 3.0).unwrap(), 1.0);
        assert!(efficiency(1.0, 0.0).is_err());
    }

    #[test]
    fn overhead_square() {
        let o = signalling_overhead(5, 5, 3);
        assert_eq!(o.case, OverheadCase::Square);
        assert_eq!(o.omega, 15);
        assert_eq!(o.omega_max, 48);
    }

    #[test]
    fn overhead_wide() {
        let o = signalling_overhead(6, 3, 2);
        assert_eq!(o.case, OverheadCase::Wide);
        assert_eq!(o.omega, 15);
        assert_eq!(o.omega_max, 32);
    }

    #[test]
    fn wide_formula_reduces_to_square() {
        for n in 1..20u64 {
            assert_eq!((n + 1) * n - n * (n + 1) / 2, n * (n + 1) / 2);
        }
    }

    #[test]
    fn averages() {
        assert_eq!(r_avg(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(r_avg(&[]), 0.0);
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
    }
}
