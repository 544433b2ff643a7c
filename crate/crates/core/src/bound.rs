//! Round lower bound for compression-aided federated learning.
//!
//! The bound is the positive root of the quadratic
//! `U1·x² + (U2 − 2ε/L)·x − U3 = 0` in the iteration count `x = E·R`,
//! where the three coefficients fold together the smoothness and strong
//! convexity constants, gradient bounds, local-epoch count and the
//! compressor's reconstruction loss. [`r_min`] evaluates the closed form,
//! [`r_min_oracle`] recovers the same integer by scanning, and
//! [`optimal_kse`] searches the participating-device count that minimises
//! the bound.
//!
//! Note that the closed form grows with the accuracy target `ε`; it is
//! evaluated as written and no sign convention is reinterpreted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack applied before rounding a root up to an integer.
pub const CEIL_SLACK: f64 = 1e-9;

/// Upper limit on the scan performed by [`r_min_oracle`].
pub const ORACLE_SCAN_CAP: u64 = 10_000_000;

/// How the per-device gradient variances enter the bound when no concrete
/// device selection exists yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaAggregation {
    /// `(1/K_SE)·Σδ²` is replaced by the mean of `δ_k²` over all devices.
    #[default]
    MeanAll,
    /// `(1/K_SE)·Σδ²` summed over the first `K_SE` entries.
    FirstK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlBoundParams {
    /// Smoothness constant `L`.
    pub smoothness: f64,
    /// Strong convexity constant `μ`.
    pub strong_convexity: f64,
    /// Bound `G` on the expected squared stochastic gradient norm.
    pub grad_bound: f64,
    /// Per-device stochastic gradient deviation `δ_k`, one entry per device.
    pub grad_variance: Vec<f64>,
    /// Local epochs `E` per communication round.
    pub local_epochs: u32,
    /// Heterogeneity constant `χ`, an upper bound on the summed local loss gaps.
    pub heterogeneity: f64,
    /// Compressor reconstruction loss `ℒ(w)`.
    pub compressor_loss: f64,
    /// Accuracy target `ε`.
    pub epsilon: f64,
    /// Total device count `K`.
    pub total_devices: usize,
    #[serde(default)]
    pub delta_aggregation: DeltaAggregation,
}

impl FlBoundParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.strong_convexity > 0.0 && self.strong_convexity.is_finite()) {
            return bad(format!("strong convexity must be positive, got {}", self.strong_convexity));
        }
        if !(self.smoothness >= self.strong_convexity && self.smoothness.is_finite()) {
            return bad(format!(
                "smoothness {} must be finite and at least strong convexity {}",
                self.smoothness, self.strong_convexity
            ));
        }
        if !(self.grad_bound >= 0.0 && self.grad_bound.is_finite()) {
            return bad(format!("gradient bound must be nonnegative, got {}", self.grad_bound));
        }
        if !(self.heterogeneity >= 0.0 && self.heterogeneity.is_finite()) {
            return bad(format!("heterogeneity must be nonnegative, got {}", self.heterogeneity));
        }
        if !(self.compressor_loss >= 0.0 && self.compressor_loss.is_finite()) {
            return bad(format!("compressor loss must be nonnegative, got {}", self.compressor_loss));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.local_epochs == 0 {
            return bad("local epochs must be at least 1".into());
        }
        if self.total_devices == 0 {
            return bad("total devices must be at least 1".into());
        }
        if self.grad_variance.len() != self.total_devices {
            return bad(format!(
                "{} gradient deviations supplied for {} devices",
                self.grad_variance.len(),
                self.total_devices
            ));
        }
        if let Some(d) = self.grad_variance.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return bad(format!("gradient deviation must be nonnegative, got {d}"));
        }
        Ok(())
    }

    /// `a = max{8L/μ, E}`.
    pub fn a(&self) -> f64 {
        (8.0 * self.smoothness / self.strong_convexity).max(self.local_epochs as f64)
    }

    /// The accuracy term `2ε/L`.
    pub fn accuracy_term(&self) -> f64 {
        2.0 * self.epsilon / self.smoothness
    }

    /// `(1/K_SE)·Σδ²` under the configured aggregation.
    fn mean_delta_sq(&self, kse: usize) -> f64 {
        match self.delta_aggregation {
            DeltaAggregation::MeanAll => {
                self.grad_variance.iter().map(|d| d * d).sum::<f64>() / self.total_devices as f64
            }
            DeltaAggregation::FirstK => {
                self.grad_variance[..kse].iter().map(|d| d * d).sum::<f64>() / kse as f64
            }
        }
    }
}

/// Coefficients of the round-bound quadratic for one participating-device count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    pub u1: f64,
    pub u2: f64,
    /// May be negative: the `−4a/μ²·G²` term is unbounded below.
    pub u3: f64,
    pub a: f64,
    pub kse: usize,
}

pub fn bound_terms(params: &FlBoundParams, kse: usize) -> Result<BoundTerms> {
    params.validate()?;
    if kse == 0 || kse > params.total_devices {
        return Err(Error::KseOutOfRange { kse, total: params.total_devices });
    }
    let l = params.smoothness;
    let mu = params.strong_convexity;
    let g2 = params.grad_bound * params.grad_bound;
    let e = params.local_epochs as f64;
    let k = kse as f64;
    let a = params.a();

    let distortion = params.compressor_loss / (k * k * (e + 1.0));
    let q = 6.0 * e * l * params.heterogeneity + 8.0 * e * (e - 1.0).powi(2) * g2 + params.mean_delta_sq(kse);

    Ok(BoundTerms {
        u1: distortion,
        u2: q / (mu * e * a) + distortion,
        u3: a * distortion - 4.0 * a / (mu * mu) * g2 + 2.0 / (mu * e) * q,
        a,
        kse,
    })
}

/// Rounds `x` up, treating values within [`CEIL_SLACK`] (relative) of an
/// integer as that integer.
fn ceil_with_slack(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= CEIL_SLACK * x.abs().max(1.0) {
        nearest
    } else {
        x.ceil()
    }
}

/// Closed-form round lower bound `R_min(K_SE)`, clamped below at one round.
pub fn r_min(params: &FlBoundParams, kse: usize) -> Result<u64> {
    let terms = bound_terms(params, kse)?;
    if terms.u1 == 0.0 {
        return Err(Error::DegenerateBound { kse });
    }
    let c = params.accuracy_term();
    let discriminant = (terms.u2 - c).powi(2) + 4.0 * terms.u1 * terms.u3;
    if discriminant < 0.0 {
        return Err(Error::DiscriminantNegative { kse, discriminant });
    }
    let e = params.local_epochs as f64;
    let root = ((c - terms.u2) + discriminant.sqrt()) / (2.0 * terms.u1 * e);
    let rounds = ceil_with_slack(root);
    if rounds < 1.0 || rounds.is_nan() {
        Ok(1)
    } else {
        // Saturating float-to-int cast.
        Ok(rounds as u64)
    }
}

/// Independent check of [`r_min`]: the smallest `R ≥ 1` at which the
/// quadratic in `x = E·R` is nonnegative on its rising branch.
///
/// The rising-branch condition excludes the interval left of the smaller
/// root, which is also nonnegative when both roots are positive.
pub fn r_min_oracle(params: &FlBoundParams, kse: usize) -> Result<u64> {
    let terms = bound_terms(params, kse)?;
    if terms.u1 == 0.0 {
        return Err(Error::DegenerateBound { kse });
    }
    let b = terms.u2 - params.accuracy_term();
    let poly = |x: f64| terms.u1 * x * x + b * x - terms.u3;

    // A quadratic that stays positive at its vertex has no real root.
    let vertex = -b / (2.0 * terms.u1);
    let at_vertex = poly(vertex);
    if at_vertex > 0.0 {
        return Err(Error::DiscriminantNegative { kse, discriminant: -4.0 * terms.u1 * at_vertex });
    }

    let e = params.local_epochs as f64;
    for r in 1..=ORACLE_SCAN_CAP {
        let x = e * r as f64;
        let slope = 2.0 * terms.u1 * x + b;
        if poly(x) >= 0.0 && slope >= 0.0 {
            return Ok(r);
        }
    }
    Err(Error::NoRootInRange { cap: ORACLE_SCAN_CAP })
}

/// Step size `η_t = (E+1)/(E·μ·(a+t))` at local iteration `t`.
pub fn learning_rate(params: &FlBoundParams, t: u64) -> f64 {
    step_size(params.smoothness, params.strong_convexity, params.local_epochs, t)
}

/// [`learning_rate`] from the three constants it depends on.
pub fn step_size(smoothness: f64, strong_convexity: f64, local_epochs: u32, t: u64) -> f64 {
    let e = local_epochs as f64;
    let a = (8.0 * smoothness / strong_convexity).max(e);
    (e + 1.0) / (e * strong_convexity * (a + t as f64))
}

/// Result of the participating-device search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KseChoice {
    pub kse: usize,
    pub r_min: u64,
    /// Device counts for which the bound had no value.
    pub skipped: Vec<usize>,
}

/// Scans `K_SE = 1..=K` and returns the count with the smallest round bound.
///
/// Only strict improvements replace the incumbent, so ties keep the smaller
/// count. Counts where the bound is undefined are skipped.
pub fn optimal_kse(params: &FlBoundParams) -> Result<KseChoice> {
    params.validate()?;
    let mut best: Option<(usize, u64)> = None;
    let mut skipped = Vec::new();
    for k in 1..=params.total_devices {
        match r_min(params, k) {
            Ok(r) => {
                if best.is_none_or(|(_, best_r)| r < best_r) {
                    best = Some((k, r));
                }
            }
            Err(Error::DiscriminantNegative { .. } | Error::DegenerateBound { .. }) => skipped.push(k),
            Err(e) => return Err(e),
        }
    }
    best.map(|(kse, r_min)| KseChoice { kse, r_min, skipped })
        .ok_or(Error::AllInfeasible { total: params.total_devices })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example(total: usize) -> FlBoundParams {
        FlBoundParams {
            smoothness: 1.0,
            strong_convexity: 1.0,
            grad_bound: 0.0,
            grad_variance: vec![0.0; total],
            local_epochs: 1,
            heterogeneity: 0.0,
            compressor_loss: 2.0,
            epsilon: 0.5,
            total_devices: total,
            delta_aggregation: DeltaAggregation::MeanAll,
        }
    }

    #[test]
    fn terms_of_worked_example() {
        let p = worked_example(4);
        let t = bound_terms(&p, 1).unwrap();
        assert_eq!((t.u1, t.u2, t.u3, t.a), (1.0, 1.0, 8.0, 8.0));
        let t = bound_terms(&p, 2).unwrap();
        assert_eq!((t.u1, t.u2, t.u3), (0.25, 0.25, 2.0));
    }

    #[test]
    fn terms_vanish_without_sources() {
        let mut p = worked_example(3);
        p.compressor_loss = 0.0;
        let t = bound_terms(&p, 2).unwrap();
        assert_eq!((t.u1, t.u2, t.u3), (0.0, 0.0, 0.0));
        assert!(matches!(r_min(&p, 2), Err(Error::DegenerateBound { kse: 2 })));
        assert!(matches!(r_min_oracle(&p, 2), Err(Error::DegenerateBound { kse: 2 })));
    }

    #[test]
    fn heterogeneity_and_variance_enter_q() {
        // L=2, μ=1, E=2, χ=1, G=1, δ=[1,3]: a=16, Q = 24 + 16 + 5 = 45
        let p = FlBoundParams {
            smoothness: 2.0,
            strong_convexity: 1.0,
            grad_bound: 1.0,
            grad_variance: vec![1.0, 3.0],
            local_epochs: 2,
            heterogeneity: 1.0,
            compressor_loss: 3.0,
            epsilon: 0.1,
            total_devices: 2,
            delta_aggregation: DeltaAggregation::MeanAll,
        };
        let t = bound_terms(&p, 1).unwrap();
        assert_eq!(t.a, 16.0);
        assert!((t.u1 - 1.0).abs() < 1e-15);
        assert!((t.u2 - (45.0 / 32.0 + 1.0)).abs() < 1e-12);
        assert!((t.u3 - (16.0 - 64.0 + 45.0)).abs() < 1e-12);

        let first = FlBoundParams { delta_aggregation: DeltaAggregation::FirstK, ..p };
        // first K_SE=1 entry only: Q = 24 + 16 + 1 = 41
        let t = bound_terms(&first, 1).unwrap();
        assert!((t.u2 - (41.0 / 32.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn kse_out_of_range_rejected() {
        let p = worked_example(2);
        assert!(matches!(bound_terms(&p, 0), Err(Error::KseOutOfRange { .. })));
        assert!(matches!(bound_terms(&p, 3), Err(Error::KseOutOfRange { kse: 3, total: 2 })));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = worked_example(2);
        p.strong_convexity = 2.0;
        assert!(matches!(p.validate(), Err(Error::InvalidParams(_))));
        let mut p = worked_example(2);
        p.grad_variance.pop();
        assert!(p.validate().is_err());
        let mut p = worked_example(2);
        p.local_epochs = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn worked_example_rounds() {
        let p = worked_example(1);
        assert_eq!(r_min(&p, 1).unwrap(), 3);
        assert_eq!(r_min_oracle(&p, 1).unwrap(), 3);
        let p = FlBoundParams { epsilon: 5.0, ..p };
        assert_eq!(r_min(&p, 1).unwrap(), 10);
        assert_eq!(r_min_oracle(&p, 1).unwrap(), 10);
    }

    #[test]
    fn negative_discriminant_surfaces() {
        // U1=1, U2=1+Q/8, U3 = 8 - 32 G² + 2Q; large G drives U3 far below zero.
        let mut p = worked_example(1);
        p.grad_bound = 3.0;
        let t = bound_terms(&p, 1).unwrap();
        assert!(t.u3 < 0.0);
        assert!(matches!(r_min(&p, 1), Err(Error::DiscriminantNegative { .. })));
        assert!(matches!(r_min_oracle(&p, 1), Err(Error::DiscriminantNegative { .. })));
    }

    #[test]
    fn clamps_to_one_round() {
        // tiny target: root well below E
        let mut p = worked_example(1);
        p.compressor_loss = 1e-6;
        p.epsilon = 1e-9;
        p.local_epochs = 50;
        let root_rounds = r_min(&p, 1).unwrap();
        assert_eq!(root_rounds, 1);
        assert_eq!(r_min_oracle(&p, 1).unwrap(), 1);
    }

    #[test]
    fn integer_root_is_not_bumped() {
        // U1 = U2 = 1, U3 = 8, 2ε/L = 3 → x+ = (2 + √36)/2 = 4 exactly.
        let p = FlBoundParams { epsilon: 1.5, ..worked_example(1) };
        assert_eq!(r_min(&p, 1).unwrap(), 4);
        assert_eq!(r_min_oracle(&p, 1).unwrap(), 4);
        assert_eq!(ceil_with_slack(2.0 + 1e-12), 2.0);
        assert_eq!(ceil_with_slack(2.0 - 1e-12), 2.0);
        assert_eq!(ceil_with_slack(2.001), 3.0);
    }

    #[test]
    fn learning_rate_values() {
        let p = worked_example(1);
        assert_eq!(learning_rate(&p, 0), 0.25);
        assert_eq!(learning_rate(&p, 8), 0.125);
        for t in 0..100 {
            assert!(learning_rate(&p, t + 1) < learning_rate(&p, t));
        }
    }

    #[test]
    fn single_device_search() {
        let p = worked_example(1);
        let c = optimal_kse(&p).unwrap();
        assert_eq!((c.kse, c.r_min), (1, 3));
    }

    #[test]
    fn search_on_worked_example() {
        // Hand evaluation: with G=χ=δ=0 the terms are U1=U2=1/k², U3=8/k², c=1.
        // k=1: root (0+√32)/2 = 2.83 → 3
        // k=2: (0.75 + √(0.5625 + 2))/0.5 = 4.70 → 5
        // k=3: (8/9 + √(64/81 + 32/81))/(2/9) = 8.90 → 9
        // k=4: (15/16 + √(225/256 + 1/8))·8 = 15.52 → 16
        let p = worked_example(4);
        let rounds: Vec<u64> = (1..=4).map(|k| r_min(&p, k).unwrap()).collect();
        assert_eq!(rounds, vec![3, 5, 9, 16]);
        let c = optimal_kse(&p).unwrap();
        assert_eq!((c.kse, c.r_min), (1, 3));
    }

    #[test]
    fn ties_keep_smaller_count() {
        let mut p = worked_example(4);
        p.compressor_loss = 1e-3;
        p.epsilon = 1e-12;
        let rounds: Vec<u64> = (1..=4).map(|k| r_min(&p, k).unwrap()).collect();
        let min = *rounds.iter().min().unwrap();
        let first = rounds.iter().position(|r| *r == min).unwrap() + 1;
        let c = optimal_kse(&p).unwrap();
        assert_eq!((c.kse, c.r_min), (first, min));
    }

    #[test]
    fn all_infeasible() {
        let mut p = worked_example(3);
        p.compressor_loss = 0.0;
        assert!(matches!(optimal_kse(&p), Err(Error::AllInfeasible { total: 3 })));
    }

    #[test]
    fn pure_function() {
        let p = worked_example(3);
        let a = bound_terms(&p, 2).unwrap();
        let b = bound_terms(&p, 2).unwrap();
        assert_eq!(a.u1.to_bits(), b.u1.to_bits());
        assert_eq!(a.u2.to_bits(), b.u2.to_bits());
        assert_eq!(a.u3.to_bits(), b.u3.to_bits());
    }
}
