/// Activations are clamped to `[CLAMP, 1 - CLAMP]` inside [`cost`] so the logarithms stay finite.
pub const CLAMP: f64 = 1e-12;

/// Cross-entropy `C = −Σ_j [y_j ln a_j + (1 − y_j) ln(1 − a_j)]`.
pub fn cost(output: &[f64], target: &[f64]) -> f64 {
    output
        .iter()
        .zip(target)
        .map(|(&a, &y)| {
            let a = a.clamp(CLAMP, 1.0 - CLAMP);
            -(y * a.ln() + (1.0 - y) * (1.0 - a).ln())
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::one_hot;

    #[test]
    fn perfect_prediction_is_near_zero() {
        let y = one_hot(4).unwrap();
        let c = cost(&y, &y);
        assert!((0.0..1e-10).contains(&c), "{c}");
    }

    #[test]
    fn uniform_half_costs_ten_ln_two() {
        let a = [0.5; 10];
        let c = cost(&a, &one_hot(3).unwrap());
        assert!((c - 10.0 * std::f64::consts::LN_2).abs() < 1e-14);
        assert_eq!(cost(&a, &one_hot(0).unwrap()), cost(&a, &one_hot(1).unwrap()));
    }

    #[test]
    fn saturated_wrong_answer_stays_finite() {
        let mut a = [0.0; 10];
        a[2] = 1.0;
        let c = cost(&a, &one_hot(7).unwrap());
        assert!(c.is_finite() && c > 50.0);
    }
}
