use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::PnnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Relu,
    Tanh,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 3] = [
        ActivationKind::Sigmoid,
        ActivationKind::Relu,
        ActivationKind::Tanh,
    ];

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::Tanh => z.tanh(),
        }
    }

    /// f'(z) expressed through the output `a = f(z)`. ReLU's derivative at zero is 0.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => a * (1.0 - a),
            ActivationKind::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Tanh => 1.0 - a * a,
        }
    }

    pub fn apply_slice(self, z: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(z) {
            *o = self.apply(v);
        }
    }

    /// Stable byte code used by the checkpoint format.
    pub fn code(self) -> u8 {
        match self {
            ActivationKind::Sigmoid => 0,
            ActivationKind::Relu => 1,
            ActivationKind::Tanh => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ActivationKind::Sigmoid),
            1 => Some(ActivationKind::Relu),
            2 => Some(ActivationKind::Tanh),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Relu => "relu",
            ActivationKind::Tanh => "tanh",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = PnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "relu" => Ok(ActivationKind::Relu),
            "tanh" => Ok(ActivationKind::Tanh),
            other => Err(PnnError::InvalidArgument(format!(
                "unknown activation '{other}' (expected sigmoid|relu|tanh)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn values_at_zero() {
        assert_eq!(ActivationKind::Sigmoid.apply(0.0), 0.5);
        assert_eq!(ActivationKind::Relu.apply(0.0), 0.0);
        assert_eq!(ActivationKind::Tanh.apply(0.0), 0.0);
        assert_eq!(ActivationKind::Relu.derivative_from_output(0.0), 0.0);
    }

    #[test]
    fn tanh_matches_exponential_form() {
        for &z in &[-3.0, -0.7, 0.1, 1.3, 4.0] {
            let closed = (f64::exp(z) - f64::exp(-z)) / (f64::exp(z) + f64::exp(-z));
            assert!((ActivationKind::Tanh.apply(z) - closed).abs() < 1e-15);
        }
    }

    #[test]
    fn codes_and_names_round_trip() {
        for k in ActivationKind::ALL {
            assert_eq!(ActivationKind::from_code(k.code()), Some(k));
            assert_eq!(k.name().parse::<ActivationKind>().unwrap(), k);
        }
        assert!(ActivationKind::from_code(3).is_none());
        assert!("softmax".parse::<ActivationKind>().is_err());
    }

    proptest! {
        // Open intervals hold while the result is representable away from the asymptotes;
        // for huge |z| f64 rounds onto the closed endpoint.
        #[test]
        fn ranges_open_for_moderate_z(z in -30.0f64..30.0) {
            let s = ActivationKind::Sigmoid.apply(z);
            prop_assert!(s > 0.0 && s < 1.0);
            let r = ActivationKind::Relu.apply(z);
            prop_assert!(r >= 0.0);
        }

        #[test]
        fn tanh_open_for_moderate_z(z in -18.0f64..18.0) {
            let t = ActivationKind::Tanh.apply(z);
            prop_assert!(t > -1.0 && t < 1.0);
        }

        #[test]
        fn ranges_closed_for_all_finite_z(z in proptest::num::f64::NORMAL) {
            let s = ActivationKind::Sigmoid.apply(z);
            prop_assert!((0.0..=1.0).contains(&s));
            let t = ActivationKind::Tanh.apply(z);
            prop_assert!((-1.0..=1.0).contains(&t));
            prop_assert!(ActivationKind::Relu.apply(z) >= 0.0);
        }

        #[test]
        fn derivative_matches_central_difference(z in -4.0f64..4.0) {
            for k in [ActivationKind::Sigmoid, ActivationKind::Tanh] {
                let h = 1e-6;
                let fd = (k.apply(z + h) - k.apply(z - h)) / (2.0 * h);
                prop_assert!((fd - k.derivative_from_output(k.apply(z))).abs() < 1e-8);
            }
        }
    }
}
