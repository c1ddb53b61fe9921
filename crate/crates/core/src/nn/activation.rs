use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DenseMatrix;

pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

/// Pointwise nonlinearity applied after each GCN layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Silu,
    Selu,
    /// Exact `x * Φ(x)`, not the tanh approximation.
    Gelu,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Silu,
        Activation::Selu,
        Activation::Gelu,
        Activation::Relu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Silu => "silu",
            Activation::Selu => "selu",
            Activation::Gelu => "gelu",
            Activation::Relu => "relu",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Silu => x * sigmoid(x),
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
                }
            }
            Activation::Gelu => x * std_normal_cdf(x),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Analytic derivative. At the kinks (0 for ReLU and SELU) the left-hand
    /// branch is used.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp()
                }
            }
            Activation::Gelu => std_normal_cdf(x) + x * std_normal_pdf(x),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn apply_matrix(self, m: &DenseMatrix) -> DenseMatrix {
        m.map(|x| self.apply(x))
    }

    pub fn derivative_matrix(self, m: &DenseMatrix) -> DenseMatrix {
        m.map(|x| self.derivative(x))
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "silu" => Ok(Activation::Silu),
            "selu" => Ok(Activation::Selu),
            "gelu" => Ok(Activation::Gelu),
            "relu" => Ok(Activation::Relu),
            other => Err(format!(
                "unknown activation {other:?} (expected silu, selu, gelu or relu)"
            )),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(Activation::Silu.apply(0.0), 0.0);
        assert_eq!(Activation::Relu.apply(-3.0), 0.0);
        assert_eq!(Activation::Gelu.apply(0.0), 0.0);
        assert_eq!(Activation::Selu.apply(0.0), 0.0);
    }

    #[test]
    fn silu_at_one() {
        let direct = 1.0 / (1.0 + (-1f64).exp());
        assert!((Activation::Silu.apply(1.0) - direct).abs() < 1e-15);
        assert!((Activation::Silu.apply(1.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn selu_negative_asymptote() {
        let limit = -SELU_LAMBDA * SELU_ALPHA;
        assert!((limit + 1.758_099_340_847_376_9).abs() < 1e-12);
        assert!((Activation::Selu.apply(-50.0) - limit).abs() < 1e-15);
    }

    #[test]
    fn gelu_matches_reference_values() {
        // x * Φ(x) with Φ(1) = 0.8413447460685429, Φ(-1) = 0.15865525393145707
        assert!((Activation::Gelu.apply(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
        assert!((Activation::Gelu.apply(-1.0) + 0.158_655_253_931_457_07).abs() < 1e-14);
    }

    #[test]
    fn simple_derivatives() {
        assert_eq!(Activation::Relu.derivative(2.0), 1.0);
        assert_eq!(Activation::Relu.derivative(-2.0), 0.0);
        assert!((Activation::Silu.derivative(0.0) - 0.5).abs() < 1e-15);
        assert!((Activation::Gelu.derivative(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in Activation::ALL {
            for _ in 0..100 {
                let mut x: f64 = rng.gen_range(-4.0..4.0);
                if matches!(kind, Activation::Relu | Activation::Selu) && x.abs() < 1e-3 {
                    x += 0.5;
                }
                let fd = (kind.apply(x + h) - kind.apply(x - h)) / (2.0 * h);
                let err = (fd - kind.derivative(x)).abs();
                assert!(err < 1e-6, "{kind} at {x}: fd {fd} analytic {}", kind.derivative(x));
            }
        }
    }

    #[test]
    fn parses_names() {
        for kind in Activation::ALL {
            assert_eq!(kind.name().parse::<Activation>().unwrap(), kind);
        }
        assert!("tanh".parse::<Activation>().is_err());
    }
}
