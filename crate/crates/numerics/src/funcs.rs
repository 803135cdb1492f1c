//! Scalar nonlinearities with closed-form derivatives, and smooth space-time
//! profiles used for directions, test functions and initial data.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{NumError, NumResult};

/// A function `ℝ → ℝ` with derivatives up to order 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScalarFn {
    /// `Σ c_j u^j`.
    Poly { coeffs: Vec<f64> },
    /// `offset + amp·sin(freq·u + phase)`.
    Sin { offset: f64, amp: f64, freq: f64, phase: f64 },
    Sum { terms: Vec<ScalarFn> },
}

impl ScalarFn {
    pub fn constant(c: f64) -> Self {
        ScalarFn::Poly { coeffs: vec![c] }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.d(0, u)
    }

    /// The `order`-th derivative at `u`, for `order <= 3`.
    pub fn d(&self, order: usize, u: f64) -> f64 {
        assert!(order <= 3, "derivatives above order 3 are not provided");
        match self {
            ScalarFn::Poly { coeffs } => {
                let mut s = 0.0;
                for j in (order..coeffs.len()).rev() {
                    let falling: f64 = (0..order).map(|i| (j - i) as f64).product();
                    s = s * u + falling * coeffs[j];
                }
                s
            }
            ScalarFn::Sin { offset, amp, freq, phase } => {
                let a = freq * u + phase;
                let f = freq.powi(order as i32) * amp;
                match order {
                    0 => offset + amp * a.sin(),
                    1 => f * a.cos(),
                    2 => -f * a.sin(),
                    _ => -f * a.cos(),
                }
            }
            ScalarFn::Sum { terms } => terms.iter().map(|t| t.d(order, u)).sum(),
        }
    }

    /// Compares each derivative with a Richardson-extrapolated central
    /// difference of the one below, exact for polynomials of degree four.
    pub fn self_check(&self, name: &str) -> NumResult<()> {
        let h = 1e-3;
        for &u in &[-1.3, -0.4, 0.0, 0.7, 1.9] {
            for order in 1..=3 {
                let central = |h: f64| (self.d(order - 1, u + h) - self.d(order - 1, u - h)) / (2.0 * h);
                let fd = (4.0 * central(h / 2.0) - central(h)) / 3.0;
                let exact = self.d(order, u);
                let err = (fd - exact).abs() / exact.abs().max(1.0);
                if err > 1e-6 {
                    return Err(NumError::DerivativeCheck { name: name.into(), order, at: u, err });
                }
            }
        }
        Ok(())
    }
}

/// `amp·sin(2π·mode·x + phase)·cos(2π·freq_t·t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub amp: f64,
    pub mode: i32,
    pub phase: f64,
    #[serde(default)]
    pub freq_t: f64,
}

impl Profile {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.amp * (TAU * self.mode as f64 * x + self.phase).sin() * (TAU * self.freq_t * t).cos()
    }
}

/// `amp·sin(2π·mode·x + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub amp: f64,
    pub mode: i32,
    pub phase: f64,
}

impl InitialData {
    pub fn eval(&self, x: f64) -> f64 {
        self.amp * (TAU * self.mode as f64 * x + self.phase).sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_derivatives() {
        let p = ScalarFn::Poly { coeffs: vec![1.0, 2.0, 0.0, 4.0] };
        assert_eq!(p.d(0, 2.0), 1.0 + 4.0 + 32.0);
        assert_eq!(p.d(1, 2.0), 2.0 + 48.0);
        assert_eq!(p.d(2, 2.0), 48.0);
        assert_eq!(p.d(3, 2.0), 24.0);
        p.self_check("p").unwrap();
    }

    #[test]
    fn sin_self_check() {
        ScalarFn::Sin { offset: 2.0, amp: 1.0, freq: 1.3, phase: 0.2 }.self_check("g").unwrap();
    }

    #[test]
    fn json_form() {
        let g: ScalarFn = serde_json::from_str(r#"{"kind":"sin","offset":2,"amp":1,"freq":1,"phase":0}"#).unwrap();
        assert_eq!(g.eval(0.0), 2.0);
        assert!(serde_json::from_str::<ScalarFn>(r#"{"kind":"poly","coeffs":[1],"x":2}"#).is_err());
    }
}
