//! Variable transformation registry.
//!
//! Regression variables are transformed to remove excess skewness before
//! fitting; predictions are mapped back through the inverse. Each
//! transformation carries its forward map, inverse map, and domain predicate
//! so that design construction can drop out-of-domain rows with a reason and
//! prediction can refuse out-of-domain back-transforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A monotone variable transformation with an explicit domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transformation {
    /// 1/x, defined for x > 0 (ratios and rates in this domain are positive).
    Reciprocal,
    /// ln(x), defined for x > 0.
    NaturalLog,
    /// √x, defined for x ≥ 0.
    Sqrt,
    /// ∛x, defined for all reals.
    Cbrt,
    /// x^0.25, defined for x ≥ 0.
    FourthRoot,
    /// x unchanged.
    Identity,
}

impl Transformation {
    /// All registered transformations.
    pub const ALL: [Transformation; 6] = [
        Transformation::Reciprocal,
        Transformation::NaturalLog,
        Transformation::Sqrt,
        Transformation::Cbrt,
        Transformation::FourthRoot,
        Transformation::Identity,
    ];

    /// Short name used in serialized model specs and reports.
    pub fn name(self) -> &'static str {
        match self {
            Transformation::Reciprocal => "reciprocal",
            Transformation::NaturalLog => "natural_log",
            Transformation::Sqrt => "sqrt",
            Transformation::Cbrt => "cbrt",
            Transformation::FourthRoot => "fourth_root",
            Transformation::Identity => "identity",
        }
    }

    /// Whether `x` lies in the transformation's forward domain.
    pub fn in_domain(self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match self {
            Transformation::Reciprocal | Transformation::NaturalLog => x > 0.0,
            Transformation::Sqrt | Transformation::FourthRoot => x >= 0.0,
            Transformation::Cbrt | Transformation::Identity => true,
        }
    }

    /// Forward map; errors when `x` is outside the domain.
    pub fn forward(self, x: f64) -> Result<f64> {
        if !self.in_domain(x) {
            return Err(Error::validation(format!(
                "value {x} outside domain of {} transform",
                self.name()
            )));
        }
        Ok(match self {
            Transformation::Reciprocal => 1.0 / x,
            Transformation::NaturalLog => x.ln(),
            Transformation::Sqrt => x.sqrt(),
            Transformation::Cbrt => x.cbrt(),
            Transformation::FourthRoot => x.powf(0.25),
            Transformation::Identity => x,
        })
    }

    /// Inverse map; errors when `y` is outside the image of the forward map
    /// (e.g. a nonpositive value under the reciprocal or a negative value
    /// under sqrt), so predictions can never silently leave the response
    /// domain.
    pub fn inverse(self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::validation(format!(
                "value {y} outside image of {} transform",
                self.name()
            )));
        }
        let ok = match self {
            Transformation::Reciprocal => y > 0.0,
            Transformation::Sqrt | Transformation::FourthRoot => y >= 0.0,
            Transformation::NaturalLog | Transformation::Cbrt | Transformation::Identity => true,
        };
        if !ok {
            return Err(Error::validation(format!(
                "value {y} outside image of {} transform",
                self.name()
            )));
        }
        Ok(match self {
            Transformation::Reciprocal => 1.0 / y,
            Transformation::NaturalLog => y.exp(),
            Transformation::Sqrt => y * y,
            Transformation::Cbrt => y * y * y,
            Transformation::FourthRoot => {
                let sq = y * y;
                sq * sq
            }
            Transformation::Identity => y,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_on_domain_points() {
        let xs = [1e-6, 0.25, 0.5, 1.0, 1.27, 2.0, 73.1, 998.0, 4500.0, 1.0e9];
        for t in Transformation::ALL {
            for &x in &xs {
                if !t.in_domain(x) {
                    continue;
                }
                let back = t.inverse(t.forward(x).unwrap()).unwrap();
                let rel = ((back - x) / x).abs();
                assert!(rel < 1e-12, "{} round-trip failed at {x}: {back}", t.name());
            }
        }
    }

    #[test]
    fn cbrt_handles_negatives() {
        let y = Transformation::Cbrt.forward(-8.0).unwrap();
        assert!((y + 2.0).abs() < 1e-12);
        assert!((Transformation::Cbrt.inverse(y).unwrap() + 8.0).abs() < 1e-12);
    }

    #[test]
    fn log_rejects_nonpositive() {
        assert!(Transformation::NaturalLog.forward(0.0).is_err());
        assert!(Transformation::NaturalLog.forward(-1.0).is_err());
    }

    #[test]
    fn reciprocal_inverse_rejects_nonpositive() {
        assert!(Transformation::Reciprocal.inverse(0.0).is_err());
        assert!(Transformation::Reciprocal.inverse(-0.5).is_err());
    }

    #[test]
    fn serde_names_are_snake_case() {
        let json = serde_json::to_string(&Transformation::NaturalLog).unwrap();
        assert_eq!(json, "\"natural_log\"");
        let back: Transformation = serde_json::from_str("\"fourth_root\"").unwrap();
        assert_eq!(back, Transformation::FourthRoot);
    }
}
