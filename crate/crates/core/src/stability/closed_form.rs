use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{StabilityError, TestPoint};
use crate::families::{FamilyId, FamilySpec};

/// Schemes whose mean-square gain is known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClosedFormScheme {
    /// `EFF_05` with `a2 = 0`.
    #[serde(rename = "EFF_05_diag")]
    Eff05Diag,
    /// `EFF_05` with arbitrary `a1`, `a2`.
    #[serde(rename = "EFF_05_general")]
    Eff05General,
    /// `EFF_II` with `a1 = a2` and `a3 = 1`.
    #[serde(rename = "EFF_II_diag")]
    EffIIDiag,
    /// `EFF_II` with `a1 = 0`.
    #[serde(rename = "EFF_II_expl1")]
    EffIIExpl1,
    /// `EFF_X` with `a1 = 0`.
    #[serde(rename = "EFF_X_expl1")]
    EffXExpl1,
}

impl ClosedFormScheme {
    pub const ALL: [ClosedFormScheme; 5] = [
        ClosedFormScheme::Eff05Diag,
        ClosedFormScheme::Eff05General,
        ClosedFormScheme::EffIIDiag,
        ClosedFormScheme::EffIIExpl1,
        ClosedFormScheme::EffXExpl1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClosedFormScheme::Eff05Diag => "EFF_05_diag",
            ClosedFormScheme::Eff05General => "EFF_05_general",
            ClosedFormScheme::EffIIDiag => "EFF_II_diag",
            ClosedFormScheme::EffIIExpl1 => "EFF_II_expl1",
            ClosedFormScheme::EffXExpl1 => "EFF_X_expl1",
        }
    }

    pub fn family(self) -> FamilyId {
        match self {
            ClosedFormScheme::Eff05Diag | ClosedFormScheme::Eff05General => FamilyId::Eff05,
            ClosedFormScheme::EffIIDiag | ClosedFormScheme::EffIIExpl1 => FamilyId::EffII,
            ClosedFormScheme::EffXExpl1 => FamilyId::EffX,
        }
    }

    fn check(self, spec: &FamilySpec) -> Result<(), StabilityError> {
        let fail = |reason: &str| {
            Err(StabilityError::ParameterRegime {
                scheme: self.name(),
                reason: reason.to_string(),
            })
        };
        if spec.family != self.family() {
            return fail(&format!(
                "expected family {}, got {}",
                self.family(),
                spec.family
            ));
        }
        for name in self.family().parameters() {
            if spec.param(name).is_none() {
                return fail(&format!("missing parameter {name}"));
            }
        }
        let p = |n: &str| spec.param(n).unwrap_or(f64::NAN);
        match self {
            ClosedFormScheme::Eff05Diag if p("a2") != 0.0 => fail("requires a2 = 0"),
            ClosedFormScheme::EffIIDiag if p("a1") != p("a2") || p("a3") != 1.0 => {
                fail("requires a1 = a2 and a3 = 1")
            }
            ClosedFormScheme::EffIIExpl1 | ClosedFormScheme::EffXExpl1 if p("a1") != 0.0 => {
                fail("requires a1 = 0")
            }
            ClosedFormScheme::EffIIExpl1
            | ClosedFormScheme::EffXExpl1
            | ClosedFormScheme::EffIIDiag
                if p("b") == 0.0 =>
            {
                fail("requires b != 0")
            }
            _ => Ok(()),
        }
    }

    /// Schemes whose regime contains `spec`.
    pub fn matching(spec: &FamilySpec) -> Vec<ClosedFormScheme> {
        Self::ALL
            .into_iter()
            .filter(|s| s.check(spec).is_ok())
            .collect()
    }
}

impl fmt::Display for ClosedFormScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClosedFormScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown closed-form scheme '{s}'"))
    }
}

fn sq(z: Complex64) -> f64 {
    z.norm_sqr()
}

/// Mean-square gain from the closed-form expression of `scheme`.
pub fn closed_form_gain(
    scheme: ClosedFormScheme,
    spec: &FamilySpec,
    pt: TestPoint,
) -> Result<f64, StabilityError> {
    scheme.check(spec)?;
    let p = |n: &str| spec.param(n).expect("checked above");
    let (h, k) = (pt.hhat, pt.k);
    let one = Complex64::new(1.0, 0.0);
    let k2 = sq(k);
    Ok(match scheme {
        ClosedFormScheme::Eff05Diag => {
            let a1 = p("a1");
            let d = sq(one - h * a1);
            (d + k2) / (sq(one - h) * d)
        }
        ClosedFormScheme::Eff05General => {
            let (a1, a2) = (p("a1"), p("a2"));
            (sq(one + h * (a2 - a1)) + k2) / (sq(one - h * (1.0 - a2)) * sq(one - h * a1))
        }
        ClosedFormScheme::EffIIDiag => {
            let a = p("a1");
            let d = sq(h * a - one);
            (d * d + 0.5 * k2 * k2 + k2 * d) / (d * d * sq(h - one))
        }
        ClosedFormScheme::EffIIExpl1 => {
            let (a2, a3) = (p("a2"), p("a3"));
            let d2 = sq(h * a2 - one);
            let num = 0.5 * k2 * k2
                + d2 * (k2 + sq(h) * (1.0 - a3).powi(2) + (h + h.conj()).re * (1.0 - a3) + 1.0);
            num / (d2 * sq(h * a3 - one))
        }
        ClosedFormScheme::EffXExpl1 => {
            let (a2, a3, a4, b) = (p("a2"), p("a3"), p("a4"), p("b"));
            let d2 = sq(h * a2 - one);
            let den = d2 * sq(h * a3 - one);
            let main = 0.5 * k2 * k2
                + sq(one - h * a2)
                    * (k2 + sq(h) * (1.0 - 2.0 * a3) + (h + h.conj()).re + sq(one - h * a3));
            let s = a2 + a4;
            let extra = k2 * s * (k.conj() * h + k * h.conj()).re / (2.0 * b)
                + k2 * sq(h) * s * s / (2.0 * b * b);
            (main + extra) / den
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::Sign;

    fn spec(f: FamilyId, p: &[(&str, f64)]) -> FamilySpec {
        FamilySpec::new(f, p, Sign::Upper)
    }

    #[test]
    fn eff05_diag_value() {
        let s = spec(FamilyId::Eff05, &[("a1", 1.0), ("a2", 0.0)]);
        let g =
            closed_form_gain(ClosedFormScheme::Eff05Diag, &s, TestPoint::real(-1.0, 1.0)).unwrap();
        assert_eq!(g, 0.3125);
    }

    #[test]
    fn regime_mismatch() {
        let s = spec(FamilyId::Eff05, &[("a1", 1.0), ("a2", 0.5)]);
        let err = closed_form_gain(ClosedFormScheme::Eff05Diag, &s, TestPoint::real(-1.0, 1.0))
            .unwrap_err();
        assert!(matches!(err, StabilityError::ParameterRegime { .. }));
        let err = closed_form_gain(ClosedFormScheme::EffIIDiag, &s, TestPoint::real(-1.0, 1.0))
            .unwrap_err();
        assert!(matches!(err, StabilityError::ParameterRegime { .. }));
        assert_eq!(
            ClosedFormScheme::matching(&s),
            vec![ClosedFormScheme::Eff05General]
        );
    }

    #[test]
    fn class_x_reduces_to_class_ii() {
        let (a2, a3) = (0.7, 1.5);
        let x = spec(
            FamilyId::EffX,
            &[("a1", 0.0), ("a2", a2), ("a3", a3), ("a4", -a2), ("b", 0.3)],
        );
        let ii = spec(
            FamilyId::EffII,
            &[("a1", 0.0), ("a2", a2), ("a3", a3), ("b", 2.0)],
        );
        for pt in [
            TestPoint::real(-2.0, 1.5),
            TestPoint::new(Complex64::new(-0.4, 1.3), Complex64::new(0.2, -0.5)),
        ] {
            let gx = closed_form_gain(ClosedFormScheme::EffXExpl1, &x, pt).unwrap();
            let gii = closed_form_gain(ClosedFormScheme::EffIIExpl1, &ii, pt).unwrap();
            assert!((gx - gii).abs() <= 1e-14 * gii.abs().max(1.0));
        }
    }
}
