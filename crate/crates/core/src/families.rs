//! Published coefficient families of stiffly accurate diagonally implicit
//! SRK schemes.
//!
//! Two-stage strong order 0.5 classes (`H05_I`, `H05_II`), the eleven
//! three-stage strong order 1.0 classes (`O10_I` ... `O10_XI`) and the
//! reduced-cost schemes `EFF_05`, `EFF_II`, `EFF_X` are built from their free
//! coefficients. Free coefficient names follow the matrix position:
//! `A21` is `A[2][1]`, `B32_3` is `B^(3)[3][2]`, `B21_1` is `B^(1)[2][1]`.
//! Parameters of the efficient schemes are `a1` ... `a4` and `b`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tableau::{SrkTableau, StrongOrder, TableauError};

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("{family}: unknown parameter '{name}'")]
    UnknownParameter { family: FamilyId, name: String },
    #[error("{family}: missing parameter '{name}'")]
    MissingParameter { family: FamilyId, name: String },
    #[error("{family}: parameter '{name}' is not finite")]
    NonFiniteParameter { family: FamilyId, name: String },
    #[error("{family}: zero denominator in the formula for {coefficient}")]
    ZeroDenominator {
        family: FamilyId,
        coefficient: &'static str,
    },
    #[error("discriminant D = {value} is negative")]
    DiscriminantNegative { value: f64 },
    #[error("{family}: negative radicand {value} in the formula for {coefficient}")]
    SqrtDomain {
        family: FamilyId,
        coefficient: &'static str,
        value: f64,
    },
    #[error("{family}: {reason}")]
    ConstraintViolated { family: FamilyId, reason: String },
    #[error("no admissible root of the class V quartic in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("invalid search interval [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

impl FamilyError {
    /// Parameter-level misuse, as opposed to a mathematical obstruction.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            FamilyError::UnknownParameter { .. }
                | FamilyError::MissingParameter { .. }
                | FamilyError::NonFiniteParameter { .. }
                | FamilyError::BadInterval { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FamilyId {
    #[serde(rename = "H05_I")]
    HalfI,
    #[serde(rename = "H05_II")]
    HalfII,
    #[serde(rename = "O10_I")]
    OneI,
    #[serde(rename = "O10_II")]
    OneII,
    #[serde(rename = "O10_III")]
    OneIII,
    #[serde(rename = "O10_IV")]
    OneIV,
    #[serde(rename = "O10_V")]
    OneV,
    #[serde(rename = "O10_VI")]
    OneVI,
    #[serde(rename = "O10_VII")]
    OneVII,
    #[serde(rename = "O10_VIII")]
    OneVIII,
    #[serde(rename = "O10_IX")]
    OneIX,
    #[serde(rename = "O10_X")]
    OneX,
    #[serde(rename = "O10_XI")]
    OneXI,
    #[serde(rename = "EFF_05")]
    Eff05,
    #[serde(rename = "EFF_II")]
    EffII,
    #[serde(rename = "EFF_X")]
    EffX,
}

impl FamilyId {
    /// The two order 0.5 classes followed by the eleven order 1.0 classes.
    pub const CLASSES: [FamilyId; 13] = [
        FamilyId::HalfI,
        FamilyId::HalfII,
        FamilyId::OneI,
        FamilyId::OneII,
        FamilyId::OneIII,
        FamilyId::OneIV,
        FamilyId::OneV,
        FamilyId::OneVI,
        FamilyId::OneVII,
        FamilyId::OneVIII,
        FamilyId::OneIX,
        FamilyId::OneX,
        FamilyId::OneXI,
    ];

    pub const EFFICIENT: [FamilyId; 3] = [FamilyId::Eff05, FamilyId::EffII, FamilyId::EffX];

    pub fn name(self) -> &'static str {
        match self {
            FamilyId::HalfI => "H05_I",
            FamilyId::HalfII => "H05_II",
            FamilyId::OneI => "O10_I",
            FamilyId::OneII => "O10_II",
            FamilyId::OneIII => "O10_III",
            FamilyId::OneIV => "O10_IV",
            FamilyId::OneV => "O10_V",
            FamilyId::OneVI => "O10_VI",
            FamilyId::OneVII => "O10_VII",
            FamilyId::OneVIII => "O10_VIII",
            FamilyId::OneIX => "O10_IX",
            FamilyId::OneX => "O10_X",
            FamilyId::OneXI => "O10_XI",
            FamilyId::Eff05 => "EFF_05",
            FamilyId::EffII => "EFF_II",
            FamilyId::EffX => "EFF_X",
        }
    }

    /// Free coefficients accepted by the constructor.
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            FamilyId::HalfI => &["A11", "A21", "B11_3"],
            FamilyId::HalfII => &["A11", "A21", "B21_3"],
            FamilyId::OneI | FamilyId::OneII => &["A11", "A22", "A33", "B22_3", "B32_3"],
            FamilyId::OneIII => &["A21", "A22", "A32", "B11_3"],
            FamilyId::OneIV => &["A11", "A22", "A32", "B33_3"],
            FamilyId::OneV => &["A11", "A22", "A32", "B32_1", "B32_3", "B33_3"],
            FamilyId::OneVI => &["A11", "A22", "A32", "B11_3", "B32_3"],
            FamilyId::OneVII => &["A11", "A22", "A32", "A33", "B22_3", "B21_1"],
            FamilyId::OneVIII => &["A11", "A21", "A22", "A32", "B22_3", "B32_2", "B11_3"],
            FamilyId::OneIX => &["A11", "A22", "A32", "B32_3", "B11_3"],
            FamilyId::OneX => &["A11", "A21", "A22", "A33", "B22_3", "B32_2"],
            FamilyId::OneXI => &["A21", "A22", "A33", "B33_3"],
            FamilyId::Eff05 => &["a1", "a2"],
            FamilyId::EffII => &["a1", "a2", "a3", "b"],
            FamilyId::EffX => &["a1", "a2", "a3", "a4", "b"],
        }
    }

    /// Whether the `sign` switch changes the constructed coefficients.
    pub fn has_sign_choice(self) -> bool {
        matches!(
            self,
            FamilyId::OneII
                | FamilyId::OneIV
                | FamilyId::OneVI
                | FamilyId::OneVII
                | FamilyId::EffII
        )
    }

    pub fn order(self) -> StrongOrder {
        match self {
            FamilyId::HalfI | FamilyId::HalfII | FamilyId::Eff05 => StrongOrder::Half,
            _ => StrongOrder::One,
        }
    }

    /// Value of the order condition parameter `lambda` for order 1.0 classes.
    pub fn lambda(self) -> Option<f64> {
        match self {
            FamilyId::OneI
            | FamilyId::OneII
            | FamilyId::OneIII
            | FamilyId::OneIV
            | FamilyId::OneV
            | FamilyId::EffII => Some(1.0),
            FamilyId::OneVI
            | FamilyId::OneVII
            | FamilyId::OneVIII
            | FamilyId::OneIX
            | FamilyId::OneX
            | FamilyId::OneXI
            | FamilyId::EffX => Some(0.0),
            _ => None,
        }
    }

    /// Documented default parameters; every default builds an admissible
    /// tableau of the family's order. `O10_V` solves for `B32_3` at
    /// `B32_1 = B33_3 = 1`.
    pub fn default_spec(self) -> FamilySpec {
        let p: &[(&str, f64)] = match self {
            FamilyId::HalfI => &[("A11", 0.0), ("A21", 1.0), ("B11_3", 0.0)],
            FamilyId::HalfII => &[("A11", 1.0), ("A21", 0.0), ("B21_3", 0.5)],
            FamilyId::OneI | FamilyId::OneII => &[
                ("A11", 1.0),
                ("A22", 1.0),
                ("A33", 1.0),
                ("B22_3", 0.0),
                ("B32_3", 0.5),
            ],
            FamilyId::OneIII => &[("A21", 0.0), ("A22", 1.0), ("A32", 0.0), ("B11_3", 1.0)],
            FamilyId::OneIV => &[("A11", 1.0), ("A22", 1.0), ("A32", 0.0), ("B33_3", 1.0)],
            FamilyId::OneV => {
                let root = class_v_solve(1.0, 1.0, (-10.0, 10.0), CLASS_V_ROOT_TOLERANCE)
                    .expect("the default class V quartic has an admissible root")[0];
                return FamilySpec::new(
                    self,
                    &[
                        ("A11", 1.0),
                        ("A22", 1.0),
                        ("A32", 0.0),
                        ("B32_1", 1.0),
                        ("B32_3", root),
                        ("B33_3", 1.0),
                    ],
                    Sign::Upper,
                );
            }
            FamilyId::OneVI => &[
                ("A11", 0.0),
                ("A22", 0.0),
                ("A32", 0.0),
                ("B11_3", 0.0),
                ("B32_3", 2.0),
            ],
            FamilyId::OneVII => &[
                ("A11", 1.0),
                ("A22", 1.0),
                ("A32", 0.0),
                ("A33", 1.0),
                ("B22_3", 0.0),
                ("B21_1", 0.5),
            ],
            FamilyId::OneVIII => &[
                ("A11", 1.0),
                ("A21", 0.0),
                ("A22", 1.0),
                ("A32", 0.0),
                ("B22_3", 0.0),
                ("B32_2", 1.0),
                ("B11_3", 1.0),
            ],
            FamilyId::OneIX => &[
                ("A11", 1.0),
                ("A22", 1.0),
                ("A32", 0.0),
                ("B32_3", 0.0),
                ("B11_3", 1.0),
            ],
            FamilyId::OneX => &[
                ("A11", 0.0),
                ("A21", 0.0),
                ("A22", 0.0),
                ("A33", 1.0),
                ("B22_3", 0.0),
                ("B32_2", 1.0),
            ],
            FamilyId::OneXI => &[("A21", 0.0), ("A22", 1.0), ("A33", 1.0), ("B33_3", 1.0)],
            FamilyId::Eff05 => &[("a1", 1.0), ("a2", 0.0)],
            FamilyId::EffII => &[("a1", 1.0), ("a2", 1.0), ("a3", 1.0), ("b", 1.0)],
            FamilyId::EffX => &[
                ("a1", 1.0),
                ("a2", 1.0),
                ("a3", 1.0),
                ("a4", 0.0),
                ("b", 1.0),
            ],
        };
        FamilySpec::new(self, p, Sign::Upper)
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FamilyId::CLASSES
            .iter()
            .chain(FamilyId::EFFICIENT.iter())
            .copied()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown family '{s}'"))
    }
}

/// Selects the upper or lower sign wherever a class formula carries `±`/`∓`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Upper,
    Lower,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Upper => 1.0,
            Sign::Lower => -1.0,
        }
    }
}

/// A family identifier with values for its free coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: FamilyId,
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub sign: Sign,
}

impl FamilySpec {
    pub fn new(family: FamilyId, params: &[(&str, f64)], sign: Sign) -> Self {
        Self {
            family,
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            sign,
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn build(&self) -> Result<SrkTableau, FamilyError> {
        match self.family {
            FamilyId::HalfI | FamilyId::HalfII => make_order_half(self.family, &self.params),
            FamilyId::Eff05 | FamilyId::EffII | FamilyId::EffX => {
                make_efficient(self.family, &self.params, self.sign)
            }
            f => make_order_one(f, &self.params, self.sign),
        }
    }
}

/// Checked view of a parameter map against a family's declared coefficients.
struct Params<'a> {
    family: FamilyId,
    map: &'a BTreeMap<String, f64>,
}

impl<'a> Params<'a> {
    fn new(family: FamilyId, map: &'a BTreeMap<String, f64>) -> Result<Self, FamilyError> {
        let declared: BTreeSet<&str> = family.parameters().iter().copied().collect();
        if let Some(extra) = map.keys().find(|k| !declared.contains(k.as_str())) {
            return Err(FamilyError::UnknownParameter {
                family,
                name: extra.clone(),
            });
        }
        for name in family.parameters() {
            match map.get(*name) {
                None => {
                    return Err(FamilyError::MissingParameter {
                        family,
                        name: name.to_string(),
                    })
                }
                Some(v) if !v.is_finite() => {
                    return Err(FamilyError::NonFiniteParameter {
                        family,
                        name: name.to_string(),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(Self { family, map })
    }

    fn get(&self, name: &str) -> f64 {
        self.map[name]
    }

    fn nonzero(&self, value: f64, coefficient: &'static str) -> Result<f64, FamilyError> {
        if value == 0.0 {
            Err(FamilyError::ZeroDenominator {
                family: self.family,
                coefficient,
            })
        } else {
            Ok(value)
        }
    }

    fn sqrt(&self, radicand: f64, coefficient: &'static str) -> Result<f64, FamilyError> {
        if radicand < 0.0 {
            Err(FamilyError::SqrtDomain {
                family: self.family,
                coefficient,
                value: radicand,
            })
        } else {
            Ok(radicand.sqrt())
        }
    }
}

type Rows<'r> = [&'r [f64]; 3];

fn three_stage(
    a: Rows<'_>,
    b1: Rows<'_>,
    b2: Rows<'_>,
    b3: Rows<'_>,
) -> Result<SrkTableau, FamilyError> {
    Ok(SrkTableau::from_lower_rows(&a, &b1, &b2, &b3)?)
}

const NO_NOISE: Rows<'static> = [&[], &[], &[]];

/// Two-stage order 0.5 classes I and II.
pub fn make_order_half(
    family: FamilyId,
    params: &BTreeMap<String, f64>,
) -> Result<SrkTableau, FamilyError> {
    let p = Params::new(family, params)?;
    let (a11, a21) = (p.get("A11"), p.get("A21"));
    let a22 = 1.0 - a21;
    let (b3_11, b3_21, b3_22) = match family {
        FamilyId::HalfI => (p.get("B11_3"), 0.0, 0.0),
        FamilyId::HalfII => {
            let b = p.get("B21_3");
            (0.0, b, -b)
        }
        other => panic!("{other} is not an order 0.5 class"),
    };
    Ok(SrkTableau::from_lower_rows(
        &[&[a11], &[a21, a22]],
        &[&[], &[1.0]],
        &[&[], &[]],
        &[&[b3_11], &[b3_21, b3_22]],
    )?)
}

/// Three-stage order 1.0 classes I to XI.
pub fn make_order_one(
    family: FamilyId,
    params: &BTreeMap<String, f64>,
    sign: Sign,
) -> Result<SrkTableau, FamilyError> {
    let p = Params::new(family, params)?;
    let sg = sign.factor();
    match family {
        FamilyId::OneI => {
            let (a11, a22, a33, b22) = (p.get("A11"), p.get("A22"), p.get("A33"), p.get("B22_3"));
            let x = p.nonzero(p.get("B32_3"), "B32_3")?;
            let x2 = x * x;
            let a21 = (a11 - 4.0 * a22 * x2 + 4.0 * x2 - 1.0) / (4.0 * x2);
            let b21_3 = -(1.0 + 2.0 * b22 * x) / (2.0 * x);
            let b31_3 = -1.0 / (4.0 * x);
            let b33_3 = -(4.0 * x2 - 1.0) / (4.0 * x);
            three_stage(
                [&[a11], &[a21, a22], &[1.0 - a33, 0.0, a33]],
                [&[], &[1.0], &[0.5, 0.5]],
                NO_NOISE,
                [&[0.0], &[b21_3, b22], &[b31_3, x, b33_3]],
            )
        }
        FamilyId::OneII => {
            let (a11, a22, a33, b22) = (p.get("A11"), p.get("A22"), p.get("A33"), p.get("B22_3"));
            let x = p.nonzero(p.get("B32_3"), "B32_3")?;
            let b21_1 = sg / (2.0 * x);
            let b31_1 = 1.0 - sg * x;
            let b32_1 = sg * x;
            let b21_3 = -(1.0 + 2.0 * b22 * x) / (2.0 * x);
            three_stage(
                [&[a11], &[a11 - a22, a22], &[1.0 - a33, 0.0, a33]],
                [&[], &[b21_1], &[b31_1, b32_1]],
                NO_NOISE,
                [&[0.0], &[b21_3, b22], &[-x, x, 0.0]],
            )
        }
        FamilyId::OneIII => {
            let (a21, a22, a32) = (p.get("A21"), p.get("A22"), p.get("A32"));
            let b = p.nonzero(p.get("B11_3"), "B11_3")?;
            let q = b * b;
            let a31 = -a32 * (q - 1.0) / (2.0 * q);
            let a33 = -(a32 * q - 2.0 * q + a32) / (2.0 * q);
            let b21_1 = 0.5 * (q + 1.0) / (1.0 + 2.0 * q);
            let b31_1 = -q / (q + 1.0);
            let b32_1 = (1.0 + 2.0 * q) / (q + 1.0);
            let b21_3 = (q - 1.0) / (2.0 * b);
            three_stage(
                [&[1.0], &[a21, a22], &[a31, a32, a33]],
                [&[], &[b21_1], &[b31_1, b32_1]],
                NO_NOISE,
                [
                    &[b],
                    &[b21_3, 0.0],
                    &[-1.0 / (2.0 * b), 0.0, 1.0 / (2.0 * b)],
                ],
            )
        }
        FamilyId::OneIV => {
            let (a11, a22, a32) = (p.get("A11"), p.get("A22"), p.get("A32"));
            let b = p.nonzero(p.get("B33_3"), "B33_3")?;
            let q = b * b;
            let r = (1.0 + 2.0 * q).sqrt();
            let a21 = (2.0 * q - 2.0 * a22 * q + 2.0 - a22 - a11) / (1.0 + 2.0 * q);
            let a31 = a32 / q;
            let a33 = (q - q * a32 - a32) / q;
            let b21_1 = sg * (1.0 + q) / (b * r);
            let b31_1 = -0.5 * (sg * b * r - 2.0 - 2.0 * q) / (1.0 + q);
            let b32_1 = sg * 0.5 * b * r / (1.0 + q);
            let b31_3 = -0.5 * b / (1.0 + q);
            let b32_3 = -0.5 * b * (1.0 + 2.0 * q) / (1.0 + q);
            three_stage(
                [&[a11], &[a21, a22], &[a31, a32, a33]],
                [&[], &[b21_1], &[b31_1, b32_1]],
                NO_NOISE,
                [&[-b], &[1.0 / b, 0.0], &[b31_3, b32_3, b]],
            )
        }
        FamilyId::OneV => {
            let (a11, a22, a32) = (p.get("A11"), p.get("A22"), p.get("A32"));
            let b1 = p.nonzero(p.get("B32_1"), "B32_1")?;
            let x = p.nonzero(p.get("B32_3"), "B32_3")?;
            let q = p.nonzero(p.get("B33_3"), "B33_3")?;
            if x == -b1 * q {
                return Err(FamilyError::ConstraintViolated {
                    family,
                    reason: "B32_3 must differ from -B32_1 * B33_3".into(),
                });
            }
            let quartic = ClassVQuartic::new(b1, q);
            let rel = quartic.relative_residual(x);
            if rel > CLASS_V_CONSTRAINT_TOLERANCE {
                return Err(FamilyError::ConstraintViolated {
                    family,
                    reason: format!(
                        "(B32_1, B32_3, B33_3) does not solve the class V constraint (relative residual {rel:.3e})"
                    ),
                });
            }
            let den = p.nonzero(b1 * b1 - 2.0 * b1 * q * x - x * x, "a31")?;
            let pq = p.nonzero(b1 * (b1 * q + x), "b11_3")?;
            let common = b1 * b1 - 2.0 * b1 * q * x - 2.0 * b1 * q * q - b1 - x * q - x * x;
            let a21 = (-q + a11 * q - a22 * x + a11 * x) / x;
            let a31 = -(common * a32) / den;
            let a33 = -(-b1 * b1
                + 2.0 * b1 * q * x
                + 2.0 * b1 * a32 * q * q
                + a32 * b1
                + a32 * q * x
                + x * x)
                / den;
            let b21_1 = 1.0 / (2.0 * b1);
            let b11_3 = 0.5 * den / pq;
            let b21_3 = 0.5 * common / pq;
            three_stage(
                [&[a11], &[a21, a22], &[a31, a32, a33]],
                [&[], &[b21_1], &[1.0 - b1, b1]],
                NO_NOISE,
                [&[b11_3], &[b21_3, 0.0], &[-x - q, x, q]],
            )
        }
        FamilyId::OneVI => {
            let (a11, a22, a32) = (p.get("A11"), p.get("A22"), p.get("A32"));
            let b = p.get("B11_3");
            let x = p.nonzero(p.get("B32_3"), "B32_3")?;
            let d = class_vi_discriminant(b, x);
            if d < 0.0 {
                return Err(FamilyError::DiscriminantNegative { value: d });
            }
            let sd = sg * d.sqrt();
            let q = b * b;
            let w = (q + 1.0) * x;
            let a21 = -0.5 / w
                * (-a11 * x * q - a11 * x
                    + 2.0 * a11 * b
                    + a11 * sd
                    + 2.0 * a22 * x * q
                    + 2.0 * a22 * x
                    - 2.0 * b
                    - q * x
                    - x
                    - sd);
            let a31 = 0.5 / w * (a32 * (-q * x - x + 2.0 * b + sd));
            let a33 = -0.5 / w
                * (-2.0 * q * x - 2.0 * x + 2.0 * b * a32 + a32 * q * x + a32 * x + a32 * sd);
            let b21_1 = 0.5 / w * (q * x + x - 2.0 * q * b + sd);
            let b21_2 = 1.0 / x;
            let b21_3 = -0.5 / w * (b * (-q * x - x + 2.0 * b + sd));
            let b31_3 = 0.5 / (q + 1.0) * (-q * x - x + 2.0 * b + sd);
            let b33_3 = -0.5 / (q + 1.0) * (2.0 * b + q * x + x + sd);
            three_stage(
                [&[a11], &[a21, a22], &[a31, a32, a33]],
                [&[], &[b21_1], &[1.0, 0.0]],
                [&[], &[b21_2], &[0.0, 0.0]],
                [&[b], &[b21_3, 0.0], &[b31_3, x, b33_3]],
            )
        }
        FamilyId::OneVII => {
            let (a11, a22, a32, a33, b22) = (
                p.get("A11"),
                p.get("A22"),
                p.get("A32"),
                p.get("A33"),
                p.get("B22_3"),
            );
            let b = p.nonzero(p.get("B21_1"), "B21_1")?;
            let r = p.sqrt(2.0 * b - 2.0 * b * b, "b21_2")?;
            let r = p.nonzero(r, "b31_3")?;
            three_stage(
                [
                    &[a11],
                    &[a11 - a11 * b - a22 + b, a22],
                    &[1.0 - a32 - a33, a32, a33],
                ],
                [&[], &[b], &[1.0, 0.0]],
                [&[], &[sg * r], &[0.0, 0.0]],
                [
                    &[0.0],
                    &[-b22, b22],
                    &[-sg * (1.0 - b) / r, sg / r, -sg * b / r],
                ],
            )
        }
        FamilyId::OneVIII => {
            let (a11, a21, a22, a32, b22) = (
                p.get("A11"),
                p.get("A21"),
                p.get("A22"),
                p.get("A32"),
                p.get("B22_3"),
            );
            let y = p.nonzero(p.get("B32_2"), "B32_2")?;
            let b = p.nonzero(p.get("B11_3"), "B11_3")?;
            let yb = y * b;
            three_stage(
                [
                    &[a11],
                    &[a21, a22],
                    &[-a32 * (1.0 + yb) / yb, a32, (yb + a32) / yb],
                ],
                [&[], &[0.0], &[1.0 + yb, -yb]],
                [&[], &[0.0], &[-y, y]],
                [&[b], &[(1.0 + y * (b - b22)) / y, b22], &[0.0, 0.0, 0.0]],
            )
        }
        FamilyId::OneIX => {
            let (a11, a22, a32, x) = (p.get("A11"), p.get("A22"), p.get("A32"), p.get("B32_3"));
            let b = p.nonzero(p.get("B11_3"), "B11_3")?;
            let q = b * b;
            let a21 = (q - a22 * q - a11 + 1.0) / q;
            let a31 = a32 / q;
            let a33 = (q - q * a32 - a32) / q;
            let b31_1 = (b + q * x + x) / (b * (q + 1.0));
            let b32_1 = (q * b - q * x - x) / (b * (q + 1.0));
            let b31_2 = b / (q + 1.0);
            three_stage(
                [&[a11], &[a21, a22], &[a31, a32, a33]],
                [&[], &[0.0], &[b31_1, b32_1]],
                [&[], &[0.0], &[b31_2, -b31_2]],
                [&[b], &[-1.0 / b, 0.0], &[x / q, x, -(q + 1.0) * x / q]],
            )
        }
        FamilyId::OneX => {
            let (a11, a21, a22, a33, b22) = (
                p.get("A11"),
                p.get("A21"),
                p.get("A22"),
                p.get("A33"),
                p.get("B22_3"),
            );
            let y = p.nonzero(p.get("B32_2"), "B32_2")?;
            three_stage(
                [&[a11], &[a21, a22], &[1.0 - a33, 0.0, a33]],
                [&[], &[0.0], &[1.0, 0.0]],
                [&[], &[0.0], &[-y, y]],
                [&[0.0], &[(1.0 - y * b22) / y, b22], &[0.0, 0.0, 0.0]],
            )
        }
        FamilyId::OneXI => {
            let (a21, a22, a33) = (p.get("A21"), p.get("A22"), p.get("A33"));
            let b = p.nonzero(p.get("B33_3"), "B33_3")?;
            let q = b * b;
            let q2 = q * q;
            let den = p.nonzero(1.0 - 2.0 * q, "a11")?;
            let a11 = (2.0 * a21 * q2 + a21 + 2.0 * a22 * q2 + a22 - 2.0 * q2 - 2.0 * q) / den;
            let a32 = -(2.0 * a33 * q2 - 2.0 * q2 - 1.0 + a33) / (2.0 * q * (q + 1.0));
            // fully determined by B33_3, needed inside the b21_2 radicand
            let b32_3 = -(2.0 * q2 + 1.0) / (2.0 * b * (q + 1.0));
            let radicand = -2.0 * q * b * b32_3 - 2.0 * b32_3 * b - 2.0 * q2;
            let b21_2 = p.sqrt(radicand, "b21_2")? / b32_3;
            let b21_3 = -(b32_3 * b + q) / b32_3;
            three_stage(
                [&[a11], &[a21, a22], &[1.0 - a32 - a33, a32, a33]],
                [&[], &[0.0], &[1.0, 0.0]],
                [&[], &[b21_2], &[0.0, 0.0]],
                [&[-b], &[b21_3, 0.0], &[-b32_3 - b, b32_3, b]],
            )
        }
        other => panic!("{other} is not an order 1.0 class"),
    }
}

/// Discriminant of class VI; the class exists only where it is nonnegative.
pub fn class_vi_discriminant(b11_3: f64, b32_3: f64) -> f64 {
    let (b, x) = (b11_3, b32_3);
    let (b2, x2) = (b * b, x * x);
    b2 * b2 * x2 + 2.0 * b2 * x2 + x2 + 4.0 * b2 * b * x - 2.0 * b2 - 4.0 * b2 * b2 + 4.0 * b * x
        - 2.0
}

/// Reduced-cost schemes: `EFF_05` (two stages) and the class II / class X
/// specialisations `EFF_II`, `EFF_X`.
pub fn make_efficient(
    family: FamilyId,
    params: &BTreeMap<String, f64>,
    sign: Sign,
) -> Result<SrkTableau, FamilyError> {
    let p = Params::new(family, params)?;
    match family {
        FamilyId::Eff05 => {
            let (a1, a2) = (p.get("a1"), p.get("a2"));
            Ok(SrkTableau::from_lower_rows(
                &[&[a1], &[a2, 1.0 - a2]],
                &[&[], &[1.0]],
                &[&[], &[]],
                &[&[], &[]],
            )?)
        }
        FamilyId::EffII => {
            let (a1, a2, a3) = (p.get("a1"), p.get("a2"), p.get("a3"));
            let b = p.nonzero(p.get("b"), "b")?;
            let sg = sign.factor();
            let inv = 1.0 / (2.0 * b);
            three_stage(
                [&[a1], &[a1 - a2, a2], &[1.0 - a3, 0.0, a3]],
                [&[], &[b], &[1.0 - inv, inv]],
                NO_NOISE,
                [&[0.0], &[-sg * b, 0.0], &[-sg * inv, sg * inv, 0.0]],
            )
        }
        FamilyId::EffX => {
            let (a1, a2, a3, a4) = (p.get("a1"), p.get("a2"), p.get("a3"), p.get("a4"));
            let b = p.nonzero(p.get("b"), "b")?;
            three_stage(
                [&[a1], &[a4, a2], &[1.0 - a3, 0.0, a3]],
                [&[], &[0.0], &[1.0, 0.0]],
                [&[], &[0.0], &[-1.0 / b, 1.0 / b]],
                [&[0.0], &[b, 0.0], &[0.0, 0.0, 0.0]],
            )
        }
        other => panic!("{other} is not a reduced-cost scheme"),
    }
}

/// Accepted relative residual of the class V constraint in `make_order_one`.
pub const CLASS_V_CONSTRAINT_TOLERANCE: f64 = 1e-10;
/// Default absolute residual accepted for roots returned by [`class_v_solve`].
pub const CLASS_V_ROOT_TOLERANCE: f64 = 1e-12;
const CLASS_V_SCAN_STEP: f64 = 1e-3;
const CLASS_V_BISECTION_WIDTH: f64 = 1e-14;
const CLASS_V_EXCLUSION: f64 = 1e-12;

/// The class V constraint as a quartic in `B32_3` for fixed `B32_1`, `B33_3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassVQuartic {
    /// Coefficients of `x^0` ... `x^4`.
    pub coeffs: [f64; 5],
}

impl ClassVQuartic {
    pub fn new(b32_1: f64, b33_3: f64) -> Self {
        let (p, q) = (b32_1, b33_3);
        let (p2, q2) = (p * p, q * q);
        let (p3, q3) = (p2 * p, q2 * q);
        Self {
            coeffs: [
                -4.0 * p3 * q3 - 2.0 * p3 * q + p2 * p2 * q + 4.0 * p2 * p2 * q3,
                4.0 * p2 * q2 * q2 + 4.0 * p3 * q2 - p2 - p2 * q2,
                4.0 * p * q3 + 4.0 * p2 * q3 + 2.0 * p2 * q + 2.0 * p * q,
                4.0 * p * q2 + q2 + 1.0,
                q,
            ],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `|P(x)|` divided by the sum of the absolute monomial values.
    pub fn relative_residual(&self, x: f64) -> f64 {
        let mut scale = 0.0;
        let mut xp = 1.0;
        for c in self.coeffs {
            scale += (c * xp).abs();
            xp *= x;
        }
        if scale == 0.0 {
            0.0
        } else {
            self.eval(x).abs() / scale
        }
    }
}

/// Real roots `B32_3` of the class V constraint inside `interval`.
///
/// The interval is scanned at a fixed granularity for sign changes, each
/// bracket is bisected down to `1e-14`, and roots with `|P(r)| > tol`, `r = 0`
/// or `r = -B32_1 * B33_3` are discarded.
pub fn class_v_solve(
    b32_1: f64,
    b33_3: f64,
    interval: (f64, f64),
    tol: f64,
) -> Result<Vec<f64>, FamilyError> {
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || !(tol > 0.0) {
        return Err(FamilyError::BadInterval { lo, hi });
    }
    if b32_1 == 0.0 {
        return Err(FamilyError::ZeroDenominator {
            family: FamilyId::OneV,
            coefficient: "B32_1",
        });
    }
    if b33_3 == 0.0 {
        return Err(FamilyError::ZeroDenominator {
            family: FamilyId::OneV,
            coefficient: "B33_3",
        });
    }
    let poly = ClassVQuartic::new(b32_1, b33_3);
    let n = ((hi - lo) / CLASS_V_SCAN_STEP).ceil().max(1.0) as usize;
    let grid = |i: usize| {
        if i == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / n as f64
        }
    };

    let mut candidates = Vec::new();
    let mut x0 = grid(0);
    let mut f0 = poly.eval(x0);
    if f0 == 0.0 {
        candidates.push(x0);
    }
    for i in 1..=n {
        let x1 = grid(i);
        let f1 = poly.eval(x1);
        if f1 == 0.0 {
            candidates.push(x1);
        } else if f0 != 0.0 && f0.signum() != f1.signum() {
            candidates.push(bisect(&poly, x0, f0, x1));
        }
        x0 = x1;
        f0 = f1;
    }

    let excluded = -b32_1 * b33_3;
    let roots: Vec<f64> = candidates
        .into_iter()
        .filter(|&r| poly.eval(r).abs() <= tol)
        .filter(|&r| r.abs() > CLASS_V_EXCLUSION && (r - excluded).abs() > CLASS_V_EXCLUSION)
        .collect();
    if roots.is_empty() {
        Err(FamilyError::NoRoot { lo, hi })
    } else {
        Ok(roots)
    }
}

fn bisect(poly: &ClassVQuartic, mut a: f64, mut fa: f64, mut b: f64) -> f64 {
    while b - a > CLASS_V_BISECTION_WIDTH {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = poly.eval(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let fb = poly.eval(b);
    if fa.abs() <= fb.abs() {
        a
    } else {
        b
    }
}
