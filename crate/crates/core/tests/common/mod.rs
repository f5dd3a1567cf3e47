#![allow(dead_code)]

use rand::Rng;
use srk_core::families::{class_v_solve, FamilyId, FamilySpec, Sign};
use srk_core::SrkTableau;

/// Coefficient bound used to discard draws near excluded parameter values,
/// where cancellation in the cubic conditions dominates the residuals.
pub const COEFFICIENT_BOUND: f64 = 10.0;

pub fn spec(f: FamilyId, p: &[(&str, f64)]) -> FamilySpec {
    FamilySpec::new(f, p, Sign::Upper)
}

pub fn eff05(a1: f64, a2: f64) -> FamilySpec {
    spec(FamilyId::Eff05, &[("a1", a1), ("a2", a2)])
}

pub fn eff_ii(a1: f64, a2: f64, a3: f64, b: f64) -> FamilySpec {
    spec(
        FamilyId::EffII,
        &[("a1", a1), ("a2", a2), ("a3", a3), ("b", b)],
    )
}

pub fn eff_x(a1: f64, a2: f64, a3: f64, a4: f64, b: f64) -> FamilySpec {
    spec(
        FamilyId::EffX,
        &[("a1", a1), ("a2", a2), ("a3", a3), ("a4", a4), ("b", b)],
    )
}

pub fn max_abs_coefficient(t: &SrkTableau) -> f64 {
    [t.a(), t.b1(), t.b2(), t.b3()]
        .iter()
        .map(|m| m.amax())
        .fold(0.0, f64::max)
}

/// One uniform draw of the free parameters in `[-2, 2]`; `None` when the
/// draw is outside the family's domain or produces coefficients above
/// [`COEFFICIENT_BOUND`].
pub fn draw_family<R: Rng>(family: FamilyId, rng: &mut R) -> Option<(FamilySpec, SrkTableau)> {
    let sign = if rng.random_bool(0.5) {
        Sign::Upper
    } else {
        Sign::Lower
    };
    let mut spec = FamilySpec::new(family, &[], sign);
    for name in family.parameters() {
        spec.params
            .insert(name.to_string(), rng.random_range(-2.0..2.0));
    }
    if family == FamilyId::OneV {
        let p = spec.params["B32_1"];
        let q = spec.params["B33_3"];
        let roots = class_v_solve(p, q, (-10.0, 10.0), 1e-9).ok()?;
        let root = roots[rng.random_range(0..roots.len())];
        spec.params.insert("B32_3".into(), root);
    }
    let t = spec.build().ok()?;
    (max_abs_coefficient(&t) <= COEFFICIENT_BOUND).then_some((spec, t))
}
