//! Gibbs laws evaluated in multi-precision arithmetic.
//!
//! All inputs are taken as exact binary64 values; every subsequent
//! operation runs at `bits` of mantissa, so the result isolates the
//! rounding error of the double-precision path.

use astro_float::{BigFloat, Consts, Radix, RoundingMode};

const RM: RoundingMode = RoundingMode::ToEven;

pub struct ReferenceGibbs {
    /// Node masses `p_j`, summing to one.
    pub probabilities: Vec<BigFloat>,
    /// `sum_j p_j f_i(x_j)` for every feature row.
    pub moments: Vec<BigFloat>,
    pub bits: usize,
}

/// Law with `p_j ∝ mass_j 2^{-cost_j - sum_i z_i f_i(x_j)}`.
pub fn gibbs_reference(
    cost: Option<&[f64]>,
    features: &[Vec<f64>],
    mass: &[f64],
    z: &[f64],
    bits: usize,
) -> ReferenceGibbs {
    let mut cc = Consts::new().expect("constant cache");
    let ln2 = cc.ln_2(bits, RM);
    let big = |v: f64| BigFloat::from_f64(v, bits);
    let exponents: Vec<BigFloat> = (0..mass.len())
        .map(|j| {
            let mut g = cost.map_or(big(0.0), |c| big(c[j]).neg());
            for (zi, row) in z.iter().zip(features) {
                g = g.sub(&big(*zi).mul(&big(row[j]), bits, RM), bits, RM);
            }
            g
        })
        .collect();
    let top = exponents
        .iter()
        .skip(1)
        .fold(exponents[0].clone(), |a, b| a.max(b));
    let terms: Vec<BigFloat> = exponents
        .iter()
        .zip(mass)
        .map(|(g, w)| {
            let e = g
                .sub(&top, bits, RM)
                .mul(&ln2, bits, RM)
                .exp(bits, RM, &mut cc);
            big(*w).mul(&e, bits, RM)
        })
        .collect();
    let total = terms.iter().fold(big(0.0), |a, t| a.add(t, bits, RM));
    let probabilities: Vec<BigFloat> = terms.iter().map(|t| t.div(&total, bits, RM)).collect();
    let moments = features
        .iter()
        .map(|row| {
            probabilities.iter().zip(row).fold(big(0.0), |a, (p, f)| {
                a.add(&p.mul(&big(*f), bits, RM), bits, RM)
            })
        })
        .collect();
    ReferenceGibbs {
        probabilities,
        moments,
        bits,
    }
}

/// Rounds to the nearest binary64 value via its decimal expansion.
pub fn to_f64(v: &BigFloat) -> f64 {
    let mut cc = Consts::new().expect("constant cache");
    v.format(Radix::Dec, RM, &mut cc)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(f64::NAN)
}

/// `max_j |reference_j - computed_j|`, with the difference formed at full
/// reference precision before rounding.
pub fn max_abs_deviation(reference: &[BigFloat], computed: &[f64]) -> f64 {
    assert_eq!(reference.len(), computed.len(), "length mismatch");
    reference
        .iter()
        .zip(computed)
        .map(|(r, c)| {
            let p = r.precision().unwrap_or(64).max(64);
            to_f64(&r.sub(&BigFloat::from_f64(*c, p), p, RM).abs())
        })
        .fold(0.0, f64::max)
}
