//! Measurement noise and error metrics.

use num_complex::Complex;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{FarFieldDataset, PhaselessDataset};
use crate::geom::Index;
use crate::scalar::Real;
use crate::sources::GridField;

/// Which magnitudes receive multiplicative noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScope {
    /// Only `|u∞|`; the reference magnitudes stay exact.
    #[default]
    FarField,
    /// `|u∞|`, `|v1∞|` and `|v2∞|` each with an independent draw.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec<T> {
    pub epsilon: T,
    pub seed: u64,
    pub scope: NoiseScope,
}

/// Uniform draw on `[-1, 1)` from 53 random bits.
fn symmetric_unit<T: Real>(rng: &mut ChaCha8Rng) -> T {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    T::lit(2.0 * u - 1.0)
}

/// `|u|_ε = (1 + ε r)|u|` with `r` uniform in `[-1, 1]`.
///
/// Each entry draws from its own stream of a seeded ChaCha generator, so the
/// perturbation of an entry depends only on the seed and its position.
/// Magnitudes that become negative are clamped to zero and flagged.
pub fn add_noise<T: Real>(data: &PhaselessDataset<T>, spec: &NoiseSpec<T>) -> Result<PhaselessDataset<T>> {
    if !(spec.epsilon.is_finite() && spec.epsilon >= T::zero()) {
        return Err(Error::InvalidConfig(format!("noise level {} must be non-negative", spec.epsilon)));
    }
    if spec.epsilon == T::zero() {
        return Ok(data.clone());
    }
    let rows = data
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let mut out = *r;
            let mut perturb = |v: T, rng: &mut ChaCha8Rng| {
                let p = (T::one() + spec.epsilon * symmetric_unit::<T>(rng)) * v;
                if p < T::zero() {
                    out.clamped = true;
                    T::zero()
                } else {
                    p
                }
            };
            let u = perturb(r.abs_u, &mut rng);
            let (v1, v2) = match spec.scope {
                NoiseScope::FarField => (r.abs_v1, r.abs_v2),
                NoiseScope::All => {
                    let a = perturb(r.abs_v1, &mut rng);
                    (a, perturb(r.abs_v2, &mut rng))
                }
            };
            out.abs_u = u;
            out.abs_v1 = v1;
            out.abs_v2 = v2;
            out
        })
        .collect();
    Ok(data.with_rows(rows))
}

/// Entries entering the error norms: non-zero indices whose direction lies
/// in the observation aperture.
fn mask<T: Real>(exact: &FarFieldDataset<T>) -> Vec<bool> {
    let set = exact.set();
    let medium = set.medium();
    set.entries()
        .iter()
        .map(|e| !e.index.is_zero() && medium.aperture_contains(set.dim(), e.theta))
        .collect()
}

fn check_len<T: Real>(exact: &FarFieldDataset<T>, recovered: &[Complex<T>]) -> Result<()> {
    if recovered.len() != exact.values().len() {
        return Err(Error::ShapeMismatch(format!(
            "{} recovered values for {} exact values",
            recovered.len(),
            exact.values().len()
        )));
    }
    Ok(())
}

/// `sqrt(Σ|u - ũ|²) / sqrt(Σ|u|²)` over the admissible non-zero entries.
pub fn err_l2<T: Real>(exact: &FarFieldDataset<T>, recovered: &[Complex<T>]) -> Result<T> {
    check_len(exact, recovered)?;
    let (mut num, mut den) = (T::zero(), T::zero());
    for ((u, v), keep) in exact.values().iter().zip(recovered).zip(mask(exact)) {
        if keep {
            num = num + (u - v).norm_sqr();
            den = den + u.norm_sqr();
        }
    }
    if den == T::zero() {
        return Err(Error::UndefinedMetric("exact far field vanishes on the admissible set".into()));
    }
    Ok((num / den).sqrt())
}

/// `max|u - ũ| / max|u|` over the admissible non-zero entries.
pub fn err_inf<T: Real>(exact: &FarFieldDataset<T>, recovered: &[Complex<T>]) -> Result<T> {
    check_len(exact, recovered)?;
    let (mut num, mut den) = (T::zero(), T::zero());
    for ((u, v), keep) in exact.values().iter().zip(recovered).zip(mask(exact)) {
        if keep {
            num = num.max((u - v).norm());
            den = den.max(u.norm());
        }
    }
    if den == T::zero() {
        return Err(Error::UndefinedMetric("exact far field vanishes on the admissible set".into()));
    }
    Ok(num / den)
}

/// `|u - ũ| / |u|` at a single index.
pub fn err_at_index<T: Real>(exact: &FarFieldDataset<T>, recovered: &[Complex<T>], l: &Index) -> Result<T> {
    check_len(exact, recovered)?;
    let i = exact.set().position(l).ok_or(Error::MissingEntry(*l))?;
    let u = exact.values()[i];
    if u.norm() == T::zero() {
        return Err(Error::UndefinedMetric(format!("exact far field vanishes at {l}")));
    }
    Ok((u - recovered[i]).norm() / u.norm())
}

/// `sqrt(Σ|a - b|²) / sqrt(Σ|b|²)` for two fields on the same grid.
pub fn grid_rel_l2<T: Real>(a: &GridField<T>, reference: &GridField<T>) -> Result<T> {
    if a.resolution() != reference.resolution() || a.source_box() != reference.source_box() {
        return Err(Error::ShapeMismatch("grids differ".into()));
    }
    let (mut num, mut den) = (T::zero(), T::zero());
    for (x, y) in a.values().iter().zip(reference.values()) {
        num = num + (x - y).norm_sqr();
        den = den + y.norm_sqr();
    }
    if den == T::zero() {
        return Err(Error::UndefinedMetric("reference grid vanishes".into()));
    }
    Ok((num / den).sqrt())
}

/// One reported metric value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    pub value: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub config_hash: String,
}
