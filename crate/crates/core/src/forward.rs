//! Far-field synthesis: the source far field
//! `u∞(x̂, ω) = T(θ) ∫_{V0} e^{-i k- x̂ᵗ·y} S(y) dy` by direct quadrature, the
//! layered point-source far field, and phaseless measurement triples.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::lattice::{AdmissibleSet, LatticeEntry};
use crate::medium::{Direction, Medium};
use crate::quadrature::{resolving_orders, QuadratureRule, SourceBox};
use crate::retrieval::{scaling_factors, ReferenceConfig};
use crate::scalar::{cis, Real};
use crate::sources::Source;

/// Source samples premultiplied by the quadrature weights, laid out on the
/// tensor grid so plane-wave integrals reduce to per-axis phase contractions.
#[derive(Clone, Debug)]
pub struct PreparedSource<T> {
    rule: QuadratureRule<T>,
    weighted: Vec<Complex<T>>,
}

impl<T: Real> PreparedSource<T> {
    pub fn new(rule: &QuadratureRule<T>, source: &Source<T>) -> Result<Self> {
        if let Some(d) = source.dim() {
            if d != rule.source_box().dim() {
                return Err(Error::BoxMismatch);
            }
        }
        let weighted = rule.nodes().map(|(y, w)| source.eval(&y) * w).collect();
        Ok(PreparedSource {
            rule: rule.clone(),
            weighted,
        })
    }

    pub fn rule(&self) -> &QuadratureRule<T> {
        &self.rule
    }

    /// `∫_{V0} e^{-i κ·y} S(y) dy` for the wave vector `κ`.
    pub fn plane_wave_integral(&self, kappa: &Point<T>) -> Complex<T> {
        let n = self.rule.source_box().dim().n();
        let phases: Vec<Vec<Complex<T>>> = (0..n)
            .map(|j| self.rule.axis(j).nodes.iter().map(|&y| cis(-kappa[j] * y)).collect())
            .collect();
        let zero = Complex::new(T::zero(), T::zero());
        let w = &self.weighted;
        if n == 2 {
            let (n1, n2) = (phases[0].len(), phases[1].len());
            let mut total = zero;
            for i in 0..n1 {
                let row = &w[i * n2..(i + 1) * n2];
                let inner = row.iter().zip(&phases[1]).fold(zero, |acc, (a, b)| acc + a * b);
                total = total + inner * phases[0][i];
            }
            total
        } else {
            let (n1, n2, n3) = (phases[0].len(), phases[1].len(), phases[2].len());
            let mut total = zero;
            for i in 0..n1 {
                let mut mid = zero;
                for j in 0..n2 {
                    let off = (i * n2 + j) * n3;
                    let row = &w[off..off + n3];
                    let inner = row.iter().zip(&phases[2]).fold(zero, |acc, (a, b)| acc + a * b);
                    mid = mid + inner * phases[1][j];
                }
                total = total + mid * phases[0][i];
            }
            total
        }
    }

    /// Far field of the prepared source at one lattice entry.
    pub fn far_field(&self, medium: &Medium<T>, entry: &LatticeEntry<T>) -> Result<Complex<T>> {
        if entry.index.dim() != self.rule.source_box().dim() {
            return Err(Error::BoxMismatch);
        }
        let t = medium
            .transmission(entry.observation.theta())
            .map_err(|e| e.at(entry.index))?;
        let kappa = entry.direction.scale(entry.k_minus);
        Ok(self.plane_wave_integral(&kappa) * t)
    }
}

/// `T(θ) ∫_{V0} e^{-i k- x̂ᵗ·y} S(y) dy` at one entry.
pub fn far_field_source<T: Real>(
    medium: &Medium<T>,
    rule: &QuadratureRule<T>,
    source: &Source<T>,
    entry: &LatticeEntry<T>,
) -> Result<Complex<T>> {
    PreparedSource::new(rule, source)?.far_field(medium, entry)
}

/// Far field of a unit point source at `z` observed along `observation` at
/// frequency `omega`.
///
/// Below the interface: `T(θ) e^{-i k- x̂ᵗ·z}`; above it:
/// `H(θ) e^{-i k+ x̂·zˢ} + e^{-i k+ x̂·z}` with `zˢ` the mirror image.
pub fn far_field_point_at<T: Real>(
    medium: &Medium<T>,
    observation: &Direction<T>,
    transmitted: &Point<T>,
    omega: T,
    z: &Point<T>,
) -> Result<Complex<T>> {
    let (k_minus, k_plus) = medium.wavenumbers(omega);
    let theta = observation.theta();
    if z.last() == T::zero() {
        return Err(Error::PointOnInterface);
    }
    if z.last() < T::zero() {
        let t = medium.transmission(theta)?;
        Ok(cis(-k_minus * transmitted.dot(z)) * t)
    } else {
        let h = medium.reflection(theta)?;
        let x = observation.vector();
        Ok(cis(-k_plus * x.dot(&z.mirror())) * h + cis(-k_plus * x.dot(z)))
    }
}

/// Point-source far field at a lattice entry's observation direction and
/// frequency.
pub fn far_field_point<T: Real>(medium: &Medium<T>, entry: &LatticeEntry<T>, z: &Point<T>) -> Result<Complex<T>> {
    far_field_point_at(medium, &entry.observation, &entry.direction, entry.omega, z)
}

/// Phased far-field data, one value per lattice entry.
#[derive(Clone, Debug)]
pub struct FarFieldDataset<T> {
    set: Arc<AdmissibleSet<T>>,
    values: Vec<Complex<T>>,
    orders: Vec<usize>,
}

impl<T: Real> FarFieldDataset<T> {
    pub fn new(set: Arc<AdmissibleSet<T>>, values: Vec<Complex<T>>, orders: Vec<usize>) -> Result<Self> {
        if values.len() != set.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} lattice entries",
                values.len(),
                set.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidConfig("non-finite far-field value".into()).at(set.entries()[i].index));
        }
        Ok(FarFieldDataset { set, values, orders })
    }

    pub fn set(&self) -> &Arc<AdmissibleSet<T>> {
        &self.set
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// Quadrature orders used for synthesis (empty when loaded from a file).
    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        FarFieldDataset {
            set: self.set.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            orders: self.orders.clone(),
        }
    }
}

/// Default quadrature for a lattice: at least 100 points per axis in 2D and
/// 50 in 3D, raised where needed to resolve the largest per-axis wavenumber.
pub fn default_rule<T: Real>(set: &AdmissibleSet<T>, bx: &SourceBox<T>) -> Result<QuadratureRule<T>> {
    let n = bx.dim().n();
    let mut kmax = vec![T::zero(); n];
    for e in set.entries() {
        for (j, k) in kmax.iter_mut().enumerate() {
            *k = k.max((e.k_minus * e.direction[j]).abs());
        }
    }
    let base = crate::quadrature::default_orders(bx.dim());
    QuadratureRule::new(*bx, &resolving_orders(bx, &kmax, &base))
}

/// Far field of `source` at every entry. Entries are evaluated independently
/// (in parallel) and stored by position, so the result does not depend on the
/// worker count.
pub fn synthesize_dataset<T: Real>(
    medium: &Medium<T>,
    rule: &QuadratureRule<T>,
    source: &Source<T>,
    set: Arc<AdmissibleSet<T>>,
) -> Result<FarFieldDataset<T>> {
    if set.dim() != rule.source_box().dim() {
        return Err(Error::BoxMismatch);
    }
    let prepared = PreparedSource::new(rule, source)?;
    let values = set
        .entries()
        .par_iter()
        .map(|e| prepared.far_field(medium, e))
        .collect::<Result<Vec<_>>>()?;
    FarFieldDataset::new(set, values, rule.orders())
}

/// One phaseless measurement: the magnitudes `|u∞|, |v1∞|, |v2∞|` with the
/// reference strengths and offsets that produced them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaselessRow<T> {
    pub abs_u: T,
    pub abs_v1: T,
    pub abs_v2: T,
    pub c1: T,
    pub c2: T,
    pub alpha1: T,
    pub alpha2: T,
    /// Zero far field at this frequency: no reference could be scaled.
    pub degenerate: bool,
    /// Some magnitude went negative under noise and was clamped to zero.
    pub clamped: bool,
}

#[derive(Clone, Debug)]
pub struct PhaselessDataset<T> {
    set: Arc<AdmissibleSet<T>>,
    rows: Vec<PhaselessRow<T>>,
    refs: ReferenceConfig<T>,
}

impl<T: Real> PhaselessDataset<T> {
    pub fn new(set: Arc<AdmissibleSet<T>>, rows: Vec<PhaselessRow<T>>, refs: ReferenceConfig<T>) -> Result<Self> {
        if rows.len() != set.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} phaseless rows for {} lattice entries",
                rows.len(),
                set.len()
            )));
        }
        for (r, e) in rows.iter().zip(set.entries()) {
            let ok = |v: T| v.is_finite() && v >= T::zero();
            if !(ok(r.abs_u) && ok(r.abs_v1) && ok(r.abs_v2)) {
                return Err(Error::InvalidConfig("magnitudes must be finite and non-negative".into()).at(e.index));
            }
        }
        Ok(PhaselessDataset { set, rows, refs })
    }

    pub fn set(&self) -> &Arc<AdmissibleSet<T>> {
        &self.set
    }

    pub fn rows(&self) -> &[PhaselessRow<T>] {
        &self.rows
    }

    pub fn refs(&self) -> &ReferenceConfig<T> {
        &self.refs
    }

    pub(crate) fn with_rows(&self, rows: Vec<PhaselessRow<T>>) -> Self {
        PhaselessDataset {
            set: self.set.clone(),
            rows,
            refs: self.refs.clone(),
        }
    }
}

/// Magnitude triples `|u∞|`, `|v_j∞| = |u∞ - c_j Φ∞(x̂, z_j)|` for every entry.
///
/// The scaling `c_j` is fixed per frequency from the far-field magnitudes and
/// recorded with each row; frequencies with vanishing far field are flagged
/// degenerate and carry `c_j = 0`.
pub fn synthesize_phaseless<T: Real>(dataset: &FarFieldDataset<T>, refs: &ReferenceConfig<T>) -> Result<PhaselessDataset<T>> {
    refs.validate()?;
    let set = dataset.set();
    let medium = set.medium();
    let pairs = set
        .entries()
        .par_iter()
        .map(|e| refs.reference_pair(medium, e).map_err(|err| err.at(e.index)))
        .collect::<Result<Vec<_>>>()?;
    let zero = T::zero();
    let mut rows = vec![
        PhaselessRow {
            abs_u: zero,
            abs_v1: zero,
            abs_v2: zero,
            c1: zero,
            c2: zero,
            alpha1: zero,
            alpha2: zero,
            degenerate: false,
            clamped: false,
        };
        set.len()
    ];
    for group in set.frequency_groups() {
        let mags: Vec<T> = group.iter().map(|&i| dataset.values()[i].norm()).collect();
        let p1: Vec<T> = group.iter().map(|&i| pairs[i].phi1.norm()).collect();
        let p2: Vec<T> = group.iter().map(|&i| pairs[i].phi2.norm()).collect();
        let scaling = scaling_factors(&mags, &p1, &p2, refs.degenerate_threshold);
        for &i in &group {
            let u = dataset.values()[i];
            let pr = &pairs[i];
            let row = &mut rows[i];
            row.abs_u = u.norm();
            row.alpha1 = pr.alpha1;
            row.alpha2 = pr.alpha2;
            match scaling {
                Ok((c1, c2)) => {
                    row.c1 = c1;
                    row.c2 = c2;
                    row.abs_v1 = (u - pr.phi1 * c1).norm();
                    row.abs_v2 = (u - pr.phi2 * c2).norm();
                }
                Err(_) => {
                    row.degenerate = true;
                    row.abs_v1 = row.abs_u;
                    row.abs_v2 = row.abs_u;
                }
            }
        }
    }
    PhaselessDataset::new(set.clone(), rows, refs.clone())
}
