//! Admissible Fourier indices and the frequencies/directions at which each
//! one is measured.
//!
//! Every non-zero index `l` is paired with the transmitted direction
//! `l/|l|`, the lower wavenumber `2π|l|/a` and the observation direction
//! above the interface that refracts into `l/|l|`. The zero index is replaced
//! by the small wavenumber `2πλ/a`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Dim, Index, Point};
use crate::medium::{Direction, Medium};
use crate::scalar::Real;

/// Transmitted direction used for the zero-index measurement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroDirection {
    /// Straight up; observation angle π/2.
    #[default]
    Vertical,
    /// Along the first axis (the `λ → 0` limit of `l0/|l0|`); observation
    /// angle equals the critical angle.
    Horizontal,
}

impl ZeroDirection {
    fn unit<T: Real>(self, dim: Dim) -> Point<T> {
        let (o, z) = (T::one(), T::zero());
        match (self, dim) {
            (ZeroDirection::Vertical, Dim::Two) => Point::xy(z, o),
            (ZeroDirection::Vertical, Dim::Three) => Point::xyz(z, z, o),
            (ZeroDirection::Horizontal, Dim::Two) => Point::xy(o, z),
            (ZeroDirection::Horizontal, Dim::Three) => Point::xyz(o, z, z),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeEntry<T> {
    pub index: Index,
    /// Elevation of the index direction: `tan θ = l_n / |horizontal part|`.
    pub theta: T,
    /// Transmitted direction `l/|l|` (or the zero-index direction).
    pub direction: Point<T>,
    /// Observation direction above the interface refracting into `direction`.
    pub observation: Direction<T>,
    pub k_minus: T,
    pub omega: T,
    pub k_plus: T,
}

impl<T: Real> LatticeEntry<T> {
    /// Entry for a non-zero index with `l_n >= 0`. Fails when no observation
    /// direction refracts into `l/|l|` (possible only when `c- < c+`).
    pub fn new(medium: &Medium<T>, index: Index, period: T) -> Result<Self> {
        if index.is_zero() {
            return Err(Error::InvalidConfig("zero index needs the regularised constructor".into()));
        }
        if index.last() < 0 {
            return Err(Error::InvalidConfig(format!(
                "index {index} points into the lower half-space"
            )));
        }
        let dim = index.dim();
        let norm = T::lit(index.norm_sq() as f64).sqrt();
        let comps: Vec<T> = index.comps().iter().map(|&v| T::lit(v as f64) / norm).collect();
        let direction = Point::new(&comps)?;
        let horizontal = T::lit(index.horizontal_norm_sq() as f64).sqrt();
        let vertical = T::lit(index.last() as f64);
        let (theta, observation) = match dim {
            Dim::Two => {
                let theta = vertical.atan2(comps[0] * norm);
                let obs = medium.observation_angle(comps[0]).map_err(|e| e.at(index))?;
                (theta, Direction::planar(obs))
            }
            Dim::Three => {
                let theta = vertical.atan2(horizontal);
                let phi = T::lit(index.comps()[1] as f64).atan2(T::lit(index.comps()[0] as f64));
                let obs = medium
                    .observation_angle(horizontal / norm)
                    .map_err(|e| e.at(index))?;
                (theta, Direction::spatial(obs, phi))
            }
        };
        let k_minus = T::TAU() * norm / period;
        let omega = k_minus * medium.c_minus();
        Ok(LatticeEntry {
            index,
            theta,
            direction,
            observation,
            k_minus,
            omega,
            k_plus: omega / medium.c_plus(),
        })
    }

    /// Zero-index entry with wavenumber `2πλ/a`.
    pub fn zero(medium: &Medium<T>, dim: Dim, period: T, lambda: T, zdir: ZeroDirection) -> Result<Self> {
        let direction: Point<T> = zdir.unit(dim);
        let h = match dim {
            Dim::Two => direction[0],
            Dim::Three => (direction[0] * direction[0] + direction[1] * direction[1]).sqrt(),
        };
        let obs = medium.observation_angle(h)?;
        let theta = direction.last().atan2(h.abs());
        let k_minus = T::TAU() * lambda / period;
        let omega = k_minus * medium.c_minus();
        Ok(LatticeEntry {
            index: Index::zero(dim),
            theta: if dim == Dim::Two && h < T::zero() { T::PI() - theta } else { theta },
            direction,
            observation: Direction::new(dim, obs, T::zero()),
            k_minus,
            omega,
            k_plus: omega / medium.c_plus(),
        })
    }
}

/// Parameters of an admissible set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeParams<T> {
    pub dim: Dim,
    /// Truncation order `N`: non-zero indices satisfy `|l|_inf <= N`.
    pub order: u32,
    /// Horizontal period `a`.
    pub period: T,
    /// Zero-index regulariser `λ ∈ (0, 1)`.
    pub lambda: T,
    /// Drop the aperture restriction on `θ_l` (only `l_n > 0` is enforced).
    pub full_aperture: bool,
    /// With `full_aperture`, also measure the indices with `l_n = 0` along
    /// the grazing directions at the critical angle.
    pub grazing: bool,
    pub zero_direction: ZeroDirection,
}

impl<T: Real> LatticeParams<T> {
    pub fn new(dim: Dim, order: u32, period: T, lambda: T) -> Self {
        LatticeParams {
            dim,
            order,
            period,
            lambda,
            full_aperture: false,
            grazing: false,
            zero_direction: ZeroDirection::default(),
        }
    }

    pub fn with_full_aperture(mut self, full: bool) -> Self {
        self.full_aperture = full;
        self
    }

    pub fn with_grazing(mut self, grazing: bool) -> Self {
        self.grazing = grazing;
        self
    }

    pub fn with_zero_direction(mut self, z: ZeroDirection) -> Self {
        self.zero_direction = z;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::InvalidConfig("truncation order N must be at least 1".into()));
        }
        if !(self.period.is_finite() && self.period > T::zero()) {
            return Err(Error::InvalidConfig(format!("period a = {} must be positive", self.period)));
        }
        if !(self.lambda > T::zero() && self.lambda < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "regulariser λ = {} must lie in (0, 1)",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// The admissible indices with their measurement data, in lexicographic order.
#[derive(Clone, Debug)]
pub struct AdmissibleSet<T> {
    medium: Medium<T>,
    params: LatticeParams<T>,
    entries: Vec<LatticeEntry<T>>,
    lookup: HashMap<Index, usize>,
}

impl<T: Real> AdmissibleSet<T> {
    /// Every `l` with `1 <= |l|_inf <= N`, `l_n > 0` and (unless the full
    /// aperture is requested) `θ_l` inside the observation aperture, plus the
    /// zero index. Grazing mode adds the `l_n = 0` indices.
    pub fn build(medium: &Medium<T>, params: &LatticeParams<T>) -> Result<Self> {
        params.validate()?;
        let grazing = params.full_aperture && params.grazing;
        let candidates = Index::cube(params.dim, params.order as i32)
            .into_iter()
            .filter(|l| l.last() > 0 || (grazing && l.last() == 0 && !l.is_zero()));
        let mut entries = Vec::new();
        for l in candidates {
            let entry = match LatticeEntry::new(medium, l, params.period) {
                Ok(e) => e,
                // no observation direction refracts into l/|l|
                Err(_) => continue,
            };
            if params.full_aperture || medium.aperture_contains(params.dim, entry.theta) {
                entries.push(entry);
            }
        }
        Self::assemble(medium, params, entries)
    }

    /// Explicit subset of indices. Each one must pass the same filters as in
    /// [`AdmissibleSet::build`].
    pub fn from_indices(medium: &Medium<T>, params: &LatticeParams<T>, indices: &[Index]) -> Result<Self> {
        params.validate()?;
        let mut entries = Vec::with_capacity(indices.len());
        for &l in indices {
            if l.is_zero() {
                continue;
            }
            check_index(params, l)?;
            if l.last() <= 0 {
                return Err(Error::InvalidConfig(format!("index {l} has l_n <= 0")));
            }
            let entry = LatticeEntry::new(medium, l, params.period)?;
            if !params.full_aperture && !medium.aperture_contains(params.dim, entry.theta) {
                return Err(Error::OutsideAperture {
                    theta: entry.theta.as_f64(),
                }
                .at(l));
            }
            entries.push(entry);
        }
        Self::assemble(medium, params, entries)
    }

    /// Probe set for per-index studies: accepts any non-zero index with
    /// `l_n >= 0` whose transmitted direction is reachable, including grazing
    /// indices with `l_n = 0` (observed at the critical angle). No aperture
    /// filter is applied.
    pub fn probes(medium: &Medium<T>, params: &LatticeParams<T>, indices: &[Index]) -> Result<Self> {
        params.validate()?;
        let mut entries = Vec::with_capacity(indices.len());
        for &l in indices {
            if l.is_zero() {
                continue;
            }
            check_index(params, l)?;
            entries.push(LatticeEntry::new(medium, l, params.period)?);
        }
        let mut p = *params;
        p.full_aperture = true;
        Self::assemble(medium, &p, entries)
    }

    fn assemble(medium: &Medium<T>, params: &LatticeParams<T>, mut entries: Vec<LatticeEntry<T>>) -> Result<Self> {
        entries.push(LatticeEntry::zero(
            medium,
            params.dim,
            params.period,
            params.lambda,
            params.zero_direction,
        )?);
        entries.sort_by_key(|e| e.index);
        entries.dedup_by(|a, b| a.index == b.index);
        let lookup = entries.iter().enumerate().map(|(i, e)| (e.index, i)).collect();
        Ok(AdmissibleSet {
            medium: *medium,
            params: *params,
            entries,
            lookup,
        })
    }

    pub fn medium(&self) -> &Medium<T> {
        &self.medium
    }

    pub fn params(&self) -> &LatticeParams<T> {
        &self.params
    }

    pub fn dim(&self) -> Dim {
        self.params.dim
    }

    pub fn entries(&self) -> &[LatticeEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, l: &Index) -> Option<usize> {
        self.lookup.get(l).copied()
    }

    pub fn entry_for_index(&self, l: &Index) -> Option<&LatticeEntry<T>> {
        self.position(l).map(|i| &self.entries[i])
    }

    pub fn zero_entry(&self) -> &LatticeEntry<T> {
        let z = Index::zero(self.params.dim);
        self.entry_for_index(&z).expect("zero entry always present")
    }

    /// Entries sharing a frequency, grouped by `|l|^2` (ascending). Members of
    /// each group keep lattice order.
    pub fn frequency_groups(&self) -> Vec<Vec<usize>> {
        let mut keyed: Vec<(i64, usize)> =
            self.entries.iter().enumerate().map(|(i, e)| (e.index.norm_sq(), i)).collect();
        keyed.sort();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut last = None;
        for (k, i) in keyed {
            if last == Some(k) {
                groups.last_mut().expect("group exists").push(i);
            } else {
                groups.push(vec![i]);
                last = Some(k);
            }
        }
        groups
    }
}

fn check_index<T: Real>(params: &LatticeParams<T>, l: Index) -> Result<()> {
    if l.dim() != params.dim {
        return Err(Error::ShapeMismatch(format!("index {l} has the wrong dimension")));
    }
    if l.max_norm() > params.order {
        return Err(Error::InvalidConfig(format!(
            "index {l} exceeds truncation order {}",
            params.order
        )));
    }
    Ok(())
}

/// Convenience wrapper around [`AdmissibleSet::build`].
pub fn build_admissible_set<T: Real>(
    medium: &Medium<T>,
    dim: Dim,
    order: u32,
    period: T,
    lambda: T,
    full_aperture: bool,
) -> Result<AdmissibleSet<T>> {
    AdmissibleSet::build(
        medium,
        &LatticeParams::new(dim, order, period, lambda).with_full_aperture(full_aperture),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn two_layer_medium() -> Medium<f64> {
        Medium::new(2.0, 2.0 - PI / 1000.0).unwrap()
    }

    fn ix(c: &[i32]) -> Index {
        Index::new(c).unwrap()
    }

    #[test]
    fn small_full_aperture_enumeration() {
        let s = build_admissible_set(&two_layer_medium(), Dim::Two, 1, 1.0, 1e-3, true).unwrap();
        let idx: Vec<Index> = s.entries().iter().map(|e| e.index).filter(|l| !l.is_zero()).collect();
        assert_eq!(idx, vec![ix(&[-1, 1]), ix(&[0, 1]), ix(&[1, 1])]);
        assert_eq!(s.len(), 4);

        let p = LatticeParams::new(Dim::Two, 1, 1.0, 1e-3).with_full_aperture(true).with_grazing(true);
        let g = AdmissibleSet::build(&two_layer_medium(), &p).unwrap();
        assert_eq!(g.len(), 6);
        let side = g.entry_for_index(&ix(&[-1, 0])).unwrap();
        assert!((side.observation.theta() - (PI - two_layer_medium().critical_angle())).abs() < 1e-12);
    }

    #[test]
    fn entry_formulas() {
        let m = two_layer_medium();
        let e = LatticeEntry::new(&m, ix(&[3, 4]), 1.0).unwrap();
        assert!((e.k_minus - 10.0 * PI).abs() < 1e-12);
        assert!((e.omega - 20.0 * PI).abs() < 1e-12);
        assert!((e.theta - (4.0_f64 / 3.0).atan()).abs() < 1e-15);
        assert!((e.theta - 0.927_295_218_001_612_2).abs() < 1e-12);
        assert!((e.k_plus * m.c_plus() - e.omega).abs() < 1e-12);
    }

    #[test]
    fn lookup_examples() {
        let m = two_layer_medium();
        let s = build_admissible_set(&m, Dim::Two, 5, 1.0, 1e-3, false).unwrap();
        assert!(s.entry_for_index(&ix(&[1, 0])).is_none());
        let z = s.entry_for_index(&ix(&[0, 0])).unwrap();
        assert!((z.k_minus - 2.0 * PI * 1e-3).abs() < 1e-15);
        let v = s.entry_for_index(&ix(&[0, 1])).unwrap();
        assert!((v.theta - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn ordering_and_uniqueness() {
        let s = build_admissible_set(&two_layer_medium(), Dim::Three, 3, 1.0, 1e-3, false).unwrap();
        assert!(s.entries().windows(2).all(|w| w[0].index < w[1].index));
        assert_eq!(s.entries().iter().filter(|e| e.index.is_zero()).count(), 1);
        for e in s.entries().iter().filter(|e| !e.index.is_zero()) {
            assert!(e.index.last() > 0);
            assert!(e.index.max_norm() >= 1 && e.index.max_norm() <= 3);
        }
    }

    #[test]
    fn invalid_params() {
        let m = two_layer_medium();
        assert!(build_admissible_set(&m, Dim::Two, 0, 1.0, 1e-3, false).is_err());
        assert!(build_admissible_set(&m, Dim::Two, 3, 0.0, 1e-3, false).is_err());
        assert!(build_admissible_set(&m, Dim::Two, 3, 1.0, 1.5, false).is_err());
    }

    #[test]
    fn zero_entry_directions() {
        let m = two_layer_medium();
        let h = LatticeEntry::zero(&m, Dim::Two, 1.0, 1e-3, ZeroDirection::Horizontal).unwrap();
        assert!((h.direction.norm() - 1.0).abs() < 1e-15 && (h.direction[0] - 1.0).abs() < 1e-15);
        assert!((h.observation.theta() - m.critical_angle()).abs() < 1e-9);
        let v = LatticeEntry::zero(&m, Dim::Three, 1.0, 1e-3, ZeroDirection::Vertical).unwrap();
        assert!((v.observation.theta() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn probes_accept_grazing_index() {
        let m = two_layer_medium();
        let p = LatticeParams::new(Dim::Three, 30, 1.0, 1e-3);
        let s = AdmissibleSet::probes(&m, &p, &[ix(&[17, -13, 0])]).unwrap();
        let e = s.entry_for_index(&ix(&[17, -13, 0])).unwrap();
        assert_eq!(e.theta, 0.0);
        assert!((e.observation.theta() - m.critical_angle()).abs() < 1e-7);
        assert!(AdmissibleSet::from_indices(&m, &p, &[ix(&[17, -13, 0])]).is_err());
    }

    #[test]
    fn frequency_groups_partition_entries() {
        let s = build_admissible_set(&two_layer_medium(), Dim::Two, 6, 1.0, 1e-3, false).unwrap();
        let groups = s.frequency_groups();
        let total: usize = groups.iter().map(|g| g.len()).sum();
        assert_eq!(total, s.len());
        for g in &groups {
            let w = s.entries()[g[0]].omega;
            assert!(g.iter().all(|&i| (s.entries()[i].omega - w).abs() <= 1e-12 * w.max(1.0)));
        }
        assert_eq!(groups[0].len(), 1);
    }

    #[test]
    fn slower_lower_medium_drops_unreachable_directions() {
        let m = Medium::new(1.0, 2.0).unwrap();
        let s = build_admissible_set(&m, Dim::Two, 4, 1.0, 1e-3, true).unwrap();
        // (c-/c+) cos θ = l1/|l| needs |l1|/|l| <= 1/2
        for e in s.entries().iter().filter(|e| !e.index.is_zero()) {
            let l = e.index.comps();
            assert!((l[0] as f64).abs() / (e.index.norm_sq() as f64).sqrt() <= 0.5 + 1e-12);
        }
    }
}
