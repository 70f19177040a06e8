//! Phase retrieval from magnitudes with two point-source references.
//!
//! With `v_j = u - c_j Φ_j` the polarisation identity gives
//! `Re(u conj Φ_j) = -(|v_j|² - |u|² - c_j²|Φ_j|²) / (2 c_j)`, two real linear
//! equations in `(Re u, Im u)` solved by Cramer's rule.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{far_field_point, PhaselessDataset};
use crate::lattice::{AdmissibleSet, LatticeEntry};
use crate::medium::Medium;
use crate::scalar::Real;

/// Side of the interface on which the reference points sit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    #[default]
    Upper,
    Lower,
}

/// Reference points `z_j = α_j x̂` along the observation direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceConfig<T> {
    pub alpha1: T,
    pub alpha2: T,
    /// `α2` used for the zero index.
    pub alpha2_zero_index: T,
    pub placement: Placement,
    /// Minimum `|det D| / (|Φ1||Φ2|)` accepted by the solver.
    pub det_threshold: T,
    /// Preferred conditioning; `α2` is halved until reached.
    pub conditioning_target: T,
    pub max_halvings: u32,
    /// Frequencies whose far-field magnitudes all fall below this are
    /// treated as degenerate.
    pub degenerate_threshold: T,
}

impl<T: Real> ReferenceConfig<T> {
    pub fn upper() -> Self {
        ReferenceConfig {
            alpha1: T::lit(0.5),
            alpha2: T::lit(0.25),
            alpha2_zero_index: T::lit(4.0),
            placement: Placement::Upper,
            det_threshold: T::lit(1e-12),
            conditioning_target: T::lit(0.5),
            max_halvings: 8,
            degenerate_threshold: T::lit(1e-14),
        }
    }

    pub fn lower() -> Self {
        ReferenceConfig {
            alpha1: T::lit(-0.5),
            alpha2: T::lit(-0.25),
            alpha2_zero_index: T::lit(-4.0),
            placement: Placement::Lower,
            ..Self::upper()
        }
    }

    pub fn for_placement(p: Placement) -> Self {
        match p {
            Placement::Upper => Self::upper(),
            Placement::Lower => Self::lower(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sign_ok = |a: T| match self.placement {
            Placement::Upper => a > T::zero(),
            Placement::Lower => a < T::zero(),
        };
        if !(sign_ok(self.alpha1) && sign_ok(self.alpha2) && sign_ok(self.alpha2_zero_index)) {
            return Err(Error::InvalidConfig(format!(
                "reference offsets must all be {} for {:?} placement",
                if self.placement == Placement::Upper { "positive" } else { "negative" },
                self.placement
            )));
        }
        if self.alpha1 == self.alpha2 || self.alpha1 == self.alpha2_zero_index {
            return Err(Error::InvalidConfig("the two reference offsets must differ".into()));
        }
        let pos = |v: T| v.is_finite() && v > T::zero();
        if !(pos(self.det_threshold) && pos(self.conditioning_target)) {
            return Err(Error::InvalidConfig("thresholds must be positive".into()));
        }
        if !(self.degenerate_threshold.is_finite() && self.degenerate_threshold >= T::zero()) {
            return Err(Error::InvalidConfig("degenerate threshold must be non-negative".into()));
        }
        Ok(())
    }

    /// Reference far fields at fixed offsets.
    pub fn pair_at(&self, medium: &Medium<T>, entry: &LatticeEntry<T>, alpha1: T, alpha2: T) -> Result<ReferencePair<T>> {
        let x = *entry.observation.vector();
        let phi1 = far_field_point(medium, entry, &x.scale(alpha1))?;
        let phi2 = far_field_point(medium, entry, &x.scale(alpha2))?;
        Ok(ReferencePair {
            alpha1,
            alpha2,
            phi1,
            phi2,
            conditioning: conditioning(phi1, phi2),
        })
    }

    /// References for one entry. `α2` is taken from the configuration and
    /// halved (up to `max_halvings` times) until the pair is well conditioned;
    /// if no candidate reaches the target the best one is kept. The choice
    /// depends on geometry only.
    pub fn reference_pair(&self, medium: &Medium<T>, entry: &LatticeEntry<T>) -> Result<ReferencePair<T>> {
        let base = if entry.index.is_zero() { self.alpha2_zero_index } else { self.alpha2 };
        let mut best: Option<ReferencePair<T>> = None;
        let mut a2 = base;
        for _ in 0..=self.max_halvings {
            if a2 != self.alpha1 {
                let p = self.pair_at(medium, entry, self.alpha1, a2)?;
                if p.conditioning >= self.conditioning_target {
                    return Ok(p);
                }
                if best.as_ref().is_none_or(|b| p.conditioning > b.conditioning) {
                    best = Some(p);
                }
            }
            a2 = a2 / T::lit(2.0);
        }
        best.ok_or_else(|| Error::InvalidConfig("no usable reference offset".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferencePair<T> {
    pub alpha1: T,
    pub alpha2: T,
    pub phi1: Complex<T>,
    pub phi2: Complex<T>,
    /// `|det D| / (|Φ1||Φ2|)`, the sine of the angle between `Φ1` and `Φ2`.
    pub conditioning: T,
}

/// `|Re Φ1 Im Φ2 - Im Φ1 Re Φ2| / (|Φ1||Φ2|)`.
pub fn conditioning<T: Real>(phi1: Complex<T>, phi2: Complex<T>) -> T {
    let scale = phi1.norm() * phi2.norm();
    if scale == T::zero() {
        return T::zero();
    }
    (phi1.re * phi2.im - phi1.im * phi2.re).abs() / scale
}

/// `c_j = max|u| / max|Φ_j|` over one frequency.
pub fn scaling_factors<T: Real>(u_mags: &[T], phi1_mags: &[T], phi2_mags: &[T], threshold: T) -> Result<(T, T)> {
    let max = |v: &[T]| v.iter().fold(T::zero(), |m, &x| m.max(x));
    let (mu, m1, m2) = (max(u_mags), max(phi1_mags), max(phi2_mags));
    if mu <= threshold {
        return Err(Error::DegenerateFrequency(mu.as_f64()));
    }
    if m1 == T::zero() || m2 == T::zero() {
        return Err(Error::InvalidScaling(0.0));
    }
    Ok((mu / m1, mu / m2))
}

/// `f = -(|v|² - |u|² - c²|Φ|²) / (2c)`, which equals `Re(u conj Φ)` for exact data.
pub fn retrieval_rhs<T: Real>(u_mag: T, v_mag: T, c: T, phi: Complex<T>) -> Result<T> {
    if !(c.is_finite() && c > T::zero()) {
        return Err(Error::InvalidScaling(c.as_f64()));
    }
    let two = T::lit(2.0);
    Ok(-(v_mag * v_mag - u_mag * u_mag - c * c * phi.norm_sqr()) / (two * c))
}

/// Solves `Re u Re Φ_j + Im u Im Φ_j = f_j` for `u`. Fails when the relative
/// determinant falls below `det_threshold`.
pub fn solve_phase<T: Real>(phi1: Complex<T>, phi2: Complex<T>, f1: T, f2: T, det_threshold: T) -> Result<Complex<T>> {
    let det = phi1.re * phi2.im - phi1.im * phi2.re;
    if conditioning(phi1, phi2) < det_threshold {
        return Err(Error::NearSingular { det: det.as_f64() });
    }
    let re = (f1 * phi2.im - f2 * phi1.im) / det;
    let im = (phi1.re * f2 - phi2.re * f1) / det;
    Ok(Complex::new(re, im))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalFlag {
    Ok,
    /// No far field at this frequency; the recovered value is zero.
    Degenerate,
    /// References nearly parallel; the recovered value is zero.
    NearSingular,
}

impl RetrievalFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            RetrievalFlag::Ok => "ok",
            RetrievalFlag::Degenerate => "degenerate",
            RetrievalFlag::NearSingular => "near_singular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(RetrievalFlag::Ok),
            "degenerate" => Some(RetrievalFlag::Degenerate),
            "near_singular" => Some(RetrievalFlag::NearSingular),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RetrievalReport<T> {
    set: Arc<AdmissibleSet<T>>,
    values: Vec<Complex<T>>,
    abs_det: Vec<T>,
    flags: Vec<RetrievalFlag>,
}

impl<T: Real> RetrievalReport<T> {
    pub fn new(
        set: Arc<AdmissibleSet<T>>,
        values: Vec<Complex<T>>,
        abs_det: Vec<T>,
        flags: Vec<RetrievalFlag>,
    ) -> Result<Self> {
        if values.len() != set.len() || abs_det.len() != set.len() || flags.len() != set.len() {
            return Err(Error::ShapeMismatch("retrieval columns differ in length".into()));
        }
        Ok(RetrievalReport {
            set,
            values,
            abs_det,
            flags,
        })
    }

    pub fn set(&self) -> &Arc<AdmissibleSet<T>> {
        &self.set
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn abs_det(&self) -> &[T] {
        &self.abs_det
    }

    pub fn flags(&self) -> &[RetrievalFlag] {
        &self.flags
    }

    pub fn count(&self, flag: RetrievalFlag) -> usize {
        self.flags.iter().filter(|&&f| f == flag).count()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RetrievalOptions {
    /// Recompute `c_j` from the (possibly noisy) measured magnitudes instead
    /// of using the values recorded with the data.
    pub rescale_from_measurements: bool,
}

/// Recovers the phased far field at every entry of a phaseless dataset.
pub fn retrieve_dataset<T: Real>(data: &PhaselessDataset<T>, opts: RetrievalOptions) -> Result<RetrievalReport<T>> {
    let set = data.set();
    let medium = set.medium();
    let refs = data.refs();
    let rows = data.rows();
    let pairs = set
        .entries()
        .par_iter()
        .zip(rows.par_iter())
        .map(|(e, r)| refs.pair_at(medium, e, r.alpha1, r.alpha2).map_err(|err| err.at(e.index)))
        .collect::<Result<Vec<_>>>()?;

    let mut scale: Vec<Option<(T, T)>> = rows
        .iter()
        .map(|r| if r.degenerate { None } else { Some((r.c1, r.c2)) })
        .collect();
    if opts.rescale_from_measurements {
        for group in set.frequency_groups() {
            let mags: Vec<T> = group.iter().map(|&i| rows[i].abs_u).collect();
            let p1: Vec<T> = group.iter().map(|&i| pairs[i].phi1.norm()).collect();
            let p2: Vec<T> = group.iter().map(|&i| pairs[i].phi2.norm()).collect();
            let s = scaling_factors(&mags, &p1, &p2, refs.degenerate_threshold).ok();
            for &i in &group {
                scale[i] = s;
            }
        }
    }

    let zero = Complex::new(T::zero(), T::zero());
    let mut values = Vec::with_capacity(set.len());
    let mut abs_det = Vec::with_capacity(set.len());
    let mut flags = Vec::with_capacity(set.len());
    for ((e, r), (p, s)) in set.entries().iter().zip(rows).zip(pairs.iter().zip(&scale)) {
        abs_det.push((p.phi1.re * p.phi2.im - p.phi1.im * p.phi2.re).abs());
        let Some((c1, c2)) = *s else {
            values.push(zero);
            flags.push(RetrievalFlag::Degenerate);
            continue;
        };
        let f1 = retrieval_rhs(r.abs_u, r.abs_v1, c1, p.phi1).map_err(|err| err.at(e.index))?;
        let f2 = retrieval_rhs(r.abs_u, r.abs_v2, c2, p.phi2).map_err(|err| err.at(e.index))?;
        match solve_phase(p.phi1, p.phi2, f1, f2, refs.det_threshold) {
            Ok(u) => {
                values.push(u);
                flags.push(RetrievalFlag::Ok);
            }
            Err(Error::NearSingular { .. }) => {
                values.push(zero);
                flags.push(RetrievalFlag::NearSingular);
            }
            Err(err) => return Err(err.at(e.index)),
        }
    }
    RetrievalReport::new(set.clone(), values, abs_det, flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{synthesize_dataset, synthesize_phaseless, FarFieldDataset};
    use crate::geom::{Dim, Index};
    use crate::lattice::build_admissible_set;
    use crate::quadrature::{QuadratureRule, SourceBox};
    use crate::sources::Source;
    use std::f64::consts::PI;

    #[test]
    fn rhs_identity_on_exact_data() {
        let u = Complex::new(0.3_f64, -1.2);
        let phi = Complex::new(-0.7, 0.4);
        let c = 1.7;
        let v = (u - phi * c).norm();
        let f = retrieval_rhs(u.norm(), v, c, phi).unwrap();
        assert!((f - (u * phi.conj()).re).abs() < 1e-14);
        assert!(retrieval_rhs(1.0, 1.0, 0.0, phi).is_err());
        assert!(retrieval_rhs(1.0, 1.0, -2.0, phi).is_err());
    }

    #[test]
    fn cramer_examples() {
        let one = Complex::new(1.0, 0.0);
        let i = Complex::new(0.0, 1.0);
        assert_eq!(solve_phase(one, i, 0.3, -0.4, 1e-12).unwrap(), Complex::new(0.3, -0.4));
        let err = solve_phase(one, one * 2.0, 1.0, 2.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::NearSingular { .. }));
    }

    #[test]
    fn scaling_examples() {
        let (c1, c2) = scaling_factors(&[0.5, 2.0], &[1.0, 0.5], &[4.0, 1.0], 1e-14).unwrap();
        assert_eq!((c1, c2), (2.0, 0.5));
        assert!(matches!(
            scaling_factors(&[0.0, 0.0], &[1.0], &[1.0], 1e-14),
            Err(Error::DegenerateFrequency(_))
        ));
    }

    #[test]
    fn validation_rejects_wrong_signs() {
        let mut r = ReferenceConfig::<f64>::upper();
        assert!(r.validate().is_ok());
        r.alpha2 = -0.25;
        assert!(r.validate().is_err());
        let mut r = ReferenceConfig::<f64>::lower();
        assert!(r.validate().is_ok());
        r.alpha2 = r.alpha1;
        assert!(r.validate().is_err());
    }

    #[test]
    fn lower_references_at_even_frequency_use_fallback() {
        let m = Medium::new(2.0, 2.0 - PI / 1000.0).unwrap();
        let e = LatticeEntry::new(&m, Index::new(&[0, 2]).unwrap(), 1.0).unwrap();
        let refs = ReferenceConfig::lower();
        let raw = refs.pair_at(&m, &e, -0.5, -0.25).unwrap();
        assert!(raw.conditioning < 1e-12);
        let p = refs.reference_pair(&m, &e).unwrap();
        assert!(p.conditioning >= 0.5);
        assert!(p.alpha2 != -0.25);
    }

    fn noiseless(refs: ReferenceConfig<f64>) -> (FarFieldDataset<f64>, RetrievalReport<f64>) {
        let m = Medium::new(2.0, 2.0 - PI / 1000.0).unwrap();
        let set = Arc::new(build_admissible_set(&m, Dim::Two, 6, 1.0, 1e-3, false).unwrap());
        let bx = SourceBox::new(Dim::Two, 1.0, 0.5).unwrap();
        let rule = QuadratureRule::new(bx, &[60, 40]).unwrap();
        let d = synthesize_dataset(&m, &rule, &Source::Analytic2D, set).unwrap();
        let p = synthesize_phaseless(&d, &refs).unwrap();
        let r = retrieve_dataset(&p, RetrievalOptions::default()).unwrap();
        (d, r)
    }

    #[test]
    fn noiseless_round_trip_both_placements() {
        for refs in [ReferenceConfig::upper(), ReferenceConfig::lower()] {
            let (d, r) = noiseless(refs);
            let scale = d.values().iter().fold(0.0_f64, |m, v| m.max(v.norm()));
            for (a, b) in d.values().iter().zip(r.values()) {
                assert!((a - b).norm() <= 1e-10 * scale);
            }
            assert_eq!(r.count(RetrievalFlag::Ok), d.values().len());
        }
    }

    #[test]
    fn degenerate_frequency_recovers_zero() {
        let m = Medium::new(2.0, 1.9).unwrap();
        let set = Arc::new(build_admissible_set(&m, Dim::Two, 2, 1.0, 1e-3, false).unwrap());
        let bx = SourceBox::new(Dim::Two, 1.0, 0.5).unwrap();
        let rule = QuadratureRule::new(bx, &[10, 10]).unwrap();
        let d = synthesize_dataset(&m, &rule, &Source::zero(), set).unwrap();
        let p = synthesize_phaseless(&d, &ReferenceConfig::upper()).unwrap();
        assert!(p.rows().iter().all(|r| r.degenerate));
        let r = retrieve_dataset(&p, RetrievalOptions::default()).unwrap();
        assert!(r.values().iter().all(|v| v.norm() == 0.0));
        assert_eq!(r.count(RetrievalFlag::Degenerate), r.values().len());
    }
}
