//! Fourier inversion: coefficients from far-field values, the regularised
//! zero mode, symmetric completion for real sources and reconstruction of
//! the truncated series on a grid.

use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::PreparedSource;
use crate::geom::{Dim, Index, Point};
use crate::lattice::{AdmissibleSet, LatticeEntry};
use crate::medium::Medium;
use crate::quadrature::{QuadratureRule, SourceBox};
use crate::scalar::{cis, sinc, Real};
use crate::sources::{axis_centres, FourierSeries, GridField, Source};

/// How a coefficient was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Measured,
    SymmetryCompleted,
    ZeroedUnobservable,
    ZeroModeCorrected,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Measured => "measured",
            Provenance::SymmetryCompleted => "symmetry_completed",
            Provenance::ZeroedUnobservable => "zeroed_unobservable",
            Provenance::ZeroModeCorrected => "zero_mode_corrected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Provenance::Measured,
            Provenance::SymmetryCompleted,
            Provenance::ZeroedUnobservable,
            Provenance::ZeroModeCorrected,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
    }
}

/// Fourier coefficients indexed by lattice point, each tagged with its
/// provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable<T> {
    dim: Dim,
    order: u32,
    period: T,
    coeffs: BTreeMap<Index, (Complex<T>, Provenance)>,
    incomplete: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ProvenanceCounts {
    pub measured: usize,
    pub symmetry_completed: usize,
    pub zeroed_unobservable: usize,
    pub zero_mode_corrected: usize,
}

impl<T: Real> CoefficientTable<T> {
    pub fn new(dim: Dim, order: u32, period: T) -> Self {
        CoefficientTable {
            dim,
            order,
            period,
            coeffs: BTreeMap::new(),
            incomplete: false,
        }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn period(&self) -> T {
        self.period
    }

    /// True when indices with `l_n < 0` could not be filled by symmetry.
    pub fn is_incomplete(&self) -> bool {
        self.incomplete
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn insert(&mut self, l: Index, value: Complex<T>, p: Provenance) -> Result<()> {
        if l.dim() != self.dim || l.max_norm() > self.order {
            return Err(Error::InvalidConfig(format!("index {l} outside the coefficient table")));
        }
        self.coeffs.insert(l, (value, p));
        Ok(())
    }

    pub fn get(&self, l: &Index) -> Option<Complex<T>> {
        self.coeffs.get(l).map(|c| c.0)
    }

    pub fn provenance(&self, l: &Index) -> Option<Provenance> {
        self.coeffs.get(l).map(|c| c.1)
    }

    /// Entries in lexicographic index order.
    pub fn iter(&self) -> impl Iterator<Item = (&Index, Complex<T>, Provenance)> {
        self.coeffs.iter().map(|(l, (c, p))| (l, *c, *p))
    }

    pub fn counts(&self) -> ProvenanceCounts {
        let mut c = ProvenanceCounts::default();
        for (_, _, p) in self.iter() {
            match p {
                Provenance::Measured => c.measured += 1,
                Provenance::SymmetryCompleted => c.symmetry_completed += 1,
                Provenance::ZeroedUnobservable => c.zeroed_unobservable += 1,
                Provenance::ZeroModeCorrected => c.zero_mode_corrected += 1,
            }
        }
        c
    }

    pub fn to_series(&self) -> Result<FourierSeries<T>> {
        FourierSeries::new(self.period, self.iter().map(|(l, c, _)| (*l, c)))
    }
}

/// `ŝ_l = u∞ / (aⁿ T(θ))` for a non-zero index.
pub fn coefficient_from_farfield<T: Real>(
    value: Complex<T>,
    entry: &LatticeEntry<T>,
    medium: &Medium<T>,
    period: T,
) -> Result<Complex<T>> {
    let t = medium.transmission(entry.observation.theta())?;
    if t.abs() < T::lit(1e-14) {
        return Err(Error::InvalidScaling(t.as_f64()));
    }
    let n = entry.index.dim().n() as i32;
    Ok(value / (period.powi(n) * t))
}

/// `∫_{V0} e^{i (2π/a) (l - λ d0)·y} dy` in closed form.
pub fn box_overlap<T: Real>(l: &Index, lambda: T, d0: &[T], bx: &SourceBox<T>) -> Complex<T> {
    let k = T::TAU() / bx.period();
    let two = T::lit(2.0);
    (0..bx.dim().n()).fold(Complex::new(T::one(), T::zero()), |acc, j| {
        let (lo, hi) = bx.bounds(j);
        let (mid, half) = ((lo + hi) / two, (hi - lo) / two);
        let beta = k * (T::lit(l.comps()[j] as f64) - lambda * d0[j]);
        acc * cis(beta * mid) * (two * half * sinc(beta * half))
    })
}

/// Treatment of the zero mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroModeScheme {
    /// Divide by the exact overlap of the constant mode with the low-frequency
    /// plane wave over the box.
    #[default]
    ExactBox,
    /// Multiply by `λπ / (aⁿ sin λπ)`, the overlap on a full period cell.
    SincPrefactor,
}

/// `ŝ_0` from the zero-index far field `u0` and the non-zero coefficients.
pub fn zero_mode_correction<T: Real>(
    u0: Complex<T>,
    zero: &LatticeEntry<T>,
    medium: &Medium<T>,
    table: &CoefficientTable<T>,
    bx: &SourceBox<T>,
    lambda: T,
    scheme: ZeroModeScheme,
) -> Result<Complex<T>> {
    if !zero.index.is_zero() {
        return Err(Error::InvalidConfig("zero-mode correction needs the zero entry".into()));
    }
    if bx.dim() != table.dim() {
        return Err(Error::BoxMismatch);
    }
    let t = medium.transmission(zero.observation.theta())?;
    let d0 = zero.direction.coords();
    let leak = table
        .iter()
        .filter(|(l, _, _)| !l.is_zero())
        .fold(Complex::new(T::zero(), T::zero()), |acc, (l, c, _)| {
            acc + c * box_overlap(l, lambda, d0, bx)
        });
    let rest = u0 / t - leak;
    match scheme {
        ZeroModeScheme::ExactBox => {
            let i0 = box_overlap(&Index::zero(bx.dim()), lambda, d0, bx);
            if i0.norm() < T::lit(1e-300).max(T::min_positive_value()) {
                return Err(Error::InvalidScaling(0.0));
            }
            Ok(rest / i0)
        }
        ZeroModeScheme::SincPrefactor => {
            let lp = lambda * T::PI();
            let n = bx.dim().n() as i32;
            Ok(rest * (lp / (bx.period().powi(n) * lp.sin())))
        }
    }
}

/// Fills every index of the `|l|_inf <= N` cube that is not in the table.
///
/// For real sources `ŝ_{-l} = conj ŝ_l` supplies the lower half; everything
/// else missing (indices on the interface plane, directions outside the
/// aperture) is set to zero. For complex sources the lower half cannot be
/// recovered, the table is flagged incomplete and those entries are zeroed.
pub fn complete_by_symmetry<T: Real>(table: &CoefficientTable<T>, real_source: bool) -> CoefficientTable<T> {
    let mut out = table.clone();
    let zero = Complex::new(T::zero(), T::zero());
    for l in Index::cube(table.dim(), table.order() as i32) {
        if out.coeffs.contains_key(&l) {
            continue;
        }
        if l.last() < 0 {
            let partner = table.coeffs.get(&l.neg()).filter(|(_, p)| *p == Provenance::Measured);
            match (real_source, partner) {
                (true, Some((c, _))) => {
                    out.coeffs.insert(l, (c.conj(), Provenance::SymmetryCompleted));
                    continue;
                }
                (false, Some(_)) => out.incomplete = true,
                _ => {}
            }
        }
        out.coeffs.insert(l, (zero, Provenance::ZeroedUnobservable));
    }
    out
}

/// `S_N(x) = Σ ŝ_l e^{i (2π/a) l·x}` at the cell centres of a grid, by
/// successive per-axis contractions.
pub fn reconstruct<T: Real>(table: &CoefficientTable<T>, bx: &SourceBox<T>, resolution: &[usize]) -> Result<GridField<T>> {
    if bx.dim() != table.dim() || resolution.len() != bx.dim().n() {
        return Err(Error::BoxMismatch);
    }
    if resolution.iter().any(|&r| r < 2) {
        return Err(Error::InvalidConfig("grid resolution must be at least 2 per axis".into()));
    }
    let n = bx.dim().n();
    let order = table.order() as i32;
    let m = (2 * order + 1) as usize;
    let zero = Complex::new(T::zero(), T::zero());
    let mut data = vec![zero; m.pow(n as u32)];
    for (l, c, _) in table.iter() {
        let flat = l.comps().iter().fold(0usize, |acc, &v| acc * m + (v + order) as usize);
        data[flat] = c;
    }
    let k = T::TAU() / table.period();
    let mut shape = vec![m; n];
    for axis in (0..n).rev() {
        let xs = axis_centres(bx, axis, resolution[axis]);
        let phases: Vec<Complex<T>> = (0..m)
            .flat_map(|p| {
                let lp = T::lit((p as i32 - order) as f64);
                xs.iter().map(move |&x| cis(k * lp * x)).collect::<Vec<_>>()
            })
            .collect();
        data = contract_axis(&data, &shape, axis, &phases, resolution[axis]);
        shape[axis] = resolution[axis];
    }
    GridField::new(*bx, resolution.to_vec(), data)
}

/// `out[.., q, ..] = Σ_p input[.., p, ..] E[p][q]` along `axis`.
fn contract_axis<T: Real>(input: &[Complex<T>], shape: &[usize], axis: usize, e: &[Complex<T>], r: usize) -> Vec<Complex<T>> {
    let pre: usize = shape[..axis].iter().product();
    let s = shape[axis];
    let post: usize = shape[axis + 1..].iter().product();
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; pre * r * post];
    out.par_chunks_mut(r * post).enumerate().for_each(|(a, block)| {
        for q in 0..r {
            for b in 0..post {
                let mut acc = zero;
                for p in 0..s {
                    acc = acc + input[(a * s + p) * post + b] * e[p * r + q];
                }
                block[q * post + b] = acc;
            }
        }
    });
    out
}

/// Every coefficient `(1/aⁿ) ∫_{V0} S e^{-i (2π/a) l·y} dy`, `|l|_inf <= N`, by
/// quadrature: the coefficients of the best truncated series `S_N`.
pub fn oracle_table<T: Real>(source: &Source<T>, rule: &QuadratureRule<T>, order: u32, period: T) -> Result<CoefficientTable<T>> {
    let dim = rule.source_box().dim();
    let prepared = PreparedSource::new(rule, source)?;
    let k = T::TAU() / period;
    let vol = period.powi(dim.n() as i32);
    let cube = Index::cube(dim, order as i32);
    let values: Vec<Complex<T>> = cube
        .par_iter()
        .map(|l| {
            let c: Vec<T> = l.comps().iter().map(|&v| k * T::lit(v as f64)).collect();
            Point::new(&c).map(|kappa| prepared.plane_wave_integral(&kappa) / vol)
        })
        .collect::<Result<_>>()?;
    let mut table = CoefficientTable::new(dim, order, period);
    for (l, v) in cube.into_iter().zip(values) {
        table.insert(l, v, Provenance::Measured)?;
    }
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InversionOptions {
    pub real_source: bool,
    pub zero_mode: ZeroModeScheme,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            real_source: true,
            zero_mode: ZeroModeScheme::ExactBox,
        }
    }
}

/// Full coefficient table from far-field values at every entry of `set`.
pub fn invert<T: Real>(
    values: &[Complex<T>],
    set: &AdmissibleSet<T>,
    bx: &SourceBox<T>,
    opts: InversionOptions,
) -> Result<CoefficientTable<T>> {
    if values.len() != set.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} far-field values for {} lattice entries",
            values.len(),
            set.len()
        )));
    }
    if bx.dim() != set.dim() {
        return Err(Error::BoxMismatch);
    }
    let params = set.params();
    let medium = set.medium();
    let mut table = CoefficientTable::new(set.dim(), params.order, params.period);
    for (e, &u) in set.entries().iter().zip(values) {
        if e.index.is_zero() {
            continue;
        }
        let c = coefficient_from_farfield(u, e, medium, params.period).map_err(|err| err.at(e.index))?;
        table.insert(e.index, c, Provenance::Measured)?;
    }
    let mut table = complete_by_symmetry(&table, opts.real_source);
    let zpos = set.position(&Index::zero(set.dim())).ok_or(Error::MissingEntry(Index::zero(set.dim())))?;
    table.coeffs.remove(&Index::zero(set.dim()));
    let mut s0 = zero_mode_correction(values[zpos], set.zero_entry(), medium, &table, bx, params.lambda, opts.zero_mode)?;
    if opts.real_source {
        s0 = Complex::new(s0.re, T::zero());
    }
    table.insert(Index::zero(set.dim()), s0, Provenance::ZeroModeCorrected)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_admissible_set;
    use std::f64::consts::PI;

    fn ix(c: &[i32]) -> Index {
        Index::new(c).unwrap()
    }

    #[test]
    fn measured_coefficient_example() {
        let m = Medium::new(2.0, 2.0).unwrap();
        let e = LatticeEntry::new(&m, ix(&[1, 1]), 1.0).unwrap();
        let c = coefficient_from_farfield(Complex::new(1.0, 0.0), &e, &m, 1.0).unwrap();
        assert!((c - Complex::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sinc_prefactor_value() {
        let lam = 1e-3_f64;
        let v = lam * PI / (lam * PI).sin();
        assert!((v - 1.000_001_644_935_960_8).abs() < 1e-15);
    }

    #[test]
    fn overlap_on_unit_cube_is_orthonormal() {
        let bx = SourceBox::new(Dim::Two, 1.0, 1.0).unwrap();
        let d0 = [0.0, 1.0];
        assert!((box_overlap(&ix(&[0, 0]), 0.0, &d0, &bx) - Complex::new(1.0, 0.0)).norm() < 1e-15);
        assert!(box_overlap(&ix(&[2, -3]), 0.0, &d0, &bx).norm() < 1e-15);
        let i0 = box_overlap(&ix(&[0, 0]), 1e-3, &d0, &bx);
        assert!((i0.norm() - sinc(1e-3 * PI)).abs() < 1e-15);
    }

    #[test]
    fn completion_fills_cube() {
        let mut t = CoefficientTable::new(Dim::Two, 2, 1.0);
        t.insert(ix(&[1, 1]), Complex::new(0.5, 0.25), Provenance::Measured).unwrap();
        let full = complete_by_symmetry(&t, true);
        assert_eq!(full.len(), 25);
        assert_eq!(full.get(&ix(&[-1, -1])), Some(Complex::new(0.5, -0.25)));
        assert_eq!(full.provenance(&ix(&[2, 0])), Some(Provenance::ZeroedUnobservable));
        assert!(!full.is_incomplete());
        let c = complete_by_symmetry(&t, false);
        assert!(c.is_incomplete());
        assert_eq!(c.get(&ix(&[-1, -1])), Some(Complex::new(0.0, 0.0)));
    }

    #[test]
    fn reconstruct_matches_direct_series() {
        let mut t = CoefficientTable::new(Dim::Three, 2, 1.0);
        t.insert(ix(&[1, -2, 1]), Complex::new(0.3, -0.1), Provenance::Measured).unwrap();
        t.insert(ix(&[0, 0, 0]), Complex::new(1.0, 0.0), Provenance::ZeroModeCorrected).unwrap();
        t.insert(ix(&[-2, 2, 0]), Complex::new(0.0, 0.7), Provenance::Measured).unwrap();
        let bx = SourceBox::new(Dim::Three, 1.0, 0.5).unwrap();
        let g = reconstruct(&t, &bx, &[4, 3, 5]).unwrap();
        let s = t.to_series().unwrap();
        for (p, v) in g.points().iter().zip(g.values()) {
            assert!((s.eval(p) - v).norm() < 1e-13);
        }
    }

    #[test]
    fn oracle_table_matches_pointwise_oracle() {
        let bx = SourceBox::new(Dim::Two, 1.0, 0.5).unwrap();
        let rule = QuadratureRule::new(bx, &[40, 30]).unwrap();
        let t = oracle_table(&Source::Analytic2D, &rule, 3, 1.0).unwrap();
        assert_eq!(t.len(), 49);
        for l in [ix(&[0, 0]), ix(&[2, -3]), ix(&[-1, 1])] {
            let direct = crate::sources::fourier_coefficient_oracle(&Source::Analytic2D, &l, &rule);
            assert!((t.get(&l).unwrap() - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn invert_recovers_known_series() {
        let m = Medium::new(2.0, 2.0 - PI / 1000.0).unwrap();
        let set = build_admissible_set(&m, Dim::Two, 3, 1.0, 1e-3, true).unwrap();
        let bx = SourceBox::new(Dim::Two, 1.0, 1.0).unwrap();
        // far field of a single real mode pair plus a constant on the unit box
        let values: Vec<Complex<f64>> = set
            .entries()
            .iter()
            .map(|e| {
                let t = m.transmission(e.observation.theta()).unwrap();
                if e.index.is_zero() {
                    (box_overlap(&e.index, 1e-3, e.direction.coords(), &bx) * 2.0
                        + box_overlap(&ix(&[1, 2]), 1e-3, e.direction.coords(), &bx) * 0.5
                        + box_overlap(&ix(&[-1, -2]), 1e-3, e.direction.coords(), &bx) * 0.5)
                        * t
                } else if e.index == ix(&[1, 2]) {
                    Complex::new(0.5 * t, 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                }
            })
            .collect();
        let table = invert(&values, &set, &bx, InversionOptions::default()).unwrap();
        assert!((table.get(&ix(&[0, 0])).unwrap() - Complex::new(2.0, 0.0)).norm() < 1e-12);
        assert!((table.get(&ix(&[-1, -2])).unwrap() - Complex::new(0.5, 0.0)).norm() < 1e-12);
        assert_eq!(table.len(), 49);
        let c = table.counts();
        assert_eq!(c.zero_mode_corrected, 1);
        assert_eq!(c.measured + c.symmetry_completed + c.zeroed_unobservable + 1, 49);
    }
}
