//! Source functions, Fourier coefficients by quadrature, and grid sampling.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Dim, Index, Point};
use crate::quadrature::{integrate, QuadratureRule, SourceBox};
use crate::scalar::{cis, Real};

/// A finite Fourier series `Σ ŝ_l e^{i (2π/a) l·y}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries<T> {
    period: T,
    terms: Vec<(Index, Complex<T>)>,
}

impl<T: Real> FourierSeries<T> {
    /// Terms are sorted by index; repeated indices are summed.
    pub fn new(period: T, terms: impl IntoIterator<Item = (Index, Complex<T>)>) -> Result<Self> {
        if period.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidConfig(format!("period a = {period} must be positive")));
        }
        let mut terms: Vec<_> = terms.into_iter().collect();
        if let Some(d) = terms.first().map(|t| t.0.dim()) {
            if terms.iter().any(|t| t.0.dim() != d) {
                return Err(Error::ShapeMismatch("mixed index dimensions".into()));
            }
        }
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(Index, Complex<T>)> = Vec::with_capacity(terms.len());
        for (l, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == l => last.1 = last.1 + c,
                _ => merged.push((l, c)),
            }
        }
        Ok(FourierSeries { period, terms: merged })
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn terms(&self) -> &[(Index, Complex<T>)] {
        &self.terms
    }

    pub fn eval(&self, y: &Point<T>) -> Complex<T> {
        let k = T::TAU() / self.period;
        self.terms.iter().fold(Complex::new(T::zero(), T::zero()), |acc, (l, c)| {
            let phase = l
                .comps()
                .iter()
                .zip(y.coords())
                .fold(T::zero(), |s, (&li, &yi)| s + T::lit(li as f64) * yi);
            acc + *c * cis(k * phase)
        })
    }
}

pub type SourceFn<T> = Arc<dyn Fn(&Point<T>) -> Complex<T> + Send + Sync>;

/// An evaluable source function.
#[derive(Clone)]
pub enum Source<T> {
    /// Two-bump test source in 2D.
    Analytic2D,
    /// Two-bump test source in 3D.
    Analytic3D,
    Fourier(FourierSeries<T>),
    Custom(SourceFn<T>),
}

impl<T> fmt::Debug for Source<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Analytic2D => f.write_str("Analytic2D"),
            Source::Analytic3D => f.write_str("Analytic3D"),
            Source::Fourier(s) => write!(f, "Fourier({} terms)", s.terms.len()),
            Source::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// `1.1 e^{-200((x1-0.01)² + (x2+0.38)²)} - 100((x2+0.5)² - x1²) e^{-90(x1² + (x2+0.5)²)}`
pub fn analytic_2d<T: Real>(x1: T, x2: T) -> T {
    let l = T::lit;
    let a = x1 - l(0.01);
    let b = x2 + l(0.38);
    let c = x2 + l(0.5);
    l(1.1) * (-l(200.0) * (a * a + b * b)).exp() - l(100.0) * (c * c - x1 * x1) * (-l(90.0) * (x1 * x1 + c * c)).exp()
}

/// `1.1 e^{-200((x1-0.01)² + (x2-0.12)² + (x3+0.5)²)} - 100(x2² - x1²) e^{-90(x1² + x2² + (x3+0.5)²)}`
pub fn analytic_3d<T: Real>(x1: T, x2: T, x3: T) -> T {
    let l = T::lit;
    let a = x1 - l(0.01);
    let b = x2 - l(0.12);
    let c = x3 + l(0.5);
    l(1.1) * (-l(200.0) * (a * a + b * b + c * c)).exp()
        - l(100.0) * (x2 * x2 - x1 * x1) * (-l(90.0) * (x1 * x1 + x2 * x2 + c * c)).exp()
}

impl<T: Real> Source<T> {
    pub fn constant(value: Complex<T>) -> Self {
        Source::Custom(Arc::new(move |_| value))
    }

    pub fn zero() -> Self {
        Self::constant(Complex::new(T::zero(), T::zero()))
    }

    pub fn custom(f: impl Fn(&Point<T>) -> Complex<T> + Send + Sync + 'static) -> Self {
        Source::Custom(Arc::new(f))
    }

    /// Dimension fixed by the variant, if any.
    pub fn dim(&self) -> Option<Dim> {
        match self {
            Source::Analytic2D => Some(Dim::Two),
            Source::Analytic3D => Some(Dim::Three),
            Source::Fourier(s) => s.terms.first().map(|t| t.0.dim()),
            Source::Custom(_) => None,
        }
    }

    pub fn eval(&self, y: &Point<T>) -> Complex<T> {
        let re = |v: T| Complex::new(v, T::zero());
        match self {
            Source::Analytic2D => re(analytic_2d(y[0], y[1])),
            Source::Analytic3D => re(analytic_3d(y[0], y[1], y[2])),
            Source::Fourier(s) => s.eval(y),
            Source::Custom(f) => f(y),
        }
    }
}

pub fn eval_source<T: Real>(s: &Source<T>, y: &Point<T>) -> Complex<T> {
    s.eval(y)
}

/// `(1/a^n) ∫_{V0} S(y) conj(φ_l(y)) dy` by quadrature, with `φ_l = e^{i(2π/a) l·y}`.
pub fn fourier_coefficient_oracle<T: Real>(s: &Source<T>, l: &Index, rule: &QuadratureRule<T>) -> Complex<T> {
    let bx = rule.source_box();
    let a = bx.period();
    let k = T::TAU() / a;
    let norm = a.powi(bx.dim().n() as i32);
    integrate(rule, |y| {
        let phase = l
            .comps()
            .iter()
            .zip(y.coords())
            .fold(T::zero(), |acc, (&li, &yi)| acc + T::lit(li as f64) * yi);
        s.eval(y) * cis(-k * phase)
    }) / norm
}

/// Complex samples at the cell centres of a uniform grid over a box.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField<T> {
    bx: SourceBox<T>,
    resolution: Vec<usize>,
    values: Vec<Complex<T>>,
}

impl<T: Real> GridField<T> {
    pub fn new(bx: SourceBox<T>, resolution: Vec<usize>, values: Vec<Complex<T>>) -> Result<Self> {
        check_resolution(&bx, &resolution)?;
        let expected: usize = resolution.iter().product();
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} grid values for resolution {:?}",
                values.len(),
                resolution
            )));
        }
        Ok(GridField { bx, resolution, values })
    }

    pub fn source_box(&self) -> &SourceBox<T> {
        &self.bx
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// Cell-centre coordinate `i` along `axis`.
    pub fn axis_coord(&self, axis: usize, i: usize) -> T {
        axis_centres(&self.bx, axis, self.resolution[axis])[i]
    }

    /// Cell centres in storage order (row-major, last axis fastest).
    pub fn points(&self) -> Vec<Point<T>> {
        grid_points(&self.bx, &self.resolution)
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        GridField {
            bx: self.bx,
            resolution: self.resolution.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `max |Im|` over all samples.
    pub fn max_imag(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.im.abs()))
    }
}

fn check_resolution<T: Real>(bx: &SourceBox<T>, resolution: &[usize]) -> Result<()> {
    if resolution.len() != bx.dim().n() {
        return Err(Error::ShapeMismatch(format!(
            "resolution {:?} for a {}-dimensional box",
            resolution,
            bx.dim().n()
        )));
    }
    if resolution.iter().any(|&r| r < 2) {
        return Err(Error::InvalidConfig("grid resolution must be at least 2 per axis".into()));
    }
    Ok(())
}

pub(crate) fn axis_centres<T: Real>(bx: &SourceBox<T>, axis: usize, n: usize) -> Vec<T> {
    let (lo, hi) = bx.bounds(axis);
    let h = (hi - lo) / T::lit(n as f64);
    (0..n).map(|i| lo + (T::lit(i as f64) + T::lit(0.5)) * h).collect()
}

pub(crate) fn grid_points<T: Real>(bx: &SourceBox<T>, resolution: &[usize]) -> Vec<Point<T>> {
    let axes: Vec<Vec<T>> = (0..resolution.len()).map(|j| axis_centres(bx, j, resolution[j])).collect();
    let total: usize = resolution.iter().product();
    (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut c = [T::zero(); 3];
            for j in (0..resolution.len()).rev() {
                c[j] = axes[j][rem % resolution[j]];
                rem /= resolution[j];
            }
            Point::new(&c[..resolution.len()]).expect("2 or 3 axes")
        })
        .collect()
}

/// Samples `s` at the cell centres of a `resolution` grid over `bx`.
pub fn sample_grid<T: Real>(s: &Source<T>, bx: &SourceBox<T>, resolution: &[usize]) -> Result<GridField<T>> {
    check_resolution(bx, resolution)?;
    let values = grid_points(bx, resolution).par_iter().map(|p| s.eval(p)).collect();
    GridField::new(*bx, resolution.to_vec(), values)
}
