//! Tensor-product Gauss–Legendre quadrature over the source box.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::geom::{Dim, Point};
use crate::scalar::Real;

/// The box `(-a/2, a/2)^{n-1} × (-L, 0)` containing the source support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceBox<T> {
    dim: Dim,
    period: T,
    depth: T,
}

impl<T: Real> SourceBox<T> {
    pub fn new(dim: Dim, period: T, depth: T) -> Result<Self> {
        let ok = |v: T| v.is_finite() && v > T::zero();
        if !ok(period) || !ok(depth) {
            return Err(Error::InvalidConfig(format!(
                "source box needs a > 0 and L > 0 (a = {period}, L = {depth})"
            )));
        }
        Ok(SourceBox { dim, period, depth })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn depth(&self) -> T {
        self.depth
    }

    /// Interval spanned along `axis`.
    pub fn bounds(&self, axis: usize) -> (T, T) {
        if axis + 1 == self.dim.n() {
            (-self.depth, T::zero())
        } else {
            let h = self.period / T::lit(2.0);
            (-h, h)
        }
    }

    pub fn volume(&self) -> T {
        (0..self.dim.n()).fold(T::one(), |acc, j| {
            let (lo, hi) = self.bounds(j);
            acc * (hi - lo)
        })
    }
}

/// Gauss–Legendre nodes and weights on one interval, nodes ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule1d<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

type Reference = Arc<(Vec<f64>, Vec<f64>)>;

fn reference_rule(order: usize) -> Reference {
    static CACHE: OnceLock<Mutex<HashMap<usize, Reference>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("quadrature cache poisoned").get(&order) {
        return r.clone();
    }
    let rule = Arc::new(legendre_newton(order));
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .entry(order)
        .or_insert(rule)
        .clone()
}

/// Roots of P_n by Newton iteration from Chebyshev-like initial guesses.
fn legendre_newton(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        // re-evaluate the derivative at the converged root
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        if n == 1 {
            p0 = 1.0;
        }
        if x * x != 1.0 {
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `order`-point Gauss–Legendre rule on `(lo, hi)`; exact for polynomials of
/// degree `2·order - 1`.
pub fn gauss_legendre_1d<T: Real>(order: usize, lo: T, hi: T) -> Result<(Vec<T>, Vec<T>)> {
    if order < 1 {
        return Err(Error::InvalidOrder(order));
    }
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::InvalidConfig(format!("empty interval ({lo}, {hi})")));
    }
    let r = reference_rule(order);
    let half = (hi - lo) / T::lit(2.0);
    let mid = (hi + lo) / T::lit(2.0);
    let nodes = r.0.iter().map(|&x| mid + half * T::lit(x)).collect();
    let weights = r.1.iter().map(|&w| half * T::lit(w)).collect();
    Ok((nodes, weights))
}

/// Default per-axis orders: 100 in 2D, 50 in 3D.
pub fn default_orders(dim: Dim) -> Vec<usize> {
    match dim {
        Dim::Two => vec![100, 100],
        Dim::Three => vec![50, 50, 50],
    }
}

/// Per-axis orders large enough to resolve plane waves `e^{-i κ_j y_j}` with
/// `|κ_j| <= axis_wavenumbers[j]`, never below `base`.
///
/// A Gauss–Legendre rule with `n` points resolves `e^{i ω t}` on `[-1, 1]`
/// to near machine precision once `n >= 0.85 ω + 16`.
pub fn resolving_orders<T: Real>(bx: &SourceBox<T>, axis_wavenumbers: &[T], base: &[usize]) -> Vec<usize> {
    (0..bx.dim().n())
        .map(|j| {
            let (lo, hi) = bx.bounds(j);
            let omega = (axis_wavenumbers[j] * (hi - lo) / T::lit(2.0)).as_f64();
            let need = (0.85 * omega).ceil() as usize + 16;
            need.max(base[j])
        })
        .collect()
}

/// Tensor-product rule over a [`SourceBox`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    bx: SourceBox<T>,
    axes: Vec<Rule1d<T>>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn new(bx: SourceBox<T>, orders: &[usize]) -> Result<Self> {
        if orders.len() != bx.dim().n() {
            return Err(Error::ShapeMismatch(format!(
                "{} quadrature orders for a {}-dimensional box",
                orders.len(),
                bx.dim().n()
            )));
        }
        let axes = orders
            .iter()
            .enumerate()
            .map(|(j, &o)| {
                let (lo, hi) = bx.bounds(j);
                gauss_legendre_1d(o, lo, hi).map(|(nodes, weights)| Rule1d { nodes, weights })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QuadratureRule { bx, axes })
    }

    pub fn with_default_orders(bx: SourceBox<T>) -> Result<Self> {
        Self::new(bx, &default_orders(bx.dim()))
    }

    pub fn source_box(&self) -> &SourceBox<T> {
        &self.bx
    }

    pub fn orders(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes.len()).collect()
    }

    pub fn axis(&self, j: usize) -> &Rule1d<T> {
        &self.axes[j]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same box with every order doubled.
    pub fn doubled(&self) -> Result<Self> {
        let o: Vec<usize> = self.orders().iter().map(|o| 2 * o).collect();
        Self::new(self.bx, &o)
    }

    /// Nodes and weights in row-major order (last axis fastest).
    pub fn nodes(&self) -> impl Iterator<Item = (Point<T>, T)> + '_ {
        let n = self.axes.len();
        let sizes = self.orders();
        (0..self.len()).map(move |flat| {
            let mut rem = flat;
            let mut c = [T::zero(); 3];
            let mut w = T::one();
            for j in (0..n).rev() {
                let i = rem % sizes[j];
                rem /= sizes[j];
                c[j] = self.axes[j].nodes[i];
                w = w * self.axes[j].weights[i];
            }
            (Point::new(&c[..n]).expect("2 or 3 axes"), w)
        })
    }
}

/// `Σ w_i f(y_i)`, summed sequentially in node order.
pub fn integrate<T: Real, F>(rule: &QuadratureRule<T>, f: F) -> Complex<T>
where
    F: Fn(&Point<T>) -> Complex<T>,
{
    rule.nodes()
        .fold(Complex::new(T::zero(), T::zero()), |acc, (y, w)| acc + f(&y) * w)
}
