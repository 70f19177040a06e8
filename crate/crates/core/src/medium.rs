//! Two-layered medium: wave speeds, critical angle, observation aperture,
//! transmitted directions and the transmission/reflection coefficients of
//! the layered point-source far field.

use crate::error::{Error, Result};
use crate::geom::{Dim, Point};
use crate::scalar::Real;

/// Homogeneous half-spaces separated by the flat interface `x_n = 0`.
///
/// `c_minus` is the wave speed below the interface (where the source lives),
/// `c_plus` the speed above it (where the far field is measured).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Medium<T> {
    c_minus: T,
    c_plus: T,
}

/// Observation direction on the upper unit circle/sphere.
///
/// `theta` is the elevation measured from the interface plane, `phi` the
/// azimuth (ignored in 2D). The Cartesian vector is always derived from the
/// angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction<T> {
    theta: T,
    phi: T,
    vector: Point<T>,
}

impl<T: Real> Direction<T> {
    pub fn new(dim: Dim, theta: T, phi: T) -> Self {
        let (st, ct) = theta.sin_cos();
        let vector = match dim {
            Dim::Two => Point::xy(ct, st),
            Dim::Three => {
                let (sp, cp) = phi.sin_cos();
                Point::xyz(cp * ct, sp * ct, st)
            }
        };
        Direction { theta, phi, vector }
    }

    pub fn planar(theta: T) -> Self {
        Self::new(Dim::Two, theta, T::zero())
    }

    pub fn spatial(theta: T, phi: T) -> Self {
        Self::new(Dim::Three, theta, phi)
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.vector.dim()
    }

    #[inline]
    pub fn theta(&self) -> T {
        self.theta
    }

    #[inline]
    pub fn phi(&self) -> T {
        self.phi
    }

    #[inline]
    pub fn vector(&self) -> &Point<T> {
        &self.vector
    }
}

impl<T: Real> Medium<T> {
    pub fn new(c_minus: T, c_plus: T) -> Result<Self> {
        let finite_pos = |c: T| c.is_finite() && c > T::zero();
        if !finite_pos(c_minus) || !finite_pos(c_plus) {
            return Err(Error::InvalidMedium(format!(
                "wave speeds must be positive and finite (c- = {c_minus}, c+ = {c_plus})"
            )));
        }
        Ok(Medium { c_minus, c_plus })
    }

    #[inline]
    pub fn c_minus(&self) -> T {
        self.c_minus
    }

    #[inline]
    pub fn c_plus(&self) -> T {
        self.c_plus
    }

    /// `arccos(c+/c-)` when the lower medium is faster, otherwise zero.
    pub fn critical_angle(&self) -> T {
        if self.c_minus > self.c_plus {
            (self.c_plus / self.c_minus).acos()
        } else {
            T::zero()
        }
    }

    /// Membership in the observation aperture: `(θc, π-θc)` in 2D and
    /// `(θc, π/2]` in 3D.
    pub fn aperture_contains(&self, dim: Dim, theta: T) -> bool {
        let tc = self.critical_angle();
        match dim {
            Dim::Two => tc < theta && theta < T::PI() - tc,
            Dim::Three => tc < theta && theta <= T::FRAC_PI_2(),
        }
    }

    /// Wavenumbers `(k-, k+)` at angular frequency `omega`.
    pub fn wavenumbers(&self, omega: T) -> (T, T) {
        (omega / self.c_minus, omega / self.c_plus)
    }

    /// `sqrt(c+^2/c-^2 - cos^2 θ)`, zero at the aperture boundary.
    fn vertical_factor(&self, theta: T) -> Result<T> {
        let r = self.c_plus / self.c_minus;
        // r² - cos²θ written as (r² - 1) + sin²θ to keep accuracy near grazing
        let s = theta.sin();
        let arg = (r * r - T::one()) + s * s;
        if arg < -(T::epsilon() * T::lit(16.0)) {
            return Err(Error::OutsideAperture {
                theta: theta.as_f64(),
            });
        }
        Ok(arg.max(T::zero()).sqrt())
    }

    /// Transmission coefficient `T(θ) = 2 sinθ / (sinθ + sqrt(c+²/c-² - cos²θ))`.
    pub fn transmission(&self, theta: T) -> Result<T> {
        let q = self.vertical_factor(theta)?;
        let s = theta.sin();
        Ok(T::lit(2.0) * s / (s + q))
    }

    /// Reflection coefficient `H(θ) = (sinθ - q) / (sinθ + q)`.
    pub fn reflection(&self, theta: T) -> Result<T> {
        let q = self.vertical_factor(theta)?;
        let s = theta.sin();
        Ok((s - q) / (s + q))
    }

    /// Refracted direction in the lower medium associated with the
    /// observation direction `d` (Snell's law across the interface).
    pub fn transmitted_direction(&self, d: &Direction<T>) -> Result<Point<T>> {
        let ratio = self.c_minus / self.c_plus;
        let horizontal = ratio * d.theta().cos();
        let arg = T::one() - horizontal * horizontal;
        if arg < -(T::epsilon() * T::lit(16.0)) {
            return Err(Error::OutsideAperture {
                theta: d.theta().as_f64(),
            });
        }
        let vertical = arg.max(T::zero()).sqrt();
        Ok(match d.dim() {
            Dim::Two => Point::xy(horizontal, vertical),
            Dim::Three => {
                let (sp, cp) = d.phi().sin_cos();
                Point::xyz(horizontal * cp, horizontal * sp, vertical)
            }
        })
    }

    /// Elevation of the observation direction whose transmitted direction has
    /// signed horizontal component `h` (2D) or horizontal magnitude `h` (3D):
    /// solves `(c-/c+) cos θ = h`.
    pub fn observation_angle(&self, h: T) -> Result<T> {
        let c = h * self.c_plus / self.c_minus;
        if c.abs() > T::one() {
            return Err(Error::OutsideAperture { theta: f64::NAN });
        }
        Ok(c.acos())
    }
}
