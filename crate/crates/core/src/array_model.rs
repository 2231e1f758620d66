//! Uniform linear array manifold.
//!
//! Element `k` of the steering vector is `exp(-j 2π s k sin θ)` with `s` the
//! element spacing in wavelengths and element 0 as the phase reference. Angles
//! are radians, measured from broadside.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat, CVec};

/// Two angles closer than this are considered the same direction.
const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Number of sensors.
    pub m: usize,
    /// Element separation in wavelengths.
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn new(m: usize, spacing: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("array needs at least one sensor".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidInput(format!("element spacing must be positive, got {spacing}")));
        }
        Ok(Self { m, spacing })
    }

    /// Half-wavelength ULA with `m` sensors.
    pub fn half_wavelength(m: usize) -> Result<Self> {
        Self::new(m, 0.5)
    }

    /// Per-element phase increment `exp(-j 2π s sin θ)`.
    fn phase_step(&self, theta: f64) -> f64 {
        -2.0 * PI * self.spacing * theta.sin()
    }
}

fn check_angle(theta: f64) -> Result<()> {
    if !theta.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite angle {theta}")));
    }
    if theta.abs() > FRAC_PI_2 + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "angle {:.6}° outside [-90°, 90°]",
            theta.to_degrees()
        )));
    }
    Ok(())
}

pub fn steering_vector(theta: f64, geom: &ArrayGeometry) -> Result<CVec> {
    check_angle(theta)?;
    Ok(steering_vector_unchecked(theta, geom))
}

/// Steering vector without range checks; used in the inner grid loops.
pub(crate) fn steering_vector_unchecked(theta: f64, geom: &ArrayGeometry) -> CVec {
    let step = geom.phase_step(theta);
    CVec::from_fn(geom.m, |k, _| {
        let phase = step * k as f64;
        c64(phase.cos(), phase.sin())
    })
}

/// `∂a/∂θ`; element `k` is `-j 2π s k cos θ · a_k(θ)`.
pub fn steering_derivative(theta: f64, geom: &ArrayGeometry) -> Result<CVec> {
    check_angle(theta)?;
    let a = steering_vector_unchecked(theta, geom);
    let scale = -2.0 * PI * geom.spacing * theta.cos();
    Ok(CVec::from_fn(geom.m, |k, _| a[k] * c64(0.0, scale * k as f64)))
}

/// Steering matrix and its column derivatives at a set of angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringSet {
    /// `m × d`, columns `a(θ_i)`.
    pub a: CMat,
    /// `m × d`, columns `∂a/∂θ` at `θ_i`.
    pub d_cols: CMat,
    pub thetas: Vec<f64>,
}

impl SteeringSet {
    pub fn d(&self) -> usize {
        self.thetas.len()
    }
}

pub fn steering_matrix(thetas: &[f64], geom: &ArrayGeometry) -> Result<SteeringSet> {
    if thetas.is_empty() {
        return Err(Error::InvalidInput("steering matrix needs at least one angle".into()));
    }
    check_distinct(thetas)?;
    let d = thetas.len();
    let mut a = CMat::zeros(geom.m, d);
    let mut d_cols = CMat::zeros(geom.m, d);
    for (i, &theta) in thetas.iter().enumerate() {
        a.set_column(i, &steering_vector(theta, geom)?);
        d_cols.set_column(i, &steering_derivative(theta, geom)?);
    }
    Ok(SteeringSet {
        a,
        d_cols,
        thetas: thetas.to_vec(),
    })
}

/// Steering matrix only (no derivative columns); zero angles give an `m × 0` matrix.
pub(crate) fn steering_columns(thetas: &[f64], geom: &ArrayGeometry) -> CMat {
    let mut a = CMat::zeros(geom.m, thetas.len());
    for (i, &theta) in thetas.iter().enumerate() {
        a.set_column(i, &steering_vector_unchecked(theta, geom));
    }
    a
}

pub(crate) fn check_distinct(thetas: &[f64]) -> Result<()> {
    for (i, &x) in thetas.iter().enumerate() {
        for &y in &thetas[i + 1..] {
            if (x - y).abs() <= DEGENERATE_TOL {
                return Err(Error::DegenerateAngles(x, y));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CVec, b: &[(f64, f64)], tol: f64) -> bool {
        a.iter()
            .zip(b)
            .all(|(x, &(re, im))| (x - c64(re, im)).norm() < tol)
    }

    #[test]
    fn broadside_is_all_ones() {
        let g = ArrayGeometry::half_wavelength(4).unwrap();
        let a = steering_vector(0.0, &g).unwrap();
        assert!(close(&a, &[(1.0, 0.0); 4], 1e-15));
    }

    #[test]
    fn endfire_alternates_sign() {
        let g = ArrayGeometry::half_wavelength(3).unwrap();
        let a = steering_vector(FRAC_PI_2, &g).unwrap();
        assert!(close(&a, &[(1.0, 0.0), (-1.0, 0.0), (1.0, 0.0)], 1e-12));
    }

    #[test]
    fn thirty_degrees_two_sensors() {
        let g = ArrayGeometry::half_wavelength(2).unwrap();
        let a = steering_vector(30f64.to_radians(), &g).unwrap();
        assert!(close(&a, &[(1.0, 0.0), (0.0, -1.0)], 1e-12));
    }

    #[test]
    fn rejects_non_finite_and_out_of_range() {
        let g = ArrayGeometry::half_wavelength(3).unwrap();
        assert!(steering_vector(f64::NAN, &g).is_err());
        assert!(steering_derivative(f64::INFINITY, &g).is_err());
        assert!(steering_vector(2.0, &g).is_err());
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::new(0, 0.5).is_err());
        assert!(ArrayGeometry::new(4, 0.0).is_err());
        assert!(ArrayGeometry::new(4, f64::NAN).is_err());
    }

    #[test]
    fn derivative_at_broadside() {
        let g = ArrayGeometry::half_wavelength(3).unwrap();
        let d = steering_derivative(0.0, &g).unwrap();
        assert!(close(&d, &[(0.0, 0.0), (0.0, -PI), (0.0, -2.0 * PI)], 1e-12));
    }

    #[test]
    fn derivative_vanishes_at_endfire() {
        let g = ArrayGeometry::half_wavelength(7).unwrap();
        let d = steering_derivative(FRAC_PI_2, &g).unwrap();
        assert!(d.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn single_angle_matrix() {
        let g = ArrayGeometry::half_wavelength(5).unwrap();
        let set = steering_matrix(&[0.0], &g).unwrap();
        assert!(set.a.iter().all(|z| (z - c64(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn repeated_angles_are_degenerate() {
        let g = ArrayGeometry::half_wavelength(10).unwrap();
        let t = 10f64.to_radians();
        assert!(matches!(steering_matrix(&[t, t], &g), Err(Error::DegenerateAngles(_, _))));
    }
}
