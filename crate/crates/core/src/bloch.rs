//! Two-level kinematics.
//!
//! With `2H = d·σ` (ħ = 1) a Bloch vector precesses as `ds/dt = d × s`:
//! right-handed about `d` at angular frequency `‖d‖`. Everything here is pure
//! and allocation free.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cartesian vector in ℝ³; used both for rotation axes and Bloch vectors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vector3 {
    pub const ZERO: Vector3 = Vector3::new(0.0, 0.0, 0.0);
    /// The `|0⟩` pole, `(0, 0, 1)`.
    pub const POLE: Vector3 = Vector3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector along `self`, or [`Error::InvalidAxis`] for a zero vector.
    pub fn unit(self) -> Result<Self> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Ok(self * (1.0 / n))
        } else {
            Err(Error::InvalidAxis)
        }
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Component by index 0, 1, 2.
    pub fn component(self, c: usize) -> f64 {
        match c {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("component index {c} out of range"),
        }
    }

    pub fn from_components(c: [f64; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }

    /// Rotation about the lab z axis by `angle`.
    pub fn rotate_z(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }
}

impl From<[f64; 3]> for Vector3 {
    fn from(a: [f64; 3]) -> Self {
        Self::from_components(a)
    }
}

impl From<Vector3> for [f64; 3] {
    fn from(v: Vector3) -> Self {
        v.to_array()
    }
}

impl Add for Vector3 {
    type Output = Vector3;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vector3 {
    type Output = Vector3;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vector3 {
    type Output = Vector3;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vector3 {
    type Output = Vector3;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation axis as `(ω, θ, φ)`: frequency, declination from +z and azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpherical {
    pub omega: f64,
    pub theta: f64,
    pub phi: f64,
}

impl AxisSpherical {
    pub fn new(omega: f64, theta: f64, phi: f64) -> Result<Self> {
        let a = Self { omega, theta, phi };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::Validation(format!("omega must be >= 0, got {}", self.omega)));
        }
        if !(0.0..=PI).contains(&self.theta) {
            return Err(Error::Validation(format!("theta must lie in [0, pi], got {}", self.theta)));
        }
        if !(self.phi > -PI && self.phi <= PI) {
            return Err(Error::Validation(format!("phi must lie in (-pi, pi], got {}", self.phi)));
        }
        Ok(())
    }

    /// Unit vector `(sinθcosφ, sinθsinφ, cosθ)`.
    pub fn direction(&self) -> Vector3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }
}

/// Internal vector `d₀` plus one interaction vector per control channel.
///
/// Channels are numbered from 1; channel 0 denotes free evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianModel {
    pub d0: Vector3,
    pub controls: Vec<Vector3>,
}

impl HamiltonianModel {
    pub fn new(d0: Vector3, controls: Vec<Vector3>) -> Result<Self> {
        if !d0.is_finite() || controls.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("Hamiltonian vectors must be finite".into()));
        }
        Ok(Self { d0, controls })
    }

    /// The test system `d₀ = (0.2, 0, 0.1)`, `d₁ = (1, 1, 0)`, `d₂ = (0, 0, 1)`.
    pub fn reference_system() -> Self {
        Self {
            d0: Vector3::new(0.2, 0.0, 0.1),
            controls: vec![Vector3::new(1.0, 1.0, 0.0), Vector3::new(0.0, 0.0, 1.0)],
        }
    }

    pub fn channels(&self) -> usize {
        self.controls.len()
    }

    /// Interaction vector of channel `m` (1-based).
    pub fn control(&self, m: usize) -> Result<Vector3> {
        if m == 0 || m > self.controls.len() {
            return Err(Error::UnknownChannel { channel: m, available: self.controls.len() });
        }
        Ok(self.controls[m - 1])
    }

    /// Same model expressed in a frame rotated by `angle` about z.
    pub fn rotated_z(&self, angle: f64) -> Self {
        Self { d0: self.d0.rotate_z(angle), controls: self.controls.iter().map(|v| v.rotate_z(angle)).collect() }
    }
}

/// Rodrigues rotation of `v` by `angle` about `axis` (right-hand rule).
pub fn rotate(v: Vector3, axis: Vector3, angle: f64) -> Result<Vector3> {
    let k = axis.unit()?;
    let (s, c) = angle.sin_cos();
    Ok(v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c)))
}

/// `⟨σz⟩` after evolving `s0` for time `t` under axis `d`.
pub fn evolve_z(s0: Vector3, d: Vector3, t: f64) -> Result<f64> {
    if (s0.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("initial Bloch vector must be a unit vector, norm {}", s0.norm())));
    }
    Ok(rotate(s0, d, d.norm() * t)?.z)
}

pub fn spherical_from_cartesian(d: Vector3) -> Result<AxisSpherical> {
    let omega = d.norm();
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidAxis);
    }
    let theta = (d.z / omega).clamp(-1.0, 1.0).acos();
    let phi = if d.x == 0.0 && d.y == 0.0 { 0.0 } else { wrap_angle(d.y.atan2(d.x)) };
    Ok(AxisSpherical { omega, theta, phi })
}

pub fn cartesian_from_spherical(a: AxisSpherical) -> Vector3 {
    a.direction() * a.omega
}

/// `d₀ + f·dₘ` for channel `m` (1-based); `f = 0` returns `d₀` unchanged.
pub fn effective_axis(model: &HamiltonianModel, m: usize, f: f64) -> Result<Vector3> {
    let dm = model.control(m)?;
    if f == 0.0 {
        return Ok(model.d0);
    }
    Ok(model.d0 + dm * f)
}

/// Reduce an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}
