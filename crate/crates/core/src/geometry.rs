//! Uniform circular arrays of outward-facing directional microphones.
//!
//! Propagation is planar (azimuth only) with far-field plane waves and the
//! array center as phase reference. All angles are radians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::num::{circular_distance, wrap_angle, Real, C};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// First-order element directivity `a + (1 - a) cos ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementPattern {
    Omni,
    Cardioid,
    /// Custom first-order pattern with omni weight `a` in `[0, 1]`.
    FirstOrder(f64),
}

impl ElementPattern {
    pub fn omni_weight(self) -> f64 {
        match self {
            Self::Omni => 1.0,
            Self::Cardioid => 0.5,
            Self::FirstOrder(a) => a,
        }
    }

    pub fn response<T: Real>(self, relative_angle: T) -> T {
        element_response(self, relative_angle)
    }
}

/// Gain of a directional element toward a direction `relative_angle` away
/// from its axis.
pub fn element_response<T: Real>(pattern: ElementPattern, relative_angle: T) -> T {
    let a = T::of(pattern.omni_weight());
    a + (T::one() - a) * wrap_angle(relative_angle).cos()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry<T> {
    radius: T,
    element_azimuths: Vec<T>,
    element_orientations: Vec<T>,
    pattern: ElementPattern,
    speed_of_sound: T,
}

impl<T: Real> ArrayGeometry<T> {
    /// Uniform circular array with elements at `2πm/M` facing outward.
    pub fn uniform_circular(num_elements: usize, radius: T, pattern: ElementPattern) -> Result<Self> {
        if num_elements < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 elements, got {num_elements}"
            )));
        }
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidGeometry(format!("radius must be positive, got {radius}")));
        }
        if let ElementPattern::FirstOrder(a) = pattern {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidGeometry(format!(
                    "first-order omni weight {a} outside [0, 1]"
                )));
            }
        }
        let m = T::of(num_elements as f64);
        let azimuths: Vec<T> = (0..num_elements)
            .map(|i| T::TAU() * T::of(i as f64) / m)
            .collect();
        Ok(Self {
            radius,
            element_orientations: azimuths.clone(),
            element_azimuths: azimuths,
            pattern,
            speed_of_sound: T::of(DEFAULT_SPEED_OF_SOUND),
        })
    }

    pub fn with_speed_of_sound(mut self, c: T) -> Self {
        self.speed_of_sound = c;
        self
    }

    /// Same positions and orientations with a different element pattern.
    pub fn with_pattern(&self, pattern: ElementPattern) -> Self {
        Self {
            pattern,
            ..self.clone()
        }
    }

    pub fn num_elements(&self) -> usize {
        self.element_azimuths.len()
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn element_azimuths(&self) -> &[T] {
        &self.element_azimuths
    }

    pub fn element_orientations(&self) -> &[T] {
        &self.element_orientations
    }

    pub fn pattern(&self) -> ElementPattern {
        self.pattern
    }

    pub fn speed_of_sound(&self) -> T {
        self.speed_of_sound
    }

    /// Array response to a unit plane wave from `theta` at angular
    /// frequency `omega`.
    pub fn steering_vector(&self, omega: T, theta: T) -> Vec<C<T>> {
        let k = omega * self.radius / self.speed_of_sound;
        self.element_azimuths
            .iter()
            .zip(&self.element_orientations)
            .map(|(&az, &orient)| {
                let gain = element_response(self.pattern, theta - orient);
                C::from_polar(gain, k * (theta - az).cos())
            })
            .collect()
    }

    /// Constraint matrix whose row `k` is the conjugated steering vector at
    /// `angles[k]`, so that `(R h)_k` is the response of weights `h` toward
    /// that angle.
    pub fn constraint_matrix(&self, omega: T, angles: &[T]) -> Result<CMatrix<T>> {
        let m = self.num_elements();
        if angles.is_empty() || angles.len() > m {
            return Err(Error::InvalidConstraints(format!(
                "need 1..={m} constraint angles, got {}",
                angles.len()
            )));
        }
        let tol = T::of(1e-9);
        for i in 0..angles.len() {
            for j in i + 1..angles.len() {
                if circular_distance(angles[i], angles[j]) < tol {
                    return Err(Error::DuplicateConstraintAngle(i, j));
                }
            }
        }
        let rows: Vec<Vec<C<T>>> = angles
            .iter()
            .map(|&a| self.steering_vector(omega, a).iter().map(C::conj).collect())
            .collect();
        Ok(CMatrix::from_rows(&rows))
    }
}

/// FFT bin layout of the analysis front end.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid<T> {
    sample_rate: T,
    fft_size: usize,
    bin_frequencies: Vec<T>,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(sample_rate: T, fft_size: usize) -> Result<Self> {
        if fft_size == 0 || fft_size % 2 != 0 {
            return Err(Error::Config(format!("fft_size must be positive and even, got {fft_size}")));
        }
        if !(sample_rate > T::zero()) {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        let n = T::of(fft_size as f64);
        let bin_frequencies = (0..=fft_size / 2)
            .map(|k| T::of(k as f64) * sample_rate / n)
            .collect();
        Ok(Self {
            sample_rate,
            fft_size,
            bin_frequencies,
        })
    }

    pub fn sample_rate(&self) -> T {
        self.sample_rate
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn num_bins(&self) -> usize {
        self.bin_frequencies.len()
    }

    pub fn frequencies(&self) -> &[T] {
        &self.bin_frequencies
    }

    pub fn omega(&self, bin: usize) -> T {
        T::TAU() * self.bin_frequencies[bin]
    }

    /// Index of the bin closest to `hz`.
    pub fn nearest_bin(&self, hz: T) -> usize {
        let step = self.sample_rate / T::of(self.fft_size as f64);
        let k = (hz / step).round().to_usize().unwrap_or(0);
        k.min(self.num_bins() - 1)
    }
}

/// On-disk array description, e.g.
/// `{"elements": 12, "diameter_m": 0.08, "pattern": "cardioid", "sample_rate": 16000}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub elements: usize,
    pub diameter_m: f64,
    #[serde(default = "default_pattern")]
    pub pattern: ElementPattern,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
}

fn default_pattern() -> ElementPattern {
    ElementPattern::Cardioid
}

fn default_sample_rate() -> u32 {
    16_000
}

fn default_speed_of_sound() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            elements: 12,
            diameter_m: 0.08,
            pattern: ElementPattern::Cardioid,
            sample_rate: 16_000,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        }
    }
}

impl GeometryConfig {
    pub fn build<T: Real>(&self) -> Result<ArrayGeometry<T>> {
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::InvalidGeometry("speed_of_sound must be positive".into()));
        }
        Ok(
            ArrayGeometry::uniform_circular(self.elements, T::of(self.diameter_m / 2.0), self.pattern)?
                .with_speed_of_sound(T::of(self.speed_of_sound)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn geo(m: usize, pattern: ElementPattern) -> ArrayGeometry<f64> {
        ArrayGeometry::uniform_circular(m, 0.04, pattern).unwrap()
    }

    #[test]
    fn cardioid_response_values() {
        let p = ElementPattern::Cardioid;
        assert_eq!(element_response(p, 0.0), 1.0);
        assert!(element_response(p, PI).abs() < 1e-15);
        assert!((element_response(p, PI / 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn response_is_unity_on_axis_and_periodic() {
        for p in [ElementPattern::Omni, ElementPattern::Cardioid, ElementPattern::FirstOrder(0.25)] {
            assert_eq!(element_response(p, 0.0), 1.0);
            for a in [0.3, 1.7, 4.0] {
                let d = element_response(p, a) - element_response(p, a + 2.0 * PI);
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layout_is_uniform_and_outward() {
        let g = geo(12, ElementPattern::Cardioid);
        for (m, (&az, &or)) in g.element_azimuths().iter().zip(g.element_orientations()).enumerate() {
            assert!((az - 2.0 * PI * m as f64 / 12.0).abs() < 1e-12);
            assert_eq!(az, or);
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(ArrayGeometry::<f64>::uniform_circular(1, 0.04, ElementPattern::Omni).is_err());
        assert!(ArrayGeometry::<f64>::uniform_circular(4, 0.0, ElementPattern::Omni).is_err());
        assert!(ArrayGeometry::<f64>::uniform_circular(4, 0.1, ElementPattern::FirstOrder(1.5)).is_err());
    }

    #[test]
    fn zero_frequency_has_no_phase() {
        let g = geo(12, ElementPattern::Cardioid);
        let v = g.steering_vector(0.0, 1.1);
        for (m, x) in v.iter().enumerate() {
            assert_eq!(x.im, 0.0);
            let want = element_response(ElementPattern::Cardioid, 1.1 - g.element_orientations()[m]);
            assert!((x.re - want).abs() < 1e-15);
        }
    }

    #[test]
    fn two_omni_elements_phase() {
        let g = geo(2, ElementPattern::Omni);
        let omega = 2.0 * PI * 1000.0;
        let kr = omega * 0.04 / 343.0;
        let v = g.steering_vector(omega, 0.0);
        assert!((v[0] - C::from_polar(1.0, kr)).norm() < 1e-12);
        assert!((v[1] - C::from_polar(1.0, -kr)).norm() < 1e-12);
    }

    #[test]
    fn on_axis_component_is_unit() {
        let g = geo(8, ElementPattern::Cardioid);
        let v = g.steering_vector(2.0 * PI * 3000.0, g.element_orientations()[3]);
        assert!((v[3].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn magnitudes_equal_element_gains() {
        let g = geo(12, ElementPattern::Cardioid);
        let omega = 2.0 * PI * 2500.0;
        for i in 0..360 {
            let theta = (i as f64).to_radians();
            for (m, x) in g.steering_vector(omega, theta).iter().enumerate() {
                let gain = element_response(g.pattern(), theta - g.element_orientations()[m]);
                assert!((x.norm() - gain.abs()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn omni_matches_classical_uca_formula() {
        // x_m = r cos φ_m, y_m = r sin φ_m; delay relative to center for a
        // wave arriving from θ is -(x_m cos θ + y_m sin θ)/c.
        let g = geo(7, ElementPattern::Omni);
        let omega = 2.0 * PI * 1234.0;
        for theta in [0.0, 0.4, 2.2, 5.9] {
            let v = g.steering_vector(omega, theta);
            for (m, x) in v.iter().enumerate() {
                let phi = 2.0 * PI * m as f64 / 7.0;
                let proj = 0.04 * phi.cos() * theta.cos() + 0.04 * phi.sin() * theta.sin();
                let want = C::new(0.0, omega * proj / 343.0).exp();
                assert!((x - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn constraint_matrix_single_row_is_conjugate_steering() {
        let g = geo(12, ElementPattern::Cardioid);
        let omega = 2.0 * PI * 1000.0;
        let r = g.constraint_matrix(omega, &[0.7]).unwrap();
        assert_eq!((r.rows(), r.cols()), (1, 12));
        for (a, b) in r.row(0).iter().zip(g.steering_vector(omega, 0.7)) {
            assert_eq!(*a, b.conj());
        }
    }

    #[test]
    fn constraint_matrix_rejects_duplicates_and_oversize() {
        let g = geo(4, ElementPattern::Cardioid);
        assert!(matches!(
            g.constraint_matrix(1.0, &[0.1, 0.1 + 2.0 * PI]),
            Err(Error::DuplicateConstraintAngle(0, 1))
        ));
        assert!(g.constraint_matrix(1.0, &[0.0, 1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(g.constraint_matrix(1.0, &[]).is_err());
    }

    #[test]
    fn frequency_grid_bins() {
        let f = FrequencyGrid::<f64>::new(16000.0, 512).unwrap();
        assert_eq!(f.num_bins(), 257);
        for (k, hz) in f.frequencies().iter().enumerate() {
            assert_eq!(*hz, k as f64 * 16000.0 / 512.0);
        }
        assert_eq!(f.nearest_bin(1000.0), 32);
        assert!(FrequencyGrid::<f64>::new(16000.0, 511).is_err());
    }

    #[test]
    fn geometry_config_json() {
        let cfg: GeometryConfig = serde_json::from_str(
            r#"{"elements": 12, "diameter_m": 0.08, "pattern": "cardioid", "sample_rate": 16000}"#,
        )
        .unwrap();
        assert_eq!(cfg, GeometryConfig::default());
        let g: ArrayGeometry<f64> = cfg.build().unwrap();
        assert_eq!(g.num_elements(), 12);
        assert!((g.radius() - 0.04).abs() < 1e-15);
        let custom: GeometryConfig =
            serde_json::from_str(r#"{"elements": 6, "diameter_m": 0.1, "pattern": {"first_order": 0.3}}"#).unwrap();
        assert_eq!(custom.pattern, ElementPattern::FirstOrder(0.3));
    }

    #[test]
    fn single_precision_geometry() {
        let g = ArrayGeometry::<f32>::uniform_circular(12, 0.04, ElementPattern::Cardioid).unwrap();
        let v = g.steering_vector(2.0 * std::f32::consts::PI * 1000.0, 0.0);
        assert!((v[0].norm() - 1.0).abs() < 1e-6);
    }
}
