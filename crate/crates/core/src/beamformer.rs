//! Fixed beamformer design and analysis.
//!
//! Differential designs solve the constraint system `R(ω) h = c` per bin with
//! the minimum-norm solution `h = R^H (R R^H)^{-1} c`. With directional
//! elements in `R` this is the directional-element (CDDMA) design; with omni
//! elements it is the conventional circular differential design (CDMA).

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{element_response, ArrayGeometry, ElementPattern, FrequencyGrid};
use crate::linalg::{dot_conj, norm_sqr, CMatrix};
use crate::num::{db10, wrap_angle, Real, C};

/// Condition number of `R R^H` above which the solve is regularized.
pub const MAX_CONDITION: f64 = 1e12;
/// Tikhonov floor relative to `trace(R R^H) / N`.
pub const REGULARIZATION: f64 = 1e-10;
/// Points of the circular grid used for diffuse-field averaging.
pub const DIFFUSE_GRID_POINTS: usize = 360;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Cddma,
    Cdma,
    DelayAndSum,
}

impl DesignKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Cddma => "cddma",
            Self::Cdma => "cdma",
            Self::DelayAndSum => "delay_and_sum",
        }
    }
}

/// Desired responses `values[k]` at `angles[k]`, angles relative to the look
/// direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec<T> {
    angles: Vec<T>,
    values: Vec<C<T>>,
}

impl<T: Real> ConstraintSpec<T> {
    pub fn new(angles: Vec<T>, values: Vec<C<T>>) -> Result<Self> {
        if angles.len() != values.len() {
            return Err(Error::InvalidConstraints(format!(
                "{} angles but {} values",
                angles.len(),
                values.len()
            )));
        }
        if angles.is_empty() {
            return Err(Error::InvalidConstraints("empty constraint set".into()));
        }
        Ok(Self { angles, values })
    }

    /// Unit response at the look direction, nulls at look ± 3π/4.
    pub fn super_cardioid() -> Self {
        let pi = T::PI();
        let q = T::of(0.25) * pi;
        Self {
            angles: vec![T::zero(), T::of(3.0) * q, T::of(5.0) * q],
            values: vec![C::one(), C::zero(), C::zero()],
        }
    }

    /// Single distortionless constraint toward the look direction.
    pub fn distortionless() -> Self {
        Self {
            angles: vec![T::zero()],
            values: vec![C::one()],
        }
    }

    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    pub fn values(&self) -> &[C<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            angles: self.angles.clone(),
            values: self.values.iter().map(|v| *v * s).collect(),
        }
    }

    /// Absolute constraint angles for a given look direction.
    pub fn absolute_angles(&self, look: T) -> Vec<T> {
        self.angles.iter().map(|&a| wrap_angle(look + a)).collect()
    }

    /// Response value required toward the look direction, if constrained.
    pub fn look_value(&self) -> Option<C<T>> {
        self.angles
            .iter()
            .position(|a| wrap_angle(*a) == T::zero())
            .map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum BinFlag {
    /// Zero-frequency bin: weights replaced by the phase-aligned sum.
    DcFallback,
    /// `R R^H` was ill-conditioned and a regularized solve was used.
    Regularized { condition: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DesignReport {
    pub flagged: Vec<(usize, BinFlag)>,
}

impl DesignReport {
    pub fn is_flagged(&self, bin: usize) -> bool {
        self.flagged.iter().any(|(b, _)| *b == bin)
    }
}

/// Per-bin complex weights steered to one look direction.
#[derive(Debug, Clone)]
pub struct Beamformer<T> {
    look_direction: T,
    weights: Vec<Vec<C<T>>>,
    geometry: ArrayGeometry<T>,
    grid: FrequencyGrid<T>,
    kind: DesignKind,
    constraints: Option<ConstraintSpec<T>>,
    report: DesignReport,
}

impl<T: Real> Beamformer<T> {
    pub fn look_direction(&self) -> T {
        self.look_direction
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn geometry(&self) -> &ArrayGeometry<T> {
        &self.geometry
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn report(&self) -> &DesignReport {
        &self.report
    }

    pub fn constraints(&self) -> Option<&ConstraintSpec<T>> {
        self.constraints.as_ref()
    }

    pub fn num_bins(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, bin: usize) -> &[C<T>] {
        &self.weights[bin]
    }

    pub fn all_weights(&self) -> &[Vec<C<T>>] {
        &self.weights
    }

    /// Response `d(ω_k, θ)^H h(ω_k)` toward `theta`.
    pub fn response(&self, bin: usize, theta: T) -> C<T> {
        let d = self.geometry.steering_vector(self.grid.omega(bin), theta);
        dot_conj(&d, &self.weights[bin])
    }

    /// Largest constraint residual `‖R h − c‖∞` at `bin`.
    pub fn constraint_residual(&self, bin: usize) -> Option<T> {
        let spec = self.constraints.as_ref()?;
        let angles = spec.absolute_angles(self.look_direction);
        let r = self.geometry.constraint_matrix(self.grid.omega(bin), &angles).ok()?;
        let rh = r.mul_vec(&self.weights[bin]);
        Some(
            rh.iter()
                .zip(spec.values())
                .map(|(a, b)| (*a - *b).norm())
                .fold(T::zero(), T::max),
        )
    }
}

/// Minimum-norm solution of `R h = c`, regularized when `R R^H` is
/// ill-conditioned. Returns the weights and the condition number.
pub fn min_norm_solve<T: Real>(r: &CMatrix<T>, c: &[C<T>]) -> (Vec<C<T>>, T, bool) {
    let n = r.rows();
    let a = r.matmul(&r.adjoint());
    let condition = a.condition_number();
    let regularized = !(condition <= T::of(MAX_CONDITION));
    let system = if regularized {
        let eps = T::of(REGULARIZATION) * a.trace().re / T::of(n as f64);
        let mut reg = a.clone();
        for i in 0..n {
            reg[(i, i)] += C::new(eps, T::zero());
        }
        reg
    } else {
        a
    };
    let inv = match system.inverse() {
        Some(inv) => inv,
        // all-zero R: nothing to steer with
        None => return (vec![C::zero(); r.cols()], T::infinity(), true),
    };
    let mut y = inv.mul_vec(c);
    // one step of iterative refinement
    let ay = system.mul_vec(&y);
    let resid: Vec<C<T>> = c.iter().zip(&ay).map(|(a, b)| *a - *b).collect();
    for (yi, di) in y.iter_mut().zip(inv.mul_vec(&resid)) {
        *yi += di;
    }
    (r.adjoint_mul_vec(&y), condition, regularized)
}

fn phase_aligned<T: Real>(geometry: &ArrayGeometry<T>, omega: T, look: T) -> Vec<C<T>> {
    let omni = geometry.with_pattern(ElementPattern::Omni);
    let d = omni.steering_vector(omega, look);
    // normalize so the response of the actual elements toward look is one
    let gain_sum = geometry
        .element_orientations()
        .iter()
        .fold(T::zero(), |acc, &o| acc + element_response(geometry.pattern(), look - o));
    let scale = if gain_sum > T::epsilon() {
        T::one() / gain_sum
    } else {
        T::one() / T::of(geometry.num_elements() as f64)
    };
    d.into_iter().map(|x| x * scale).collect()
}

fn design_constrained<T: Real>(
    geometry: &ArrayGeometry<T>,
    grid: &FrequencyGrid<T>,
    look_direction: T,
    constraints: &ConstraintSpec<T>,
    kind: DesignKind,
) -> Result<Beamformer<T>> {
    if constraints.len() > geometry.num_elements() {
        return Err(Error::InvalidConstraints(format!(
            "{} constraints exceed {} elements",
            constraints.len(),
            geometry.num_elements()
        )));
    }
    let look = wrap_angle(look_direction);
    let angles = constraints.absolute_angles(look);
    let mut report = DesignReport::default();
    let mut weights = Vec::with_capacity(grid.num_bins());
    for bin in 0..grid.num_bins() {
        let omega = grid.omega(bin);
        // validates distinctness at every bin, including DC
        let r = geometry.constraint_matrix(omega, &angles)?;
        if bin == 0 || omega == T::zero() {
            weights.push(phase_aligned(geometry, omega, look));
            report.flagged.push((bin, BinFlag::DcFallback));
            continue;
        }
        let (h, condition, regularized) = min_norm_solve(&r, constraints.values());
        if regularized {
            report.flagged.push((
                bin,
                BinFlag::Regularized {
                    condition: condition.to_f64_lossy(),
                },
            ));
        }
        weights.push(h);
    }
    Ok(Beamformer {
        look_direction: look,
        weights,
        geometry: geometry.clone(),
        grid: grid.clone(),
        kind,
        constraints: Some(constraints.clone()),
        report,
    })
}

/// Directional-element differential design over the geometry's own element
/// pattern.
pub fn design_cddma<T: Real>(
    geometry: &ArrayGeometry<T>,
    grid: &FrequencyGrid<T>,
    look_direction: T,
    constraints: &ConstraintSpec<T>,
) -> Result<Beamformer<T>> {
    design_constrained(geometry, grid, look_direction, constraints, DesignKind::Cddma)
}

/// Conventional differential design: same constraints, omni elements.
pub fn design_cdma<T: Real>(
    geometry: &ArrayGeometry<T>,
    grid: &FrequencyGrid<T>,
    look_direction: T,
    constraints: &ConstraintSpec<T>,
) -> Result<Beamformer<T>> {
    let omni = geometry.with_pattern(ElementPattern::Omni);
    design_constrained(&omni, grid, look_direction, constraints, DesignKind::Cdma)
}

/// Phase-aligned sum with unit response toward the look direction.
pub fn design_delay_and_sum<T: Real>(
    geometry: &ArrayGeometry<T>,
    grid: &FrequencyGrid<T>,
    look_direction: T,
) -> Beamformer<T> {
    let look = wrap_angle(look_direction);
    let weights = (0..grid.num_bins())
        .map(|bin| phase_aligned(geometry, grid.omega(bin), look))
        .collect();
    Beamformer {
        look_direction: look,
        weights,
        geometry: geometry.clone(),
        grid: grid.clone(),
        kind: DesignKind::DelayAndSum,
        constraints: None,
        report: DesignReport::default(),
    }
}

/// Array response for every bin (rows) and angle of `theta_grid` (columns).
pub fn beampattern<T: Real>(beam: &Beamformer<T>, theta_grid: &[T]) -> Vec<Vec<C<T>>> {
    (0..beam.num_bins())
        .map(|bin| theta_grid.iter().map(|&t| beam.response(bin, t)).collect())
        .collect()
}

/// White noise gain in dB.
pub fn white_noise_gain<T: Real>(beam: &Beamformer<T>, bin: usize) -> T {
    let look = beam.response(bin, beam.look_direction).norm_sqr();
    db10(look / norm_sqr(beam.weights(bin)))
}

/// Directivity index in dB against a 2-D (circular) diffuse field.
pub fn directivity_index<T: Real>(beam: &Beamformer<T>, bin: usize) -> T {
    let look = beam.response(bin, beam.look_direction).norm_sqr();
    let n = DIFFUSE_GRID_POINTS;
    let step = T::TAU() / T::of(n as f64);
    let mean = (0..n)
        .map(|i| beam.response(bin, step * T::of(i as f64)).norm_sqr())
        .fold(T::zero(), |a, b| a + b)
        / T::of(n as f64);
    db10(look / mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub freq_hz: f64,
    pub wng_db: f64,
    pub di_db: f64,
}

/// WNG and DI at every bin.
pub fn performance_curves<T: Real>(beam: &Beamformer<T>) -> Vec<CurvePoint> {
    (0..beam.num_bins())
        .map(|bin| CurvePoint {
            freq_hz: beam.grid().frequencies()[bin].to_f64_lossy(),
            wng_db: white_noise_gain(beam, bin).to_f64_lossy(),
            di_db: directivity_index(beam, bin).to_f64_lossy(),
        })
        .collect()
}

/// Beams whose look directions uniformly cover the circle.
#[derive(Debug, Clone)]
pub struct BeamBank<T> {
    beams: Vec<Beamformer<T>>,
}

impl<T: Real> BeamBank<T> {
    pub fn beams(&self) -> &[Beamformer<T>] {
        &self.beams
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn look_directions(&self) -> Vec<T> {
        self.beams.iter().map(Beamformer::look_direction).collect()
    }

    pub fn num_elements(&self) -> usize {
        self.beams.first().map_or(0, |b| b.geometry.num_elements())
    }

    pub fn num_bins(&self) -> usize {
        self.beams.first().map_or(0, Beamformer::num_bins)
    }

    /// Index of the beam whose look direction is nearest `theta`.
    pub fn nearest_beam(&self, theta: T) -> usize {
        let b = T::of(self.beams.len() as f64);
        let idx = (wrap_angle(theta) / T::TAU() * b).round().to_usize().unwrap_or(0);
        idx % self.beams.len()
    }
}

pub fn build_beam_bank<T: Real>(
    geometry: &ArrayGeometry<T>,
    grid: &FrequencyGrid<T>,
    num_beams: usize,
    constraints: &ConstraintSpec<T>,
) -> Result<BeamBank<T>> {
    if num_beams < 2 {
        return Err(Error::Config(format!("num_beams must be at least 2, got {num_beams}")));
    }
    let beams = (0..num_beams)
        .map(|b| {
            let look = T::TAU() * T::of(b as f64) / T::of(num_beams as f64);
            design_cddma(geometry, grid, look, constraints).map_err(|e| Error::Beam {
                beam: b,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BeamBank { beams })
}
