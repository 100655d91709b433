//! Amplitude loss, its generalized Wirtinger gradient and the analytical step size.
//!
//! For measurements `y_k` taken with LED sets `M_k`,
//!
//! ```text
//! J(s)  = Σ_k ‖y_k − g_k‖²,           g_k = sqrt(Σ_{i∈M_k} |A_i s|²),   A_i = F^H P C_i
//! ∇J(s) = Σ_k Σ_{i∈M_k} C_i^H P^H F [(g_k − y_k) ⊙ A_i s / g_k]
//! ```
//!
//! `∇J` is the derivative with respect to `conj(s)`; the phase quotient is
//! taken as zero wherever `g_k` vanishes. The step size is the reciprocal of
//! the spectral norm of `Σ_k Σ_{i∈M_k} C_i^H P^H P C_i`, which is diagonal and
//! therefore equals the peak of the pupil overlap map.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::field::{Field2D, RealImage2D};
use crate::optics::{embed_add, low_res_field, validate_plan, MultiplexPlan, Pupil};

/// The K amplitude images together with the optics that produced them.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    images: Vec<RealImage2D>,
    plan: MultiplexPlan,
    pupil: Pupil,
    grid: (usize, usize),
}

impl MeasurementSet {
    pub fn new(
        images: Vec<RealImage2D>,
        plan: MultiplexPlan,
        pupil: Pupil,
        grid: (usize, usize),
    ) -> Result<Self> {
        if images.len() != plan.len() {
            return Err(Error::invalid(format!(
                "{} images for a plan with {} measurements",
                images.len(),
                plan.len()
            )));
        }
        for (k, img) in images.iter().enumerate() {
            if img.shape() != pupil.shape() {
                return Err(Error::invalid(format!(
                    "image {k} is {}x{}, pupil is {}x{}",
                    img.rows(),
                    img.cols(),
                    pupil.rows(),
                    pupil.cols()
                )));
            }
            img.check_nonnegative()
                .map_err(|e| Error::invalid(format!("image {k}: {e}")))?;
        }
        let (m1, m2) = pupil.shape();
        validate_plan(&plan, grid.0, grid.1, m1, m2).map_err(Error::PlanValidation)?;
        Ok(Self {
            images,
            plan,
            pupil,
            grid,
        })
    }

    pub fn images(&self) -> &[RealImage2D] {
        &self.images
    }

    pub fn plan(&self) -> &MultiplexPlan {
        &self.plan
    }

    pub fn pupil(&self) -> &Pupil {
        &self.pupil
    }

    /// Reconstruction grid `(n1, n2)`.
    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `Σ_k ‖y_k‖²`, the cost at `s = 0`.
    pub fn energy(&self) -> f64 {
        self.images.iter().map(RealImage2D::norm_sqr).sum()
    }

    fn check_point(&self, s: &Field2D) -> Result<()> {
        if s.shape() != self.grid {
            return Err(Error::invalid(format!(
                "estimate is {}x{}, measurements expect {}x{}",
                s.rows(),
                s.cols(),
                self.grid.0,
                self.grid.1
            )));
        }
        Ok(())
    }

    /// Model amplitudes `g_k` for every measurement.
    pub fn model_amplitudes(&self, s: &Field2D) -> Result<Vec<RealImage2D>> {
        self.check_point(s)?;
        self.plan
            .sets()
            .par_iter()
            .map(|set| crate::optics::forward_multiplexed(s, &self.pupil, set))
            .collect()
    }
}

/// `J(s) = Σ_k ‖y_k − g_k‖²`.
pub fn cost(s: &Field2D, meas: &MeasurementSet) -> Result<f64> {
    let amps = meas.model_amplitudes(s)?;
    Ok(amps
        .iter()
        .zip(&meas.images)
        .map(|(g, y)| residual_sqr(g, y))
        .sum())
}

fn residual_sqr(g: &RealImage2D, y: &RealImage2D) -> f64 {
    g.data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (b - a) * (b - a))
        .sum()
}

/// Generalized gradient `∇J(s)` (with respect to `conj(s)`).
pub fn gradient(s: &Field2D, meas: &MeasurementSet) -> Result<Field2D> {
    Ok(cost_and_gradient(s, meas)?.1)
}

/// Cost and gradient from a single forward pass.
///
/// Measurements are processed in parallel; contributions are accumulated in
/// plan order so the result does not depend on the thread count.
pub fn cost_and_gradient(s: &Field2D, meas: &MeasurementSet) -> Result<(f64, Field2D)> {
    meas.check_point(s)?;
    let pupil = &meas.pupil;
    let per_measurement: Vec<(f64, Vec<Field2D>)> = meas
        .plan
        .sets()
        .par_iter()
        .zip(meas.images.par_iter())
        .map(|(set, y)| -> Result<(f64, Vec<Field2D>)> {
            let fields = set
                .iter()
                .map(|led| low_res_field(s, pupil, led.pixel_offset))
                .collect::<Result<Vec<_>>>()?;
            let npx = y.len();
            let mut g = vec![0.0; npx];
            for f in &fields {
                for (acc, z) in g.iter_mut().zip(f.data()) {
                    *acc += z.norm_sqr();
                }
            }
            for v in g.iter_mut() {
                *v = v.sqrt();
            }
            let mut cost = 0.0;
            // weight = (g − y) / g, zero where g = 0
            let weights: Vec<f64> = g
                .iter()
                .zip(y.data())
                .map(|(&gk, &yk)| {
                    cost += (yk - gk) * (yk - gk);
                    if gk > 0.0 {
                        (gk - yk) / gk
                    } else {
                        0.0
                    }
                })
                .collect();
            let back = fields
                .into_iter()
                .map(|mut f| {
                    for (z, w) in f.data_mut().iter_mut().zip(&weights) {
                        *z *= w;
                    }
                    let mut spec = fft2(&f);
                    for (z, p) in spec.data_mut().iter_mut().zip(pupil.values().data()) {
                        *z *= p.conj();
                    }
                    spec
                })
                .collect();
            Ok((cost, back))
        })
        .collect::<Result<_>>()?;

    let mut grad = Field2D::zeros(meas.grid.0, meas.grid.1);
    let mut total = 0.0;
    for ((cost, bands), set) in per_measurement.into_iter().zip(meas.plan.sets()) {
        total += cost;
        for (band, led) in bands.iter().zip(set) {
            embed_add(&mut grad, band, led.pixel_offset)?;
        }
    }
    Ok((total, grad))
}

/// Pupil redundancy map `Σ_k Σ_{i∈M_k} C_i^H |P|²` on the reconstruction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMap {
    pub values: RealImage2D,
    pub max_value: f64,
}

/// Counts every `(k, i)` pair, so an LED lit in two measurements covers its
/// band twice.
pub fn overlap_map(
    pupil: &Pupil,
    plan: &MultiplexPlan,
    n1: usize,
    n2: usize,
) -> Result<OverlapMap> {
    let (m1, m2) = pupil.shape();
    validate_plan(plan, n1, n2, m1, m2).map_err(Error::PlanValidation)?;
    let power = pupil.power().to_field();
    let mut acc = Field2D::zeros(n1, n2);
    for led in plan.sets().iter().flatten() {
        embed_add(&mut acc, &power, led.pixel_offset)?;
    }
    let values = RealImage2D::from_vec(n1, n2, acc.data().iter().map(|z| z.re).collect())?;
    let max_value = values.max();
    Ok(OverlapMap { values, max_value })
}

/// `μ = 1 / ‖Σ_k Σ_{i∈M_k} C_i^H P^H P C_i‖₂`.
pub fn step_size(pupil: &Pupil, plan: &MultiplexPlan, n1: usize, n2: usize) -> Result<f64> {
    let map = overlap_map(pupil, plan, n1, n2)?;
    if !(map.max_value > 0.0) {
        return Err(Error::config(
            "pupil is identically zero; step size undefined",
        ));
    }
    Ok(1.0 / map.max_value)
}

/// Multiplies a field by `e^{jθ}`.
pub fn rotate_phase(s: &Field2D, theta: f64) -> Field2D {
    s.scale(Complex64::from_polar(1.0, theta))
}
