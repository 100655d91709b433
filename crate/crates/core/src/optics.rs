//! Physical forward model of an LED-array microscope.
//!
//! Each LED illuminates the sample with a tilted plane wave, which shifts the
//! sample spectrum by the illumination frequency. The objective keeps only
//! the pupil band around that shift, and the camera records the intensity of
//! the resulting low-resolution field. LEDs lit together add incoherently.
//!
//! All frequency-domain arrays are centered (DC at `(rows / 2, cols / 2)`),
//! so a crop around an LED offset is a contiguous submatrix.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::ifft2;
use crate::field::{Field2D, RealImage2D};

/// LED array and microscope parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlluminationGeometry {
    pub led_pitch_mm: f64,
    pub led_distance_mm: f64,
    pub wavelength_um: f64,
    pub numerical_aperture: f64,
    pub magnification: f64,
    pub camera_pixel_um: f64,
    /// LEDs are indexed by `(u, v)` in `[-h, h]²`.
    pub grid_half_extent: u32,
    /// Restricts the grid to these `(u, v)` positions when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub led_whitelist: Option<Vec<(i32, i32)>>,
}

impl IlluminationGeometry {
    /// 4 mm LED pitch at 77 mm, 514 nm light, 0.1 NA 8x objective, 6.5 µm camera pixels.
    pub fn reference(grid_half_extent: u32) -> Self {
        Self {
            led_pitch_mm: 4.0,
            led_distance_mm: 77.0,
            wavelength_um: 0.514,
            numerical_aperture: 0.1,
            magnification: 8.0,
            camera_pixel_um: 6.5,
            grid_half_extent,
            led_whitelist: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("led_pitch_mm", self.led_pitch_mm),
            ("led_distance_mm", self.led_distance_mm),
            ("wavelength_um", self.wavelength_um),
            ("numerical_aperture", self.numerical_aperture),
            ("magnification", self.magnification),
            ("camera_pixel_um", self.camera_pixel_um),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.numerical_aperture >= 1.0 {
            return Err(Error::config(format!(
                "numerical_aperture must be below 1, got {}",
                self.numerical_aperture
            )));
        }
        if let Some(list) = &self.led_whitelist {
            let h = self.grid_half_extent as i32;
            if let Some(&(u, v)) = list.iter().find(|(u, v)| u.abs() > h || v.abs() > h) {
                return Err(Error::config(format!(
                    "whitelisted LED ({u}, {v}) lies outside the grid of half extent {h}"
                )));
            }
        }
        Ok(())
    }

    /// Camera pixel referred to the object plane.
    pub fn object_pixel_um(&self) -> f64 {
        self.camera_pixel_um / self.magnification
    }

    /// Coherent cutoff frequency `NA / λ` in cycles/µm.
    pub fn cutoff_frequency(&self) -> f64 {
        self.numerical_aperture / self.wavelength_um
    }

    /// Fourier pixel pitch (cycles/µm) of an `m1 × m2` measurement.
    ///
    /// The reconstruction grid spans the same field of view, so it shares
    /// this pitch.
    pub fn fourier_pitch(&self, m1: usize, m2: usize) -> (f64, f64) {
        let dx = self.object_pixel_um();
        (1.0 / (m1 as f64 * dx), 1.0 / (m2 as f64 * dx))
    }

    /// Pupil radius in Fourier pixels along each axis.
    pub fn pupil_radius_px(&self, m1: usize, m2: usize) -> (f64, f64) {
        let (p1, p2) = self.fourier_pitch(m1, m2);
        let cutoff = self.cutoff_frequency();
        (cutoff / p1, cutoff / p2)
    }

    /// `(u, v)` positions in row-major order, honoring the whitelist.
    pub fn led_positions(&self) -> Vec<(i32, i32)> {
        let h = self.grid_half_extent as i32;
        let mut out = Vec::new();
        for u in -h..=h {
            for v in -h..=h {
                let listed = match &self.led_whitelist {
                    Some(list) => list.contains(&(u, v)),
                    None => true,
                };
                if listed {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Row-major id of grid position `(u, v)`.
    pub fn led_index(&self, u: i32, v: i32) -> usize {
        let h = self.grid_half_extent as i32;
        let side = 2 * h + 1;
        ((u + h) * side + (v + h)) as usize
    }
}

/// One LED's illumination frequency and its integer crop offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedOffset {
    pub led_index: usize,
    pub freq_cycles_per_um: (f64, f64),
    /// Crop-center displacement from DC in Fourier pixels.
    pub pixel_offset: (i64, i64),
}

impl LedOffset {
    /// An LED known only by its pixel offset.
    pub fn from_offset(led_index: usize, pixel_offset: (i64, i64)) -> Self {
        Self {
            led_index,
            freq_cycles_per_um: (0.0, 0.0),
            pixel_offset,
        }
    }
}

/// Complex pupil transfer function on the `m1 × m2` measurement band.
#[derive(Debug, Clone, PartialEq)]
pub struct Pupil {
    values: Field2D,
    support: Vec<bool>,
}

impl Pupil {
    /// Support is wherever `values` is nonzero.
    pub fn from_values(values: Field2D) -> Self {
        let support = values.data().iter().map(|z| z.norm_sqr() > 0.0).collect();
        Self { values, support }
    }

    /// Binary elliptical pupil: inside iff `(da/r1)² + (db/r2)² ≤ 1`, with
    /// `(da, db)` the pixel displacement from DC.
    pub fn ideal_disk(m1: usize, m2: usize, r1: f64, r2: f64) -> Result<Self> {
        if m1 == 0 || m2 == 0 {
            return Err(Error::invalid("pupil dimensions must be positive"));
        }
        if !(r1 >= 0.0 && r2 >= 0.0) {
            return Err(Error::invalid(format!(
                "pupil radii must be non-negative, got ({r1}, {r2})"
            )));
        }
        if r1 >= m1 as f64 / 2.0 || r2 >= m2 as f64 / 2.0 {
            return Err(Error::config(format!(
                "pupil exceeds measurement band: radius ({r1:.3}, {r2:.3}) px on a {m1}x{m2} grid"
            )));
        }
        let (c1, c2) = (m1 / 2, m2 / 2);
        let term = |d: i64, r: f64| -> f64 {
            if d == 0 {
                0.0
            } else if r == 0.0 {
                f64::INFINITY
            } else {
                (d * d) as f64 / (r * r)
            }
        };
        let mut support = vec![false; m1 * m2];
        let values = Field2D::from_fn(m1, m2, |a, b| {
            let inside = term(a as i64 - c1 as i64, r1) + term(b as i64 - c2 as i64, r2) <= 1.0;
            support[a * m2 + b] = inside;
            if inside {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ok(Self { values, support })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn values(&self) -> &Field2D {
        &self.values
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn support_count(&self) -> usize {
        self.support.iter().filter(|&&s| s).count()
    }

    /// Entrywise `|P|²`.
    pub fn power(&self) -> RealImage2D {
        let (m1, m2) = self.shape();
        RealImage2D::from_vec(
            m1,
            m2,
            self.values.data().iter().map(Complex64::norm_sqr).collect(),
        )
        .expect("pupil shape is valid")
    }
}

/// Binary pupil passing frequencies with magnitude at most `NA / λ`.
pub fn make_ideal_pupil(m1: usize, m2: usize, geom: &IlluminationGeometry) -> Result<Pupil> {
    geom.validate()?;
    let (r1, r2) = geom.pupil_radius_px(m1, m2);
    Pupil::ideal_disk(m1, m2, r1, r2)
}

/// The K index sets `M_k` of simultaneously lit LEDs.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexPlan {
    sets: Vec<Vec<LedOffset>>,
}

impl MultiplexPlan {
    pub fn new(sets: Vec<Vec<LedOffset>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::invalid("a plan needs at least one measurement"));
        }
        for (k, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::invalid(format!("measurement {k} lights no LED")));
            }
            for (j, led) in set.iter().enumerate() {
                if set[..j].iter().any(|o| o.led_index == led.led_index) {
                    return Err(Error::invalid(format!(
                        "LED {} appears twice in measurement {k}",
                        led.led_index
                    )));
                }
            }
        }
        Ok(Self { sets })
    }

    pub fn sets(&self) -> &[Vec<LedOffset>] {
        &self.sets
    }

    /// Number of measurements K.
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Distinct LEDs used anywhere in the plan, in first-use order.
    pub fn union(&self) -> Vec<&LedOffset> {
        let mut seen = Vec::<&LedOffset>::new();
        for led in self.sets.iter().flatten() {
            if !seen.iter().any(|o| o.led_index == led.led_index) {
                seen.push(led);
            }
        }
        seen
    }

    pub fn total_leds(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanViolation {
    BandNotSmaller {
        grid: (usize, usize),
        band: (usize, usize),
    },
    WindowOutOfBounds {
        measurement: usize,
        led_index: usize,
        offset: (i64, i64),
    },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::BandNotSmaller { grid, band } => write!(
                f,
                "measurement band not smaller than reconstruction band ({}x{} vs {}x{})",
                band.0, band.1, grid.0, grid.1
            ),
            PlanViolation::WindowOutOfBounds {
                measurement,
                led_index,
                offset,
            } => write!(
                f,
                "LED {led_index} in measurement {measurement}: crop window at offset ({}, {}) leaves the grid",
                offset.0, offset.1
            ),
        }
    }
}

/// Collects every violation instead of stopping at the first.
pub fn validate_plan(
    plan: &MultiplexPlan,
    n1: usize,
    n2: usize,
    m1: usize,
    m2: usize,
) -> std::result::Result<(), Vec<PlanViolation>> {
    let mut violations = Vec::new();
    if m1 >= n1 || m2 >= n2 {
        violations.push(PlanViolation::BandNotSmaller {
            grid: (n1, n2),
            band: (m1, m2),
        });
    }
    for (k, set) in plan.sets().iter().enumerate() {
        for led in set {
            if window_origin((n1, n2), (m1, m2), led.pixel_offset).is_none() {
                violations.push(PlanViolation::WindowOutOfBounds {
                    measurement: k,
                    led_index: led.led_index,
                    offset: led.pixel_offset,
                });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Illumination frequency `(u·pitch, v·pitch) / (λ·r)` of LED `(u, v)`, where
/// `r` is the LED-to-sample distance; the transverse direction cosines over λ.
pub fn led_to_freq(u: i32, v: i32, geom: &IlluminationGeometry) -> (f64, f64) {
    let x = u as f64 * geom.led_pitch_mm;
    let y = v as f64 * geom.led_pitch_mm;
    let r = (x * x + y * y + geom.led_distance_mm * geom.led_distance_mm).sqrt();
    (x / (r * geom.wavelength_um), y / (r * geom.wavelength_um))
}

/// Snaps a frequency to the Fourier grid of an `n1 × n2` array with spatial
/// pixel `pixel_um`: `round(ξ · n · pixel)`, ties away from zero.
pub fn freq_to_offset(xi: (f64, f64), n1: usize, n2: usize, pixel_um: f64) -> (i64, i64) {
    (
        (xi.0 * n1 as f64 * pixel_um).round() as i64,
        (xi.1 * n2 as f64 * pixel_um).round() as i64,
    )
}

/// Top-left corner of the `m` window centered at DC + `offset`, if it fits.
pub fn window_origin(
    grid: (usize, usize),
    band: (usize, usize),
    offset: (i64, i64),
) -> Option<(usize, usize)> {
    let axis = |n: usize, m: usize, off: i64| -> Option<usize> {
        let start = (n / 2) as i64 + off - (m / 2) as i64;
        (start >= 0 && start + m as i64 <= n as i64).then_some(start as usize)
    };
    Some((
        axis(grid.0, band.0, offset.0)?,
        axis(grid.1, band.1, offset.1)?,
    ))
}

fn checked_origin(
    grid: (usize, usize),
    band: (usize, usize),
    offset: (i64, i64),
) -> Result<(usize, usize)> {
    window_origin(grid, band, offset).ok_or(Error::Range {
        offset,
        window: band,
        grid,
    })
}

/// `C_i s`: the `m1 × m2` submatrix centered at DC + `offset`.
pub fn crop(s: &Field2D, offset: (i64, i64), m1: usize, m2: usize) -> Result<Field2D> {
    let (r0, c0) = checked_origin(s.shape(), (m1, m2), offset)?;
    let n2 = s.cols();
    let src = s.data();
    let mut data = Vec::with_capacity(m1 * m2);
    for r in 0..m1 {
        let start = (r0 + r) * n2 + c0;
        data.extend_from_slice(&src[start..start + m2]);
    }
    Ok(Field2D::from_vec(m1, m2, data).expect("crop shape is valid"))
}

/// `C_i^H t`: zeros everywhere except the window, which holds `t`.
pub fn embed(t: &Field2D, offset: (i64, i64), n1: usize, n2: usize) -> Result<Field2D> {
    let mut out = Field2D::zeros(n1, n2);
    embed_add(&mut out, t, offset)?;
    Ok(out)
}

/// Accumulating form of [`embed`]: `acc += C_i^H t`.
pub fn embed_add(acc: &mut Field2D, t: &Field2D, offset: (i64, i64)) -> Result<()> {
    let (m1, m2) = t.shape();
    let (r0, c0) = checked_origin(acc.shape(), (m1, m2), offset)?;
    let n2 = acc.cols();
    let dst = acc.data_mut();
    for (r, row) in t.data().chunks_exact(m2).enumerate() {
        let start = (r0 + r) * n2 + c0;
        for (d, v) in dst[start..start + m2].iter_mut().zip(row) {
            *d += v;
        }
    }
    Ok(())
}

/// `A_i s = F^H P C_i s`, the low-resolution field behind one LED.
pub fn low_res_field(s: &Field2D, pupil: &Pupil, offset: (i64, i64)) -> Result<Field2D> {
    let (m1, m2) = pupil.shape();
    let mut band = crop(s, offset, m1, m2)?;
    for (z, p) in band.data_mut().iter_mut().zip(pupil.values().data()) {
        *z *= p;
    }
    Ok(ifft2(&band))
}

/// Single-LED intensity `|F^H P C_i s|²`.
pub fn forward_single(s: &Field2D, pupil: &Pupil, offset: (i64, i64)) -> Result<RealImage2D> {
    let field = low_res_field(s, pupil, offset)?;
    let (m1, m2) = field.shape();
    RealImage2D::from_vec(
        m1,
        m2,
        field.data().iter().map(Complex64::norm_sqr).collect(),
    )
}

/// Incoherent sum of single-LED intensities over one LED set.
pub fn multiplexed_intensity(s: &Field2D, pupil: &Pupil, set: &[LedOffset]) -> Result<RealImage2D> {
    let (first, rest) = set
        .split_first()
        .ok_or_else(|| Error::invalid("multiplexed measurement needs at least one LED"))?;
    let mut total = forward_single(s, pupil, first.pixel_offset)?;
    for led in rest {
        let single = forward_single(s, pupil, led.pixel_offset)?;
        for (t, v) in total.data_mut().iter_mut().zip(single.data()) {
            *t += v;
        }
    }
    Ok(total)
}

/// Amplitude measurement `sqrt(Σ_{i∈M} |F^H P C_i s|²)`.
pub fn forward_multiplexed(s: &Field2D, pupil: &Pupil, set: &[LedOffset]) -> Result<RealImage2D> {
    let mut amp = multiplexed_intensity(s, pupil, set)?;
    for v in amp.data_mut() {
        *v = v.sqrt();
    }
    Ok(amp)
}
