//! Synthetic samples, LED plans and simulated measurement sets.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::field::{Field2D, RealImage2D};
use crate::objective::MeasurementSet;
use crate::optics::{
    freq_to_offset, led_to_freq, make_ideal_pupil, multiplexed_intensity, validate_plan,
    IlluminationGeometry, LedOffset, MultiplexPlan,
};
use crate::rng::Rng;

/// Complex transmission sample and its Fourier-domain variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub amplitude: RealImage2D,
    pub phase: RealImage2D,
    /// `fft2(amplitude · e^{j·phase})`.
    pub s_true: Field2D,
}

impl Phantom {
    /// Spatial transmission `amplitude · e^{j·phase}`.
    pub fn transmission(&self) -> Field2D {
        transmission(&self.amplitude, &self.phase)
    }
}

fn transmission(amplitude: &RealImage2D, phase: &RealImage2D) -> Field2D {
    let (n1, n2) = amplitude.shape();
    Field2D::from_fn(n1, n2, |r, c| {
        Complex64::from_polar(amplitude.get(r, c), phase.get(r, c))
    })
}

/// Target interval for the phase map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for PhaseRange {
    fn default() -> Self {
        Self {
            lo: -FRAC_PI_2,
            hi: FRAC_PI_2,
        }
    }
}

/// Builds a phantom with the default phase range `[−π/2, π/2]`.
pub fn make_phantom(
    amplitude_source: &RealImage2D,
    phase_source: &RealImage2D,
    n1: usize,
    n2: usize,
) -> Result<Phantom> {
    make_phantom_with_range(
        amplitude_source,
        phase_source,
        n1,
        n2,
        PhaseRange::default(),
    )
}

/// Resamples both sources to `n1 × n2` (nearest neighbour), clips the
/// amplitude to `[0, 1]` and maps the phase source's `[min, max]` affinely
/// onto `range`. A constant phase source maps to the middle of the range.
pub fn make_phantom_with_range(
    amplitude_source: &RealImage2D,
    phase_source: &RealImage2D,
    n1: usize,
    n2: usize,
    range: PhaseRange,
) -> Result<Phantom> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("phantom dimensions must be positive"));
    }
    if !(range.lo.is_finite() && range.hi.is_finite() && range.lo <= range.hi) {
        return Err(Error::invalid(format!(
            "invalid phase range [{}, {}]",
            range.lo, range.hi
        )));
    }
    for (name, src) in [("amplitude", amplitude_source), ("phase", phase_source)] {
        if src.is_empty() || src.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "{name} source is empty or contains NaN"
            )));
        }
    }

    let mut amplitude = resample_nearest(amplitude_source, n1, n2);
    for v in amplitude.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }

    let mut phase = resample_nearest(phase_source, n1, n2);
    let (lo, hi) = (phase.min(), phase.max());
    for v in phase.data_mut() {
        *v = if hi > lo {
            let t = (*v - lo) / (hi - lo);
            range.lo * (1.0 - t) + range.hi * t
        } else {
            0.5 * (range.lo + range.hi)
        };
    }

    let s_true = fft2(&transmission(&amplitude, &phase));
    Ok(Phantom {
        amplitude,
        phase,
        s_true,
    })
}

fn resample_nearest(src: &RealImage2D, n1: usize, n2: usize) -> RealImage2D {
    if src.shape() == (n1, n2) {
        return src.clone();
    }
    let (r1, r2) = src.shape();
    RealImage2D::from_fn(n1, n2, |r, c| src.get(r * r1 / n1, c * r2 / n2))
}

/// Smooth periodic test image with values spanning exactly `[lo, hi]`.
///
/// A sum of `terms` random cosines whose integer spatial frequencies are at
/// most `max_freq` cycles per field of view, so the spectrum is band-limited.
pub fn smooth_image(
    n1: usize,
    n2: usize,
    max_freq: i64,
    terms: usize,
    lo: f64,
    hi: f64,
    rng: &mut Rng,
) -> RealImage2D {
    let k = max_freq.max(1);
    let comps: Vec<(f64, f64, f64, f64)> = (0..terms.max(1))
        .map(|_| {
            let mut f = (0, 0);
            while f == (0, 0) {
                f = (
                    rng.index((2 * k + 1) as usize) as i64 - k,
                    rng.index((2 * k + 1) as usize) as i64 - k,
                );
            }
            (
                f.0 as f64,
                f.1 as f64,
                rng.uniform_range(0.3, 1.0),
                rng.uniform_range(-PI, PI),
            )
        })
        .collect();
    let mut img = RealImage2D::from_fn(n1, n2, |r, c| {
        comps
            .iter()
            .map(|&(f1, f2, a, ph)| {
                a * (2.0 * PI * (f1 * r as f64 / n1 as f64 + f2 * c as f64 / n2 as f64) + ph).cos()
            })
            .sum()
    });
    let (min, max) = (img.min(), img.max());
    for v in img.data_mut() {
        let t = if max > min {
            (*v - min) / (max - min)
        } else {
            0.5
        };
        *v = lo * (1.0 - t) + hi * t;
    }
    img
}

/// Band-limited random phantom used by the desk-scale experiments.
pub fn random_phantom(n1: usize, n2: usize, max_freq: i64, rng: &mut Rng) -> Result<Phantom> {
    let amp = smooth_image(n1, n2, max_freq, 4, 0.3, 1.0, rng);
    let phase = smooth_image(n1, n2, max_freq, 4, 0.0, 1.0, rng);
    make_phantom(&amp, &phase, n1, n2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
}

/// Additive Gaussian noise on intensity, clamped at zero before the square root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseModel {
    None,
    Gaussian { sigma: f64 },
}

/// Everything needed to regenerate a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub geometry: IlluminationGeometry,
    pub grid: GridSize,
    /// LEDs lit per measurement when generating the plan; 1 is sequential.
    pub multiplex_group: usize,
    pub seed: u64,
    pub noise: NoiseModel,
    pub plan: MultiplexPlan,
}

impl DatasetManifest {
    /// Generates the LED grid and plan: sequential for `group == 1`, random
    /// partition otherwise.
    pub fn resolve(
        geometry: IlluminationGeometry,
        grid: GridSize,
        multiplex_group: usize,
        seed: u64,
        noise: NoiseModel,
    ) -> Result<Self> {
        let leds = build_led_grid(&geometry, grid.n1, grid.n2, grid.m1, grid.m2)?;
        let plan = if multiplex_group == 1 {
            make_plan_sequential(leds)?
        } else {
            make_plan_random(
                leds,
                multiplex_group,
                &mut Rng::with_stream(seed, PLAN_STREAM),
            )?
        };
        let manifest = Self {
            geometry,
            grid,
            multiplex_group,
            seed,
            noise,
            plan,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    /// Reference optics, 64x64 reconstruction from 32x32 images, 3x3 LEDs lit one at a time.
    pub fn desk_scale() -> Self {
        Self::resolve(
            IlluminationGeometry::reference(1),
            GridSize {
                n1: 64,
                n2: 64,
                m1: 32,
                m2: 32,
            },
            1,
            0,
            NoiseModel::None,
        )
        .expect("desk-scale configuration is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.multiplex_group == 0 {
            return Err(Error::invalid("multiplex_group must be at least 1"));
        }
        if let NoiseModel::Gaussian { sigma } = self.noise {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::invalid(format!(
                    "noise sigma must be non-negative, got {sigma}"
                )));
            }
        }
        let g = self.grid;
        make_ideal_pupil(g.m1, g.m2, &self.geometry)?;
        validate_plan(&self.plan, g.n1, g.n2, g.m1, g.m2).map_err(Error::PlanValidation)
    }
}

pub(crate) const PLAN_STREAM: u64 = 0;
pub(crate) const NOISE_STREAM: u64 = 1;

/// Grid LEDs (row-major in `(u, v)`) whose crop windows fit the reconstruction grid.
pub fn build_led_grid(
    geom: &IlluminationGeometry,
    n1: usize,
    n2: usize,
    m1: usize,
    m2: usize,
) -> Result<Vec<LedOffset>> {
    geom.validate()?;
    let pixel = geom.object_pixel_um();
    let leds: Vec<LedOffset> = geom
        .led_positions()
        .into_iter()
        .map(|(u, v)| {
            let xi = led_to_freq(u, v, geom);
            LedOffset {
                led_index: geom.led_index(u, v),
                freq_cycles_per_um: xi,
                // The reconstruction grid spans the measurement field of view m·Δx.
                pixel_offset: freq_to_offset(xi, m1, m2, pixel),
            }
        })
        .filter(|led| {
            let single = MultiplexPlan::new(vec![vec![led.clone()]]).expect("singleton plan");
            validate_plan(&single, n1, n2, m1, m2).is_ok()
        })
        .collect();
    if leds.is_empty() {
        return Err(Error::config(format!(
            "no LED has a valid {m1}x{m2} crop window inside the {n1}x{n2} grid"
        )));
    }
    Ok(leds)
}

/// One singleton measurement per LED, in input order.
pub fn make_plan_sequential(leds: Vec<LedOffset>) -> Result<MultiplexPlan> {
    MultiplexPlan::new(leds.into_iter().map(|l| vec![l]).collect())
}

/// Shuffles the LEDs and partitions them into groups of `group`; the last
/// group holds the remainder.
pub fn make_plan_random(
    mut leds: Vec<LedOffset>,
    group: usize,
    rng: &mut Rng,
) -> Result<MultiplexPlan> {
    if group == 0 {
        return Err(Error::invalid("multiplexing group size must be positive"));
    }
    if leds.is_empty() {
        return Err(Error::invalid("no LEDs to multiplex"));
    }
    if group > leds.len() {
        return Err(Error::invalid(format!(
            "group size {group} exceeds the {} available LEDs",
            leds.len()
        )));
    }
    rng.shuffle(&mut leds);
    MultiplexPlan::new(leds.chunks(group).map(<[LedOffset]>::to_vec).collect())
}

/// Measurements `y_k = sqrt(Σ_{i∈M_k} |F^H P C_i s|² + noise)` of a phantom.
pub fn simulate(phantom: &Phantom, manifest: &DatasetManifest) -> Result<MeasurementSet> {
    manifest.validate()?;
    let g = manifest.grid;
    if phantom.s_true.shape() != (g.n1, g.n2) {
        return Err(Error::invalid(format!(
            "phantom is {}x{}, manifest grid is {}x{}",
            phantom.s_true.rows(),
            phantom.s_true.cols(),
            g.n1,
            g.n2
        )));
    }
    let pupil = make_ideal_pupil(g.m1, g.m2, &manifest.geometry)?;
    let mut noise_rng = Rng::with_stream(manifest.seed, NOISE_STREAM);
    let images = manifest
        .plan
        .sets()
        .iter()
        .map(|set| {
            let mut img = multiplexed_intensity(&phantom.s_true, &pupil, set)?;
            if let NoiseModel::Gaussian { sigma } = manifest.noise {
                if sigma > 0.0 {
                    for v in img.data_mut() {
                        *v = (*v + sigma * noise_rng.normal()).max(0.0);
                    }
                }
            }
            for v in img.data_mut() {
                *v = v.sqrt();
            }
            Ok(img)
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementSet::new(images, manifest.plan.clone(), pupil, (g.n1, g.n2))
}
