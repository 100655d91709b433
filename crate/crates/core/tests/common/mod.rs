//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls the library's FFT, crop or gradient code; every
//! operator is either materialized as a dense matrix or evaluated by direct
//! summation.

#![allow(dead_code)]

use std::f64::consts::PI;

use fpm::objective::MeasurementSet;
use fpm::optics::{LedOffset, MultiplexPlan, Pupil};
use fpm::{Complex64, Field2D, RealImage2D, Rng};
use nalgebra::{DMatrix, DVector};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Centered unitary 1-D DFT: row `k` is frequency `k − m/2`.
pub fn dft_matrix(m: usize) -> CMat {
    let scale = 1.0 / (m as f64).sqrt();
    let half = (m / 2) as f64;
    CMat::from_fn(m, m, |k, r| {
        let angle = -2.0 * PI * (k as f64 - half) * r as f64 / m as f64;
        Complex64::from_polar(scale, angle)
    })
}

/// 2-D centered DFT acting on row-major vectorized images.
pub fn dft2_matrix(m1: usize, m2: usize) -> CMat {
    dft_matrix(m1).kronecker(&dft_matrix(m2))
}

/// Direct double-sum evaluation of the centered unitary 2-D DFT.
pub fn direct_dft2(x: &Field2D, inverse: bool) -> Field2D {
    let (m1, m2) = x.shape();
    let sign = if inverse { 1.0 } else { -1.0 };
    let (h1, h2) = ((m1 / 2) as f64, (m2 / 2) as f64);
    let scale = 1.0 / ((m1 * m2) as f64).sqrt();
    Field2D::from_fn(m1, m2, |a, b| {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..m1 {
            for c in 0..m2 {
                // Frequencies live on the centered side, positions on the natural side.
                let phase = if inverse {
                    (r as f64 - h1) * a as f64 / m1 as f64 + (c as f64 - h2) * b as f64 / m2 as f64
                } else {
                    (a as f64 - h1) * r as f64 / m1 as f64 + (b as f64 - h2) * c as f64 / m2 as f64
                };
                acc += x.get(r, c) * Complex64::from_polar(1.0, sign * 2.0 * PI * phase);
            }
        }
        acc * scale
    })
}

pub fn to_vec(f: &Field2D) -> CVec {
    CVec::from_column_slice(f.data())
}

pub fn from_vec(v: &CVec, rows: usize, cols: usize) -> Field2D {
    Field2D::from_vec(rows, cols, v.iter().copied().collect()).unwrap()
}

/// Explicit 0/1 selection matrix `C_i` (m1·m2 × n1·n2).
pub fn crop_matrix(n: (usize, usize), m: (usize, usize), offset: (i64, i64)) -> CMat {
    let r0 = n.0 as i64 / 2 + offset.0 - m.0 as i64 / 2;
    let c0 = n.1 as i64 / 2 + offset.1 - m.1 as i64 / 2;
    assert!(r0 >= 0 && c0 >= 0 && r0 + m.0 as i64 <= n.0 as i64 && c0 + m.1 as i64 <= n.1 as i64);
    let mut mat = CMat::zeros(m.0 * m.1, n.0 * n.1);
    for a in 0..m.0 {
        for b in 0..m.1 {
            let src = (r0 as usize + a) * n.1 + c0 as usize + b;
            mat[(a * m.1 + b, src)] = Complex64::new(1.0, 0.0);
        }
    }
    mat
}

pub fn pupil_matrix(pupil: &Pupil) -> CMat {
    CMat::from_diagonal(&to_vec(pupil.values()))
}

/// Dense `A_i = F^H P C_i`.
pub fn dense_operator(pupil: &Pupil, n: (usize, usize), offset: (i64, i64)) -> CMat {
    let (m1, m2) = pupil.shape();
    dft2_matrix(m1, m2).adjoint() * pupil_matrix(pupil) * crop_matrix(n, (m1, m2), offset)
}

/// Dense multiplexed amplitude `sqrt(Σ_i |A_i s|²)`.
pub fn dense_forward(s: &Field2D, pupil: &Pupil, set: &[LedOffset]) -> RealImage2D {
    let (m1, m2) = pupil.shape();
    let sv = to_vec(s);
    let mut intensity = vec![0.0; m1 * m2];
    for led in set {
        let field = dense_operator(pupil, s.shape(), led.pixel_offset) * &sv;
        for (acc, z) in intensity.iter_mut().zip(field.iter()) {
            *acc += z.norm_sqr();
        }
    }
    RealImage2D::from_vec(m1, m2, intensity.into_iter().map(f64::sqrt).collect()).unwrap()
}

/// Scalar-loop cost using explicit index arithmetic and the direct DFT.
pub fn loop_cost(s: &Field2D, meas: &MeasurementSet) -> f64 {
    let (n1, n2) = s.shape();
    let pupil = meas.pupil();
    let (m1, m2) = pupil.shape();
    let mut total = 0.0;
    for (set, y) in meas.plan().sets().iter().zip(meas.images()) {
        let mut intensity = vec![0.0; m1 * m2];
        for led in set {
            let r0 = (n1 / 2) as i64 + led.pixel_offset.0 - (m1 / 2) as i64;
            let c0 = (n2 / 2) as i64 + led.pixel_offset.1 - (m2 / 2) as i64;
            let band = Field2D::from_fn(m1, m2, |a, b| {
                s.get((r0 + a as i64) as usize, (c0 + b as i64) as usize) * pupil.values().get(a, b)
            });
            let field = direct_dft2(&band, true);
            for (acc, z) in intensity.iter_mut().zip(field.data()) {
                *acc += z.norm_sqr();
            }
        }
        for (i, v) in intensity.iter().enumerate() {
            let d = y.data()[i] - v.sqrt();
            total += d * d;
        }
    }
    total
}

/// Central differences over all real coordinates, returned in the
/// `∂J/∂conj(s) = (∂J/∂x + j·∂J/∂y) / 2` convention.
pub fn fd_gradient(cost: impl Fn(&Field2D) -> f64, s: &Field2D, h: f64) -> Field2D {
    let mut out = Field2D::zeros(s.rows(), s.cols());
    for i in 0..s.len() {
        let mut parts = [0.0; 2];
        for (p, dir) in [Complex64::new(h, 0.0), Complex64::new(0.0, h)]
            .into_iter()
            .enumerate()
        {
            let mut plus = s.clone();
            plus.data_mut()[i] += dir;
            let mut minus = s.clone();
            minus.data_mut()[i] -= dir;
            parts[p] = (cost(&plus) - cost(&minus)) / (2.0 * h);
        }
        out.data_mut()[i] = Complex64::new(parts[0], parts[1]) / 2.0;
    }
    out
}

/// Materialized `Σ_k Σ_i C_i^H P^H P C_i`.
pub fn overlap_operator(pupil: &Pupil, plan: &MultiplexPlan, n: (usize, usize)) -> CMat {
    let (m1, m2) = pupil.shape();
    let p = pupil_matrix(pupil);
    let php = p.adjoint() * &p;
    let mut acc = CMat::zeros(n.0 * n.1, n.0 * n.1);
    for led in plan.sets().iter().flatten() {
        let c = crop_matrix(n, (m1, m2), led.pixel_offset);
        acc += c.adjoint() * &php * c;
    }
    acc
}

pub fn largest_eigenvalue(op: &CMat) -> f64 {
    nalgebra::SymmetricEigen::new(op.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Integer points with `x² + y² ≤ r²`.
pub fn lattice_count(radius: f64) -> usize {
    let k = radius.ceil() as i64;
    let mut count = 0;
    for x in -k..=k {
        for y in -k..=k {
            if (x * x + y * y) as f64 <= radius * radius {
                count += 1;
            }
        }
    }
    count
}

/// Maximum number of disks of the given radius, centered at DC + each
/// offset, covering any single lattice point.
pub fn lattice_overlap_max(radius: f64, offsets: &[(i64, i64)]) -> usize {
    let k = radius.ceil() as i64;
    let reach = offsets
        .iter()
        .map(|o| o.0.abs().max(o.1.abs()))
        .max()
        .unwrap_or(0)
        + k;
    let mut best = 0;
    for x in -reach..=reach {
        for y in -reach..=reach {
            let hits = offsets
                .iter()
                .filter(|o| {
                    let (dx, dy) = (x - o.0, y - o.1);
                    (dx * dx + dy * dy) as f64 <= radius * radius
                })
                .count();
            best = best.max(hits);
        }
    }
    best
}

/// LEDs of a `(2h+1)²` grid whose `m` window at `round(ξ·m·Δx)` lies inside
/// the `n` grid, found by testing every window pixel.
pub fn brute_force_window_count(
    pitch_mm: f64,
    distance_mm: f64,
    wavelength_um: f64,
    pixel_um: f64,
    h: i32,
    n: usize,
    m: usize,
) -> usize {
    let mut count = 0;
    for u in -h..=h {
        for v in -h..=h {
            let (x, y) = (u as f64 * pitch_mm, v as f64 * pitch_mm);
            // Direction cosine of the LED ray: sin(atan(ρ/d)) split per axis.
            let rho = x.hypot(y);
            let sin_theta = (rho / distance_mm).atan().sin();
            let (cx, cy) = if rho == 0.0 {
                (0.0, 0.0)
            } else {
                (sin_theta * x / rho, sin_theta * y / rho)
            };
            let off = |c: f64| (c / wavelength_um * m as f64 * pixel_um).round() as i64;
            let (o1, o2) = (off(cx), off(cy));
            let fits = (0..m as i64).all(|a| {
                (0..m as i64).all(|b| {
                    let r = n as i64 / 2 + o1 - m as i64 / 2 + a;
                    let c = n as i64 / 2 + o2 - m as i64 / 2 + b;
                    (0..n as i64).contains(&r) && (0..n as i64).contains(&c)
                })
            });
            count += fits as usize;
        }
    }
    count
}

/// `min_θ ‖s − e^{jθ} r‖ / ‖r‖` over `steps` equally spaced angles.
pub fn theta_grid_error(s: &Field2D, r: &Field2D, steps: usize) -> f64 {
    // ‖s − e^{jθ}r‖² = ‖s‖² + ‖r‖² − 2·Re(e^{−jθ}·⟨s, r⟩)
    let (ss, rr) = (s.norm_sqr(), r.norm_sqr());
    let ip = s.inner(r);
    let mut best = f64::INFINITY;
    for t in 0..steps {
        let theta = 2.0 * PI * t as f64 / steps as f64;
        let d = ss + rr - 2.0 * (Complex64::from_polar(1.0, -theta) * ip).re;
        best = best.min(d.max(0.0));
    }
    (best / rr).sqrt()
}

pub fn random_field(rows: usize, cols: usize, rng: &mut Rng) -> Field2D {
    Field2D::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.normal(), rng.normal())
    })
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn rel_diff(a: &Field2D, b: &Field2D) -> f64 {
    a.sub(b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn real_rel_diff(a: &RealImage2D, b: &RealImage2D) -> f64 {
    let num: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    (num / b.norm_sqr().max(f64::MIN_POSITIVE)).sqrt()
}

/// Random plan of `sets` measurements, each lighting 1..=max_per_set LEDs
/// with offsets whose `m` windows fit the `n` grid.
pub fn random_plan(
    n: (usize, usize),
    m: (usize, usize),
    sets: usize,
    max_per_set: usize,
    rng: &mut Rng,
) -> MultiplexPlan {
    let reach = |n: usize, m: usize| -> (i64, i64) {
        let lo = m as i64 / 2 - n as i64 / 2;
        (lo, lo + (n - m) as i64)
    };
    let (r1, r2) = (reach(n.0, m.0), reach(n.1, m.1));
    let mut id = 0;
    let plan = (0..sets)
        .map(|_| {
            let count = 1 + rng.index(max_per_set);
            (0..count)
                .map(|_| {
                    let o1 = r1.0 + rng.index((r1.1 - r1.0 + 1) as usize) as i64;
                    let o2 = r2.0 + rng.index((r2.1 - r2.0 + 1) as usize) as i64;
                    id += 1;
                    LedOffset::from_offset(id, (o1, o2))
                })
                .collect()
        })
        .collect();
    MultiplexPlan::new(plan).unwrap()
}

/// Measurements simulated from `truth`, optionally with a floor added so
/// every entry is bounded away from zero.
pub fn measurements_from(
    truth: &Field2D,
    pupil: &Pupil,
    plan: &MultiplexPlan,
    floor: f64,
) -> MeasurementSet {
    let images = plan
        .sets()
        .iter()
        .map(|set| {
            let mut y = fpm::optics::forward_multiplexed(truth, pupil, set).unwrap();
            for v in y.data_mut() {
                *v += floor;
            }
            y
        })
        .collect();
    MeasurementSet::new(images, plan.clone(), pupil.clone(), truth.shape()).unwrap()
}
