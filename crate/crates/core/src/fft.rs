//! Unitary 2-D DFT with centered frequency layout.
//!
//! The spatial side uses the natural layout (origin at index `(0, 0)`); the
//! frequency side is centered, with DC at `(rows / 2, cols / 2)`. Both
//! directions scale by `1 / sqrt(rows * cols)`, so `fft2` and `ifft2` are
//! exact adjoints of each other.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::field::Field2D;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unitary forward transform; output is frequency-centered.
pub fn fft2(f: &Field2D) -> Field2D {
    let mut out = f.clone();
    transform_in_place(&mut out, FftDirection::Forward);
    fftshift(&out)
}

/// Unitary inverse transform of a frequency-centered field.
pub fn ifft2(f: &Field2D) -> Field2D {
    let mut out = ifftshift(f);
    transform_in_place(&mut out, FftDirection::Inverse);
    out
}

fn transform_in_place(field: &mut Field2D, direction: FftDirection) {
    let (rows, cols) = field.shape();
    let (row_fft, col_fft) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft(cols, direction), p.plan_fft(rows, direction))
    });

    let data = field.data_mut();
    let scratch_len = row_fft
        .get_inplace_scratch_len()
        .max(col_fft.get_inplace_scratch_len());
    let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];

    for row in data.chunks_exact_mut(cols) {
        row_fft.process_with_scratch(row, &mut scratch);
    }

    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }

    let norm = 1.0 / ((rows * cols) as f64).sqrt();
    for z in data.iter_mut() {
        *z *= norm;
    }
}

/// Moves the zero-frequency sample from `(0, 0)` to `(rows / 2, cols / 2)`.
pub fn fftshift(f: &Field2D) -> Field2D {
    let (rows, cols) = f.shape();
    let (hr, hc) = (rows / 2, cols / 2);
    let mut out = Field2D::zeros(rows, cols);
    for r in 0..rows {
        let rr = (r + hr) % rows;
        for c in 0..cols {
            out.set(rr, (c + hc) % cols, f.get(r, c));
        }
    }
    out
}

/// Exact inverse of [`fftshift`], also for odd sizes.
pub fn ifftshift(f: &Field2D) -> Field2D {
    let (rows, cols) = f.shape();
    let (hr, hc) = (rows / 2, cols / 2);
    let mut out = Field2D::zeros(rows, cols);
    for r in 0..rows {
        let rr = (r + hr) % rows;
        for c in 0..cols {
            out.set(r, c, f.get(rr, (c + hc) % cols));
        }
    }
    out
}
