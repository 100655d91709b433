use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field2D;

/// `min_θ ‖s − e^{jθ} s_ref‖ / ‖s_ref‖`, attained at `θ = arg⟨s, s_ref⟩`.
///
/// Intensity data cannot distinguish a global phase, so estimates are compared
/// modulo it. Scale is not factored out.
pub fn relative_error_mod_phase(s: &Field2D, s_ref: &Field2D) -> Result<f64> {
    if s.shape() != s_ref.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch: {}x{} vs {}x{}",
            s.rows(),
            s.cols(),
            s_ref.rows(),
            s_ref.cols()
        )));
    }
    let ref_norm_sqr = s_ref.norm_sqr();
    if !(ref_norm_sqr > 0.0) {
        return Err(Error::invalid("reference field is zero"));
    }
    // ‖s − e^{jθ}r‖² = ‖s‖² + ‖r‖² − 2 Re(e^{−jθ}⟨s, r⟩); the residual is
    // formed explicitly to avoid cancellation near zero.
    let theta = s.inner(s_ref).arg();
    let rotation = Complex64::from_polar(1.0, theta);
    let dist_sqr: f64 = s
        .data()
        .iter()
        .zip(s_ref.data())
        .map(|(a, b)| (a - rotation * b).norm_sqr())
        .sum();
    Ok((dist_sqr / ref_norm_sqr).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Field2D {
        Field2D::from_fn(3, 4, |r, c| {
            Complex64::new(r as f64 - 1.0, 0.5 * c as f64 + 0.25)
        })
    }

    #[test]
    fn global_phase_is_removed() {
        let r = sample();
        let s = r.scale(Complex64::from_polar(1.0, 1.3));
        assert!(relative_error_mod_phase(&s, &r).unwrap() < 1e-12);
        assert_eq!(relative_error_mod_phase(&r, &r).unwrap(), 0.0);
    }

    #[test]
    fn scale_is_kept() {
        let r = sample();
        let s = r.scale(Complex64::new(2.0, 0.0));
        assert!((relative_error_mod_phase(&s, &r).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reference_rejected() {
        assert!(relative_error_mod_phase(&sample(), &Field2D::zeros(3, 4)).is_err());
    }
}
