//! Square-root branches used by the kernel weight and the worked examples:
//! the sector function <z> = (z^2)^(1/2) on |Im z| < |Re z|, and the square
//! root cut along the negative imaginary axis.

use crate::error::Error;
use num_complex::Complex64;

/// `<z> = (z^2)^{1/2}` with the principal branch of the square root, defined
/// on the sector |Im z| < |Re z| (and 0 at 0). On that sector it reduces to
/// sign(Re z) * z; it extends |xi| holomorphically away from the origin.
pub fn angle_bracket(z: Complex64) -> Result<Complex64, Error> {
    if z.re == 0.0 && z.im == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if z.im.abs() >= z.re.abs() {
        return Err(Error::BranchViolation { re: z.re, im: z.im });
    }
    Ok(if z.re > 0.0 { z } else { -z })
}

/// Square root with branch cut along the negative imaginary axis: the
/// argument is taken in (-pi/2, 3*pi/2), so the root has argument in
/// (-pi/4, 3*pi/4). Arguments within 1e-14 of the cut are nudged by
/// +i*1e-14 (with a logged warning) instead of erroring, which keeps grid
/// sweeps robust.
pub fn sqrt_off_neg_imag(w: Complex64) -> Complex64 {
    let mut w = w;
    let scale = 1.0 + w.norm();
    if w.re.abs() <= 1e-14 * scale && w.im < 0.0 {
        log::warn!("sqrt branch cut grazed at {w}; nudging by +1e-14i");
        w += Complex64::new(0.0, 1e-14 * scale);
    }
    let mut arg = w.arg(); // (-pi, pi]
    if arg < -std::f64::consts::FRAC_PI_2 {
        arg += 2.0 * std::f64::consts::PI;
    }
    Complex64::from_polar(w.norm().sqrt(), 0.5 * arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_bracket_is_signed_identity_on_sector() {
        let z = Complex64::new(2.0, 0.5);
        assert_eq!(angle_bracket(z).unwrap(), z);
        assert_eq!(angle_bracket(-z).unwrap(), z);
        assert_eq!(
            angle_bracket(Complex64::new(3.0, 0.0)).unwrap(),
            Complex64::new(3.0, 0.0)
        );
        assert!(angle_bracket(Complex64::new(1.0, 1.5)).is_err());
    }

    #[test]
    fn sqrt_branch_examples() {
        // sqrt(-1) with cut on the negative imaginary axis is +i
        let r = sqrt_off_neg_imag(Complex64::new(-1.0, 0.0));
        assert!((r - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        // positive reals give the ordinary root
        let r = sqrt_off_neg_imag(Complex64::new(4.0, 0.0));
        assert!((r - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        // continuity approaching the negative real axis from below
        let a = sqrt_off_neg_imag(Complex64::new(-1.0, 1e-9));
        let b = sqrt_off_neg_imag(Complex64::new(-1.0, -1e-9));
        assert!((a - b).norm() < 1e-8);
    }
}
