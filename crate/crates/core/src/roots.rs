//! Bracketing scalar root finders.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("root finder did not converge within {0} iterations")]
    MaxIterations(usize),
    #[error("function returned a non-finite value at x = {0}")]
    NonFinite(f64),
}

/// Stopping rules shared by the bracketing solvers.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Absolute width of the final bracket.
    pub xtol: f64,
    /// Stop early once `|f(x)| <= ftol`.
    pub ftol: f64,
    pub max_iter: usize,
}

impl Tolerance {
    pub fn x(xtol: f64) -> Self {
        Self {
            xtol,
            ftol: 0.0,
            max_iter: 200,
        }
    }
}

/// Brent's method (inverse quadratic interpolation guarded by bisection).
///
/// Requires `f(lo)` and `f(hi)` of opposite sign, or one of them zero.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NonFinite(a));
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite(b));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }

    // c is the previous iterate with f(c) of opposite sign to f(b).
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }

        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= tol.ftol {
            return Ok(b);
        }

        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                // secant
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                // inverse quadratic interpolation
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }

        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NonFinite(b));
        }
    }
    Err(RootError::MaxIterations(tol.max_iter))
}

/// Plain bisection. Slower than [`brent`], but every iterate is a midpoint.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(RootError::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let rising = fb > 0.0;
    for _ in 0..tol.max_iter {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if (b - a).abs() <= tol.xtol || fm == 0.0 || fm.abs() <= tol.ftol {
            return Ok(mid);
        }
        if (fm > 0.0) == rising {
            b = mid;
        } else {
            a = mid;
        }
    }
    Err(RootError::MaxIterations(tol.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cube_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, Tolerance::x(1e-14)).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn brent_handles_steep_step_like_function() {
        let f = |x: f64| (1e6 * (x - 0.3)).tanh();
        let r = brent(f, 0.0, 1.0, Tolerance::x(1e-12)).unwrap();
        assert!((r - 0.3).abs() < 1e-9);
    }

    #[test]
    fn brent_rejects_missing_bracket() {
        let err = brent(|x| x * x + 1.0, -1.0, 1.0, Tolerance::x(1e-9)).unwrap_err();
        assert!(matches!(err, RootError::NoSignChange { .. }));
    }

    #[test]
    fn bisection_matches_brent() {
        let f = |x: f64| x.exp() - 3.0;
        let a = bisect(f, 0.0, 3.0, Tolerance::x(1e-12)).unwrap();
        let b = brent(f, 0.0, 3.0, Tolerance::x(1e-12)).unwrap();
        assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn endpoint_root_is_returned_directly() {
        assert_eq!(brent(|x| x, 0.0, 1.0, Tolerance::x(1e-9)).unwrap(), 0.0);
    }
}
