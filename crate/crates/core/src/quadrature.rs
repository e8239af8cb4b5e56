//! Adaptive Simpson quadrature for the normalization checks.

const MAX_DEPTH: u32 = 48;

/// `∫_a^b f` to absolute tolerance `tol` by adaptive Simpson with Richardson
/// correction.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    recurse(&mut f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // the first split is always taken so that a peak hidden between the
    // three initial nodes cannot be missed
    if depth == 0 || (depth < MAX_DEPTH && delta.abs() <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `∫∫ f(x, y) dy dx` over a rectangle, as nested 1-D integrals.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    tol: f64,
) -> f64 {
    let width = bx - ax;
    integrate(
        |x| integrate(|y| f(x, y), ay, by, tol / width.abs().max(1.0)),
        ax,
        bx,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_mass() {
        let v = integrate(|x| (-0.5 * x * x).exp(), -12.0, 12.0, 1e-12);
        assert_relative_eq!(v, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn polynomial_is_exact() {
        assert_relative_eq!(integrate(|x| x * x * x - x, 0.0, 2.0, 1e-12), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn product_in_two_dimensions() {
        let v = integrate_2d(|x, y| (-x * x - y * y).exp(), (-8.0, 8.0), (-8.0, 8.0), 1e-10);
        assert_relative_eq!(v, std::f64::consts::PI, epsilon = 1e-8);
    }
}
