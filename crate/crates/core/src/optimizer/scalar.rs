//! One-dimensional root finding and minimisation.

use crate::math::sqrt;

/// Brent's method on `[a, b]`; `fa` and `fb` must not share a strict sign.
///
/// Returns the abscissa once the bracket is narrower than a few ulps or
/// `f` hits zero exactly.
pub fn brent_root<F>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, max_iter: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if (fb > 0.0) == (fc > 0.0) {
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
        let tol = 2.0 * f64::EPSILON * b.abs() + f64::MIN_POSITIVE;
        let m = 0.5 * (c - b);
        if fb == 0.0 {
            return b;
        }
        if m.abs() <= tol {
            return polish(&mut f, b, fb, c);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else if m > 0.0 { tol } else { -tol };
        fb = f(b);
    }
    b
}

/// Walks a few ulps from `b` towards `c` while `|f|` keeps shrinking.
fn polish<F>(f: &mut F, mut b: f64, mut fb: f64, c: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let towards = if c > b { f64::INFINITY } else { f64::NEG_INFINITY };
    for _ in 0..4 {
        let next = next_toward(b, towards);
        if (next - c) * (b - c) <= 0.0 {
            break;
        }
        let fnext = f(next);
        if fnext.abs() >= fb.abs() {
            break;
        }
        b = next;
        fb = fnext;
        if fb == 0.0 {
            break;
        }
    }
    b
}

fn next_toward(x: f64, dir: f64) -> f64 {
    if x == 0.0 {
        return if dir > 0.0 { f64::from_bits(1) } else { -f64::from_bits(1) };
    }
    let bits = x.to_bits();
    let up = (dir > 0.0) == (x > 0.0);
    f64::from_bits(if up { bits + 1 } else { bits - 1 })
}

/// Plain bisection to a bracket width of `tol`.
pub fn bisect_root<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let mut fa = f(a);
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section_min<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + c.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
