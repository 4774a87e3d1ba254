//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 50;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is bisected at least `min_depth` times before the error
/// estimate is trusted, so narrow features are not skipped when the first
/// five samples happen to agree.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, min_depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(Error::InvalidArgument(format!("bad integration interval [{a}, {b}]")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let seg = Segment { a, b, fa, fm, fb, whole };
    refine(&f, seg, tol, 0, min_depth)
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn refine<F: Fn(f64) -> f64>(f: &F, s: Segment, tol: f64, depth: u32, min_depth: u32) -> Result<f64> {
    let m = 0.5 * (s.a + s.b);
    let lm = 0.5 * (s.a + m);
    let rm = 0.5 * (m + s.b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - s.a) / 6.0 * (s.fa + 4.0 * flm + s.fm);
    let right = (s.b - m) / 6.0 * (s.fm + 4.0 * frm + s.fb);
    let delta = left + right - s.whole;
    if depth >= min_depth && delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::NoConvergence(format!(
            "adaptive Simpson on [{}, {}] hit depth {MAX_DEPTH}",
            s.a, s.b
        )));
    }
    let l = Segment { a: s.a, b: m, fa: s.fa, fm: flm, fb: s.fm, whole: left };
    let r = Segment { a: m, b: s.b, fa: s.fm, fm: frm, fb: s.fb, whole: right };
    Ok(refine(f, l, 0.5 * tol, depth + 1, min_depth)? + refine(f, r, 0.5 * tol, depth + 1, min_depth)?)
}
