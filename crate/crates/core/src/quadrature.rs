//! Adaptive Simpson quadrature.

use crate::error::{Result, SqgError};

const PANELS: usize = 32;
const MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub evaluations: usize,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(f64) -> Result<f64>> Counted<F> {
    fn call(&mut self, x: f64) -> Result<f64> {
        self.evals += 1;
        (self.f)(x)
    }
}

/// Integrates `f` over `[a, b]` to relative tolerance `tol`, measured against
/// a composite Simpson estimate of `int |f|`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(b > a) {
        return Ok(Quadrature {
            value: 0.0,
            evaluations: 0,
        });
    }
    let mut f = Counted { f, evals: 0 };
    let h = (b - a) / PANELS as f64;
    let mut nodes = Vec::with_capacity(2 * PANELS + 1);
    for i in 0..=2 * PANELS {
        let x = a + 0.5 * h * i as f64;
        nodes.push(f.call(x)?);
    }
    let mut scale = 0.0;
    for p in 0..PANELS {
        let (l, m, r) = (nodes[2 * p], nodes[2 * p + 1], nodes[2 * p + 2]);
        scale += h / 6.0 * (l.abs() + 4.0 * m.abs() + r.abs());
    }
    if scale == 0.0 {
        return Ok(Quadrature {
            value: 0.0,
            evaluations: f.evals,
        });
    }
    let panel_tol = tol * scale / PANELS as f64;
    let mut total = 0.0;
    for p in 0..PANELS {
        let lo = a + h * p as f64;
        let hi = lo + h;
        let (fl, fm, fr) = (nodes[2 * p], nodes[2 * p + 1], nodes[2 * p + 2]);
        let whole = h / 6.0 * (fl + 4.0 * fm + fr);
        total += refine(&mut f, lo, hi, fl, fm, fr, whole, panel_tol, 0, tol)?;
    }
    Ok(Quadrature {
        value: total,
        evaluations: f.evals,
    })
}

#[allow(clippy::too_many_arguments)]
fn refine<F: FnMut(f64) -> Result<f64>>(
    f: &mut Counted<F>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    rel_tol: f64,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f.call(lm)?;
    let frm = f.call(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(SqgError::Quadrature { tol: rel_tol, a, b });
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH {
        return Err(SqgError::Quadrature { tol: rel_tol, a, b });
    }
    Ok(refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, rel_tol)?
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, rel_tol)?)
}
