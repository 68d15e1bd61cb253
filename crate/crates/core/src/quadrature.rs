//! Adaptive Simpson quadrature.

use std::marker::PhantomData;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Settings for [`adaptive_simpson`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpsonConfig<T> {
    /// Target relative error of the whole integral.
    pub rel_tol: T,
    /// Maximum bisection depth below each initial panel.
    pub max_depth: u32,
    /// Number of equal panels the interval is split into before adapting.
    /// Oscillatory integrands need enough panels that no panel aliases a
    /// full period.
    pub initial_panels: usize,
    /// Cap on integrand evaluations.
    pub max_evaluations: usize,
}

impl<T: Real> Default for SimpsonConfig<T> {
    fn default() -> Self {
        Self {
            rel_tol: lit(1e-6),
            max_depth: 40,
            initial_panels: 8,
            max_evaluations: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub error_estimate: T,
    pub evaluations: usize,
}

struct Panel<T> {
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
}

struct State<'f, T, F> {
    f: &'f F,
    _scalar: PhantomData<T>,
    evaluations: usize,
    max_evaluations: usize,
    max_depth: u32,
}

impl<T: Real, F: Fn(T) -> T> State<'_, T, F> {
    fn eval(&mut self, x: T) -> Result<T> {
        self.evaluations += 1;
        if self.evaluations > self.max_evaluations {
            return Err(Error::domain("quadrature evaluation cap exceeded"));
        }
        let y = (self.f)(x);
        if !y.is_finite() {
            return Err(Error::domain("integrand is not finite"));
        }
        Ok(y)
    }

    fn panel(&mut self, a: T, b: T, fa: T, fb: T) -> Result<Panel<T>> {
        let m = (a + b) / lit(2.0);
        let fm = self.eval(m)?;
        let whole = simpson(a, b, fa, fm, fb);
        Ok(Panel { a, b, fa, fm, fb, whole })
    }

    /// Returns `(value, |error estimate|)`.
    fn refine(&mut self, p: Panel<T>, abs_tol: T, depth: u32) -> Result<(T, T)> {
        let m = (p.a + p.b) / lit(2.0);
        let left = self.panel(p.a, m, p.fa, p.fm)?;
        let right = self.panel(m, p.b, p.fm, p.fb)?;
        let delta = left.whole + right.whole - p.whole;
        let fifteen: T = lit(15.0);
        if depth >= self.max_depth || delta.abs() <= fifteen * abs_tol {
            // Richardson extrapolation of the two Simpson levels.
            return Ok((left.whole + right.whole + delta / fifteen, delta.abs() / fifteen));
        }
        let half = abs_tol / lit(2.0);
        let (lv, le) = self.refine(left, half, depth + 1)?;
        let (rv, re) = self.refine(right, half, depth + 1)?;
        Ok((lv + rv, le + re))
    }
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / lit(6.0) * (fa + lit::<T>(4.0) * fm + fb)
}

/// Integrates `f` over `[a, b]` to relative tolerance `config.rel_tol`.
///
/// The tolerance is made absolute against a first-pass estimate of the
/// integral (composite Simpson on the initial panels), with a floor that
/// keeps integrals that cancel to zero from recursing forever.
pub fn adaptive_simpson<T, F>(f: F, a: T, b: T, config: &SimpsonConfig<T>) -> Result<Quadrature<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration bounds must be finite"));
    }
    if b < a {
        return Err(Error::domain("integration bounds reversed"));
    }
    if a == b {
        return Ok(Quadrature {
            value: T::zero(),
            error_estimate: T::zero(),
            evaluations: 0,
        });
    }
    let mut state = State {
        f: &f,
        _scalar: PhantomData,
        evaluations: 0,
        max_evaluations: config.max_evaluations,
        max_depth: config.max_depth,
    };
    let panels = config.initial_panels.max(1);
    let width = (b - a) / lit(panels as f64);
    let mut edges = Vec::with_capacity(panels + 1);
    for i in 0..=panels {
        let x = if i == panels { b } else { a + width * lit(i as f64) };
        edges.push((x, state.eval(x)?));
    }
    let mut coarse = Vec::with_capacity(panels);
    let mut total = T::zero();
    let mut magnitude = T::zero();
    for w in edges.windows(2) {
        let p = state.panel(w[0].0, w[1].0, w[0].1, w[1].1)?;
        total += p.whole;
        magnitude += simpson(p.a, p.b, p.fa.abs(), p.fm.abs(), p.fb.abs());
        coarse.push(p);
    }
    let floor = magnitude * T::default_epsilon() * lit(16.0);
    let abs_tol = (config.rel_tol * total.abs()).max(floor) / lit(panels as f64);

    let mut value = T::zero();
    let mut error_estimate = T::zero();
    for p in coarse {
        let (v, e) = state.refine(p, abs_tol, 0)?;
        value += v;
        error_estimate += e;
    }
    Ok(Quadrature {
        value,
        error_estimate,
        evaluations: state.evaluations,
    })
}
