//! Spectral normalization by power iteration.

use ndarray::{Array1, Array2};

/// Estimates below this are treated as a zero matrix.
pub const SPECTRAL_EPS: f64 = 1e-12;

/// Result of one normalization step.
#[derive(Debug, Clone)]
pub struct SpectralOutcome {
    /// `Wm / sigma`, or `Wm` unchanged when degenerate.
    pub normalized: Array2<f64>,
    /// Updated left-singular estimate, unit norm unless degenerate.
    pub u_next: Array1<f64>,
    /// Spectral-norm estimate after this step; non-negative.
    pub sigma: f64,
    /// Set when the estimate collapsed below [`SPECTRAL_EPS`]; the matrix is
    /// returned unchanged so callers can skip the update.
    pub degenerate: bool,
}

fn l2(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One power-iteration step: `v = normalize(Wm^T u)`, `u' = normalize(Wm v)`,
/// `sigma = u'^T Wm v`, returning `Wm / sigma`.
///
/// A vector treated as a `d x 1` matrix gets `sigma` equal to its Euclidean
/// norm in a single step.
pub fn spectral_normalize(wm: &Array2<f64>, u: &Array1<f64>) -> SpectralOutcome {
    assert_eq!(u.len(), wm.nrows(), "spectral state length must match matrix rows");
    let degenerate = |sigma: f64| SpectralOutcome {
        normalized: wm.clone(),
        u_next: u.clone(),
        sigma,
        degenerate: true,
    };
    let mut v = wm.t().dot(u);
    let vn = l2(&v);
    if vn < SPECTRAL_EPS {
        return degenerate(0.0);
    }
    v /= vn;
    let mut u_next = wm.dot(&v);
    let un = l2(&u_next);
    if un < SPECTRAL_EPS {
        return degenerate(0.0);
    }
    u_next /= un;
    let sigma = u_next.dot(&wm.dot(&v));
    if sigma < SPECTRAL_EPS {
        return degenerate(sigma);
    }
    SpectralOutcome { normalized: wm / sigma, u_next, sigma, degenerate: false }
}
