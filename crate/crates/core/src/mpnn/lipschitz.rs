//! Spectral-norm estimates for the Lipschitz diagnostic.

use ndarray::{Array1, Array2, ArrayView2};

/// Power iteration on `WᵀW`. Converges to `‖W‖₂` from below.
pub fn spectral_norm_estimate(w: ArrayView2<f64>, iters: usize) -> f64 {
    let cols = w.ncols();
    if cols == 0 || w.nrows() == 0 {
        return 0.0;
    }
    let mut v = Array1::from_iter((0..cols).map(|i| 1.0 + (i as f64) * 1e-3));
    let mut sigma = 0.0;
    for _ in 0..iters {
        let norm = v.dot(&v).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v /= norm;
        let wv = w.dot(&v);
        sigma = wv.dot(&wv).sqrt();
        v = w.t().dot(&wv);
    }
    sigma
}

/// Upper bound on `‖W‖₂` from `λ_max(M) ≤ tr(M^k)^{1/k}` with `M = WᵀW`
/// and `k = 2^j`, computed by repeated squaring with rescaling. Overestimates
/// by at most a factor `cols^{1/(2k)}`.
pub fn spectral_norm_upper_bound(w: ArrayView2<f64>) -> f64 {
    const SQUARINGS: i32 = 7;
    let mut m: Array2<f64> = w.t().dot(&w);
    let mut log_scale = 0.0;
    for j in 0..SQUARINGS {
        let s = m.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if s == 0.0 {
            return 0.0;
        }
        m /= s;
        log_scale += s.ln() * 2f64.powi(SQUARINGS - j);
        m = m.dot(&m);
    }
    let trace = m.diag().sum();
    if trace <= 0.0 {
        return 0.0;
    }
    let k = 2f64.powi(SQUARINGS);
    let log_lambda = (log_scale + trace.ln()) / k;
    // λ ≤ bound, ‖W‖₂ = √λ; a relative 1e-9 pad absorbs rounding.
    (0.5 * log_lambda).exp() * (1.0 + 1e-9)
}
