//! Random-variate samplers for every distribution the model uses.
//!
//! All functions draw from an explicit [`RngHandle`] and are deterministic
//! given its state, so chains are reproducible end to end. Parameter
//! domains are enforced with panics: callers construct parameters from
//! validated hyperparameters and nonnegative counts, so a violation is a
//! programming error, not a data error.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson};

use crate::rng::RngHandle;

/// Floor applied to raw gamma draws inside the Dirichlet sampler so that
/// normalization never divides by zero when every component underflows.
const MIN_POSITIVE_DRAW: f64 = 1e-300;

/// Largest support point the small-rate inversion sampler will return.
/// For rate < 1 the truncated Poisson mass beyond this point is far below
/// the smallest positive double.
const ZTP_INVERSION_CAP: u64 = 200;

/// Draw from the zero-truncated Poisson: `k ~ Pois(rate)` conditioned on
/// `k >= 1`.
///
/// Two regimes keep the worst case bounded:
///
/// * `rate >= 1`: rejection — draw plain Poisson variates until one is
///   nonzero. Acceptance probability is `1 − exp(−rate) >= 1 − exp(−1)`.
/// * `rate < 1`: inversion on the truncated pmf, using the recurrence
///   `t_1 = rate / (exp(rate) − 1)`, `t_{k+1} = t_k · rate / (k+1)`.
///   Rejection would loop `~1/rate` times at tiny rates; inversion is
///   O(1) in expectation there.
///
/// # Panics
///
/// Panics if `rate` is not finite and strictly positive.
pub fn ztp_sample(rng: &mut RngHandle, rate: f64) -> u64 {
    assert!(
        rate.is_finite() && rate > 0.0,
        "ztp_sample requires a finite positive rate, got {rate}"
    );
    if rate >= 1.0 {
        let pois = Poisson::new(rate).expect("rate validated above");
        loop {
            let k = pois.sample(rng) as u64;
            if k >= 1 {
                return k;
            }
        }
    } else {
        // P(k) = rate^k / (k! (exp(rate) - 1)); exp_m1 keeps t_1 accurate
        // for rates near zero, where exp(rate) - 1 would cancel.
        let u: f64 = rng.gen();
        let mut k = 1u64;
        let mut term = rate / rate.exp_m1();
        let mut cum = term;
        while u > cum && k < ZTP_INVERSION_CAP {
            k += 1;
            term *= rate / k as f64;
            cum += term;
        }
        k
    }
}

/// Draw a point on the simplex from `Dir(alphas)`.
///
/// Sampled as independent `Gamma(alpha_i, 1)` variates normalized by their
/// sum. Draws that underflow to zero are floored at a tiny positive value
/// so the normalization is always well defined; with several alphas below
/// one this is the only place the underflow can matter.
///
/// # Panics
///
/// Panics if `alphas` is empty or any alpha is not finite and positive.
pub fn dirichlet_sample(rng: &mut RngHandle, alphas: &[f64]) -> Vec<f64> {
    assert!(!alphas.is_empty(), "dirichlet_sample requires at least one alpha");
    let mut draws: Vec<f64> = alphas
        .iter()
        .map(|&alpha| gamma_sample(rng, alpha, 1.0).max(MIN_POSITIVE_DRAW))
        .collect();
    let sum: f64 = draws.iter().sum();
    for draw in &mut draws {
        *draw /= sum;
    }
    draws
}

/// Draw from `Gamma(shape, scale)` (mean `shape * scale`).
///
/// The second parameter is a scale, not a rate; the conjugate updates in
/// the Gibbs sweep rely on this convention.
///
/// # Panics
///
/// Panics if either parameter is not finite and strictly positive.
pub fn gamma_sample(rng: &mut RngHandle, shape: f64, scale: f64) -> f64 {
    assert!(
        shape.is_finite() && shape > 0.0,
        "gamma_sample requires a finite positive shape, got {shape}"
    );
    assert!(
        scale.is_finite() && scale > 0.0,
        "gamma_sample requires a finite positive scale, got {scale}"
    );
    Gamma::new(shape, scale)
        .expect("parameters validated above")
        .sample(rng)
}

/// Draw from `Beta(a, b)`, clamped into the open interval (0, 1).
///
/// The clamp guards downstream odds `p / (1 − p)` against division by
/// zero when a draw rounds to exactly 0.0 or 1.0 in double precision.
///
/// # Panics
///
/// Panics if either parameter is not finite and strictly positive.
pub fn beta_sample(rng: &mut RngHandle, a: f64, b: f64) -> f64 {
    assert!(
        a.is_finite() && a > 0.0,
        "beta_sample requires a finite positive first parameter, got {a}"
    );
    assert!(
        b.is_finite() && b > 0.0,
        "beta_sample requires a finite positive second parameter, got {b}"
    );
    let draw = Beta::new(a, b)
        .expect("parameters validated above")
        .sample(rng);
    draw.clamp(MIN_POSITIVE_DRAW, 1.0 - 1e-16)
}

/// Allocate `n` units across categories with probabilities `probs`:
/// a draw from `Mult(n; probs)`.
///
/// Each unit is placed by one uniform draw and a cumulative scan, so the
/// result is exact (no normal approximation) at O(n · len) cost; the
/// latent counts being allocated in this model are small, so n stays
/// modest in practice.
///
/// # Panics
///
/// Panics if `probs` is empty, contains a negative or non-finite entry,
/// or does not sum to 1 within 1e-9.
pub fn multinomial_sample(rng: &mut RngHandle, n: u64, probs: &[f64]) -> Vec<u64> {
    assert!(!probs.is_empty(), "multinomial_sample requires at least one category");
    assert!(
        probs.iter().all(|&p| p.is_finite() && p >= 0.0),
        "multinomial_sample requires finite nonnegative probabilities"
    );
    let total: f64 = probs.iter().sum();
    assert!(
        (total - 1.0).abs() <= 1e-9,
        "multinomial_sample probabilities must sum to 1 within 1e-9, got {total}"
    );
    let mut counts = vec![0u64; probs.len()];
    if n == 0 {
        return counts;
    }
    // Fallback index for the rare draw that lands past the cumulative sum
    // through rounding; it must be a category with positive probability.
    let last_positive = probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("probabilities sum to 1, so one must be positive");
    for _ in 0..n {
        let u = rng.gen::<f64>() * total;
        let mut cum = 0.0;
        let mut chosen = last_positive;
        for (j, &p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                chosen = j;
                break;
            }
        }
        counts[chosen] += 1;
    }
    counts
}
