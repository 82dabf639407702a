//! Paired one-sided Wilcoxon signed-rank test.

use statrs::distribution::{ContinuousCDF, Normal};

use super::{EvalError, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Below this many non-zero differences the null distribution is enumerated
/// exactly; from here on the tie-corrected normal approximation is used.
const EXACT_LIMIT: usize = 25;
const MIN_PAIRS: usize = 10;

/// p-value for the alternative "a tends to be smaller than b".
///
/// Zero differences are dropped and tied magnitudes get average ranks.
pub fn wilcoxon_lower_p(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(EvalError::InvalidArgument(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    if a.len() < MIN_PAIRS {
        return Err(EvalError::InvalidArgument(format!("need at least {MIN_PAIRS} pairs, got {}", a.len())));
    }
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Ok(1.0);
    }
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let n = diffs.len();

    // Doubled average ranks stay integral: a tie block over 0-based
    // positions i..j has average rank (i + j + 2) / 2.
    let mut ranks2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        for r in &mut ranks2[i..=j] {
            *r = (i + j + 2) as u64;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w2: u64 = diffs.iter().zip(&ranks2).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    if n < EXACT_LIMIT {
        return Ok(exact_lower_tail(&ranks2, w2));
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = (w2 as f64 / 2.0 - mean + 0.5) / var.sqrt();
    Ok(Normal::standard().cdf(z))
}

/// P(W2 <= observed) when each rank enters the sum independently with
/// probability one half.
fn exact_lower_tail(ranks2: &[u64], observed: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut dist = vec![0.0f64; total as usize + 1];
    dist[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let p = dist[s];
            if p != 0.0 {
                dist[s + r] += p;
            }
        }
        reach += r;
    }
    let scale = 0.5f64.powi(ranks2.len() as i32);
    dist[..=observed as usize].iter().sum::<f64>() * scale
}

/// Whether `errors_a` is significantly lower than `errors_b` at `alpha`.
pub fn signif_lower(errors_a: &[f64], errors_b: &[f64], alpha: f64) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EvalError::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(wilcoxon_lower_p(errors_a, errors_b)? < alpha)
}

#[cfg(test)]
mod tests {
    use rand::Rng as _;

    use super::*;
    use crate::seed;

    /// Lower-tail probability by enumerating all 2^n sign patterns.
    fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
        let n = d.len();
        let rank = |k: usize| {
            let less = d.iter().filter(|x| x.abs() < d[k].abs()).count() as f64;
            let eq = d.iter().filter(|x| x.abs() == d[k].abs()).count() as f64;
            less + (eq + 1.0) / 2.0
        };
        let ranks: Vec<f64> = (0..n).map(rank).collect();
        let observed: f64 = (0..n).filter(|&k| d[k] > 0.0).map(|k| ranks[k]).sum();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
            if w <= observed + 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn identical_samples_are_not_significant() {
        let a: Vec<f64> = (0..30).map(f64::from).collect();
        assert_eq!(wilcoxon_lower_p(&a, &a).unwrap(), 1.0);
        assert!(!signif_lower(&a, &a, DEFAULT_ALPHA).unwrap());
    }

    #[test]
    fn uniformly_lower_is_significant() {
        let b: Vec<f64> = (0..50).map(|i| f64::from(i) * 0.1).collect();
        let a: Vec<f64> = b.iter().map(|x| x - 1.0).collect();
        assert!(signif_lower(&a, &b, DEFAULT_ALPHA).unwrap());
        assert!(!signif_lower(&b, &a, DEFAULT_ALPHA).unwrap());
        let (a12, b12) = (&a[..12], &b[..12]);
        // All 12 differences negative: p = 2^-12 exactly.
        assert_eq!(wilcoxon_lower_p(a12, b12).unwrap(), 0.5f64.powi(12));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(wilcoxon_lower_p(&[0.0; 10], &[0.0; 11]).is_err());
        assert!(wilcoxon_lower_p(&[0.0; 9], &[0.0; 9]).is_err());
        assert!(signif_lower(&[0.0; 10], &[1.0; 10], 0.0).is_err());
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let mut rng = seed::rng(11);
        for _ in 0..20 {
            let n = rng.gen_range(10..16);
            // Coarse values force ties and zero differences.
            let a: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..5))).collect();
            let b: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..5))).collect();
            if a == b {
                continue;
            }
            let p = wilcoxon_lower_p(&a, &b).unwrap();
            assert!((p - brute_force_p(&a, &b)).abs() < 1e-12, "{a:?} {b:?}");
        }
    }

    #[test]
    fn normal_branch_is_close_to_exact_at_the_boundary() {
        let mut rng = seed::rng(12);
        let a: Vec<f64> = (0..25).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..25).map(|_| rng.gen::<f64>() + 0.1).collect();
        let approx = wilcoxon_lower_p(&a, &b).unwrap();
        let mut d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        d.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        let w2: u64 = (1..=25u64).zip(&d).filter(|(_, x)| **x > 0.0).map(|(r, _)| 2 * r).sum();
        let ranks2: Vec<u64> = (1..=25).map(|r| 2 * r).collect();
        let exact = exact_lower_tail(&ranks2, w2);
        assert!((approx - exact).abs() < 0.01, "{approx} vs {exact}");
    }

    fn rejection_rate(n: usize, seed_value: u64) -> f64 {
        let mut rng = seed::rng(seed_value);
        let trials = 1000;
        let mut rejected = 0;
        for _ in 0..trials {
            let a: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            if signif_lower(&a, &b, DEFAULT_ALPHA).unwrap() {
                rejected += 1;
            }
        }
        f64::from(rejected) / trials as f64
    }

    #[test]
    fn calibrated_under_the_null() {
        // The exact test is conservative because W+ is discrete.
        let exact = rejection_rate(20, 21);
        assert!((exact - DEFAULT_ALPHA).abs() <= 0.02, "exact branch rate {exact}");
        let normal = rejection_rate(40, 22);
        assert!((normal - DEFAULT_ALPHA).abs() <= 0.02, "normal branch rate {normal}");
    }
}
