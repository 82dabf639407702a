/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Largest relative error between `analytic` and central differences of `f`
/// around `point`, one coordinate at a time.
pub fn grad_check(f: impl Fn(&[f64]) -> f64, point: &[f64], analytic: &[f64], h: f64) -> f64 {
    assert!(h > 0.0, "step must be positive");
    assert_eq!(point.len(), analytic.len(), "one analytic entry per coordinate");
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(&x);
        x[i] = orig - h;
        let down = f(&x);
        x[i] = orig;
        worst = worst.max(rel_error(analytic[i], (up - down) / (2.0 * h)));
    }
    worst
}
