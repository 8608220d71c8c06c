//! Summary statistics and exact sign tests.

/// Sample mean and standard error of the mean (`sd / √n`, with the `n − 1`
/// sample variance). A single sample has standard error 0.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 || !mean.is_finite() {
        return (mean, if mean.is_finite() { 0.0 } else { f64::INFINITY });
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `P(Bin(n, ½) ≥ k)`.
pub fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    // log C(n, i) accumulated incrementally.
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_choose = 0.0;
    let mut tail = 0.0;
    for i in 0..=n {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        if i >= k {
            tail += (ln_choose + ln_half_n).exp();
        }
    }
    tail.min(1.0)
}

/// Outcome of a paired sign test between two samples `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    /// Pairs with `a < b`.
    pub a_lower: usize,
    /// Pairs with `a > b`.
    pub b_lower: usize,
    pub ties: usize,
    /// Exact p-value for the one-sided alternative "a tends to be lower".
    pub p_one_sided: f64,
    pub p_two_sided: f64,
}

/// Exact sign test on paired samples; ties are dropped.
pub fn paired_sign_test(a: &[f64], b: &[f64]) -> SignTest {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let (mut a_lower, mut b_lower, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        if x < y {
            a_lower += 1;
        } else if x > y {
            b_lower += 1;
        } else {
            ties += 1;
        }
    }
    let n = a_lower + b_lower;
    let p_one_sided = binomial_upper_tail(n, a_lower);
    let extreme = a_lower.max(b_lower);
    let p_two_sided = (2.0 * binomial_upper_tail(n, extreme)).min(1.0);
    SignTest { a_lower, b_lower, ties, p_one_sided, p_two_sided }
}
