//! Means, standard deviations and batch-means standard errors.

/// Batches used for the standard error of a correlated series.
pub const BATCHES: usize = 100;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Standard error of the mean from `batches` contiguous batches. Trailing
/// samples that do not fill a batch are dropped. `None` below two batches.
pub fn batch_means_se(x: &[f64], batches: usize) -> Option<f64> {
    let size = x.len() / batches.max(1);
    if batches < 2 || size == 0 {
        return None;
    }
    let means: Vec<f64> = x.chunks_exact(size).take(batches).map(mean).collect();
    Some(sd(&means) / (batches as f64).sqrt())
}

/// Integrated autocorrelation time by the initial positive sequence, up to
/// `max_lag`.
pub fn autocorrelation_time(x: &[f64], max_lag: usize) -> f64 {
    let n = x.len();
    let m = mean(x);
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let rho = |k: usize| x[..n - k].iter().zip(&x[k..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / (n as f64 * var);
    let mut tau = 1.0;
    let mut k = 1;
    while k + 1 < max_lag.min(n) {
        let pair = rho(k) + rho(k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    tau
}
