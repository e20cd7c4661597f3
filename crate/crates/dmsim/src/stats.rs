//! Small descriptive-statistics helpers used across modules and tests.

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Population variance (divides by n).
pub fn variance(samples: &[f64]) -> f64 {
    let m = mean(samples);
    samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / samples.len() as f64
}

pub fn std_dev(samples: &[f64]) -> f64 {
    variance(samples).sqrt()
}

/// Standardized third moment.
pub fn skewness(samples: &[f64]) -> f64 {
    let m = mean(samples);
    let n = samples.len() as f64;
    let m2 = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = samples.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Fourth standardized moment minus 3 (zero for a Gaussian).
pub fn excess_kurtosis(samples: &[f64]) -> f64 {
    let m = mean(samples);
    let n = samples.len() as f64;
    let m2 = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert!((mean(&s) - 2.5).abs() < 1e-12);
        assert!((variance(&s) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn symmetric_samples_have_zero_skew() {
        let s = [-2.0, -1.0, 1.0, 2.0];
        assert!(skewness(&s).abs() < 1e-12);
    }
}
