//! Small goodness-of-fit helpers used by the calibration checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit of `observed` counts against
/// `expected` probabilities. Adjacent cells are pooled from the left until
/// each pooled cell expects at least `min_expected` observations; the
/// remainder is merged into the last pooled cell. Probability mass missing
/// from `expected` is treated as one extra cell with zero observations.
pub fn chi_square_gof(observed: &[u64], expected: &[f64], min_expected: f64) -> TestOutcome {
    assert_eq!(observed.len(), expected.len());
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected) {
        o_acc += o as f64;
        e_acc += p * n;
        if e_acc >= min_expected {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    let missing = (1.0 - expected.iter().sum::<f64>()).max(0.0) * n;
    e_acc += missing;
    if e_acc > 0.0 || o_acc > 0.0 {
        match cells.last_mut() {
            Some(last) if e_acc < min_expected => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            _ => cells.push((o_acc, e_acc)),
        }
    }
    let statistic: f64 = cells
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(statistic)
    };
    TestOutcome {
        statistic,
        dof,
        p_value,
    }
}

/// Asymptotic Kolmogorov distribution survival function P(K > x).
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * x * x).exp();
        sum += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1).
pub fn ks_uniform(samples: &[f64]) -> TestOutcome {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let x = x.clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / n - x).max(x - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    // Stephens' small-sample correction
    let p_value = kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    TestOutcome {
        statistic: d,
        dof: xs.len(),
        p_value,
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}
