//! Paired t-test with an in-house regularized incomplete beta (so the release
//! build carries no statistics dependency; the reference implementation is a
//! dev-dependency used only as a test oracle).

use crate::{Error, Result};
use std::f64::consts::PI;

/// Paired two-sided t-test result. `zero_variance` marks the degenerate
/// constant-difference paths where the statistic is not finite-sample
/// meaningful: identical samples give (t=0, p=1), a constant nonzero
/// difference gives p=0 with `t` infinite.
#[derive(Debug, Clone, Copy)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub dof: usize,
    pub zero_variance: bool,
}

/// Two-sided paired t-test: d = a−b, t = mean(d)/(std(d, ddof=1)/√n), p from
/// the t-distribution with n−1 degrees of freedom via the regularized
/// incomplete beta function.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs at least 2 pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let std = var.sqrt();
    // constant differences (up to float noise in the subtraction) have no
    // within-pair variance to test against
    if std <= 1e-12 * (1.0 + mean.abs()) {
        return Ok(if mean.abs() <= 1e-12 {
            TTest { t: 0.0, p: 1.0, dof: n - 1, zero_variance: true }
        } else {
            TTest { t: f64::INFINITY.copysign(mean), p: 0.0, dof: n - 1, zero_variance: true }
        });
    }
    let t = mean / (std / (n as f64).sqrt());
    let dof = n - 1;
    let p = t_two_sided_p(t, dof as f64);
    Ok(TTest { t, p, dof, zero_variance: false })
}

/// Two-sided p-value of a t statistic with `dof` degrees of freedom:
/// p = I_{ν/(ν+t²)}(ν/2, 1/2).
pub fn t_two_sided_p(t: f64, dof: f64) -> f64 {
    betainc_reg(dof / 2.0, 0.5, dof / (dof + t * t)).clamp(0.0, 1.0)
}

/// Natural log of the gamma function (Lanczos approximation, g=7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π/sin(πx)
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = 0.99999999999980993;
        for (i, c) in COEFFS.iter().enumerate() {
            acc += c / (x + i as f64 + 1.0);
        }
        let t = x + 7.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Regularized incomplete beta function I_x(a, b) by the standard continued
/// fraction evaluated with the modified Lentz algorithm, using the symmetry
/// I_x(a,b) = 1 − I_{1−x}(b,a) to stay in the fast-converging region.
pub fn betainc_reg(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // x^a (1−x)^b / B(a,b) — symmetric under (a,b,x) → (b,a,1−x)
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_gamma(a) - ln_gamma(b) + ln_gamma(a + b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
