//! Pearson correlation, least squares and variance inflation.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::TestResult;
use crate::error::{Error, Result};

/// Relative singular-value cutoff for the rank check.
const RANK_TOL: f64 = 1e-10;

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput("input"))
    }
}

pub(crate) fn two_sided_t(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::SeriesTooShort { len: n, lag: 0 });
    }
    check_finite(x)?;
    check_finite(y)?;
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSeries("zero variance".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let t = if r.abs() == 1.0 { f64::INFINITY } else { r * (df / (1.0 - r * r)).sqrt() };
    Ok(TestResult {
        label: "pearson".into(),
        statistic: r,
        p_value: two_sided_t(t, df),
        df,
        df2: None,
        low_power: n < 5,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub r_squared: f64,
    pub n_obs: usize,
    pub df_resid: usize,
    pub log_likelihood: f64,
    /// `2k - 2 ll` with `k` the number of coefficients.
    pub aic: f64,
    /// `k ln(n) - 2 ll`.
    pub bic: f64,
}

/// Ordinary least squares; `x` must already contain any intercept column.
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if n <= k || k == 0 {
        return Err(Error::InvalidArgument(format!("need more rows than columns, got {n}x{k}")));
    }
    check_finite(x.as_slice())?;
    check_finite(y)?;
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 || svd.singular_values.min() <= RANK_TOL * smax {
        return Err(Error::RankDeficient);
    }
    let yv = DVector::from_column_slice(y);
    let beta = svd.solve(&yv, RANK_TOL * smax).map_err(|_| Error::RankDeficient)?;
    let resid = &yv - x * &beta;
    let rss = resid.norm_squared();
    let df_resid = n - k;
    let sigma2 = rss / df_resid as f64;
    // (X^T X)^{-1} = V diag(1/s^2) V^T
    let v_t = svd.v_t.as_ref().expect("computed");
    let inv_s2 = svd.singular_values.map(|s| 1.0 / (s * s));
    let xtx_inv = v_t.transpose() * DMatrix::from_diagonal(&inv_s2) * v_t;
    let std_errors: Vec<f64> = (0..k).map(|j| (sigma2 * xtx_inv[(j, j)]).sqrt()).collect();
    let t_values: Vec<f64> = (0..k)
        .map(|j| if std_errors[j] == 0.0 { f64::INFINITY.copysign(beta[j]) } else { beta[j] / std_errors[j] })
        .collect();
    let p_values = t_values.iter().map(|&t| two_sided_t(t, df_resid as f64)).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tss == 0.0 { 1.0 } else { 1.0 - rss / tss };
    let nf = n as f64;
    let log_likelihood = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + (rss / nf).ln() + 1.0);
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_values,
        p_values,
        residuals: resid.iter().copied().collect(),
        rss,
        r_squared,
        n_obs: n,
        df_resid,
        log_likelihood,
        aic: 2.0 * k as f64 - 2.0 * log_likelihood,
        bic: k as f64 * nf.ln() - 2.0 * log_likelihood,
    })
}

/// Prepends an intercept column.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

/// `1 / (1 - R^2_j)` from regressing column `j` on an intercept and the
/// remaining columns.
pub fn vif(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let p = x.ncols();
    if p < 2 {
        return Err(Error::InvalidArgument("vif needs at least two predictors".into()));
    }
    (0..p)
        .map(|j| {
            let others = with_intercept(&x.clone().remove_column(j));
            let target: Vec<f64> = x.column(j).iter().copied().collect();
            let fit = ols(&others, &target)?;
            let denom = 1.0 - fit.r_squared;
            if denom <= 1e-12 {
                Err(Error::RankDeficient)
            } else {
                Ok(1.0 / denom)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn pearson_cases() {
        assert_abs_diff_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap().statistic, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap().statistic, -1.0, epsilon = 1e-15);
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.5, epsilon = 1e-15);
        // t = 0.5 sqrt(1/0.75) on 1 df; p = 1 - 2 atan(t) / pi
        let t: f64 = 0.5 / 0.75f64.sqrt();
        assert_abs_diff_eq!(r.p_value, 1.0 - 2.0 * t.atan() / std::f64::consts::PI, epsilon = 1e-10);
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateSeries(_))));
    }

    #[test]
    fn exact_line_and_intercept_only() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let x = with_intercept(&DMatrix::from_column_slice(5, 1, &xs));
        let y: Vec<f64> = xs.iter().map(|v| 1.5 - 2.0 * v).collect();
        let fit = ols(&x, &y).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[1], -2.0, epsilon = 1e-12);
        assert!(fit.rss < 1e-20);

        let ones = DMatrix::from_element(4, 1, 1.0);
        let fit = ols(&ones, &[1.0, 2.0, 4.0, 9.0]).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn information_criteria_convention() {
        let x = with_intercept(&DMatrix::from_column_slice(6, 1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let y = [1.1, 1.9, 3.2, 3.9, 5.1, 5.8];
        let fit = ols(&x, &y).unwrap();
        let n = 6.0f64;
        let ll = -n / 2.0 * ((2.0 * std::f64::consts::PI * fit.rss / n).ln() + 1.0);
        assert_abs_diff_eq!(fit.log_likelihood, ll, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.aic, 4.0 - 2.0 * ll, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.bic, 2.0 * n.ln() - 2.0 * ll, epsilon = 1e-12);
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = with_intercept(&DMatrix::from_fn(30, 3, |_, _| StandardNormal.sample(&mut rng)));
        let y: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
        let fit = ols(&x, &y).unwrap();
        let r = DVector::from_vec(fit.residuals);
        for j in 0..x.ncols() {
            assert!(x.column(j).dot(&r).abs() < 1e-8);
        }
    }

    #[test]
    fn slope_recovery_monte_carlo() {
        let mut covered = 0;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..100).map(|i| (i as f64 - 50.0) / 25.0).collect();
            let y: Vec<f64> = xs
                .iter()
                .map(|v| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    2.0 * v + 0.1 * e
                })
                .collect();
            let fit = ols(&with_intercept(&DMatrix::from_column_slice(100, 1, &xs)), &y).unwrap();
            if (fit.coefficients[1] - 2.0).abs() <= 0.05 {
                covered += 1;
            }
        }
        // slope standard error is 0.1 / sqrt(sum (x - mean)^2) = 0.0087
        assert!(covered >= 190, "covered {covered}");
    }

    #[test]
    fn rank_deficiency() {
        let x = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0]);
        assert!(matches!(ols(&x, &[1.0, 2.0, 3.0, 4.0]), Err(Error::RankDeficient)));
        assert!(matches!(vif(&x), Err(Error::RankDeficient)));
    }

    #[test]
    fn vif_cases() {
        // zero-mean orthogonal columns
        let a = [1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0];
        let x = DMatrix::from_fn(4, 2, |i, j| if j == 0 { a[i] } else { b[i] });
        for v in vif(&x).unwrap() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
        let c = 0.19f64.sqrt();
        let x = DMatrix::from_fn(4, 2, |i, j| if j == 0 { a[i] } else { 0.9 * a[i] + c * b[i] });
        for v in vif(&x).unwrap() {
            assert_abs_diff_eq!(v, 1.0 / 0.19, epsilon = 1e-9);
        }
    }
}
