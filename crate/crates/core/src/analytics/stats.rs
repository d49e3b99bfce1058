//! Two-group inferential statistics: descriptive summaries, the pooled
//! (equal-variance) independent-samples t-test with effect sizes, and the
//! mean-centred Levene test.

use serde::{Deserialize, Serialize};

use super::special::{f_survival, student_t_quantile, student_t_two_tailed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
    /// Standard error of the mean, `sd / sqrt(n)`.
    pub se: f64,
}

impl GroupSummary {
    /// Builds a summary from published descriptives.
    pub fn from_moments(n: usize, mean: f64, sd: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation(format!("group needs n >= 2, got {n}")));
        }
        if sd.is_nan() || sd < 0.0 || !sd.is_finite() || !mean.is_finite() {
            return Err(Error::validation(format!("invalid moments mean={mean} sd={sd}")));
        }
        Ok(Self { n, mean, sd, se: sd / (n as f64).sqrt() })
    }

    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }
}

/// Mean, sample SD and SE of `values`.
pub fn summarize(values: &[f64]) -> Result<GroupSummary> {
    let n = values.len();
    if n < 2 {
        return Err(Error::validation(format!(
            "standard deviation needs at least 2 values, got {n}"
        )));
    }
    // Welford's update avoids cancellation on large offsets.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let sd = (m2 / (n - 1) as f64).sqrt();
    GroupSummary::from_moments(n, mean, sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub t: f64,
    pub df: usize,
    pub p_two_tailed: f64,
    /// Group 1 mean minus group 2 mean.
    pub mean_diff: f64,
    /// Standard error of the mean difference.
    pub se_dm: f64,
    pub ci95: (f64, f64),
    /// Mean difference over `sqrt((s1² + s2²) / 2)`.
    pub cohens_d: f64,
    /// Mean difference over the pooled SD.
    pub cohens_d_pooled: f64,
    pub alpha: f64,
    pub significant: bool,
}

/// Independent-samples t-test assuming equal variances.
pub fn pooled_t_test(g1: &GroupSummary, g2: &GroupSummary, alpha: f64) -> Result<GroupComparison> {
    if g1.n < 2 || g2.n < 2 {
        return Err(Error::validation("each group needs n >= 2"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (n1, n2) = (g1.n as f64, g2.n as f64);
    let df = g1.n + g2.n - 2;
    let pooled_var = ((n1 - 1.0) * g1.variance() + (n2 - 1.0) * g2.variance()) / df as f64;
    let sp = pooled_var.sqrt();
    let mean_diff = g1.mean - g2.mean;
    let t_crit = student_t_quantile(1.0 - alpha / 2.0, df as f64);

    if sp == 0.0 {
        if mean_diff != 0.0 {
            return Err(Error::Degenerate(
                "zero pooled variance with unequal means; t is unbounded".into(),
            ));
        }
        return Ok(GroupComparison {
            t: 0.0,
            df,
            p_two_tailed: 1.0,
            mean_diff,
            se_dm: 0.0,
            ci95: (0.0, 0.0),
            cohens_d: 0.0,
            cohens_d_pooled: 0.0,
            alpha,
            significant: false,
        });
    }

    let se_dm = sp * (1.0 / n1 + 1.0 / n2).sqrt();
    let t = mean_diff / se_dm;
    let p = student_t_two_tailed(t, df as f64);
    let half_width = t_crit * se_dm;
    let sd_avg = ((g1.variance() + g2.variance()) / 2.0).sqrt();
    Ok(GroupComparison {
        t,
        df,
        p_two_tailed: p,
        mean_diff,
        se_dm,
        ci95: (mean_diff - half_width, mean_diff + half_width),
        cohens_d: mean_diff / sd_avg,
        cohens_d_pooled: mean_diff / sp,
        alpha,
        significant: p < alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeveneResult {
    pub w: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
}

/// Classical Levene test: one-way ANOVA on `|x − group mean|`.
pub fn levene_test(groups: &[&[f64]]) -> Result<LeveneResult> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::validation("Levene's test needs at least 2 groups"));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::validation(format!(
            "every group needs n >= 2 (found a group of {})",
            g.len()
        )));
    }
    let deviations: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            g.iter().map(|x| (x - mean).abs()).collect()
        })
        .collect();
    let total_n: usize = deviations.iter().map(Vec::len).sum();
    let grand_mean = deviations.iter().flatten().sum::<f64>() / total_n as f64;

    let mut between = 0.0;
    let mut within = 0.0;
    for z in &deviations {
        let zbar = z.iter().sum::<f64>() / z.len() as f64;
        between += z.len() as f64 * (zbar - grand_mean).powi(2);
        within += z.iter().map(|v| (v - zbar).powi(2)).sum::<f64>();
    }
    let df_between = k - 1;
    let df_within = total_n - k;
    if within == 0.0 {
        return Ok(LeveneResult { w: 0.0, df_between, df_within, p: 1.0 });
    }
    let w = (df_within as f64 / df_between as f64) * between / within;
    Ok(LeveneResult {
        w,
        df_between,
        df_within,
        p: f_survival(w, df_between as f64, df_within as f64),
    })
}
