//! Exact and asymptotic hypothesis tests.
//!
//! Exact tests (Fisher, binomial, small-sample Mann–Whitney) work in log space
//! so that counts well beyond 170 do not overflow. Two-sided exact p-values sum
//! every outcome whose point probability does not exceed the observed one.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

/// Relative slack used when comparing point probabilities of tables.
const FISHER_SLACK: f64 = 1e-12;
/// Relative slack for binomial outcome comparison (as in R's `binom.test`).
const BINOM_SLACK: f64 = 1e-7;
/// Largest per-sample size for which Mann–Whitney U is computed exactly.
pub const MWU_EXACT_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tails {
    Two,
    /// Alternative: the first sample / first cell is smaller than expected.
    Less,
    /// Alternative: the first sample / first cell is larger than expected.
    Greater,
}

impl Tails {
    pub fn label(self) -> &'static str {
        match self {
            Tails::Two => "two",
            Tails::Less | Tails::Greater => "one",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: Option<f64>,
    pub cramers_v: Option<f64>,
    /// Odds ratio oriented to be >= 1 (the larger of ad/bc and bc/ad).
    pub odds_ratio: Option<f64>,
    /// Odds ratio as ad/bc, unoriented. Infinite when b or c is zero.
    pub odds_ratio_raw: Option<f64>,
    pub tails: Tails,
    pub method: &'static str,
    /// Set for tests that fell back to a trivial answer (zero margin, zero variance).
    pub degenerate: bool,
}

impl TestResult {
    fn new(statistic: f64, p_value: f64, tails: Tails, method: &'static str) -> Self {
        TestResult {
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            df: None,
            cramers_v: None,
            odds_ratio: None,
            odds_ratio_raw: None,
            tails,
            method,
            degenerate: false,
        }
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// `ln(n!)` table for 0..=n.
fn ln_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        table.push(acc);
    }
    table
}

/// Fisher's exact test on the 2×2 table `[[a, b], [c, d]]`.
///
/// The statistic field carries the sample odds ratio `ad/bc`. With a zero row
/// or column margin the table carries no information: p = 1 and the result is
/// flagged degenerate.
pub fn fisher_exact(a: u64, b: u64, c: u64, d: u64, tails: Tails) -> TestResult {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    let c2 = b + d;
    let odds = odds_ratio(a, b, c, d);
    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        let mut res = TestResult::new(odds.unwrap_or(f64::NAN), 1.0, tails, "fisher-exact");
        res.degenerate = true;
        return res;
    }
    let lf = ln_factorials(n);
    // log P(X = x) where X = top-left cell, hypergeometric(N, r1, c1).
    let lpmf = |x: u64| -> f64 {
        lf[r1 as usize] - lf[x as usize] - lf[(r1 - x) as usize] + lf[r2 as usize]
            - lf[(c1 - x) as usize]
            - lf[(r2 - (c1 - x)) as usize]
            - (lf[n as usize] - lf[c1 as usize] - lf[(n - c1) as usize])
    };
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let obs = lpmf(a);
    let p = match tails {
        Tails::Less => (lo..=a).map(|x| lpmf(x).exp()).sum::<f64>(),
        Tails::Greater => (a..=hi).map(|x| lpmf(x).exp()).sum::<f64>(),
        Tails::Two => {
            let threshold = obs + FISHER_SLACK.ln_1p();
            (lo..=hi)
                .map(lpmf)
                .filter(|&l| l <= threshold)
                .map(f64::exp)
                .sum::<f64>()
        }
    };
    let mut res = TestResult::new(odds.unwrap_or(f64::NAN), p, tails, "fisher-exact");
    res.odds_ratio_raw = odds;
    res.odds_ratio = odds.map(orient_odds);
    res
}

fn odds_ratio(a: u64, b: u64, c: u64, d: u64) -> Option<f64> {
    let num = (a * d) as f64;
    let den = (b * c) as f64;
    if num == 0.0 && den == 0.0 {
        None
    } else if den == 0.0 {
        Some(f64::INFINITY)
    } else {
        Some(num / den)
    }
}

fn orient_odds(or: f64) -> f64 {
    if or.is_infinite() || or == 0.0 {
        f64::INFINITY
    } else if or < 1.0 {
        1.0 / or
    } else {
        or
    }
}

/// Exact binomial test of `k` successes in `n` trials against `p0`.
pub fn binomial_test(k: u64, n: u64, p0: f64, tails: Tails) -> TestResult {
    assert!(k <= n, "binomial_test: k > n");
    assert!(p0 > 0.0 && p0 < 1.0, "binomial_test: p0 outside (0,1)");
    let lf = ln_factorials(n);
    let (lp, lq) = (p0.ln(), (1.0 - p0).ln());
    let lpmf = |x: u64| -> f64 {
        lf[n as usize] - lf[x as usize] - lf[(n - x) as usize] + x as f64 * lp + (n - x) as f64 * lq
    };
    let p = match tails {
        Tails::Less => (0..=k).map(|x| lpmf(x).exp()).sum::<f64>(),
        Tails::Greater => (k..=n).map(|x| lpmf(x).exp()).sum::<f64>(),
        Tails::Two => {
            let threshold = lpmf(k) + BINOM_SLACK.ln_1p();
            (0..=n)
                .map(lpmf)
                .filter(|&l| l <= threshold)
                .map(f64::exp)
                .sum::<f64>()
        }
    };
    TestResult::new(k as f64 / n as f64, p, tails, "binomial-exact")
}

/// Pearson χ² on a 2×2 table with Cramér's V and odds ratio.
///
/// `yates` applies the continuity correction, capped so that no cell moves
/// past its expected count (the correction never flips the sign of ad − bc).
pub fn chi_square_2x2(a: u64, b: u64, c: u64, d: u64, yates: bool) -> crate::Result<TestResult> {
    let (r1, r2, c1, c2) = (a + b, c + d, a + c, b + d);
    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        return Err(crate::Error::InvalidArgument(format!(
            "chi-square: zero margin in table ({a},{b},{c},{d})"
        )));
    }
    let n = (r1 + r2) as f64;
    let cross = (a as f64 * d as f64 - b as f64 * c as f64).abs();
    let adj = if yates {
        (cross - n / 2.0).max(0.0)
    } else {
        cross
    };
    let denom = r1 as f64 * r2 as f64 * c1 as f64 * c2 as f64;
    let chi2 = n * adj * adj / denom;
    let dist = ChiSquared::new(1.0).expect("df=1");
    let mut res = TestResult::new(
        chi2,
        dist.sf(chi2),
        Tails::Two,
        if yates {
            "chi-square-yates"
        } else {
            "chi-square"
        },
    );
    res.df = Some(1.0);
    res.cramers_v = Some((chi2 / n).sqrt());
    let or = odds_ratio(a, b, c, d);
    res.odds_ratio_raw = or;
    res.odds_ratio = or.map(orient_odds);
    Ok(res)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test with Satterthwaite degrees of freedom.
pub fn welch_t(s1: &[f64], s2: &[f64], tails: Tails) -> crate::Result<TestResult> {
    if s1.len() < 2 || s2.len() < 2 {
        return Err(crate::Error::InvalidArgument(
            "welch t-test needs at least 2 values per sample".into(),
        ));
    }
    let (m1, v1) = mean_var(s1);
    let (m2, v2) = mean_var(s2);
    let (n1, n2) = (s1.len() as f64, s2.len() as f64);
    let se2 = v1 / n1 + v2 / n2;
    if se2 == 0.0 {
        let diff = m1 - m2;
        if diff == 0.0 {
            let mut res = TestResult::new(0.0, 1.0, tails, "welch-t");
            res.degenerate = true;
            return Ok(res);
        }
        let t = diff.signum() * f64::INFINITY;
        let p = match tails {
            Tails::Two => 0.0,
            Tails::Less => f64::from(u8::from(diff > 0.0)),
            Tails::Greater => f64::from(u8::from(diff < 0.0)),
        };
        let mut res = TestResult::new(t, p, tails, "welch-t");
        res.degenerate = true;
        return Ok(res);
    }
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / ((v1 / n1).powi(2) / (n1 - 1.0) + (v2 / n2).powi(2) / (n2 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| crate::Error::Numerical(e.to_string()))?;
    let p = match tails {
        Tails::Two => 2.0 * dist.sf(t.abs()),
        Tails::Less => dist.cdf(t),
        Tails::Greater => dist.sf(t),
    };
    let mut res = TestResult::new(t, p, tails, "welch-t");
    res.df = Some(df);
    Ok(res)
}

/// Midranks (1-based) of the pooled sample, plus the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = r;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Mann–Whitney U test. The statistic is U for `s1`.
///
/// When both samples have at most [`MWU_EXACT_MAX`] values the p-value comes
/// from the exact permutation distribution of the (mid)rank sum, computed by
/// dynamic programming over doubled ranks; otherwise a tie-corrected normal
/// approximation with continuity correction is used.
pub fn mann_whitney_u(s1: &[f64], s2: &[f64], tails: Tails) -> crate::Result<TestResult> {
    if s1.is_empty() || s2.is_empty() {
        return Err(crate::Error::InvalidArgument(
            "mann-whitney needs non-empty samples".into(),
        ));
    }
    let (n1, n2) = (s1.len(), s2.len());
    let pooled: Vec<f64> = s1.iter().chain(s2).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let mean_u = (n1 * n2) as f64 / 2.0;
    if n1 <= MWU_EXACT_MAX && n2 <= MWU_EXACT_MAX {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let dist = rank_sum_distribution(&doubled, n1);
        let total: f64 = dist.iter().sum();
        let obs = (2.0 * r1).round() as usize;
        let center = n1 * (pooled.len() + 1); // doubled expected rank sum
        let p = match tails {
            Tails::Less => dist[..=obs].iter().sum::<f64>() / total,
            Tails::Greater => dist[obs..].iter().sum::<f64>() / total,
            Tails::Two => {
                let dev = obs.abs_diff(center);
                dist.iter()
                    .enumerate()
                    .filter(|(s, w)| **w > 0.0 && s.abs_diff(center) >= dev)
                    .map(|(_, w)| w)
                    .sum::<f64>()
                    / total
            }
        };
        return Ok(TestResult::new(u, p, tails, "mann-whitney-exact"));
    }
    let n = (n1 + n2) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        let mut res = TestResult::new(u, 1.0, tails, "mann-whitney-normal");
        res.degenerate = true;
        return Ok(res);
    }
    let sd = var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let d = u - mean_u;
    let p = match tails {
        Tails::Two => {
            let z = ((d.abs() - 0.5).max(0.0)) / sd;
            2.0 * normal.sf(z)
        }
        Tails::Greater => normal.sf((d - 0.5) / sd),
        Tails::Less => normal.cdf((d + 0.5) / sd),
    };
    Ok(TestResult::new(u, p, tails, "mann-whitney-normal"))
}

/// Number of size-`k` subsets of `items` per total of their values.
fn rank_sum_distribution(items: &[usize], k: usize) -> Vec<f64> {
    let max_sum: usize = items.iter().sum();
    // ways[j][s]: subsets of size j with sum s.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; k + 1];
    ways[0][0] = 1.0;
    for &v in items {
        for j in (1..=k).rev() {
            let (lower, upper) = ways.split_at_mut(j);
            let prev = &lower[j - 1];
            let cur = &mut upper[0];
            for s in (v..=max_sum).rev() {
                if prev[s - v] != 0.0 {
                    cur[s] += prev[s - v];
                }
            }
        }
    }
    ways.swap_remove(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fisher_symmetric_table_is_one() {
        let r = fisher_exact(5, 5, 5, 5, Tails::Two);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fisher_zero_margin_degenerate() {
        let r = fisher_exact(0, 0, 3, 4, Tails::Two);
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn fisher_patep_not_significant() {
        let r = fisher_exact(26, 4, 21, 9, Tails::Two);
        assert!(r.p_value > 0.01);
        // scipy.stats.fisher_exact gives 0.20923627896279948
        assert!((r.p_value - 0.209_236_278_962_799_5).abs() < 1e-10);
    }

    #[test]
    fn binomial_symmetric_midpoint() {
        let r = binomial_test(50, 100, 0.5, Tails::Two);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_reported_value() {
        let r = binomial_test(101, 171, 0.5, Tails::Two);
        assert!(r.p_value <= 0.05);
        assert!((r.p_value - 0.01).abs() <= 0.02);
    }

    #[test]
    fn chi_square_proportional_table() {
        let r = chi_square_2x2(10, 20, 30, 60, false).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn chi_square_zero_margin_errors() {
        assert!(chi_square_2x2(0, 0, 1, 2, true).is_err());
    }

    #[test]
    fn chi_square_marianus_table() {
        let r = chi_square_2x2(121, 806, 216, 53, true).unwrap();
        assert!((r.statistic - 462.54).abs() < 0.5);
        assert!((r.cramers_v.unwrap() - 0.62).abs() < 0.01);
        assert!((r.odds_ratio.unwrap() - 27.15).abs() < 0.01);
    }

    #[test]
    fn odds_ratio_zero_cell_is_infinite() {
        let r = chi_square_2x2(5, 0, 3, 4, false).unwrap();
        assert!(r.odds_ratio_raw.unwrap().is_infinite());
    }

    #[test]
    fn welch_identical_samples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t(&s, &s, Tails::Two).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn welch_constant_equal_samples_degenerate() {
        let r = welch_t(&[2.0, 2.0], &[2.0, 2.0, 2.0], Tails::Two).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn welch_needs_two_values() {
        assert!(welch_t(&[1.0], &[1.0, 2.0], Tails::Two).is_err());
    }

    #[test]
    fn separated_samples_are_significant() {
        let a = [1.0, 2.0, 3.0];
        let b = [101.0, 102.0, 103.0];
        assert!(welch_t(&a, &b, Tails::Two).unwrap().p_value < 0.01);
        // exact two-sided MWU with n1=n2=3 bottoms out at 2/20 = 0.1; one-sided 0.05
        let u = mann_whitney_u(&a, &b, Tails::Less).unwrap();
        assert_eq!(u.statistic, 0.0);
        assert!((u.p_value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn mann_whitney_identical_samples() {
        let s = [3.0, 1.0, 4.0, 1.0, 5.0];
        let r = mann_whitney_u(&s, &s, Tails::Two).unwrap();
        assert_eq!(r.statistic, 12.5);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mann_whitney_large_uses_normal() {
        let a: Vec<f64> = (0..30).map(f64::from).collect();
        let b: Vec<f64> = (100..130).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b, Tails::Two).unwrap();
        assert_eq!(r.method, "mann-whitney-normal");
        assert!(r.p_value < 1e-6);
    }
}
