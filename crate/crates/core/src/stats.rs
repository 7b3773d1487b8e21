//! Correlation, separability and distance primitives.
//!
//! Sums run sequentially in input order, so results are bit-stable for a
//! given input order.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("correlation undefined: {0} input is constant")]
    ConstantInput(&'static str),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("analytic correlation undefined: nonpositive variance term")]
    NonPositiveVariance,
    #[error("empty class in ROC computation")]
    EmptyClass,
    #[error("participants with a single rating: {0:?}")]
    SingleRating(Vec<String>),
    #[error("cannot form {k} bins from {n} values")]
    TooManyBins { k: usize, n: usize },
    #[error("zero vector in cosine distance")]
    ZeroVector,
    #[error("quantile level {0} outside [0, 1]")]
    InvalidQuantile(f64),
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n − 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    covariance(xs, xs)
}

/// Sample covariance (n − 1 denominator).
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample Pearson correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { needed: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || x.iter().all(|v| *v == x[0]) {
        return Err(StatsError::ConstantInput("first"));
    }
    if syy == 0.0 || y.iter().all(|v| *v == y[0]) {
        return Err(StatsError::ConstantInput("second"));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// corr(X, X + Y + c) from the moments of X and Y.
pub fn rho_analytic(var_x: f64, var_y: f64, cov_xy: f64) -> Result<f64, StatsError> {
    let var_z = var_x + var_y + 2.0 * cov_xy;
    if !(var_x > 0.0) || !(var_z > 0.0) {
        return Err(StatsError::NonPositiveVariance);
    }
    Ok((var_x + cov_xy) / libm::sqrt(var_x * var_z))
}

/// Average ranks (1-based) with ties sharing their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]).then(i.cmp(&j)));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    pearson_r(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RocResult {
    /// (false-positive rate, true-positive rate), from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocResult {
    /// Trapezoidal area under `points`.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }
}

/// ROC curve and AUC for positives (class 1) against negatives (class 0).
///
/// The AUC is the exact Mann–Whitney statistic P(pos > neg) + ½·P(tie); the
/// curve sweeps thresholds over the pooled distinct scores (score ≥ t ⇒
/// positive) and is meant for plotting.
pub fn roc_auc(scores_pos: &[f64], scores_neg: &[f64]) -> Result<RocResult, StatsError> {
    if scores_pos.is_empty() || scores_neg.is_empty() {
        return Err(StatsError::EmptyClass);
    }
    if scores_pos.iter().chain(scores_neg).any(|v| v.is_nan()) {
        return Err(StatsError::NonFinite);
    }
    let (np, nn) = (scores_pos.len(), scores_neg.len());
    let mut pooled: Vec<(f64, bool)> = scores_pos
        .iter()
        .map(|&s| (s, true))
        .chain(scores_neg.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let all: Vec<f64> = pooled.iter().map(|p| p.0).collect();
    let ranks = average_ranks(&all);
    let rank_sum: f64 = pooled
        .iter()
        .zip(&ranks)
        .filter(|(p, _)| p.1)
        .map(|(_, r)| r)
        .sum();
    let u = rank_sum - (np * (np + 1)) as f64 / 2.0;
    let auc = u / (np as f64 * nn as f64);

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = pooled.len();
    while i > 0 {
        let t = pooled[i - 1].0;
        while i > 0 && pooled[i - 1].0 == t {
            if pooled[i - 1].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i -= 1;
        }
        points.push((fp as f64 / nn as f64, tp as f64 / np as f64));
    }
    Ok(RocResult { points, auc })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatingRecord {
    pub participant: String,
    pub item: String,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZScored {
    /// Same order as the input.
    pub records: Vec<RatingRecord>,
    /// Participants whose ratings had zero variance; their z-scores are 0.
    pub zero_variance: Vec<String>,
}

/// Centers and scales ratings within each participant (sample sd).
pub fn zscore_within(ratings: &[RatingRecord]) -> Result<ZScored, StatsError> {
    if ratings.iter().any(|r| !r.rating.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut by_participant: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in ratings {
        by_participant.entry(&r.participant).or_default().push(r.rating);
    }
    let single: Vec<String> = by_participant
        .iter()
        .filter(|(_, v)| v.len() < 2)
        .map(|(p, _)| String::from(*p))
        .collect();
    if !single.is_empty() {
        return Err(StatsError::SingleRating(single));
    }
    let mut moments: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    let mut zero_variance = Vec::new();
    for (p, v) in &by_participant {
        let sd = if v.iter().all(|x| *x == v[0]) {
            0.0
        } else {
            libm::sqrt(variance(v))
        };
        if sd == 0.0 {
            zero_variance.push(String::from(*p));
        }
        moments.insert(p, (mean(v), sd));
    }
    let records = ratings
        .iter()
        .map(|r| {
            let (m, sd) = moments[r.participant.as_str()];
            let z = if sd == 0.0 { 0.0 } else { (r.rating - m) / sd };
            RatingRecord {
                participant: r.participant.clone(),
                item: r.item.clone(),
                rating: z,
            }
        })
        .collect();
    Ok(ZScored {
        records,
        zero_variance,
    })
}

/// Assigns each value to one of `k` equally-sized bins by rank; ties keep
/// their input order. Bin sizes differ by at most one.
pub fn quantile_bins(values: &[f64], k: usize) -> Result<Vec<usize>, StatsError> {
    let n = values.len();
    if k == 0 || k > n {
        return Err(StatsError::TooManyBins { k, n });
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(StatsError::NonFinite);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let mut bins = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        bins[i] = rank * k / n;
    }
    Ok(bins)
}

/// Empirical quantile by linear interpolation between order statistics
/// (h = (n − 1)·q).
pub fn quantile(values: &[f64], q: f64) -> Result<f64, StatsError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(StatsError::InvalidQuantile(q));
    }
    if values.is_empty() {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Minimal number of insertions, deletions and substitutions turning `a`
/// into `b`.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.len() < b.len() {
        return levenshtein(b, a);
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = (up + 1).min(row[j] + 1).min(diag + usize::from(x != y));
            diag = up;
        }
    }
    row[b.len()]
}

/// Character-level Levenshtein distance.
pub fn levenshtein_chars(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

/// 1 − cos(u, v).
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, StatsError> {
    if u.len() != v.len() {
        return Err(StatsError::LengthMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(StatsError::ZeroVector);
    }
    let cos = (dot / (libm::sqrt(nu) * libm::sqrt(nv))).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson_r(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        let y = [1.1, 1.9, 3.2, 3.8];
        assert!((pearson_r(&x, &y).unwrap() - 0.990847).abs() < 1e-4);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(
            pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::ConstantInput("first"))
        );
        assert!(pearson_r(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rho_analytic_examples() {
        assert!((rho_analytic(1.0, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((rho_analytic(1.0, 1.0, 0.0).unwrap() - 0.70711).abs() < 1e-5);
        assert!(rho_analytic(1.0, 1.0, -0.9).unwrap() > 0.0);
        assert!(rho_analytic(0.0, 1.0, 0.0).is_err());
        assert!(rho_analytic(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[3.0, 4.0], &[1.0, 2.0]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap().auc, 0.5);
        assert_eq!(roc_auc(&[2.0, 3.0], &[1.0, 2.5]).unwrap().auc, 0.75);
        assert_eq!(roc_auc(&[], &[1.0]), Err(StatsError::EmptyClass));
    }

    #[test]
    fn roc_curve_shape() {
        let r = roc_auc(&[0.9, 0.4, 0.4, 0.7], &[0.1, 0.4, 0.8]).unwrap();
        assert_eq!(r.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.points.last(), Some(&(1.0, 1.0)));
        for w in r.points.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        assert!((r.trapezoid_area() - r.auc).abs() < 1e-12);
    }

    fn rec(p: &str, item: &str, rating: f64) -> RatingRecord {
        RatingRecord {
            participant: p.to_string(),
            item: item.to_string(),
            rating,
        }
    }

    #[test]
    fn zscore_examples() {
        let out = zscore_within(&[rec("a", "i1", 3.0), rec("a", "i2", 5.0)]).unwrap();
        assert!((out.records[0].rating + 0.70711).abs() < 1e-5);
        assert!((out.records[1].rating - 0.70711).abs() < 1e-5);
        let flat = zscore_within(&[rec("b", "i1", 4.0), rec("b", "i2", 4.0), rec("b", "i3", 4.0)]).unwrap();
        assert!(flat.records.iter().all(|r| r.rating == 0.0));
        assert_eq!(flat.zero_variance, ["b"]);
        assert_eq!(
            zscore_within(&[rec("a", "i1", 3.0), rec("a", "i2", 5.0), rec("c", "i1", 2.0)]),
            Err(StatsError::SingleRating(alloc::vec!["c".to_string()]))
        );
    }

    #[test]
    fn bins_examples() {
        let v: Vec<f64> = (0..10).map(|i| (i * 7 % 10) as f64).collect();
        let b = quantile_bins(&v, 10).unwrap();
        let mut sorted = b.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        let v: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let b = quantile_bins(&v, 10).unwrap();
        for (x, bin) in v.iter().zip(&b) {
            assert_eq!(*bin, (*x as usize) / 10);
        }
        assert!(quantile_bins(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn bins_break_ties_by_input_order() {
        let b = quantile_bins(&[1.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(b, [0, 0, 1, 1]);
    }

    #[test]
    fn quantile_type7() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 100.0], 0.75).unwrap(), 27.25);
        assert_eq!(quantile(&[4.0, 1.0, 3.0], 1.0).unwrap(), 4.0);
        assert_eq!(quantile(&[4.0, 1.0, 3.0], 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&[1.0, 3.0], 0.5).unwrap(), 2.0);
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein_chars("kitten", "kitten"), 0);
        assert_eq!(levenshtein_chars("kitten", "sitting"), 3);
        assert_eq!(levenshtein_chars("abc", ""), 3);
        assert_eq!(levenshtein_chars("", "abcd"), 4);
        assert_eq!(levenshtein_chars("月亮出来", "月亮出"), 1);
        assert_eq!(levenshtein(&["The", "moon"], &["A", "moon"]), 1);
    }

    #[test]
    fn cosine_examples() {
        let u = [1.0, 2.0, 3.0];
        assert!(cosine_distance(&u, &u).unwrap().abs() < 1e-15);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_distance(&u, &[-1.0, -2.0, -3.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(cosine_distance(&u, &[0.0; 3]), Err(StatsError::ZeroVector));
    }

    #[test]
    fn spearman_of_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [10.0, 8.0, 7.0, 1.0, 0.5];
        assert!((spearman_rho(&x, &y).unwrap() + 1.0).abs() < 1e-15);
    }

    /// Classic full-matrix DP, kept separate from the two-row version.
    fn lev_oracle(a: &[u8], b: &[u8]) -> usize {
        let mut d = alloc::vec![alloc::vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
            }
        }
        d[a.len()][b.len()]
    }

    /// P(pos > neg) + ½ P(tie) by brute force over all cross pairs.
    fn auc_oracle(pos: &[f64], neg: &[f64]) -> f64 {
        let mut s = 0.0;
        for p in pos {
            for n in neg {
                s += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        s / (pos.len() * neg.len()) as f64
    }

    proptest! {
        #[test]
        fn levenshtein_matches_oracle_and_triangle(a in "[abc]{0,7}", b in "[abc]{0,7}", c in "[abc]{0,7}") {
            let (a, b, c) = (a.as_bytes(), b.as_bytes(), c.as_bytes());
            prop_assert_eq!(levenshtein(a, b), lev_oracle(a, b));
            prop_assert!(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
        }

        #[test]
        fn auc_matches_brute_force(pos in prop::collection::vec(0u8..6, 1..15), neg in prop::collection::vec(0u8..6, 1..15)) {
            let pos: Vec<f64> = pos.into_iter().map(f64::from).collect();
            let neg: Vec<f64> = neg.into_iter().map(f64::from).collect();
            let r = roc_auc(&pos, &neg).unwrap();
            prop_assert!((r.auc - auc_oracle(&pos, &neg)).abs() < 1e-12);
            prop_assert!((r.trapezoid_area() - r.auc).abs() < 1e-12);
        }

        #[test]
        fn auc_complement_and_monotone_invariance(pos in prop::collection::hash_set(-1000i32..1000, 1..20), neg in prop::collection::hash_set(1000i32..3000, 1..20), shift in -5.0f64..5.0) {
            // Disjoint ranges keep the pooled scores tie-free.
            let pos: Vec<f64> = pos.into_iter().map(|v| f64::from(v) / 10.0).collect();
            let neg: Vec<f64> = neg.into_iter().map(|v| f64::from(v) / 10.0 - 149.95).collect();
            let a = roc_auc(&pos, &neg).unwrap().auc;
            prop_assert!((a + roc_auc(&neg, &pos).unwrap().auc - 1.0).abs() < 1e-12);
            let f = |x: &f64| libm::exp(x / 50.0) + shift;
            let pt: Vec<f64> = pos.iter().map(f).collect();
            let nt: Vec<f64> = neg.iter().map(f).collect();
            prop_assert_eq!(roc_auc(&pt, &nt).unwrap().auc, a);
        }

        #[test]
        fn pearson_affine_invariant(xs in prop::collection::vec(-100.0f64..100.0, 3..30), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * x + i as f64).collect();
            let Ok(r) = pearson_r(&xs, &ys) else { return Ok(()) };
            let xt: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            prop_assert!((pearson_r(&xt, &ys).unwrap() - r).abs() < 1e-9);
        }

        #[test]
        fn bins_balanced(values in prop::collection::vec(-1e6f64..1e6, 1..200), k in 1usize..12) {
            prop_assume!(k <= values.len());
            let bins = quantile_bins(&values, k).unwrap();
            let mut sizes = alloc::vec![0usize; k];
            for b in &bins { sizes[*b] += 1; }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
            for i in 0..values.len() {
                for j in 0..values.len() {
                    if values[i] < values[j] { prop_assert!(bins[i] <= bins[j]); }
                }
            }
        }

        #[test]
        fn zscore_centers(ratings in prop::collection::vec((0usize..4, 1.0f64..7.0), 8..40)) {
            let recs: Vec<RatingRecord> = ratings.iter().enumerate()
                .map(|(i, (p, r))| rec(&alloc::format!("p{p}"), &alloc::format!("i{i}"), *r)).collect();
            let Ok(out) = zscore_within(&recs) else { return Ok(()) };
            let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
            for r in &out.records {
                let e = sums.entry(r.participant.clone()).or_default();
                e.0 += r.rating;
                e.1 += 1;
            }
            for (_, (s, n)) in sums { prop_assert!((s / n as f64).abs() < 1e-8); }
        }
    }

    #[test]
    fn shuffled_bins_match_sorted_assignment() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in [10usize, 37, 100] {
            let sorted: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - 3.0).collect();
            let expected = quantile_bins(&sorted, 7.min(n)).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let shuffled: Vec<f64> = perm.iter().map(|&i| sorted[i]).collect();
            let bins = quantile_bins(&shuffled, 7.min(n)).unwrap();
            let mut unshuffled = alloc::vec![0; n];
            for (pos, &orig) in perm.iter().enumerate() {
                unshuffled[orig] = bins[pos];
            }
            assert_eq!(unshuffled, expected);
        }
    }
}
