//! Exact minimization of empirical risk over the threshold of `1{s ≥ c}`.

use super::CombinerError;
use crate::loss::LossSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdFit {
    pub threshold: f64,
    pub risk: f64,
}

/// Strictly below `v`.
fn below(v: f64, gap: f64) -> f64 {
    let mut c = v - gap;
    let mut step = gap;
    while c >= v {
        step = (step * 2.0).max(v.abs() * f64::EPSILON);
        c = v - step;
    }
    c
}

/// Strictly above `v`.
fn above(v: f64, gap: f64) -> f64 {
    -below(-v, gap)
}

/// A cut between adjacent distinct scores `lo < hi` such that `lo < c ≤ hi`.
fn cut(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo && m <= hi {
        m
    } else {
        hi
    }
}

/// Sorted distinct scores with per-value class counts `(value, negatives, positives)`.
pub(crate) fn grouped(scores: &[f64], labels: &[u8]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for i in order {
        let pos = usize::from(labels[i] == 1);
        match groups.last_mut() {
            Some(g) if g.0 == scores[i] => {
                g.1 += 1 - pos;
                g.2 += pos;
            }
            _ => groups.push((scores[i], 1 - pos, pos)),
        }
    }
    groups
}

/// Candidate thresholds in increasing order: one below the minimum, one
/// between each pair of adjacent distinct scores, one above the maximum.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = scores.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    let mut c = Vec::with_capacity(u.len() + 1);
    if let (Some(&lo), Some(&hi)) = (u.first(), u.last()) {
        c.push(below(lo, 1.0));
        c.extend(u.windows(2).map(|w| cut(w[0], w[1])));
        c.push(above(hi, 1.0));
    }
    c
}

/// Minimize the empirical risk over [`candidate_thresholds`] in one sorted
/// sweep. Ties go to the largest minimizing candidate.
pub fn threshold_line_search(scores: &[f64], labels: &[u8], spec: LossSpec) -> Result<ThresholdFit, CombinerError> {
    if scores.len() != labels.len() {
        return Err(CombinerError::LengthMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(CombinerError::EmptyInput);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(CombinerError::NonFinite);
    }
    let n = scores.len();
    let groups = grouped(scores, labels);
    let negatives: usize = groups.iter().map(|g| g.1).sum();

    // candidate j classifies the first j groups as negative
    let (mut fneg, mut fpos) = (0usize, negatives);
    let mut best_j = 0;
    let mut best_risk = spec.risk_from_counts(fneg, fpos, n);
    for (j, g) in groups.iter().enumerate() {
        fneg += g.2;
        fpos -= g.1;
        let r = spec.risk_from_counts(fneg, fpos, n);
        if r <= best_risk {
            best_risk = r;
            best_j = j + 1;
        }
    }
    let threshold = if best_j == 0 {
        below(groups[0].0, 1.0)
    } else if best_j == groups.len() {
        above(groups[groups.len() - 1].0, 1.0)
    } else {
        cut(groups[best_j - 1].0, groups[best_j].0)
    };
    Ok(ThresholdFit {
        threshold,
        risk: best_risk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::empirical_risk;
    use proptest::prelude::*;

    fn spec(l: f64) -> LossSpec {
        LossSpec::new(l).unwrap()
    }

    #[test]
    fn perfect_separation() {
        let f = threshold_line_search(&[0.1, 0.4, 0.6, 0.9], &[0, 0, 1, 1], spec(0.5)).unwrap();
        assert_eq!(f.threshold, 0.5);
        assert_eq!(f.risk, 0.0);
    }

    #[test]
    fn all_negative_labels() {
        let f = threshold_line_search(&[0.3, 0.1, 0.7], &[0, 0, 0], spec(0.5)).unwrap();
        assert_eq!(f.threshold, 0.7 + 1.0);
        assert_eq!(f.risk, 0.0);
    }

    #[test]
    fn ties_prefer_largest_candidate() {
        // every cut misclassifies exactly one point at equal cost
        let f = threshold_line_search(&[0.0, 1.0], &[1, 0], spec(0.5)).unwrap();
        // candidates -1, 0.5, 2 give risks 0.25, 0.5, 0.25
        assert_eq!(f.threshold, 2.0);
        assert_eq!(f.risk, 0.25);
    }

    #[test]
    fn adjacent_doubles_cut_correctly() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let c = cut(lo, hi);
        assert!(lo < c && c <= hi);
        let f = threshold_line_search(&[lo, hi], &[0, 1], spec(0.5)).unwrap();
        assert_eq!(f.risk, 0.0);
        assert_eq!(empirical_risk(&[0, 1], &[lo, hi], f.threshold, spec(0.5)).unwrap().risk, 0.0);
    }

    #[test]
    fn huge_scores_still_get_outer_candidates() {
        let c = candidate_thresholds(&[1e300, -1e300]);
        assert!(c[0] < -1e300 && c[2] > 1e300);
    }

    #[test]
    fn errors() {
        assert_eq!(threshold_line_search(&[], &[], spec(0.5)), Err(CombinerError::EmptyInput));
        assert!(threshold_line_search(&[0.1], &[0, 1], spec(0.5)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn matches_enumeration(
            (labels, scores) in (1usize..200).prop_flat_map(|n| (
                proptest::collection::vec(0u8..2, n),
                proptest::collection::vec((0u8..20).prop_map(|v| f64::from(v) / 10.0), n),
            )),
            l in 0.05f64..0.95,
        ) {
            let s = spec(l);
            let fit = threshold_line_search(&scores, &labels, s).unwrap();
            let mut best = f64::INFINITY;
            let mut best_c = f64::NAN;
            for c in candidate_thresholds(&scores) {
                let r = empirical_risk(&labels, &scores, c, s).unwrap().risk;
                if r <= best {
                    best = r;
                    best_c = c;
                }
            }
            prop_assert_eq!(fit.risk, best);
            prop_assert_eq!(fit.threshold, best_c);
            prop_assert_eq!(empirical_risk(&labels, &scores, fit.threshold, s).unwrap().risk, fit.risk);
        }
    }
}
