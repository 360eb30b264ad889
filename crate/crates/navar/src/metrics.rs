//! Ranking metrics for recovered influence networks.
//!
//! Edge recovery is evaluated by scoring every ordered pair (response,
//! covariate) — diagonal self-edges included — and comparing the score
//! ranking against the true adjacency. AUROC uses the Mann-Whitney form with
//! ties counted half, and AUPR is average precision with grouped thresholds,
//! so tied scores never contribute spurious resolution.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Edge scores paired with ground truth over the same index set.
#[derive(Debug, Clone)]
pub struct EdgeScores {
    scores: Array2<f64>,
    truth: Array2<u8>,
}

impl EdgeScores {
    /// Validates and wraps a score/truth pair of equal shape.
    pub fn new(scores: Array2<f64>, truth: Array2<u8>) -> Result<Self> {
        if scores.dim() != truth.dim() {
            return Err(Error::InvalidInput(format!(
                "scores {:?} and truth {:?} have different shapes",
                scores.dim(),
                truth.dim()
            )));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "edge scores must all be finite".to_string(),
            ));
        }
        if truth.iter().any(|&t| t > 1) {
            return Err(Error::InvalidInput(
                "truth entries must be 0 or 1".to_string(),
            ));
        }
        Ok(Self { scores, truth })
    }

    /// Score matrix, entry (j, k) scoring the edge k -> j.
    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    /// True adjacency, same orientation as the scores.
    pub fn truth(&self) -> &Array2<u8> {
        &self.truth
    }

    /// Number of true edges.
    pub fn num_positives(&self) -> usize {
        self.truth.iter().filter(|&&t| t == 1).count()
    }

    fn flat(&self) -> (Vec<f64>, Vec<bool>) {
        let scores: Vec<f64> = self.scores.iter().copied().collect();
        let truth: Vec<bool> = self.truth.iter().map(|&t| t == 1).collect();
        (scores, truth)
    }

    fn check_not_degenerate(&self) -> Result<(usize, usize)> {
        let positives = self.num_positives();
        let negatives = self.truth.len() - positives;
        if positives == 0 || negatives == 0 {
            return Err(Error::UndefinedMetric(format!(
                "ranking metrics need both classes, got {positives} positives \
                 and {negatives} negatives"
            )));
        }
        Ok((positives, negatives))
    }
}

/// Area under the ROC curve via the Mann-Whitney statistic.
///
/// Equals the probability that a uniformly random true edge outscores a
/// uniformly random non-edge, with ties counted one half.
pub fn auroc(edges: &EdgeScores) -> Result<f64> {
    let (positives, negatives) = edges.check_not_degenerate()?;
    let (scores, truth) = edges.flat();

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores validated finite")
    });

    // Average the 1-based ranks within each tie group.
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut stop = start;
        while stop + 1 < order.len() && scores[order[stop + 1]] == scores[order[start]] {
            stop += 1;
        }
        let average = 0.5 * (start + stop) as f64 + 1.0;
        for &idx in &order[start..=stop] {
            ranks[idx] = average;
        }
        start = stop + 1;
    }

    let positive_rank_sum: f64 = ranks
        .iter()
        .zip(truth.iter())
        .filter(|(_, &t)| t)
        .map(|(&r, _)| r)
        .sum();
    let p = positives as f64;
    let value = (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64);
    Ok(value)
}

/// Area under the precision-recall curve by average precision.
///
/// Thresholds sweep the distinct score values in descending order; each
/// group of tied scores enters at once, contributing its recall increment
/// times the precision at that cut.
pub fn aupr(edges: &EdgeScores) -> Result<f64> {
    let (positives, _) = edges.check_not_degenerate()?;
    let (scores, truth) = edges.flat();

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores validated finite")
    });

    let mut average_precision = 0.0;
    let mut true_positives = 0usize;
    let mut false_positives = 0usize;
    let mut previous_recall = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut stop = start;
        while stop + 1 < order.len() && scores[order[stop + 1]] == scores[order[start]] {
            stop += 1;
        }
        for &idx in &order[start..=stop] {
            if truth[idx] {
                true_positives += 1;
            } else {
                false_positives += 1;
            }
        }
        let recall = true_positives as f64 / positives as f64;
        let precision = true_positives as f64 / (true_positives + false_positives) as f64;
        average_precision += (recall - previous_recall) * precision;
        previous_recall = recall;
        start = stop + 1;
    }
    Ok(average_precision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn edges(scores: Vec<f64>, truth: Vec<u8>) -> EdgeScores {
        let n = scores.len();
        EdgeScores::new(
            Array2::from_shape_vec((1, n), scores).unwrap(),
            Array2::from_shape_vec((1, n), truth).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_scores_hit_both_ceilings() {
        let e = edges(vec![1.0, 1.0, 0.0, 0.0], vec![1, 1, 0, 0]);
        assert_eq!(auroc(&e).unwrap(), 1.0);
        assert_eq!(aupr(&e).unwrap(), 1.0);
    }

    #[test]
    fn constant_scores_give_chance_performance() {
        let e = edges(vec![0.3; 10], vec![1, 0, 0, 1, 0, 0, 0, 1, 0, 0]);
        assert!((auroc(&e).unwrap() - 0.5).abs() < 1e-15);
        assert!((aupr(&e).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn hand_worked_four_edge_example() {
        // Positives ranked first and third among four: AUROC = 3/4 and
        // AP = 0.5 * 1 + 0.5 * (2/3).
        let e = edges(vec![4.0, 3.0, 2.0, 1.0], vec![1, 0, 1, 0]);
        assert!((auroc(&e).unwrap() - 0.75).abs() < 1e-15);
        assert!((aupr(&e).unwrap() - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_truth_is_rejected() {
        let all_positive = edges(vec![0.1, 0.7], vec![1, 1]);
        assert!(matches!(
            auroc(&all_positive),
            Err(Error::UndefinedMetric(_))
        ));
        let all_negative = edges(vec![0.1, 0.7], vec![0, 0]);
        assert!(matches!(aupr(&all_negative), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn mismatched_shapes_and_nonbinary_truth_are_rejected() {
        let bad_shape = EdgeScores::new(
            Array2::zeros((2, 2)),
            Array2::from_shape_vec((1, 4), vec![0, 1, 0, 1]).unwrap(),
        );
        assert!(bad_shape.is_err());
        let bad_truth = EdgeScores::new(
            Array2::zeros((1, 2)),
            Array2::from_shape_vec((1, 2), vec![0, 2]).unwrap(),
        );
        assert!(bad_truth.is_err());
    }

    #[test]
    fn auroc_equals_the_pairwise_win_probability() {
        // Mann-Whitney identity, exercised on 200 random instances with
        // deliberately coarse scores so ties actually occur.
        let mut rng = crate::rng::stream_rng(2024, &[1]);
        for instance in 0..200 {
            let len = rng.gen_range(4..40);
            let scores: Vec<f64> = (0..len)
                .map(|_| (rng.gen_range(-1.0f64..1.0) * 5.0).round() / 5.0)
                .collect();
            let mut truth: Vec<u8> = (0..len).map(|_| u8::from(rng.gen_bool(0.4))).collect();
            truth[0] = 1;
            truth[1] = 0;
            let e = edges(scores.clone(), truth.clone());

            let mut wins = 0.0;
            let mut pairs = 0.0;
            for (i, &ti) in truth.iter().enumerate() {
                if ti != 1 {
                    continue;
                }
                for (j, &tj) in truth.iter().enumerate() {
                    if tj != 0 {
                        continue;
                    }
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
            let direct = wins / pairs;
            let fast = auroc(&e).unwrap();
            assert!(
                (fast - direct).abs() < 1e-12,
                "instance {instance}: {fast} vs {direct}"
            );
        }
    }

    #[test]
    fn matrix_shaped_inputs_flatten_consistently() {
        let scores = array![[0.9, 0.1], [0.5, 0.2]];
        let truth = array![[1u8, 0], [1, 0]];
        let square = EdgeScores::new(scores, truth).unwrap();
        let flat = edges(vec![0.9, 0.1, 0.5, 0.2], vec![1, 0, 1, 0]);
        assert_eq!(auroc(&square).unwrap(), auroc(&flat).unwrap());
        assert_eq!(aupr(&square).unwrap(), aupr(&flat).unwrap());
    }
}
