//! Token-level matching scores between a reference and a candidate.
//!
//! Both texts are tokenized, every token embedded, and a full cosine
//! similarity matrix built (rows reference, columns candidate). The default
//! per-token strategy takes each token's best match: recall averages row
//! maxima, precision averages column maxima. The one-to-one variant instead
//! pairs tokens greedily without reuse. No IDF weighting, no rescaling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexical::tokenize;
use crate::providers::{ProviderError, TokenEmbedder};
use crate::semantic::{cosine_similarity, EmbeddingVector, SemanticError};

/// Tokens of one text paired with their embeddings, in text order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEmbeddingSequence {
    tokens: Vec<String>,
    vectors: Vec<EmbeddingVector>,
}

impl TokenEmbeddingSequence {
    pub fn new(
        tokens: Vec<String>,
        vectors: Vec<EmbeddingVector>,
    ) -> Result<Self, TokenMatchError> {
        if tokens.len() != vectors.len() {
            return Err(TokenMatchError::LengthMismatch {
                tokens: tokens.len(),
                vectors: vectors.len(),
            });
        }
        if let Some(first) = vectors.first() {
            let dim = first.dimension();
            if let Some(bad) = vectors.iter().position(|v| v.dimension() != dim) {
                return Err(TokenMatchError::DimensionMismatch {
                    left: dim,
                    right: vectors[bad].dimension(),
                });
            }
        }
        Ok(TokenEmbeddingSequence { tokens, vectors })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Pairwise cosine similarities; `matrix[i][j]` compares reference token `i`
/// with candidate token `j`.
pub fn similarity_matrix(
    reference: &TokenEmbeddingSequence,
    candidate: &TokenEmbeddingSequence,
) -> Result<Vec<Vec<f64>>, TokenMatchError> {
    if reference.is_empty() || candidate.is_empty() {
        return Err(TokenMatchError::EmptyMatrix);
    }
    let mut matrix = Vec::with_capacity(reference.len());
    for (i, rv) in reference.vectors.iter().enumerate() {
        let mut row = Vec::with_capacity(candidate.len());
        for (j, cv) in candidate.vectors.iter().enumerate() {
            let score = cosine_similarity(rv, cv).map_err(|e| match e {
                SemanticError::ZeroVector { side } => TokenMatchError::ZeroVector {
                    side: if side == "first" { "reference" } else { "candidate" },
                    index: if side == "first" { i } else { j },
                },
                SemanticError::DimensionMismatch { left, right } => {
                    TokenMatchError::DimensionMismatch { left, right }
                }
                other => TokenMatchError::Internal {
                    message: other.to_string(),
                },
            })?;
            row.push(score);
        }
        matrix.push(row);
    }
    Ok(matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStrategy {
    /// Every token takes its single best counterpart; counterparts may be
    /// reused. This is the default.
    PerToken,
    /// Greedy assignment without reuse: highest similarity first, ties by
    /// lower (row, column).
    OneToOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenMatchScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-token maximum matching over a prebuilt matrix.
pub fn greedy_match_score(matrix: &[Vec<f64>]) -> Result<TokenMatchScore, TokenMatchError> {
    match_score(matrix, MatchStrategy::PerToken)
}

/// Scores a rectangular similarity matrix under the chosen strategy.
pub fn match_score(
    matrix: &[Vec<f64>],
    strategy: MatchStrategy,
) -> Result<TokenMatchScore, TokenMatchError> {
    let rows = matrix.len();
    if rows == 0 || matrix[0].is_empty() {
        return Err(TokenMatchError::EmptyMatrix);
    }
    let cols = matrix[0].len();
    if matrix.iter().any(|r| r.len() != cols) {
        return Err(TokenMatchError::RaggedMatrix);
    }
    let (precision, recall) = match strategy {
        MatchStrategy::PerToken => {
            let recall = matrix
                .iter()
                .map(|row| row.iter().cloned().fold(f64::MIN, f64::max))
                .sum::<f64>()
                / rows as f64;
            let precision = (0..cols)
                .map(|j| matrix.iter().map(|row| row[j]).fold(f64::MIN, f64::max))
                .sum::<f64>()
                / cols as f64;
            (precision, recall)
        }
        MatchStrategy::OneToOne => {
            let mut pairs: Vec<(usize, usize)> = (0..rows)
                .flat_map(|i| (0..cols).map(move |j| (i, j)))
                .collect();
            pairs.sort_by(|&(ai, aj), &(bi, bj)| {
                matrix[bi][bj]
                    .total_cmp(&matrix[ai][aj])
                    .then(ai.cmp(&bi))
                    .then(aj.cmp(&bj))
            });
            let mut row_used = vec![false; rows];
            let mut col_used = vec![false; cols];
            let mut matched_sum = 0.0;
            for (i, j) in pairs {
                if !row_used[i] && !col_used[j] {
                    row_used[i] = true;
                    col_used[j] = true;
                    matched_sum += matrix[i][j];
                }
            }
            (matched_sum / cols as f64, matched_sum / rows as f64)
        }
    };
    Ok(TokenMatchScore {
        precision,
        recall,
        f1: f1_of(precision, recall),
    })
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    let denominator = precision + recall;
    if denominator == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / denominator
    }
}

/// Tokenizes, embeds, and scores a reference/candidate pair end to end.
pub fn score_pair(
    reference_text: &str,
    candidate_text: &str,
    embedder: &dyn TokenEmbedder,
    strategy: MatchStrategy,
) -> Result<TokenMatchScore, TokenMatchError> {
    if tokenize(reference_text).is_empty() {
        return Err(TokenMatchError::EmptyAfterTokenization { side: "reference" });
    }
    if tokenize(candidate_text).is_empty() {
        return Err(TokenMatchError::EmptyAfterTokenization { side: "candidate" });
    }
    let mut sequences = embedder.embed_tokens(&[reference_text, candidate_text])?;
    let candidate = sequences.pop().expect("two sequences");
    let reference = sequences.pop().expect("two sequences");
    let matrix = similarity_matrix(&reference, &candidate)?;
    match_score(&matrix, strategy)
}

#[derive(Debug, Error)]
pub enum TokenMatchError {
    #[error("{tokens} tokens but {vectors} vectors")]
    LengthMismatch { tokens: usize, vectors: usize },
    #[error("token embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero embedding for {side} token {index}")]
    ZeroVector { side: &'static str, index: usize },
    #[error("similarity matrix must have at least one row and column")]
    EmptyMatrix,
    #[error("similarity matrix rows have unequal lengths")]
    RaggedMatrix,
    #[error("no tokens left after tokenization of the {side} text")]
    EmptyAfterTokenization { side: &'static str },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{message}")]
    Internal { message: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn seq(vectors: &[&[f64]]) -> TokenEmbeddingSequence {
        TokenEmbeddingSequence::new(
            (0..vectors.len()).map(|i| format!("t{i}")).collect(),
            vectors.iter().map(|v| EmbeddingVector::new(v.to_vec())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_perfect_match() {
        let got = greedy_match_score(&[vec![1.0]]).unwrap();
        assert_eq!((got.precision, got.recall, got.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn extra_candidate_token_costs_precision_only() {
        // One reference token matched perfectly, one spurious candidate.
        let got = greedy_match_score(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(got.precision, 0.5);
        assert_eq!(got.recall, 1.0);
        assert_relative_eq!(got.f1, 2.0 / 3.0, epsilon = 1e-4);
    }

    #[test]
    fn all_zero_matrix_scores_zero() {
        let got = greedy_match_score(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!((got.precision, got.recall, got.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn per_token_maxima_by_hand() {
        let got = greedy_match_score(&[vec![0.9, 0.8], vec![0.7, 0.6]]).unwrap();
        assert_relative_eq!(got.recall, 0.8);
        assert_relative_eq!(got.precision, 0.85);
    }

    #[test]
    fn one_to_one_blocks_reuse() {
        let got = match_score(&[vec![0.9, 0.8], vec![0.7, 0.6]], MatchStrategy::OneToOne).unwrap();
        // Takes (0,0) at 0.9, then only (1,1) at 0.6 remains.
        assert_relative_eq!(got.precision, 0.75);
        assert_relative_eq!(got.recall, 0.75);
    }

    #[test]
    fn one_to_one_ties_take_lower_indices() {
        let got = match_score(&[vec![0.5, 0.5], vec![0.5, 0.1]], MatchStrategy::OneToOne).unwrap();
        // (0,0) first, leaving (1,1) at 0.1; total 0.6.
        assert_relative_eq!(got.precision, 0.3);
    }

    #[test]
    fn empty_and_ragged_matrices_are_rejected() {
        assert!(matches!(greedy_match_score(&[]), Err(TokenMatchError::EmptyMatrix)));
        let empty_row: Vec<Vec<f64>> = vec![vec![]];
        assert!(matches!(greedy_match_score(&empty_row), Err(TokenMatchError::EmptyMatrix)));
        let ragged = vec![vec![1.0, 0.0], vec![1.0]];
        assert!(matches!(greedy_match_score(&ragged), Err(TokenMatchError::RaggedMatrix)));
    }

    #[test]
    fn matrix_of_identical_sequences_has_unit_diagonal() {
        let s = seq(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let m = similarity_matrix(&s, &s).unwrap();
        assert_eq!(m[0][0], 1.0);
        assert_eq!(m[1][1], 1.0);
        assert_eq!(m[0][1], 0.0);
        let score = greedy_match_score(&m).unwrap();
        assert_eq!(score.f1, 1.0);
    }

    #[test]
    fn zero_token_vector_names_side_and_index() {
        let good = seq(&[&[1.0, 0.0]]);
        let bad = TokenEmbeddingSequence::new(
            vec!["a".into(), "b".into()],
            vec![
                EmbeddingVector::new(vec![1.0, 0.0]),
                EmbeddingVector::new(vec![0.0, 0.0]),
            ],
        )
        .unwrap();
        match similarity_matrix(&good, &bad) {
            Err(TokenMatchError::ZeroVector { side: "candidate", index: 1 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn cross_sequence_dimension_mismatch_is_rejected() {
        let a = seq(&[&[1.0, 0.0]]);
        let b = seq(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(
            similarity_matrix(&a, &b),
            Err(TokenMatchError::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn sequence_constructor_checks_lengths_and_dims() {
        assert!(matches!(
            TokenEmbeddingSequence::new(vec!["a".into()], vec![]),
            Err(TokenMatchError::LengthMismatch { tokens: 1, vectors: 0 })
        ));
        assert!(matches!(
            TokenEmbeddingSequence::new(
                vec!["a".into(), "b".into()],
                vec![
                    EmbeddingVector::new(vec![1.0]),
                    EmbeddingVector::new(vec![1.0, 2.0])
                ],
            ),
            Err(TokenMatchError::DimensionMismatch { .. })
        ));
    }

    fn naive_one_to_one(matrix: &[Vec<f64>]) -> f64 {
        // Repeated full scans; the implementation sorts instead.
        let rows = matrix.len();
        let cols = matrix[0].len();
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        let mut total = 0.0;
        for _ in 0..rows.min(cols) {
            let mut best: Option<(usize, usize)> = None;
            for i in 0..rows {
                for j in 0..cols {
                    if row_used[i] || col_used[j] {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bi, bj)) => matrix[i][j] > matrix[bi][bj],
                    };
                    if better {
                        best = Some((i, j));
                    }
                }
            }
            let (i, j) = best.expect("free pair remains");
            row_used[i] = true;
            col_used[j] = true;
            total += matrix[i][j];
        }
        total
    }

    proptest::proptest! {
        #[test]
        fn per_token_agrees_with_explicit_enumeration(
            rows in 1usize..6,
            cols in 1usize..6,
            cells in proptest::collection::vec(-1.0f64..1.0, 36),
        ) {
            let matrix: Vec<Vec<f64>> = (0..rows)
                .map(|i| (0..cols).map(|j| cells[i * 6 + j]).collect())
                .collect();
            let got = greedy_match_score(&matrix).unwrap();
            let mut recall = 0.0;
            for i in 0..rows {
                let mut best = f64::MIN;
                for j in 0..cols {
                    if matrix[i][j] > best { best = matrix[i][j]; }
                }
                recall += best;
            }
            recall /= rows as f64;
            let mut precision = 0.0;
            for j in 0..cols {
                let mut best = f64::MIN;
                for i in 0..rows {
                    if matrix[i][j] > best { best = matrix[i][j]; }
                }
                precision += best;
            }
            precision /= cols as f64;
            proptest::prop_assert_eq!(got.recall, recall);
            proptest::prop_assert_eq!(got.precision, precision);
        }

        #[test]
        fn one_to_one_agrees_with_naive_scan(
            rows in 1usize..6,
            cols in 1usize..6,
            cells in proptest::collection::vec(-1.0f64..1.0, 36),
        ) {
            let matrix: Vec<Vec<f64>> = (0..rows)
                .map(|i| (0..cols).map(|j| cells[i * 6 + j]).collect())
                .collect();
            let got = match_score(&matrix, MatchStrategy::OneToOne).unwrap();
            let expected_sum = naive_one_to_one(&matrix);
            proptest::prop_assert!((got.recall * rows as f64 - expected_sum).abs() < 1e-12);
            proptest::prop_assert!((got.precision * cols as f64 - expected_sum).abs() < 1e-12);
        }

        #[test]
        fn transpose_swaps_precision_and_recall(
            rows in 1usize..6,
            cols in 1usize..6,
            cells in proptest::collection::vec(-1.0f64..1.0, 36),
        ) {
            let matrix: Vec<Vec<f64>> = (0..rows)
                .map(|i| (0..cols).map(|j| cells[i * 6 + j]).collect())
                .collect();
            let transposed: Vec<Vec<f64>> = (0..cols)
                .map(|j| (0..rows).map(|i| matrix[i][j]).collect())
                .collect();
            for strategy in [MatchStrategy::PerToken, MatchStrategy::OneToOne] {
                let a = match_score(&matrix, strategy).unwrap();
                let b = match_score(&transposed, strategy).unwrap();
                proptest::prop_assert_eq!(a.precision, b.recall);
                proptest::prop_assert_eq!(a.recall, b.precision);
                proptest::prop_assert!((a.f1 - b.f1).abs() < 1e-12);
            }
        }

        // Duplicating a candidate column never moves recall, and pulls
        // precision toward that column's maximum.
        #[test]
        fn duplicate_candidate_column_effects(
            rows in 1usize..6,
            cols in 1usize..6,
            cells in proptest::collection::vec(0.0f64..1.0, 36),
            pick in 0usize..6,
        ) {
            let matrix: Vec<Vec<f64>> = (0..rows)
                .map(|i| (0..cols).map(|j| cells[i * 6 + j]).collect())
                .collect();
            let dup = pick % cols;
            let extended: Vec<Vec<f64>> = matrix
                .iter()
                .map(|row| {
                    let mut r = row.clone();
                    r.push(row[dup]);
                    r
                })
                .collect();
            let before = greedy_match_score(&matrix).unwrap();
            let after = greedy_match_score(&extended).unwrap();
            proptest::prop_assert_eq!(before.recall, after.recall);
            let col_max = (0..rows).map(|i| matrix[i][dup]).fold(f64::MIN, f64::max);
            proptest::prop_assert!(
                (after.precision - col_max).abs() <= (before.precision - col_max).abs() + 1e-12
            );
        }
    }
}
