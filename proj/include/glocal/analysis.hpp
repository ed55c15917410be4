#pragma once

#include <span>
#include <vector>

#include "glocal/similarity.hpp"
#include "glocal/types.hpp"

namespace glocal::analysis {

// Column-centered matrix with its thin SVD. Singular values descend; each
// left vector's largest-magnitude component is positive (right vectors
// flipped to match).
struct CenteredRepresentation {
  Matrix matrix;
  Vector singular_values;
  Matrix left_vectors;
  Matrix right_vectors;
};

Matrix center_columns(const Matrix& x);
CenteredRepresentation center_and_decompose(const Matrix& x);
// Singular values above max(n, p) * eps * s_max.
Index numerical_rank(const Vector& singular_values, Index rows, Index cols);

// Linear CKA: ||X'^T Y'||_F^2 / (||X'^T X'||_F ||Y'^T Y'||_F) on centered
// inputs. Throws SizeMismatch, DegenerateRepresentation.
double lcka(const Matrix& x, const Matrix& y);
double lcka(const EmbeddingMatrix& x, const EmbeddingMatrix& y);

enum class TruncateMode { KeepTop, DropTop };

TruncateMode parse_truncate_mode(const std::string& s);

// Centers, zeroes either the r largest singular values (DropTop) or all but
// them (KeepTop), and reconstructs. Throws RankTooSmall when r exceeds the
// numerical rank.
Matrix truncate_pcs(const Matrix& x, TruncateMode mode, Index r);
EmbeddingMatrix truncate_pcs(const EmbeddingMatrix& x, TruncateMode mode, Index r);

// For each item, whether its cosine 1-NN in `original` (self excluded)
// ranks within the top k of its neighbors in `transformed`. One fraction
// per entry of ks. Neighbor ties go to the smaller index.
std::vector<double> nn_preservation_recall(const Matrix& original, const Matrix& transformed,
                                           std::span<const std::size_t> ks);
std::vector<double> nn_preservation_recall(const EmbeddingMatrix& original, const EmbeddingMatrix& transformed,
                                           std::span<const std::size_t> ks);

// 1-based ranks with ties sharing their mean rank.
std::vector<double> midranks(std::span<const double> values);

// Pearson correlation of midranks. Throws SizeMismatch, ConstantInput.
double spearman_rho(std::span<const double> a, std::span<const double> b);

// Spearman correlation of the strict upper triangles. Throws SizeMismatch.
double rsa_compare(const similarity::SimilarityMatrix& model, const similarity::SimilarityMatrix& human);

}  // namespace glocal::analysis
