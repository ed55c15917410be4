#pragma once

#include <array>

#include "glocal/types.hpp"

namespace glocal::similarity {

enum class Kernel { Dot, Cosine, Pearson };

Kernel parse_kernel(const std::string& s);

// Symmetric pairwise similarities over a fixed item set.
struct SimilarityMatrix {
  Matrix values;
  Index size() const { return static_cast<Index>(values.rows()); }
};

// Zero diagonal; each row sums to one over its off-diagonal entries.
struct RowStochasticMatrix {
  Matrix values;
  Index size() const { return static_cast<Index>(values.rows()); }
};

// Throws ZeroVector.
double cosine_similarity(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y);
// Cosine of the mean-centered vectors. Throws ConstantVector.
double pearson_similarity(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y);

// Rows scaled to unit norm. Throws ZeroVector naming the row.
Matrix unit_rows(const Matrix& rows);

SimilarityMatrix pairwise_similarity(const Matrix& rows, Kernel kernel);
SimilarityMatrix pairwise_similarity(const EmbeddingMatrix& m, Kernel kernel);

// Softmax over the three pair similarities of a triplet, ordered as
// {p(01), p(02), p(12)}; evaluated with the max subtracted.
std::array<double, 3> pair_probabilities(double s01, double s02, double s12);

// p({a,b} | triplet) for a 3x3 similarity over the triplet's items;
// a, b are positions 0..2.
double triplet_likelihood(const SimilarityMatrix& s3, Index a, Index b);

// Odd-one-out predicted from cosine similarities of the (optionally
// transformed) rows. Exact ties go to the smallest index pair in ascending
// item-index order.
Index predict_odd_one_out(const EmbeddingMatrix& m, const Triplet& t, const LinearTransform* transform = nullptr);

// Same rule over rows already scaled to unit norm.
Index predict_odd_one_out_unit(const Matrix& unit, const Triplet& t);

double odd_one_out_accuracy(const EmbeddingMatrix& m, const TripletDataset& d,
                            const LinearTransform* transform = nullptr);

// Row i normalized over k != i of exp(S_ik / tau). Throws TemperatureNonPositive.
RowStochasticMatrix temperature_softmax(const SimilarityMatrix& s, double tau);

// RSM from a non-negative object embedding: entry (i,j) is the mean, over
// every third item k, of the triplet probability that {i,j} is the most
// similar pair given S_h = V V^T exponentiated. Diagonal is 1. Negative
// entries in V are tolerated and reported through `saw_negative`.
SimilarityMatrix rsm_from_vice(const EmbeddingMatrix& v, bool* saw_negative = nullptr);

}  // namespace glocal::similarity
