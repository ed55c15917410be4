#include "glocal/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "glocal/error.hpp"
#include "glocal/parallel.hpp"

namespace glocal::similarity {

Kernel parse_kernel(const std::string& s) {
  if (s == "dot") return Kernel::Dot;
  if (s == "cosine") return Kernel::Cosine;
  if (s == "pearson") return Kernel::Pearson;
  raise(ErrorKind::InvalidArgument, "unknown kernel '" + s + "'");
}

double cosine_similarity(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size())
    raise(ErrorKind::DimensionMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) raise(ErrorKind::ZeroVector, "cosine similarity of a zero vector");
  return std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
}

double pearson_similarity(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size())
    raise(ErrorKind::DimensionMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  const Vector cx = x.array() - x.mean();
  const Vector cy = y.array() - y.mean();
  if (cx.norm() == 0.0 || cy.norm() == 0.0) raise(ErrorKind::ConstantVector, "pearson similarity of a constant vector");
  return std::clamp(cx.dot(cy) / (cx.norm() * cy.norm()), -1.0, 1.0);
}

Matrix unit_rows(const Matrix& rows) {
  Matrix out = rows;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n == 0.0) raise(ErrorKind::ZeroVector, "row " + std::to_string(i));
    out.row(i) /= n;
  }
  return out;
}

SimilarityMatrix pairwise_similarity(const Matrix& rows, Kernel kernel) {
  Matrix basis;
  switch (kernel) {
    case Kernel::Dot:
      basis = rows;
      break;
    case Kernel::Cosine:
      basis = unit_rows(rows);
      break;
    case Kernel::Pearson: {
      basis = rows.colwise() - rows.rowwise().mean();
      for (Eigen::Index i = 0; i < basis.rows(); ++i)
        if (basis.row(i).norm() == 0.0) raise(ErrorKind::ConstantVector, "row " + std::to_string(i));
      basis = unit_rows(basis);
      break;
    }
  }
  Matrix s = basis * basis.transpose();
  // Exact symmetry, and exact unit diagonal for the normalized kernels.
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < s.cols(); ++j) s(j, i) = s(i, j);
    if (kernel != Kernel::Dot) s(i, i) = 1.0;
  }
  if (kernel != Kernel::Dot) s = s.cwiseMax(-1.0).cwiseMin(1.0);
  return SimilarityMatrix{std::move(s)};
}

SimilarityMatrix pairwise_similarity(const EmbeddingMatrix& m, Kernel kernel) {
  return pairwise_similarity(m.data(), kernel);
}

std::array<double, 3> pair_probabilities(double s01, double s02, double s12) {
  const double mx = std::max({s01, s02, s12});
  const double e01 = std::exp(s01 - mx);
  const double e02 = std::exp(s02 - mx);
  const double e12 = std::exp(s12 - mx);
  const double z = e01 + e02 + e12;
  return {e01 / z, e02 / z, e12 / z};
}

double triplet_likelihood(const SimilarityMatrix& s3, Index a, Index b) {
  if (s3.size() != 3) raise(ErrorKind::SizeMismatch, "triplet similarity must be 3x3");
  if (a > 2 || b > 2 || a == b) raise(ErrorKind::InvalidArgument, "pair must be two distinct positions in 0..2");
  const auto& s = s3.values;
  const auto p = pair_probabilities(s(0, 1), s(0, 2), s(1, 2));
  const Index lo = std::min(a, b), hi = std::max(a, b);
  if (lo == 0 && hi == 1) return p[0];
  if (lo == 0 && hi == 2) return p[1];
  return p[2];
}

Index predict_odd_one_out_unit(const Matrix& unit, const Triplet& t) {
  auto items = t.items();
  std::sort(items.begin(), items.end());
  const auto row = [&](Index i) { return unit.row(static_cast<Eigen::Index>(i)); };
  const double s[3] = {row(items[0]).dot(row(items[1])), row(items[0]).dot(row(items[2])),
                       row(items[1]).dot(row(items[2]))};
  const Index odd_for_pair[3] = {items[2], items[1], items[0]};
  int best = 0;
  for (int p = 1; p < 3; ++p)
    if (s[p] > s[best]) best = p;
  return odd_for_pair[best];
}

Index predict_odd_one_out(const EmbeddingMatrix& m, const Triplet& t, const LinearTransform* transform) {
  for (Index i : t.items())
    if (i >= m.n_items()) raise(ErrorKind::IndexOutOfRange, "item " + std::to_string(i));
  // Only the three rows are needed; keep them in their original positions
  // so the index-based tie rule applies unchanged.
  auto items = t.items();
  std::sort(items.begin(), items.end());
  Matrix rows(3, static_cast<Eigen::Index>(m.dim()));
  for (int r = 0; r < 3; ++r) rows.row(r) = m.data().row(static_cast<Eigen::Index>(items[r]));
  if (transform) rows = transform->apply(rows);
  const Matrix unit = unit_rows(rows);
  const Index sorted_odd = predict_odd_one_out_unit(unit, Triplet{0, 1, 2});
  return items[sorted_odd];
}

double odd_one_out_accuracy(const EmbeddingMatrix& m, const TripletDataset& d, const LinearTransform* transform) {
  if (d.size() == 0) raise(ErrorKind::InvalidArgument, "empty triplet dataset");
  d.bound_to(m.n_items());
  const Matrix unit = unit_rows(transform ? transform->apply(m.data()) : m.data());
  std::vector<unsigned char> hit(d.size(), 0);
  parallel_for(d.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s)
      hit[s] = predict_odd_one_out_unit(unit, d.triplets[s]) == d.triplets[s].odd_one_out;
  }, 1024);
  std::size_t correct = 0;
  for (auto h : hit) correct += h;
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

RowStochasticMatrix temperature_softmax(const SimilarityMatrix& s, double tau) {
  if (!(tau > 0.0)) raise(ErrorKind::TemperatureNonPositive, "tau = " + std::to_string(tau));
  const Eigen::Index n = s.values.rows();
  if (n < 2) raise(ErrorKind::InvalidArgument, "softmax needs at least 2 items");
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i) mx = std::max(mx, s.values(i, k) / tau);
    double z = 0.0;
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i) {
        out(i, k) = std::exp(s.values(i, k) / tau - mx);
        z += out(i, k);
      }
    out.row(i) /= z;
  }
  return RowStochasticMatrix{std::move(out)};
}

SimilarityMatrix rsm_from_vice(const EmbeddingMatrix& v, bool* saw_negative) {
  const Eigen::Index n = static_cast<Eigen::Index>(v.n_items());
  if (n < 3) raise(ErrorKind::InvalidArgument, "VICE RSM needs at least 3 objects");
  if (saw_negative) *saw_negative = (v.data().array() < 0.0).any();
  // exp(S_h) is only ever divided by sums of exp(S_h), so the softmax is
  // evaluated directly on S_h with the max subtracted.
  const Matrix sh = v.data() * v.data().transpose();
  Matrix rsm = Matrix::Identity(n, n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
    for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == i || k == j) continue;
          acc += pair_probabilities(sh(i, j), sh(i, k), sh(j, k))[0];
        }
        rsm(i, j) = acc / static_cast<double>(n - 2);
      }
  }, 1);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) rsm(j, i) = rsm(i, j);
  return SimilarityMatrix{std::move(rsm)};
}

}  // namespace glocal::similarity
