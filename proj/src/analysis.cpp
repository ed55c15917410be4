#include "glocal/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "glocal/error.hpp"
#include "glocal/parallel.hpp"

namespace glocal::analysis {

namespace {
constexpr Eigen::Index kBlockRows = 256;
}

Matrix center_columns(const Matrix& x) { return x.rowwise() - x.colwise().mean(); }

CenteredRepresentation center_and_decompose(const Matrix& x) {
  CenteredRepresentation rep;
  rep.matrix = center_columns(x);
  Eigen::BDCSVD<Matrix> svd(rep.matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
  rep.singular_values = svd.singularValues();
  rep.left_vectors = svd.matrixU();
  rep.right_vectors = svd.matrixV();
  for (Eigen::Index c = 0; c < rep.left_vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    rep.left_vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (rep.left_vectors(arg, c) < 0.0) {
      rep.left_vectors.col(c) *= -1.0;
      rep.right_vectors.col(c) *= -1.0;
    }
  }
  return rep;
}

Index numerical_rank(const Vector& singular_values, Index rows, Index cols) {
  if (singular_values.size() == 0) return 0;
  const double tol = static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() *
                     singular_values(0);
  Index rank = 0;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i)
    if (singular_values(i) > tol) ++rank;
  return rank;
}

double lcka(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows())
    raise(ErrorKind::SizeMismatch, std::to_string(x.rows()) + " vs " + std::to_string(y.rows()) + " items");
  if (x.rows() < 2) raise(ErrorKind::InvalidArgument, "CKA needs at least 2 items");
  const Matrix xc = center_columns(x);
  const Matrix yc = center_columns(y);
  const double xx = (xc.transpose() * xc).norm();
  const double yy = (yc.transpose() * yc).norm();
  if (xx == 0.0 || yy == 0.0) raise(ErrorKind::DegenerateRepresentation, "representation is constant across items");
  const double xy = (xc.transpose() * yc).squaredNorm();
  return xy / (xx * yy);
}

double lcka(const EmbeddingMatrix& x, const EmbeddingMatrix& y) { return lcka(x.data(), y.data()); }

TruncateMode parse_truncate_mode(const std::string& s) {
  if (s == "keep_top" || s == "keep-top") return TruncateMode::KeepTop;
  if (s == "drop_top" || s == "drop-top") return TruncateMode::DropTop;
  raise(ErrorKind::InvalidArgument, "unknown truncation mode '" + s + "'");
}

Matrix truncate_pcs(const Matrix& x, TruncateMode mode, Index r) {
  const CenteredRepresentation rep = center_and_decompose(x);
  const Index rank = numerical_rank(rep.singular_values, static_cast<Index>(x.rows()), static_cast<Index>(x.cols()));
  if (r > rank)
    raise(ErrorKind::RankTooSmall, "r = " + std::to_string(r) + " exceeds numerical rank " + std::to_string(rank));
  Vector s = rep.singular_values;
  const auto top = static_cast<Eigen::Index>(r);
  if (mode == TruncateMode::KeepTop)
    s.tail(s.size() - top).setZero();
  else
    s.head(top).setZero();
  return rep.left_vectors * s.asDiagonal() * rep.right_vectors.transpose();
}

EmbeddingMatrix truncate_pcs(const EmbeddingMatrix& x, TruncateMode mode, Index r) {
  return x.with_data(truncate_pcs(x.data(), mode, r));
}

std::vector<double> nn_preservation_recall(const Matrix& original, const Matrix& transformed,
                                           std::span<const std::size_t> ks) {
  if (original.rows() != transformed.rows())
    raise(ErrorKind::SizeMismatch, std::to_string(original.rows()) + " vs " + std::to_string(transformed.rows()) + " items");
  const Eigen::Index n = original.rows();
  if (n < 2) raise(ErrorKind::InvalidArgument, "neighbor recall needs at least 2 items");
  for (std::size_t k : ks)
    if (k == 0) raise(ErrorKind::InvalidArgument, "k must be >= 1");
  const Matrix uo = similarity::unit_rows(original);
  const Matrix ut = similarity::unit_rows(transformed);

  // rank[i]: 1-based position of i's original nearest neighbor among i's
  // neighbors in the transformed space.
  std::vector<std::size_t> rank(static_cast<std::size_t>(n));
  const std::size_t n_blocks = static_cast<std::size_t>((n + kBlockRows - 1) / kBlockRows);
  parallel_for(n_blocks, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t blk = b0; blk < b1; ++blk) {
      const Eigen::Index start = static_cast<Eigen::Index>(blk) * kBlockRows;
      const Eigen::Index rows = std::min(kBlockRows, n - start);
      const Matrix so = uo.middleRows(start, rows) * uo.transpose();
      const Matrix st = ut.middleRows(start, rows) * ut.transpose();
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index i = start + r;
        Eigen::Index nn = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i) continue;
          if (nn < 0 || so(r, j) > so(r, nn)) nn = j;
        }
        const double target = st(r, nn);
        std::size_t ahead = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i || j == nn) continue;
          if (st(r, j) > target || (st(r, j) == target && j < nn)) ++ahead;
        }
        rank[static_cast<std::size_t>(i)] = ahead + 1;
      }
    }
  }, 1);

  std::vector<double> recall;
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (std::size_t r : rank) hits += r <= k;
    recall.push_back(static_cast<double>(hits) / static_cast<double>(n));
  }
  return recall;
}

std::vector<double> nn_preservation_recall(const EmbeddingMatrix& original, const EmbeddingMatrix& transformed,
                                           std::span<const std::size_t> ks) {
  return nn_preservation_recall(original.data(), transformed.data(), ks);
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>((i + 1) + (j + 1));
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mid;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    raise(ErrorKind::SizeMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " values");
  if (a.size() < 3) raise(ErrorKind::SizeMismatch, "Spearman correlation needs at least 3 values");
  const std::vector<double> ra = midranks(a);
  const std::vector<double> rb = midranks(b);
  const double mean = 0.5 * static_cast<double>(a.size() + 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean, db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) raise(ErrorKind::ConstantInput, "all values tie");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double rsa_compare(const similarity::SimilarityMatrix& model, const similarity::SimilarityMatrix& human) {
  if (model.size() != human.size() || model.values.cols() != human.values.cols() ||
      model.values.rows() != model.values.cols())
    raise(ErrorKind::SizeMismatch, "RSMs are " + std::to_string(model.size()) + " and " + std::to_string(human.size()) +
                                       " items");
  std::vector<double> a, b;
  const Eigen::Index n = model.values.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      a.push_back(model.values(i, j));
      b.push_back(human.values(i, j));
    }
  return spearman_rho(a, b);
}

}  // namespace glocal::analysis
