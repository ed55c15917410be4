#include "glocal/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glocal/error.hpp"
#include "glocal/parallel.hpp"
#include "glocal/similarity.hpp"

namespace glocal::losses {

namespace {

constexpr double kMinLogProbability = -690.7755278982137;  // log(1e-300)

struct TripletOutcome {
  double loss;
  double g_ab, g_ao, g_bo;  // d loss / d similarity
};

// -log p({a,b}) and its derivative w.r.t. the three pair similarities.
TripletOutcome triplet_outcome(double s_ab, double s_ao, double s_bo) {
  const double mx = std::max({s_ab, s_ao, s_bo});
  const double e_ab = std::exp(s_ab - mx);
  const double e_ao = std::exp(s_ao - mx);
  const double e_bo = std::exp(s_bo - mx);
  const double z = e_ab + e_ao + e_bo;
  return {std::log(z) - (s_ab - mx), e_ab / z - 1.0, e_ao / z, e_bo / z};
}

Matrix transform_rows(const LinearTransform& t, const Matrix& rows) { return t.apply(rows); }

// Rows of `z` scaled to unit norm, plus the norms. Throws ZeroVector.
Matrix unit_with_norms(const Matrix& z, Vector& norms) {
  norms = z.rowwise().norm();
  Matrix u = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (norms(i) == 0.0) raise(ErrorKind::ZeroVector, "transformed row " + std::to_string(i));
    u.row(i) /= norms(i);
  }
  return u;
}

// Pulls a gradient w.r.t. unit rows back to the unnormalized rows.
void backprop_normalization(Matrix& grad, const Matrix& unit, const Vector& norms) {
  for (Eigen::Index i = 0; i < grad.rows(); ++i) {
    const double radial = grad.row(i).dot(unit.row(i));
    grad.row(i) = (grad.row(i) - radial * unit.row(i)) / norms(i);
  }
}

void check_transform(const LinearTransform& t, Index dim) {
  t.validate();
  if (t.dim() != dim)
    raise(ErrorKind::DimensionMismatch, "transform dim " + std::to_string(t.dim()) + " vs embedding dim " +
                                            std::to_string(dim));
}

// Row-wise log of the off-diagonal temperature softmax; diagonal is left 0.
Matrix log_softmax_offdiag(const Matrix& s, double tau) {
  const Eigen::Index m = s.rows();
  Matrix out = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m; ++k)
      if (k != i) mx = std::max(mx, s(i, k) / tau);
    double z = 0.0;
    for (Eigen::Index k = 0; k < m; ++k)
      if (k != i) z += std::exp(s(i, k) / tau - mx);
    const double lse = mx + std::log(z);
    for (Eigen::Index k = 0; k < m; ++k)
      if (k != i) out(i, k) = s(i, k) / tau - lse;
  }
  return out;
}

}  // namespace

Gradient Gradient::zero(Index dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return Gradient{Matrix::Zero(d, d), Vector::Zero(d)};
}

EmbeddingMatrix apply_transform(const LinearTransform& t, const EmbeddingMatrix& x) {
  check_transform(t, x.dim());
  return x.with_data(t.apply(x.data()));
}

TermEvaluation alignment_term(const LinearTransform& t, const Matrix& x, std::span<const Triplet> triplets,
                              SimKind sim, bool with_gradient) {
  check_transform(t, static_cast<Index>(x.cols()));
  const std::size_t n = triplets.size();
  if (n == 0) raise(ErrorKind::InvalidArgument, "alignment loss over zero triplets");
  for (const auto& tr : triplets)
    for (Index i : tr.items())
      if (i >= static_cast<Index>(x.rows())) raise(ErrorKind::IndexOutOfRange, "item " + std::to_string(i));

  const bool expanded = with_gradient || 3 * n < static_cast<std::size_t>(x.rows());
  Matrix rows_in;  // 3n x p when expanded
  Matrix z;
  if (expanded) {
    rows_in.resize(static_cast<Eigen::Index>(3 * n), x.cols());
    for (std::size_t s = 0; s < n; ++s) {
      const auto items = triplets[s].items();
      for (int r = 0; r < 3; ++r)
        rows_in.row(static_cast<Eigen::Index>(3 * s + r)) = x.row(static_cast<Eigen::Index>(items[r]));
    }
    z = transform_rows(t, rows_in);
  } else {
    z = transform_rows(t, x);
  }
  Vector norms;
  const Matrix v = sim == SimKind::Cosine ? unit_with_norms(z, norms) : z;
  const auto row_of = [&](std::size_t s, int r) -> Eigen::Index {
    return expanded ? static_cast<Eigen::Index>(3 * s + r)
                    : static_cast<Eigen::Index>(triplets[s].items()[static_cast<std::size_t>(r)]);
  };

  std::vector<double> losses(n);
  Matrix grad_v;
  if (with_gradient) grad_v = Matrix::Zero(v.rows(), v.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const auto a = v.row(row_of(s, 0));
      const auto b = v.row(row_of(s, 1));
      const auto o = v.row(row_of(s, 2));
      const TripletOutcome out = triplet_outcome(a.dot(b), a.dot(o), b.dot(o));
      losses[s] = out.loss;
      if (with_gradient) {
        const double gab = out.g_ab * inv_n, gao = out.g_ao * inv_n, gbo = out.g_bo * inv_n;
        grad_v.row(row_of(s, 0)) = gab * b + gao * o;
        grad_v.row(row_of(s, 1)) = gab * a + gbo * o;
        grad_v.row(row_of(s, 2)) = gao * a + gbo * b;
      }
    }
  }, 256);

  TermEvaluation result;
  double sum = 0.0;
  for (double l : losses) sum += l;
  result.value = sum * inv_n;
  if (with_gradient) {
    if (sim == SimKind::Cosine) backprop_normalization(grad_v, v, norms);
    result.grad.dW = grad_v.transpose() * rows_in;
    result.grad.db = grad_v.colwise().sum().transpose();
  }
  return result;
}

TermEvaluation local_term(const LinearTransform& t, const Matrix& y, double tau, bool with_gradient) {
  if (!(tau > 0.0)) raise(ErrorKind::TemperatureNonPositive, "tau = " + std::to_string(tau));
  check_transform(t, static_cast<Index>(y.cols()));
  const Eigen::Index m = y.rows();
  if (m < 2) raise(ErrorKind::InvalidArgument, "local loss needs at least 2 rows");

  const Matrix target = similarity::temperature_softmax(
                            similarity::pairwise_similarity(y, similarity::Kernel::Cosine), tau)
                            .values;
  const Matrix z = transform_rows(t, y);
  Vector norms;
  const Matrix u = unit_with_norms(z, norms);
  const Matrix s = u * u.transpose();
  const Matrix log_q = log_softmax_offdiag(s, tau);

  const double scale = 1.0 / static_cast<double>(m * m - m);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) sum += target(i, j) * std::max(log_q(i, j), kMinLogProbability);

  TermEvaluation result;
  result.value = -scale * sum;
  if (!with_gradient) return result;

  // d/dS_ij = -(P_ij - Q_ij) / (tau (m^2 - m)) off the diagonal, using that
  // each target row sums to one.
  Matrix g = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) g(i, j) = -(target(i, j) - std::exp(log_q(i, j))) * scale / tau;
  Matrix grad_u = (g + g.transpose()) * u;
  backprop_normalization(grad_u, u, norms);
  result.grad.dW = grad_u.transpose() * y;
  result.grad.db = grad_u.colwise().sum().transpose();
  return result;
}

TermEvaluation naive_penalty_term(const LinearTransform& t, double lambda, bool with_gradient) {
  if (!(lambda >= 0.0)) raise(ErrorKind::InvalidArgument, "lambda must be >= 0");
  TermEvaluation result;
  result.value = lambda * t.W.squaredNorm();
  if (with_gradient) {
    result.grad.dW = 2.0 * lambda * t.W;
    result.grad.db = Vector::Zero(t.b.size());
  }
  return result;
}

TermEvaluation shrinkage_penalty_term(const LinearTransform& t, double lambda, bool with_gradient) {
  if (!(lambda >= 0.0)) raise(ErrorKind::InvalidArgument, "lambda must be >= 0");
  const double p = static_cast<double>(t.W.rows());
  Matrix deviation = t.W;
  deviation.diagonal().array() -= t.W.trace() / p;
  TermEvaluation result;
  result.value = lambda * deviation.squaredNorm();
  if (with_gradient) {
    // tr(deviation) = 0, so the mean-diagonal term contributes nothing.
    result.grad.dW = 2.0 * lambda * deviation;
    result.grad.db = Vector::Zero(t.b.size());
  }
  return result;
}

double global_alignment_loss(const LinearTransform& t, const EmbeddingMatrix& x, const TripletDataset& d,
                             SimKind sim) {
  return alignment_term(t, x.data(), d.triplets, sim, false).value;
}

double naive_penalty(const LinearTransform& t, double lambda) { return naive_penalty_term(t, lambda, false).value; }

double shrinkage_penalty(const LinearTransform& t, double lambda) {
  return shrinkage_penalty_term(t, lambda, false).value;
}

double local_contrastive_loss(const LinearTransform& t, const EmbeddingMatrix& y, double tau) {
  return local_term(t, y.data(), tau, false).value;
}

Evaluation evaluate_objective(const LinearTransform& t, const ObjectiveInputs& in, const FitConfig& cfg,
                              bool with_gradient) {
  Evaluation ev;
  const TermEvaluation align = alignment_term(t, in.align_rows, in.triplets, cfg.train_sim, with_gradient);
  const TermEvaluation pen = cfg.objective == Objective::Naive
                                 ? naive_penalty_term(t, cfg.lambda, with_gradient)
                                 : shrinkage_penalty_term(t, cfg.lambda, with_gradient);
  ev.loss.alignment = align.value;
  ev.loss.penalty = pen.value;
  if (cfg.objective != Objective::GLocal) {
    ev.loss.total = align.value + pen.value;
    if (with_gradient) ev.grad = Gradient{align.grad.dW + pen.grad.dW, align.grad.db + pen.grad.db};
    return ev;
  }
  if (!in.local_rows) raise(ErrorKind::InvalidArgument, "glocal objective requires local rows");
  const TermEvaluation local = local_term(t, *in.local_rows, cfg.tau, with_gradient);
  const double a = cfg.alpha;
  ev.loss.local = local.value;
  ev.loss.total = (1.0 - a) * align.value + a * local.value + pen.value;
  if (with_gradient)
    ev.grad = Gradient{(1.0 - a) * align.grad.dW + a * local.grad.dW + pen.grad.dW,
                       (1.0 - a) * align.grad.db + a * local.grad.db + pen.grad.db};
  return ev;
}

Gradient objective_gradient(const LinearTransform& t, const ObjectiveInputs& in, const FitConfig& cfg) {
  return evaluate_objective(t, in, cfg, true).grad;
}

LossValue glocal_objective(const LinearTransform& t, const EmbeddingMatrix& x_align, const TripletDataset& d,
                           const EmbeddingMatrix& y_local, const FitConfig& cfg) {
  if (cfg.objective != Objective::GLocal) raise(ErrorKind::InvalidArgument, "config objective is not glocal");
  d.bound_to(x_align.n_items());
  const ObjectiveInputs in{x_align.data(), d.triplets, &y_local.data()};
  return evaluate_objective(t, in, cfg, false).loss;
}

}  // namespace glocal::losses
