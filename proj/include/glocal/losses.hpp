#pragma once

#include <span>

#include "glocal/types.hpp"

namespace glocal::losses {

// Unweighted components; `total` applies the objective's weights:
//   naive/global: alignment + penalty
//   glocal:       (1 - alpha) * alignment + alpha * local + penalty
struct LossValue {
  double total = 0.0;
  double alignment = 0.0;
  double local = 0.0;
  double penalty = 0.0;
};

struct Gradient {
  Matrix dW;
  Vector db;

  static Gradient zero(Index dim);
  bool all_finite() const { return dW.allFinite() && db.allFinite(); }
};

EmbeddingMatrix apply_transform(const LinearTransform& t, const EmbeddingMatrix& x);

// Mean negative log-likelihood of the chosen pairs under the triplet softmax,
// with similarities computed between transformed rows.
double global_alignment_loss(const LinearTransform& t, const EmbeddingMatrix& x, const TripletDataset& d,
                             SimKind sim);

// lambda * ||W||_F^2
double naive_penalty(const LinearTransform& t, double lambda);

// lambda * ||W - (tr(W)/p) I||_F^2, which equals lambda * min_a ||W - a I||_F^2.
double shrinkage_penalty(const LinearTransform& t, double lambda);

// Cross-entropy between the temperature-softmaxed cosine similarities of the
// untransformed rows (target) and the transformed rows, averaged over the
// m^2 - m off-diagonal entries.
double local_contrastive_loss(const LinearTransform& t, const EmbeddingMatrix& y, double tau);

LossValue glocal_objective(const LinearTransform& t, const EmbeddingMatrix& x_align, const TripletDataset& d,
                           const EmbeddingMatrix& y_local, const FitConfig& cfg);

// Data for one objective evaluation. `local_rows` is required for glocal.
struct ObjectiveInputs {
  const Matrix& align_rows;
  std::span<const Triplet> triplets;
  const Matrix* local_rows = nullptr;
};

struct Evaluation {
  LossValue loss;
  Gradient grad;  // empty unless requested
};

// Loss of cfg.objective and, optionally, its exact gradient w.r.t. (W, b).
Evaluation evaluate_objective(const LinearTransform& t, const ObjectiveInputs& in, const FitConfig& cfg,
                              bool with_gradient = true);

Gradient objective_gradient(const LinearTransform& t, const ObjectiveInputs& in, const FitConfig& cfg);

// Individual terms with gradients, exposed for testing and reuse.
struct TermEvaluation {
  double value = 0.0;
  Gradient grad;
};
TermEvaluation alignment_term(const LinearTransform& t, const Matrix& x, std::span<const Triplet> triplets,
                              SimKind sim, bool with_gradient);
TermEvaluation local_term(const LinearTransform& t, const Matrix& y, double tau, bool with_gradient);
TermEvaluation naive_penalty_term(const LinearTransform& t, double lambda, bool with_gradient);
TermEvaluation shrinkage_penalty_term(const LinearTransform& t, double lambda, bool with_gradient);

}  // namespace glocal::losses
