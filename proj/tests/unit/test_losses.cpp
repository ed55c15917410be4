#include <cmath>

#include "../fd.hpp"
#include "../oracles.hpp"
#include "glocal/losses.hpp"
#include "helpers.hpp"

using namespace glocal;
using namespace glocal::losses;

namespace {

LinearTransform random_transform(Index dim, std::mt19937_64& rng) {
  LinearTransform t{Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)) +
                        testing::random_matrix(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim), rng, 0.3),
                    testing::random_matrix(static_cast<Eigen::Index>(dim), 1, rng, 0.1).col(0)};
  return t;
}

// Mean -log p(chosen pair) with dot-product similarities, triplet by triplet.
double alignment_by_loop(const LinearTransform& t, const Matrix& x, const TripletDataset& d) {
  const Matrix z = t.apply(x);
  double s = 0.0;
  for (const auto& tr : d.triplets) {
    const auto a = static_cast<Eigen::Index>(tr.pair_a), b = static_cast<Eigen::Index>(tr.pair_b),
               o = static_cast<Eigen::Index>(tr.odd_one_out);
    s -= std::log(oracle::pair_probability(z.row(a).dot(z.row(b)), z.row(a).dot(z.row(o)), z.row(b).dot(z.row(o))));
  }
  return s / static_cast<double>(d.size());
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("apply transform") {
  std::mt19937_64 rng(1);
  const EmbeddingMatrix x(testing::random_matrix(3, 4, rng), {"a", "b", "c"}, std::vector<int>{0, 1, 0});
  const LinearTransform t = random_transform(4, rng);
  const EmbeddingMatrix z = apply_transform(t, x);
  CHECK(z.item_ids() == x.item_ids());
  CHECK(*z.labels() == *x.labels());
  CHECK((z.data() - t.apply(x.data())).norm() == 0.0);
}

TEST_CASE("global alignment loss") {
  const EmbeddingMatrix sym(Matrix::Ones(6, 3));
  std::mt19937_64 rng(2);
  const TripletDataset d = testing::random_triplets(50, 6, rng);
  for (SimKind k : {SimKind::Dot, SimKind::Cosine})
    CHECK(global_alignment_loss(LinearTransform::identity(3), sym, d, k) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  Matrix rows(3, 2);
  rows << 1, 0, 1, 0, 0, 1;
  TripletDataset one{{Triplet{0, 1, 2}}, 3};
  const double e = std::exp(1.0);
  const double loss = global_alignment_loss(LinearTransform::identity(2), EmbeddingMatrix(rows), one, SimKind::Dot);
  CHECK(loss == doctest::Approx(std::log((e + 2.0) / e)).epsilon(1e-14));
  CHECK(loss == doctest::Approx(0.5514).epsilon(1e-4));

  const Matrix x = testing::random_matrix(20, 5, rng);
  const LinearTransform t = random_transform(5, rng);
  const TripletDataset d2 = testing::random_triplets(40, 20, rng);
  CHECK(global_alignment_loss(t, EmbeddingMatrix(x), d2, SimKind::Dot) ==
        doctest::Approx(alignment_by_loop(t, x, d2)).epsilon(1e-12));
}

TEST_CASE("naive penalty") {
  CHECK(naive_penalty(LinearTransform{Matrix::Zero(3, 3), Vector::Zero(3)}, 0.7) == 0.0);
  CHECK(naive_penalty(LinearTransform::identity(4), 1.0) == 4.0);
  std::mt19937_64 rng(3);
  const LinearTransform t = random_transform(5, rng);
  double ss = 0.0;
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) ss += t.W(i, j) * t.W(i, j);
  CHECK(naive_penalty(t, 0.1) == doctest::Approx(0.1 * ss).epsilon(1e-14));

  const TermEvaluation g = naive_penalty_term(t, 0.1, true);
  CHECK((g.grad.dW - 0.2 * t.W).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(g.grad.db.isZero());
}

TEST_CASE("shrinkage penalty") {
  for (double c : {-2.0, 0.0, 0.5, 3.0}) {
    const LinearTransform t{c * Matrix::Identity(4, 4), Vector::Zero(4)};
    CHECK(shrinkage_penalty(t, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    const TermEvaluation g = shrinkage_penalty_term(t, 1.0, true);
    CHECK(g.grad.dW.cwiseAbs().maxCoeff() < 1e-15);
  }
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 3.0;
  CHECK(shrinkage_penalty(LinearTransform{d, Vector::Zero(2)}, 0.3) == doctest::Approx(0.6).epsilon(1e-15));

  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix w = testing::random_matrix(6, 6, rng);
    const double ours = shrinkage_penalty(LinearTransform{w, Vector::Zero(6)}, 0.1);
    const double searched = oracle::shrinkage_by_search(w, 0.1);
    CHECK(std::abs(ours - searched) <= 1e-10 * searched);
  }
}

TEST_CASE("local contrastive loss") {
  std::mt19937_64 rng(5);
  const Matrix y = testing::random_matrix(7, 4, rng);
  const double tau = 0.3;
  const Matrix p = oracle::row_softmax(oracle::cosine_matrix(y), tau);
  double self = 0.0;
  for (Eigen::Index i = 0; i < 7; ++i)
    for (Eigen::Index j = 0; j < 7; ++j)
      if (i != j) self -= p(i, j) * std::log(p(i, j));
  self /= 42.0;
  const double at_identity = local_contrastive_loss(LinearTransform::identity(4), EmbeddingMatrix(y), tau);
  CHECK(at_identity == doctest::Approx(self).epsilon(1e-12));
  for (int rep = 0; rep < 5; ++rep)
    CHECK(local_contrastive_loss(random_transform(4, rng), EmbeddingMatrix(y), tau) >= at_identity - 1e-12);

  CHECK(local_contrastive_loss(random_transform(4, rng), EmbeddingMatrix(testing::random_matrix(2, 4, rng)), tau) ==
        doctest::Approx(0.0).epsilon(1e-15));

  const Matrix y5 = testing::random_matrix(5, 3, rng);
  const LinearTransform t = random_transform(3, rng);
  CHECK(local_contrastive_loss(t, EmbeddingMatrix(y5), 0.1) ==
        doctest::Approx(oracle::local_loss(y5, t.W, t.b, 0.1)).epsilon(1e-11));
  CHECK_ERROR_KIND(local_contrastive_loss(t, EmbeddingMatrix(y5), -1.0), ErrorKind::TemperatureNonPositive);
}

TEST_CASE("glocal objective bookkeeping") {
  std::mt19937_64 rng(6);
  const EmbeddingMatrix x(testing::random_matrix(12, 4, rng));
  const EmbeddingMatrix y(testing::random_matrix(8, 4, rng));
  const TripletDataset d = testing::random_triplets(20, 12, rng);
  const LinearTransform t = random_transform(4, rng);
  FitConfig cfg;
  cfg.objective = Objective::GLocal;
  cfg.lambda = 0.2;
  cfg.tau = 0.5;

  cfg.alpha = 0.0;
  const LossValue a0 = glocal_objective(t, x, d, y, cfg);
  const double global_total = global_alignment_loss(t, x, d, cfg.train_sim) + shrinkage_penalty(t, cfg.lambda);
  CHECK(a0.total == doctest::Approx(global_total).epsilon(1e-12));

  cfg.alpha = 1.0;
  const LossValue a1 = glocal_objective(t, x, d, y, cfg);
  CHECK(a1.total == doctest::Approx(local_contrastive_loss(t, y, cfg.tau) + shrinkage_penalty(t, cfg.lambda)).epsilon(1e-12));

  cfg.alpha = 0.37;
  const LossValue v = glocal_objective(t, x, d, y, cfg);
  CHECK(std::abs(v.total - ((1 - 0.37) * v.alignment + 0.37 * v.local + v.penalty)) < 1e-12);
  CHECK(v.alignment == doctest::Approx(global_alignment_loss(t, x, d, cfg.train_sim)).epsilon(1e-12));
  CHECK(v.local == doctest::Approx(local_contrastive_loss(t, y, cfg.tau)).epsilon(1e-12));
  CHECK(v.penalty == doctest::Approx(shrinkage_penalty(t, cfg.lambda)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences") {
  std::mt19937_64 rng(7);
  const Matrix x = testing::random_matrix(15, 6, rng);
  const Matrix y = testing::random_matrix(8, 6, rng);
  const TripletDataset d = testing::random_triplets(20, 15, rng);
  const ObjectiveInputs in{x, d.triplets, &y};
  for (Objective obj : {Objective::Naive, Objective::Global, Objective::GLocal})
    for (SimKind sim : {SimKind::Dot, SimKind::Cosine}) {
      FitConfig cfg;
      cfg.objective = obj;
      cfg.train_sim = sim;
      cfg.lambda = 0.3;
      cfg.alpha = 0.4;
      cfg.tau = 0.5;
      const LinearTransform t = random_transform(6, rng);
      const Gradient analytic = evaluate_objective(t, in, cfg, true).grad;
      const Gradient numeric = fd::central_difference(t, in, cfg, 1e-5);
      CAPTURE(to_string(obj));
      CAPTURE(to_string(sim));
      CHECK(fd::max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("evaluation agrees with the standalone losses") {
  std::mt19937_64 rng(8);
  const Matrix x = testing::random_matrix(10, 3, rng);
  const Matrix y = testing::random_matrix(6, 3, rng);
  const TripletDataset d = testing::random_triplets(25, 10, rng);
  const LinearTransform t = random_transform(3, rng);
  FitConfig cfg;
  cfg.lambda = 0.05;
  const ObjectiveInputs in{x, d.triplets, &y};
  const LossValue naive = evaluate_objective(t, in, cfg, false).loss;
  CHECK(naive.total == doctest::Approx(alignment_by_loop(t, x, d) + naive_penalty(t, 0.05)).epsilon(1e-12));
  cfg.objective = Objective::Global;
  const LossValue global = evaluate_objective(t, in, cfg, false).loss;
  CHECK(global.penalty == doctest::Approx(shrinkage_penalty(t, 0.05)).epsilon(1e-12));
  cfg.objective = Objective::GLocal;
  const ObjectiveInputs no_local{x, d.triplets, nullptr};
  CHECK_ERROR_KIND(evaluate_objective(t, no_local, cfg, false), ErrorKind::InvalidArgument);
}

}  // TEST_SUITE
