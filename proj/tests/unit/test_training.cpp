#include <algorithm>
#include <set>

#include "../scenarios.hpp"
#include "glocal/parallel.hpp"
#include "glocal/similarity.hpp"
#include "glocal/training.hpp"
#include "helpers.hpp"

using namespace glocal;
using namespace glocal::training;

TEST_SUITE("training") {

TEST_CASE("object-disjoint split on a small case") {
  // Four items split two and two: every triplet spans both sides, so no
  // seed can give either side a triplet.
  TripletDataset d{{Triplet{0, 1, 2}, Triplet{1, 2, 0}, Triplet{2, 0, 1}}, 4};
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    CHECK_ERROR_KIND(object_disjoint_split(d, 4, 0.5, seed), ErrorKind::EmptyPartition);

  // Six items, three per side, with triplets inside {0,1,2} and {3,4,5}.
  TripletDataset six{{Triplet{0, 1, 2}, Triplet{3, 4, 5}, Triplet{0, 3, 1}}, 6};
  std::size_t routed = 0;
  for (std::uint64_t seed = 0; seed < 200 && routed == 0; ++seed) {
    try {
      const ObjectSplit a = object_disjoint_split(six, 6, 0.5, seed);
      const ObjectSplit b = object_disjoint_split(six, 6, 0.5, seed);
      CHECK(a.test_items == b.test_items);
      CHECK(a.train.triplets == b.train.triplets);
      CHECK(a.train.size() == 1);
      CHECK(a.test.size() == 1);
      CHECK(a.discarded.size() == 1);
      ++routed;
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyPartition);
    }
  }
  CHECK(routed == 1);
}

TEST_CASE("split partition law and discard rate") {
  std::mt19937_64 rng(2);
  const TripletDataset d = testing::random_triplets(20000, 100, rng);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ObjectSplit s = object_disjoint_split(d, 100, 0.2, seed);
    CHECK(s.test_items.size() == 20);
    CHECK(s.train.size() + s.test.size() + s.discarded.size() == d.size());
    std::set<Index> test(s.test_items.begin(), s.test_items.end());
    for (const auto& t : s.train.triplets)
      for (Index i : t.items()) CHECK(test.count(i) == 0);
    for (const auto& t : s.test.triplets)
      for (Index i : t.items()) CHECK(test.count(i) == 1);
    // 1 - C(80,3)/C(100,3) - C(20,3)/C(100,3) = 0.4849 for distinct items;
    // 1 - 0.8^3 - 0.2^3 = 0.48 in the with-replacement approximation.
    const double frac = static_cast<double>(s.discarded.size()) / static_cast<double>(d.size());
    CHECK(std::abs(frac - 0.48) < 0.05);
  }
  CHECK_ERROR_KIND(object_disjoint_split(d, 100, 0.0, 1), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(object_disjoint_split(d, 100, 1.0, 1), ErrorKind::InvalidArgument);
  TripletDataset tiny{{Triplet{0, 1, 2}}, 3};
  CHECK_ERROR_KIND(object_disjoint_split(tiny, 3, 0.5, 0), ErrorKind::EmptyPartition);
}

TEST_CASE("zero epochs returns the identity") {
  std::mt19937_64 rng(3);
  const EmbeddingMatrix x(testing::random_matrix(10, 3, rng));
  const TripletDataset d = testing::random_triplets(30, 10, rng);
  FitConfig cfg;
  cfg.epochs = 0;
  const FitResult r = fit(x, d, nullptr, cfg);
  CHECK(r.transform.W == Matrix::Identity(3, 3));
  CHECK(r.transform.b.isZero());
  CHECK(r.trace.empty());
}

TEST_CASE("epoch loss decreases on a learnable task") {
  const scenario::Recovery r = scenario::recovery();
  FitConfig cfg = scenario::recovery_config(Objective::Naive);
  cfg.eta = 0.001;
  cfg.epochs = 30;
  const FitResult f = fit(r.x, r.split.train, nullptr, cfg);
  REQUIRE(f.trace.size() == 30);
  for (std::size_t e = 1; e < f.trace.size(); ++e) CHECK(f.trace[e].mean.total < f.trace[e - 1].mean.total);
}

TEST_CASE("fit learns the planted transform") {
  const scenario::Recovery r = scenario::recovery();
  const FitResult f = fit(r.x, r.split.train, nullptr, scenario::recovery_config(Objective::Naive));
  const double base = similarity::odd_one_out_accuracy(r.x, r.split.test);
  const double fitted = similarity::odd_one_out_accuracy(r.x, r.split.test, &f.transform);
  CHECK(fitted >= base + 0.15);
}

TEST_CASE("global equals glocal with alpha zero") {
  std::mt19937_64 rng(4);
  const EmbeddingMatrix x(testing::random_matrix(30, 4, rng));
  const EmbeddingMatrix y(testing::random_matrix(12, 4, rng));
  const TripletDataset d = testing::random_triplets(200, 30, rng);
  FitConfig cfg;
  cfg.objective = Objective::Global;
  cfg.epochs = 5;
  cfg.batch_triplets = 64;
  cfg.batch_items = 5;
  cfg.eta = 0.01;
  const FitResult g = fit(x, d, nullptr, cfg);
  cfg.objective = Objective::GLocal;
  cfg.alpha = 0.0;
  const FitResult gl = fit(x, d, &y, cfg);
  CHECK(g.transform.W == gl.transform.W);
  CHECK(g.transform.b == gl.transform.b);
}

TEST_CASE("fit is deterministic across thread counts") {
  std::mt19937_64 rng(5);
  const EmbeddingMatrix x(testing::random_matrix(60, 5, rng));
  const EmbeddingMatrix y(testing::random_matrix(40, 5, rng));
  const TripletDataset d = testing::random_triplets(1500, 60, rng);
  FitConfig cfg;
  cfg.objective = Objective::GLocal;
  cfg.epochs = 3;
  cfg.batch_items = 16;
  const std::size_t before = thread_count();
  set_thread_count(1);
  const FitResult one = fit(x, d, &y, cfg);
  set_thread_count(4);
  const FitResult four = fit(x, d, &y, cfg);
  set_thread_count(before);
  CHECK(one.transform.W == four.transform.W);
  CHECK(one.transform.b == four.transform.b);
}

TEST_CASE("large shrinkage pulls W toward a scaled identity") {
  const scenario::Recovery r = scenario::recovery();
  FitConfig cfg = scenario::recovery_config(Objective::Global);
  cfg.lambda = 1e6;
  cfg.eta = 1e-7;
  cfg.epochs = 20;
  const FitResult f = fit(r.x, r.split.train, nullptr, cfg);
  const Matrix off = f.transform.W - Matrix(f.transform.W.diagonal().asDiagonal());
  CHECK(off.norm() < 1e-3 * f.transform.W.norm());
}

TEST_CASE("divergence is reported") {
  std::mt19937_64 rng(6);
  const EmbeddingMatrix x(testing::random_matrix(20, 3, rng, 10.0));
  const TripletDataset d = testing::random_triplets(100, 20, rng);
  FitConfig cfg;
  cfg.eta = 1e3;
  cfg.epochs = 50;
  CHECK_ERROR_KIND(fit(x, d, nullptr, cfg), ErrorKind::NonFiniteLoss);
  cfg.objective = Objective::GLocal;
  cfg.eta = 0.001;
  CHECK_ERROR_KIND(fit(x, d, nullptr, cfg), ErrorKind::InvalidArgument);
}

TEST_CASE("cv folds and grid expansion") {
  const auto folds = cv_fold_assignment(10, 3, 7);
  std::vector<int> count(3, 0);
  for (std::size_t f : folds) count[f]++;
  CHECK(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()) <= 1);
  CHECK(cv_fold_assignment(10, 3, 7) == folds);
  CHECK_ERROR_KIND(cv_fold_assignment(10, 1, 7), ErrorKind::InvalidArgument);

  FitConfig cfg;
  CHECK(expand_grid(cfg).size() == 1);
  cfg.grids = HyperGrid::defaults();
  CHECK(expand_grid(cfg).size() == 16);
  cfg.objective = Objective::GLocal;
  CHECK(expand_grid(cfg).size() == 4 * 4 * 5 * 4);
}

TEST_CASE("single-configuration grid equals a plain fit") {
  std::mt19937_64 rng(7);
  const EmbeddingMatrix x(testing::random_matrix(40, 4, rng));
  const TripletDataset d = testing::random_triplets(300, 40, rng);
  ObjectSplit split;
  split.train = d;
  FitConfig cfg;
  cfg.epochs = 5;
  cfg.grids = HyperGrid{{cfg.eta}, {cfg.lambda}, {cfg.alpha}, {cfg.tau}};
  const GridSearchResult gs = grid_search(x, split, nullptr, cfg);
  REQUIRE(gs.cells.size() == 1);
  CHECK(std::isfinite(gs.cells[0].cv_loss));
  FitConfig plain = cfg;
  plain.grids.reset();
  const FitResult f = fit(x, d, nullptr, plain);
  CHECK(gs.best_fit.transform.W == f.transform.W);
  CHECK(gs.best_fit.transform.b == f.transform.b);
}

TEST_CASE("grid search finds the planted lambda") {
  const scenario::Recovery r = scenario::recovery();
  FitConfig cfg = scenario::recovery_config(Objective::Naive);
  cfg.epochs = 20;
  cfg.grids = HyperGrid{{0.01}, {1e6, 0.01, 1e5}, {0.1}, {0.1}};
  const GridSearchResult gs = grid_search(r.x, r.split, nullptr, cfg);
  CHECK(gs.best_config.lambda == 0.01);
  CHECK(gs.cells.size() == 3);
}

}  // TEST_SUITE
