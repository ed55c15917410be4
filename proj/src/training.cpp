#include "glocal/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "glocal/error.hpp"
#include "glocal/parallel.hpp"
#include "glocal/similarity.hpp"

namespace glocal::training {

namespace {

// Independent stream for local-row batching, so the triplet order does not
// depend on whether the local term is active.
constexpr std::uint64_t kLocalStreamSalt = 0x9E3779B97F4A7C15ull;

std::string describe(const FitConfig& cfg) {
  return std::string(to_string(cfg.objective)) + " eta=" + std::to_string(cfg.eta) +
         " lambda=" + std::to_string(cfg.lambda) + " alpha=" + std::to_string(cfg.alpha) +
         " tau=" + std::to_string(cfg.tau);
}

}  // namespace

ObjectSplit object_disjoint_split(const TripletDataset& d, Index n_items, double test_fraction,
                                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    raise(ErrorKind::InvalidArgument, "test_fraction must lie in (0, 1)");
  const TripletDataset bound = d.bound_to(n_items);
  std::vector<Index> order(n_items);
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<Index>(std::llround(test_fraction * static_cast<double>(n_items)));

  ObjectSplit split;
  std::vector<char> is_test(n_items, 0);
  for (Index r = 0; r < n_items; ++r) {
    if (r < n_test) is_test[order[r]] = 1;
  }
  for (Index i = 0; i < n_items; ++i) (is_test[i] ? split.test_items : split.train_items).push_back(i);
  split.train.n_items = split.test.n_items = split.discarded.n_items = n_items;
  for (const auto& t : bound.triplets) {
    int tests = 0;
    for (Index i : t.items()) tests += is_test[i];
    if (tests == 0)
      split.train.triplets.push_back(t);
    else if (tests == 3)
      split.test.triplets.push_back(t);
    else
      split.discarded.triplets.push_back(t);
  }
  if (split.train.size() == 0) raise(ErrorKind::EmptyPartition, "train side received no triplets");
  if (split.test.size() == 0) raise(ErrorKind::EmptyPartition, "test side received no triplets");
  return split;
}

FitResult fit(const EmbeddingMatrix& x_align, const TripletDataset& train, const EmbeddingMatrix* y_local,
              const FitConfig& cfg) {
  cfg.validate();
  const bool glocal = cfg.objective == Objective::GLocal;
  if (glocal && !y_local) raise(ErrorKind::InvalidArgument, "glocal objective requires a local embedding");
  if (glocal && y_local->dim() != x_align.dim())
    raise(ErrorKind::DimensionMismatch, "local embedding dim " + std::to_string(y_local->dim()) +
                                            " vs alignment dim " + std::to_string(x_align.dim()));
  if (glocal && y_local->n_items() < 2) raise(ErrorKind::InvalidArgument, "local embedding needs >= 2 rows");
  train.bound_to(x_align.n_items());
  if (train.size() == 0) raise(ErrorKind::InvalidArgument, "no training triplets");

  const Index dim = x_align.dim();
  FitResult result{LinearTransform::identity(dim), {}};
  LinearTransform& t = result.transform;
  Matrix velocity_w = Matrix::Zero(t.W.rows(), t.W.cols());
  Vector velocity_b = Vector::Zero(t.b.size());

  std::mt19937_64 triplet_rng(cfg.seed);
  std::mt19937_64 local_rng(cfg.seed ^ kLocalStreamSalt);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<Eigen::Index> local_order;
  std::size_t local_cursor = 0;
  if (glocal) {
    local_order.resize(y_local->n_items());
    std::iota(local_order.begin(), local_order.end(), Eigen::Index{0});
    std::shuffle(local_order.begin(), local_order.end(), local_rng);
  }
  const std::size_t local_batch = glocal ? std::min<std::size_t>(cfg.batch_items, y_local->n_items()) : 0;
  Matrix local_rows;

  std::vector<Triplet> batch;
  batch.reserve(cfg.batch_triplets);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), triplet_rng);
    EpochRecord record{epoch, {}};
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_triplets) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_triplets);
      batch.clear();
      for (std::size_t s = start; s < stop; ++s) batch.push_back(train.triplets[order[s]]);

      losses::ObjectiveInputs in{x_align.data(), batch, nullptr};
      if (glocal) {
        if (local_cursor + local_batch > local_order.size()) {
          std::shuffle(local_order.begin(), local_order.end(), local_rng);
          local_cursor = 0;
        }
        local_rows.resize(static_cast<Eigen::Index>(local_batch), static_cast<Eigen::Index>(dim));
        for (std::size_t r = 0; r < local_batch; ++r)
          local_rows.row(static_cast<Eigen::Index>(r)) = y_local->data().row(local_order[local_cursor + r]);
        local_cursor += local_batch;
        in.local_rows = &local_rows;
      }

      losses::Evaluation ev;
      try {
        ev = losses::evaluate_objective(t, in, cfg, true);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::ZeroVector || e.kind() == ErrorKind::NonFiniteValue)
          raise(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch) + " (" + describe(cfg) + "): " + e.what());
        throw;
      }
      if (!std::isfinite(ev.loss.total) || !ev.grad.all_finite())
        raise(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch) + " (" + describe(cfg) + ")");

      velocity_w = cfg.momentum * velocity_w + ev.grad.dW;
      velocity_b = cfg.momentum * velocity_b + ev.grad.db;
      t.W -= cfg.eta * velocity_w;
      t.b -= cfg.eta * velocity_b;

      record.mean.total += ev.loss.total;
      record.mean.alignment += ev.loss.alignment;
      record.mean.local += ev.loss.local;
      record.mean.penalty += ev.loss.penalty;
      ++n_batches;
    }
    const double inv = 1.0 / static_cast<double>(n_batches);
    record.mean.total *= inv;
    record.mean.alignment *= inv;
    record.mean.local *= inv;
    record.mean.penalty *= inv;
    result.trace.push_back(record);
  }
  if (!t.W.allFinite() || !t.b.allFinite())
    raise(ErrorKind::NonFiniteLoss, "parameters diverged (" + describe(cfg) + ")");
  return result;
}

std::vector<std::size_t> cv_fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) raise(ErrorKind::InvalidArgument, "need at least 2 folds");
  if (n < k) raise(ErrorKind::InvalidArgument, std::to_string(n) + " triplets cannot fill " + std::to_string(k) + " folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = pos % k;
  return fold;
}

std::vector<FitConfig> expand_grid(const FitConfig& base) {
  if (!base.grids) return {base};
  const HyperGrid& g = *base.grids;
  const bool glocal = base.objective == Objective::GLocal;
  const std::vector<double> alphas = glocal ? g.alpha : std::vector<double>{base.alpha};
  const std::vector<double> taus = glocal ? g.tau : std::vector<double>{base.tau};
  std::vector<FitConfig> out;
  for (double eta : g.eta)
    for (double lambda : g.lambda)
      for (double alpha : alphas)
        for (double tau : taus) {
          FitConfig c = base;
          c.grids.reset();
          c.eta = eta;
          c.lambda = lambda;
          c.alpha = alpha;
          c.tau = tau;
          out.push_back(c);
        }
  return out;
}

GridSearchResult grid_search(const EmbeddingMatrix& x_align, const ObjectSplit& split,
                             const EmbeddingMatrix* y_local, const FitConfig& base) {
  base.validate();
  const std::vector<FitConfig> configs = expand_grid(base);
  const std::size_t k = base.folds;
  const std::vector<std::size_t> fold = cv_fold_assignment(split.train.size(), k, base.seed);

  std::vector<TripletDataset> fold_train(k), fold_valid(k);
  for (std::size_t f = 0; f < k; ++f) {
    fold_train[f].n_items = fold_valid[f].n_items = split.train.n_items;
    for (std::size_t s = 0; s < split.train.size(); ++s)
      (fold[s] == f ? fold_valid[f] : fold_train[f]).triplets.push_back(split.train.triplets[s]);
  }

  GridSearchResult result;
  result.cells.resize(configs.size());
  parallel_for(configs.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      GridCell cell{configs[c]};
      double loss_sum = 0.0, acc_sum = 0.0;
      try {
        for (std::size_t f = 0; f < k; ++f) {
          const FitResult r = fit(x_align, fold_train[f], y_local, configs[c]);
          const double loss = losses::global_alignment_loss(r.transform, x_align, fold_valid[f], configs[c].train_sim);
          if (!std::isfinite(loss)) raise(ErrorKind::NonFiniteLoss, "validation loss");
          loss_sum += loss;
          acc_sum += similarity::odd_one_out_accuracy(x_align, fold_valid[f], &r.transform);
        }
        cell.cv_loss = loss_sum / static_cast<double>(k);
        cell.cv_accuracy = acc_sum / static_cast<double>(k);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteLoss && e.kind() != ErrorKind::ZeroVector) throw;
        cell.diverged = true;
        cell.cv_loss = std::numeric_limits<double>::infinity();
        cell.cv_accuracy = 0.0;
      }
      result.cells[c] = cell;
    }
  }, 1);

  std::size_t best = 0;
  for (std::size_t c = 1; c < result.cells.size(); ++c) {
    const GridCell& a = result.cells[c];
    const GridCell& b = result.cells[best];
    if (a.cv_loss < b.cv_loss ||
        (a.cv_loss == b.cv_loss &&
         (a.cv_accuracy > b.cv_accuracy || (a.cv_accuracy == b.cv_accuracy && a.config.lambda < b.config.lambda))))
      best = c;
  }
  if (result.cells[best].diverged) raise(ErrorKind::NonFiniteLoss, "every grid configuration diverged");
  result.best_index = best;
  result.best_config = result.cells[best].config;
  result.best_fit = fit(x_align, split.train, y_local, result.best_config);
  return result;
}

}  // namespace glocal::training
