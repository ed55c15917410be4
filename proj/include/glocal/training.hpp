#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "glocal/losses.hpp"
#include "glocal/types.hpp"

namespace glocal::training {

// Items partitioned into train/test; triplets spanning both sides are
// discarded.
struct ObjectSplit {
  std::vector<Index> train_items;
  std::vector<Index> test_items;
  TripletDataset train;
  TripletDataset test;
  TripletDataset discarded;
};

// Throws InvalidArgument unless 0 < test_fraction < 1, EmptyPartition if
// either side receives no triplets.
ObjectSplit object_disjoint_split(const TripletDataset& d, Index n_items, double test_fraction,
                                  std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;
  losses::LossValue mean;  // averaged over the epoch's batches
};

struct FitResult {
  LinearTransform transform;
  std::vector<EpochRecord> trace;
};

// Minibatch SGD with momentum from W = I, b = 0. `y_local` is required for
// glocal and ignored otherwise. Throws NonFiniteLoss on divergence.
FitResult fit(const EmbeddingMatrix& x_align, const TripletDataset& train, const EmbeddingMatrix* y_local,
              const FitConfig& cfg);

// fold[s] in [0, k) for each of n triplets; fold sizes differ by at most one.
std::vector<std::size_t> cv_fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed);

struct GridCell {
  FitConfig config;
  double cv_loss = std::numeric_limits<double>::infinity();
  double cv_accuracy = 0.0;
  bool diverged = false;
};

struct GridSearchResult {
  std::vector<GridCell> cells;
  std::size_t best_index = 0;
  FitConfig best_config;
  FitResult best_fit;
};

// Cartesian product of base.grids (eta x lambda, plus alpha x tau for glocal);
// without grids, just `base`.
std::vector<FitConfig> expand_grid(const FitConfig& base);

// k-fold CV over split.train per configuration. Selects the lowest mean CV
// alignment loss, then higher CV odd-one-out accuracy, then smaller lambda,
// and refits that configuration on all of split.train. Diverging cells
// score +inf.
GridSearchResult grid_search(const EmbeddingMatrix& x_align, const ObjectSplit& split,
                             const EmbeddingMatrix* y_local, const FitConfig& base);

}  // namespace glocal::training
