#include "glocal/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "glocal/error.hpp"

namespace glocal {

namespace {

void check_labels(const std::optional<std::vector<int>>& labels, Index n, const char* what) {
  if (!labels) return;
  if (labels->size() != n)
    raise(ErrorKind::DimensionMismatch, std::string(what) + " has " + std::to_string(labels->size()) +
                                            " entries for " + std::to_string(n) + " items");
  for (std::size_t i = 0; i < labels->size(); ++i)
    if ((*labels)[i] < 0)
      raise(ErrorKind::InvalidArgument,
            std::string(what) + " entry " + std::to_string(i) + " is negative");
}

int max_plus_one(const std::optional<std::vector<int>>& labels) {
  if (!labels || labels->empty()) return 0;
  return *std::max_element(labels->begin(), labels->end()) + 1;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(Matrix data, std::vector<std::string> item_ids,
                                 std::optional<std::vector<int>> labels,
                                 std::optional<std::vector<int>> superclass_labels)
    : data_(std::move(data)),
      item_ids_(std::move(item_ids)),
      labels_(std::move(labels)),
      superclass_labels_(std::move(superclass_labels)) {
  const Index n = n_items();
  for (Eigen::Index r = 0; r < data_.rows(); ++r)
    for (Eigen::Index c = 0; c < data_.cols(); ++c)
      if (!std::isfinite(data_(r, c)))
        raise(ErrorKind::NonFiniteValue,
              "row " + std::to_string(r) + ", column " + std::to_string(c));
  if (item_ids_.empty()) {
    item_ids_.reserve(n);
    for (Index i = 0; i < n; ++i) item_ids_.push_back(std::to_string(i));
  }
  if (item_ids_.size() != n)
    raise(ErrorKind::DimensionMismatch, std::to_string(item_ids_.size()) + " ids for " +
                                            std::to_string(n) + " rows");
  std::unordered_set<std::string> seen;
  for (const auto& id : item_ids_)
    if (!seen.insert(id).second) raise(ErrorKind::DuplicateItemId, "item id '" + id + "'");
  check_labels(labels_, n, "labels");
  check_labels(superclass_labels_, n, "superclass labels");
}

int EmbeddingMatrix::n_classes() const { return max_plus_one(labels_); }
int EmbeddingMatrix::n_superclasses() const { return max_plus_one(superclass_labels_); }

EmbeddingMatrix EmbeddingMatrix::with_labels(std::optional<std::vector<int>> labels,
                                             std::optional<std::vector<int>> superclass_labels) const {
  return EmbeddingMatrix(data_, item_ids_, std::move(labels), std::move(superclass_labels));
}

EmbeddingMatrix EmbeddingMatrix::with_data(Matrix data) const {
  if (static_cast<Index>(data.rows()) != n_items())
    raise(ErrorKind::DimensionMismatch, "replacement data has " + std::to_string(data.rows()) +
                                            " rows, expected " + std::to_string(n_items()));
  return EmbeddingMatrix(std::move(data), item_ids_, labels_, superclass_labels_);
}

EmbeddingMatrix EmbeddingMatrix::select_rows(std::span<const Index> rows) const {
  Matrix sub(rows.size(), data_.cols());
  std::vector<std::string> ids;
  std::optional<std::vector<int>> labels, supers;
  if (labels_) labels.emplace();
  if (superclass_labels_) supers.emplace();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n_items())
      raise(ErrorKind::IndexOutOfRange, "row " + std::to_string(rows[r]));
    sub.row(static_cast<Eigen::Index>(r)) = data_.row(static_cast<Eigen::Index>(rows[r]));
    ids.push_back(item_ids_[rows[r]]);
    if (labels) labels->push_back((*labels_)[rows[r]]);
    if (supers) supers->push_back((*superclass_labels_)[rows[r]]);
  }
  return EmbeddingMatrix(std::move(sub), std::move(ids), std::move(labels), std::move(supers));
}

Triplet Triplet::make(Index pair_a, Index pair_b, Index odd_one_out) {
  if (pair_a == pair_b || pair_a == odd_one_out || pair_b == odd_one_out)
    raise(ErrorKind::DuplicateIndexInTriplet,
          std::to_string(pair_a) + "," + std::to_string(pair_b) + "," + std::to_string(odd_one_out));
  return Triplet{pair_a, pair_b, odd_one_out};
}

void TripletDataset::validate() const {
  for (std::size_t s = 0; s < triplets.size(); ++s)
    for (Index idx : triplets[s].items())
      if (idx >= n_items)
        raise(ErrorKind::IndexOutOfRange, "triplet " + std::to_string(s) + " references item " +
                                              std::to_string(idx) + " but n_items = " +
                                              std::to_string(n_items));
}

TripletDataset TripletDataset::bound_to(Index n) const {
  TripletDataset out{triplets, n};
  out.validate();
  return out;
}

LinearTransform LinearTransform::identity(Index dim) {
  return LinearTransform{Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)),
                         Vector::Zero(static_cast<Eigen::Index>(dim))};
}

void LinearTransform::validate() const {
  if (W.rows() != W.cols())
    raise(ErrorKind::DimensionMismatch, "W is " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()));
  if (b.size() != W.rows())
    raise(ErrorKind::DimensionMismatch, "bias has " + std::to_string(b.size()) + " entries, W has " +
                                            std::to_string(W.rows()) + " rows");
  if (!W.allFinite() || !b.allFinite()) raise(ErrorKind::NonFiniteValue, "transform parameters");
}

Matrix LinearTransform::apply(const Matrix& rows) const {
  if (rows.cols() != W.cols())
    raise(ErrorKind::DimensionMismatch, "embedding dim " + std::to_string(rows.cols()) +
                                            " vs transform dim " + std::to_string(W.cols()));
  Matrix out = rows * W.transpose();
  out.rowwise() += b.transpose();
  return out;
}

const char* to_string(Objective o) {
  switch (o) {
    case Objective::Naive: return "naive";
    case Objective::Global: return "global";
    case Objective::GLocal: return "glocal";
  }
  return "?";
}

Objective parse_objective(const std::string& s) {
  if (s == "naive") return Objective::Naive;
  if (s == "global") return Objective::Global;
  if (s == "glocal") return Objective::GLocal;
  raise(ErrorKind::InvalidArgument, "unknown objective '" + s + "'");
}

const char* to_string(SimKind k) { return k == SimKind::Dot ? "dot" : "cosine"; }

SimKind parse_sim_kind(const std::string& s) {
  if (s == "dot") return SimKind::Dot;
  if (s == "cosine") return SimKind::Cosine;
  raise(ErrorKind::InvalidArgument, "unknown similarity '" + s + "'");
}

HyperGrid HyperGrid::defaults() {
  return HyperGrid{{0.0001, 0.001, 0.01, 0.1},
                   {0.01, 0.1, 1.0, 10.0},
                   {0.05, 0.1, 0.25, 0.5, 1.0},
                   {0.1, 0.25, 0.5, 1.0}};
}

void FitConfig::validate() const {
  auto bad = [](const std::string& what) { raise(ErrorKind::InvalidArgument, what); };
  if (!(lambda >= 0.0)) bad("lambda must be >= 0");
  if (!(eta > 0.0)) bad("eta must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) bad("momentum must lie in [0, 1)");
  if (batch_triplets == 0) bad("batch_triplets must be positive");
  if (folds < 2) bad("folds must be >= 2");
  if (objective == Objective::GLocal) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) bad("alpha must lie in [0, 1]");
    if (!(tau > 0.0)) raise(ErrorKind::TemperatureNonPositive, "tau = " + std::to_string(tau));
    if (batch_items < 2) bad("batch_items must be >= 2");
  }
  if (grids) {
    if (grids->eta.empty() || grids->lambda.empty()) bad("eta and lambda grids must be non-empty");
    if (objective == Objective::GLocal && (grids->alpha.empty() || grids->tau.empty()))
      bad("glocal grids need alpha and tau values");
  }
}

}  // namespace glocal
