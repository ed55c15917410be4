#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glocal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

// n_items x dim item representations with identifiers and optional
// fine/coarse class labels. Immutable once constructed; the constructor
// enforces finiteness, unique ids, and non-negative labels.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  // Empty `item_ids` assigns "0", "1", ... in row order.
  explicit EmbeddingMatrix(Matrix data, std::vector<std::string> item_ids = {},
                           std::optional<std::vector<int>> labels = std::nullopt,
                           std::optional<std::vector<int>> superclass_labels = std::nullopt);

  Index n_items() const { return static_cast<Index>(data_.rows()); }
  Index dim() const { return static_cast<Index>(data_.cols()); }
  const Matrix& data() const { return data_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }
  const std::optional<std::vector<int>>& superclass_labels() const { return superclass_labels_; }

  // max label + 1, or 0 without labels.
  int n_classes() const;
  int n_superclasses() const;

  EmbeddingMatrix with_labels(std::optional<std::vector<int>> labels,
                              std::optional<std::vector<int>> superclass_labels) const;
  // Same ids and labels over new row data (e.g. a transformed space).
  EmbeddingMatrix with_data(Matrix data) const;
  EmbeddingMatrix select_rows(std::span<const Index> rows) const;

 private:
  Matrix data_;
  std::vector<std::string> item_ids_;
  std::optional<std::vector<int>> labels_;
  std::optional<std::vector<int>> superclass_labels_;
};

// One odd-one-out judgment: {pair_a, pair_b} were chosen as most similar.
struct Triplet {
  Index pair_a = 0;
  Index pair_b = 1;
  Index odd_one_out = 2;

  // Throws DuplicateIndexInTriplet.
  static Triplet make(Index pair_a, Index pair_b, Index odd_one_out);

  std::array<Index, 3> items() const { return {pair_a, pair_b, odd_one_out}; }
  bool operator==(const Triplet&) const = default;
};

struct TripletDataset {
  std::vector<Triplet> triplets;
  Index n_items = 0;

  std::size_t size() const { return triplets.size(); }
  // Throws IndexOutOfRange if any index >= n_items.
  void validate() const;
  // Rebinds to an embedding of `n` items; throws IndexOutOfRange.
  TripletDataset bound_to(Index n) const;
};

struct LinearTransform {
  Matrix W;
  Vector b;

  static LinearTransform identity(Index dim);
  Index dim() const { return static_cast<Index>(W.rows()); }
  // Throws DimensionMismatch (non-square, bias size) or NonFiniteValue.
  void validate() const;
  // Rows of `rows` mapped to W x + b.
  Matrix apply(const Matrix& rows) const;
};

enum class Objective { Naive, Global, GLocal };
enum class SimKind { Dot, Cosine };

const char* to_string(Objective o);
Objective parse_objective(const std::string& s);
const char* to_string(SimKind k);
SimKind parse_sim_kind(const std::string& s);

struct HyperGrid {
  std::vector<double> eta;
  std::vector<double> lambda;
  std::vector<double> alpha;
  std::vector<double> tau;

  // eta {1e-4..1e-1}, lambda {1e-2..10}, alpha {.05,.1,.25,.5,1}, tau {.1,.25,.5,1}.
  static HyperGrid defaults();
};

struct FitConfig {
  Objective objective = Objective::Naive;
  double lambda = 0.1;
  double alpha = 0.1;
  double tau = 0.1;
  double eta = 0.001;
  double momentum = 0.9;
  std::size_t epochs = 100;
  std::size_t batch_triplets = 256;
  std::size_t batch_items = 128;
  std::size_t folds = 3;
  std::uint64_t seed = 0;
  // Similarity inside the alignment loss while training.
  SimKind train_sim = SimKind::Dot;
  std::optional<HyperGrid> grids;

  // Throws InvalidArgument on out-of-range hyperparameters.
  void validate() const;
};

}  // namespace glocal
