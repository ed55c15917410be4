#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "glocal/report.hpp"
#include "glocal/types.hpp"

namespace glocal::fewshot {

enum class LabelKind { Fine, Coarse };

const char* to_string(LabelKind k);
LabelKind parse_label_kind(const std::string& s);

struct FewShotEpisode {
  std::vector<Index> train_indices;  // n_shots per class, grouped by class
  std::vector<Index> test_indices;   // every other labeled item
  LabelKind label_kind = LabelKind::Fine;
  std::size_t n_shots = 0;
  std::uint64_t seed = 0;
};

// Labels used for an episode: fine labels or superclass labels.
// Throws MissingLabel when the requested kind is absent.
const std::vector<int>& episode_labels(const EmbeddingMatrix& m, LabelKind kind);

// Draws n_shots items uniformly per class. Coarse episodes sample per
// superclass, so some subclasses may be missing from the train set.
// Throws InsufficientClassExamples.
FewShotEpisode sample_episode(const EmbeddingMatrix& m, std::size_t n_shots, LabelKind kind, std::uint64_t seed);

// Multinomial logistic regression over arbitrary integer labels.
struct SoftmaxClassifier {
  std::vector<int> classes;  // sorted; row c of weights scores classes[c]
  Matrix weights;            // n_classes x dim
  Vector biases;
  double reg_strength = 1.0;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;

  Matrix logits(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;
};

// Minimizes mean cross-entropy + reg_strength/2 * ||weights||^2 (biases
// unpenalized) by L-BFGS with backtracking line search, until the
// gradient norm drops below 1e-5 or 5000 iterations. Throws SingleClassInput.
SoftmaxClassifier fit_softmax_classifier(const Matrix& x, std::span<const int> y, double reg_strength);

double classifier_accuracy(const SoftmaxClassifier& clf, const Matrix& x, std::span<const int> y);

// 1e6, 1e5, ..., 1e-4.
std::vector<double> default_reg_grid();

// n_folds-fold stratified CV over an episode's train set; returns the grid
// value with the best mean validation accuracy (ties: lower validation
// cross-entropy, then earlier grid position). With n_folds < 2 returns 1.0.
double select_reg_strength(const Matrix& x, std::span<const int> y, std::size_t n_folds,
                           std::span<const double> grid, std::uint64_t seed);

// Mean and std of test accuracy over n_runs episodes; per-run rows carry
// the selected regularization strength.
EvalReport evaluate_fewshot(const EmbeddingMatrix& m, const LinearTransform* transform, std::size_t n_shots,
                            LabelKind kind, std::span<const double> reg_grid, std::size_t n_runs,
                            std::uint64_t seed);

}  // namespace glocal::fewshot
