#pragma once

#include <vector>

#include "glocal/report.hpp"
#include "glocal/types.hpp"

namespace glocal::anomaly {

constexpr std::size_t kDefaultK = 5;

// Higher score = more anomalous; label 1 = anomalous.
struct AnomalyScores {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Mean cosine distance from each test row to its k most similar nominal
// rows (ties at the k-th rank go to the smaller nominal index).
// Throws KTooLarge, ZeroVector.
std::vector<double> knn_anomaly_scores(const Matrix& train_nominal, const Matrix& test, std::size_t k);
std::vector<double> knn_anomaly_scores(const EmbeddingMatrix& train_nominal, const EmbeddingMatrix& test,
                                       std::size_t k, const LinearTransform* transform = nullptr);

// Mann-Whitney AUROC with midranks: P(anomalous > nominal) + 1/2 P(tie).
// Throws SingleClassLabels.
double auroc(const AnomalyScores& s);

// Each train class in turn is nominal; every test item is scored and items
// of other classes are anomalous. One row per class plus a final "mean" row.
EvalReport one_vs_rest_benchmark(const EmbeddingMatrix& train, const EmbeddingMatrix& test, std::size_t k,
                                 const LinearTransform* transform = nullptr);

// Each class in turn is the anomaly; all other train classes are nominal.
EvalReport leave_one_out_benchmark(const EmbeddingMatrix& train, const EmbeddingMatrix& test, std::size_t k,
                                   const LinearTransform* transform = nullptr);

// Single AUROC: nominal_test labeled 0, anomaly_test labeled 1.
EvalReport cross_dataset_benchmark(const EmbeddingMatrix& nominal_train, const EmbeddingMatrix& nominal_test,
                                   const EmbeddingMatrix& anomaly_test, std::size_t k,
                                   const LinearTransform* transform = nullptr);

}  // namespace glocal::anomaly
