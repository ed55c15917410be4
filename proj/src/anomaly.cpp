#include "glocal/anomaly.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "glocal/error.hpp"
#include "glocal/io.hpp"
#include "glocal/parallel.hpp"
#include "glocal/similarity.hpp"

namespace glocal::anomaly {

namespace {

constexpr Eigen::Index kBlockRows = 256;

Matrix maybe_transform(const EmbeddingMatrix& m, const LinearTransform* t) {
  return t ? t->apply(m.data()) : m.data();
}

const std::vector<int>& require_labels(const EmbeddingMatrix& m, const char* which) {
  if (!m.labels()) raise(ErrorKind::MissingLabel, std::string(which) + " embedding has no labels");
  return *m.labels();
}

std::vector<int> sorted_classes(const std::vector<int>& labels) {
  std::set<int> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

Matrix rows_where(const Matrix& x, const std::vector<int>& labels, auto&& keep) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (keep(labels[i])) rows.push_back(static_cast<Eigen::Index>(i));
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
  return out;
}

EvalReport per_class_report(const char* protocol, std::size_t k, const std::vector<int>& classes,
                            const std::vector<double>& aurocs, const std::vector<std::size_t>& n_nominal) {
  EvalReport report;
  report.task = Task::Anomaly;
  report.metadata["protocol"] = protocol;
  report.metadata["k"] = std::to_string(k);
  report.columns = {"protocol", "class", "auroc", "k", "n_nominal_train"};
  double sum = 0.0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    sum += aurocs[c];
    report.rows.push_back({protocol, std::to_string(classes[c]), io::format_double(aurocs[c]), std::to_string(k),
                           std::to_string(n_nominal[c])});
  }
  report.metrics["mean_auroc"] = sum / static_cast<double>(classes.size());
  report.rows.push_back({protocol, "mean", io::format_double(report.metrics["mean_auroc"]), std::to_string(k), ""});
  report.metrics["n_classes"] = static_cast<double>(classes.size());
  return report;
}

template <typename IsNominal>
EvalReport class_protocol(const char* protocol, const EmbeddingMatrix& train, const EmbeddingMatrix& test,
                          std::size_t k, const LinearTransform* transform, IsNominal is_nominal) {
  const auto& train_labels = require_labels(train, "train");
  const auto& test_labels = require_labels(test, "test");
  const Matrix xtr = maybe_transform(train, transform);
  const Matrix xte = maybe_transform(test, transform);
  const std::vector<int> classes = sorted_classes(train_labels);
  std::vector<double> aurocs(classes.size());
  std::vector<std::size_t> n_nominal(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const int cls = classes[c];
    const Matrix nominal = rows_where(xtr, train_labels, [&](int l) { return is_nominal(l, cls); });
    AnomalyScores s;
    s.scores = knn_anomaly_scores(nominal, xte, k);
    for (int l : test_labels) s.labels.push_back(is_nominal(l, cls) ? 0 : 1);
    aurocs[c] = auroc(s);
    n_nominal[c] = static_cast<std::size_t>(nominal.rows());
  }
  return per_class_report(protocol, k, classes, aurocs, n_nominal);
}

}  // namespace

std::vector<double> knn_anomaly_scores(const Matrix& train_nominal, const Matrix& test, std::size_t k) {
  if (k == 0) raise(ErrorKind::InvalidArgument, "k must be >= 1");
  if (k > static_cast<std::size_t>(train_nominal.rows()))
    raise(ErrorKind::KTooLarge, "k = " + std::to_string(k) + " exceeds " + std::to_string(train_nominal.rows()) +
                                    " nominal rows");
  if (train_nominal.cols() != test.cols())
    raise(ErrorKind::DimensionMismatch, std::to_string(train_nominal.cols()) + " vs " + std::to_string(test.cols()));
  const Matrix nominal_unit = similarity::unit_rows(train_nominal);
  const Matrix test_unit = similarity::unit_rows(test);
  const Eigen::Index n_test = test.rows();
  const Eigen::Index n_nom = train_nominal.rows();
  std::vector<double> scores(static_cast<std::size_t>(n_test));
  const std::size_t n_blocks = static_cast<std::size_t>((n_test + kBlockRows - 1) / kBlockRows);
  parallel_for(n_blocks, [&](std::size_t b0, std::size_t b1) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_nom));
    for (std::size_t blk = b0; blk < b1; ++blk) {
      const Eigen::Index start = static_cast<Eigen::Index>(blk) * kBlockRows;
      const Eigen::Index rows = std::min(kBlockRows, n_test - start);
      const Matrix sims = test_unit.middleRows(start, rows) * nominal_unit.transpose();
      for (Eigen::Index r = 0; r < rows; ++r) {
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        const auto closer = [&](Eigen::Index a, Eigen::Index b) {
          const double sa = sims(r, a), sb = sims(r, b);
          return sa > sb || (sa == sb && a < b);
        };
        const auto kth = idx.begin() + static_cast<std::ptrdiff_t>(k);
        std::nth_element(idx.begin(), kth - 1, idx.end(), closer);
        std::sort(idx.begin(), kth, closer);
        double dist = 0.0;
        for (auto it = idx.begin(); it != kth; ++it) dist += 1.0 - sims(r, *it);
        scores[static_cast<std::size_t>(start + r)] = dist / static_cast<double>(k);
      }
    }
  }, 1);
  return scores;
}

std::vector<double> knn_anomaly_scores(const EmbeddingMatrix& train_nominal, const EmbeddingMatrix& test,
                                       std::size_t k, const LinearTransform* transform) {
  return knn_anomaly_scores(maybe_transform(train_nominal, transform), maybe_transform(test, transform), k);
}

double auroc(const AnomalyScores& s) {
  const std::size_t n = s.scores.size();
  if (s.labels.size() != n)
    raise(ErrorKind::DimensionMismatch, std::to_string(n) + " scores vs " + std::to_string(s.labels.size()) + " labels");
  std::size_t n_pos = 0;
  for (int l : s.labels) n_pos += l != 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) raise(ErrorKind::SingleClassLabels, "AUROC needs both nominal and anomalous items");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  // Rank sums are multiples of 1/2, so doubled ranks stay exact integers.
  std::uint64_t doubled_rank_sum_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && s.scores[order[j + 1]] == s.scores[order[i]]) ++j;
    const std::uint64_t doubled_midrank = (i + 1) + (j + 1);
    for (std::size_t t = i; t <= j; ++t)
      if (s.labels[order[t]] != 0) doubled_rank_sum_pos += doubled_midrank;
    i = j + 1;
  }
  // 2U = 2R - n_pos (n_pos + 1); AUROC = U / (n_pos n_neg).
  const std::uint64_t doubled_u = doubled_rank_sum_pos - static_cast<std::uint64_t>(n_pos) * (n_pos + 1);
  return static_cast<double>(doubled_u) / 2.0 / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

EvalReport one_vs_rest_benchmark(const EmbeddingMatrix& train, const EmbeddingMatrix& test, std::size_t k,
                                 const LinearTransform* transform) {
  return class_protocol("one-vs-rest", train, test, k, transform, [](int l, int cls) { return l == cls; });
}

EvalReport leave_one_out_benchmark(const EmbeddingMatrix& train, const EmbeddingMatrix& test, std::size_t k,
                                   const LinearTransform* transform) {
  return class_protocol("loo", train, test, k, transform, [](int l, int cls) { return l != cls; });
}

EvalReport cross_dataset_benchmark(const EmbeddingMatrix& nominal_train, const EmbeddingMatrix& nominal_test,
                                   const EmbeddingMatrix& anomaly_test, std::size_t k,
                                   const LinearTransform* transform) {
  if (nominal_test.dim() != anomaly_test.dim())
    raise(ErrorKind::DimensionMismatch, "nominal and anomaly test dims differ");
  const Matrix xtr = maybe_transform(nominal_train, transform);
  Matrix xte(static_cast<Eigen::Index>(nominal_test.n_items() + anomaly_test.n_items()),
             static_cast<Eigen::Index>(nominal_test.dim()));
  xte << maybe_transform(nominal_test, transform), maybe_transform(anomaly_test, transform);
  AnomalyScores s;
  s.scores = knn_anomaly_scores(xtr, xte, k);
  s.labels.assign(nominal_test.n_items(), 0);
  s.labels.resize(s.scores.size(), 1);
  const double a = auroc(s);
  EvalReport report;
  report.task = Task::Anomaly;
  report.metadata["protocol"] = "cross-dataset";
  report.metadata["k"] = std::to_string(k);
  report.metrics["auroc"] = a;
  report.columns = {"protocol", "class", "auroc", "k", "n_nominal_train"};
  report.rows.push_back({"cross-dataset", "all", io::format_double(a), std::to_string(k),
                         std::to_string(nominal_train.n_items())});
  return report;
}

}  // namespace glocal::anomaly
