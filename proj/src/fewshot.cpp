#include "glocal/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "glocal/error.hpp"
#include "glocal/io.hpp"
#include "glocal/parallel.hpp"
#include "glocal/random.hpp"

namespace glocal::fewshot {

namespace {

constexpr double kGradientTolerance = 1e-5;
constexpr std::size_t kMaxIterations = 5000;
constexpr std::size_t kHistory = 10;

Matrix gather_rows(const Matrix& x, std::span<const Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

// Row-wise log-softmax of logits.
Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double mx = out.row(i).maxCoeff();
    const double lse = mx + std::log((out.row(i).array() - mx).exp().sum());
    out.row(i).array() -= lse;
  }
  return out;
}

struct Objective {
  const Matrix& x;
  const Matrix& onehot;
  double reg;

  double value(const Matrix& w, const Vector& b) const {
    Matrix logits = x * w.transpose();
    logits.rowwise() += b.transpose();
    const Matrix logp = log_softmax_rows(logits);
    return -(logp.array() * onehot.array()).sum() / static_cast<double>(x.rows()) + 0.5 * reg * w.squaredNorm();
  }

  double value_and_gradient(const Matrix& w, const Vector& b, Matrix& gw, Vector& gb) const {
    Matrix logits = x * w.transpose();
    logits.rowwise() += b.transpose();
    const Matrix logp = log_softmax_rows(logits);
    const double n = static_cast<double>(x.rows());
    const Matrix residual = (logp.array().exp() - onehot.array()).matrix() / n;
    gw = residual.transpose() * x + reg * w;
    gb = residual.colwise().sum().transpose();
    return -(logp.array() * onehot.array()).sum() / n + 0.5 * reg * w.squaredNorm();
  }
};

double mean_cross_entropy(const SoftmaxClassifier& clf, const Matrix& x, std::span<const int> y) {
  const Matrix logp = log_softmax_rows(clf.logits(x));
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto it = std::lower_bound(clf.classes.begin(), clf.classes.end(), y[i]);
    if (it == clf.classes.end() || *it != y[i]) return std::numeric_limits<double>::infinity();
    sum -= logp(static_cast<Eigen::Index>(i), it - clf.classes.begin());
  }
  return sum / static_cast<double>(y.size());
}

}  // namespace

const char* to_string(LabelKind k) { return k == LabelKind::Fine ? "fine" : "coarse"; }

LabelKind parse_label_kind(const std::string& s) {
  if (s == "fine") return LabelKind::Fine;
  if (s == "coarse") return LabelKind::Coarse;
  raise(ErrorKind::InvalidArgument, "unknown label kind '" + s + "'");
}

const std::vector<int>& episode_labels(const EmbeddingMatrix& m, LabelKind kind) {
  const auto& labels = kind == LabelKind::Fine ? m.labels() : m.superclass_labels();
  if (!labels)
    raise(ErrorKind::MissingLabel, std::string("embedding has no ") + (kind == LabelKind::Fine ? "labels" : "superclass labels"));
  return *labels;
}

FewShotEpisode sample_episode(const EmbeddingMatrix& m, std::size_t n_shots, LabelKind kind, std::uint64_t seed) {
  if (n_shots == 0) raise(ErrorKind::InvalidArgument, "n_shots must be positive");
  const auto& labels = episode_labels(m, kind);
  std::map<int, std::vector<Index>> by_class;
  for (Index i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  FewShotEpisode ep{{}, {}, kind, n_shots, seed};
  std::vector<char> in_train(labels.size(), 0);
  for (auto& [cls, items] : by_class) {
    if (items.size() < n_shots)
      raise(ErrorKind::InsufficientClassExamples, "class " + std::to_string(cls) + " has " +
                                                      std::to_string(items.size()) + " items, need " +
                                                      std::to_string(n_shots));
    std::shuffle(items.begin(), items.end(), rng);
    for (std::size_t s = 0; s < n_shots; ++s) {
      ep.train_indices.push_back(items[s]);
      in_train[items[s]] = 1;
    }
  }
  for (Index i = 0; i < labels.size(); ++i)
    if (!in_train[i]) ep.test_indices.push_back(i);
  return ep;
}

Matrix SoftmaxClassifier::logits(const Matrix& x) const {
  Matrix out = x * weights.transpose();
  out.rowwise() += biases.transpose();
  return out;
}

std::vector<int> SoftmaxClassifier::predict(const Matrix& x) const {
  const Matrix l = logits(x);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    Eigen::Index best = 0;
    l.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(best)];
  }
  return out;
}

SoftmaxClassifier fit_softmax_classifier(const Matrix& x, std::span<const int> y, double reg_strength) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    raise(ErrorKind::DimensionMismatch, std::to_string(x.rows()) + " rows vs " + std::to_string(y.size()) + " labels");
  if (!(reg_strength > 0.0)) raise(ErrorKind::InvalidArgument, "reg_strength must be positive");
  SoftmaxClassifier clf;
  clf.classes.assign(y.begin(), y.end());
  std::sort(clf.classes.begin(), clf.classes.end());
  clf.classes.erase(std::unique(clf.classes.begin(), clf.classes.end()), clf.classes.end());
  if (clf.classes.size() < 2) raise(ErrorKind::SingleClassInput, "need at least two classes");
  const auto n_classes = static_cast<Eigen::Index>(clf.classes.size());

  Matrix onehot = Matrix::Zero(x.rows(), n_classes);
  for (std::size_t i = 0; i < y.size(); ++i)
    onehot(static_cast<Eigen::Index>(i),
           std::lower_bound(clf.classes.begin(), clf.classes.end(), y[i]) - clf.classes.begin()) = 1.0;

  const Objective obj{x, onehot, reg_strength};
  const Eigen::Index nw = n_classes * x.cols();
  // Parameters flattened as [vec(W); b].
  auto unpack = [&](const Vector& theta, Matrix& w, Vector& b) {
    w = Eigen::Map<const Matrix>(theta.data(), n_classes, x.cols());
    b = theta.tail(n_classes);
  };
  auto evaluate = [&](const Vector& theta, Vector& grad) {
    Matrix w, gw;
    Vector b, gb;
    unpack(theta, w, b);
    const double f = obj.value_and_gradient(w, b, gw, gb);
    grad.resize(theta.size());
    grad.head(nw) = Eigen::Map<const Vector>(gw.data(), nw);
    grad.tail(n_classes) = gb;
    return f;
  };

  Vector theta = Vector::Zero(nw + n_classes);
  Vector g;
  double f = evaluate(theta, g);
  double gnorm = g.norm();
  std::vector<Vector> s_hist, y_hist;
  std::vector<double> rho_hist;
  std::size_t it = 0;
  for (; it < kMaxIterations && gnorm > kGradientTolerance; ++it) {
    // L-BFGS two-loop recursion.
    Vector dir = -g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(dir);
      dir -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(dir);
      dir += (alpha[k] - beta) * s_hist[k];
    }
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      dir = -g;
      slope = -gnorm * gnorm;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    // Armijo backtracking from the unit step (scaled on the first iteration).
    double step = s_hist.empty() ? std::min(1.0, 1.0 / gnorm) : 1.0;
    Vector trial, g_new;
    double f_new = 0.0;
    while (true) {
      trial = theta + step * dir;
      f_new = evaluate(trial, g_new);
      if (f_new <= f + 1e-4 * step * slope || step < 1e-20) break;
      step *= 0.5;
    }
    if (step < 1e-20) break;
    Vector sk = trial - theta;
    Vector yk = g_new - g;
    const double sy = sk.dot(yk);
    if (sy > 1e-12 * sk.norm() * yk.norm()) {
      if (s_hist.size() == kHistory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
      s_hist.push_back(std::move(sk));
      y_hist.push_back(std::move(yk));
      rho_hist.push_back(1.0 / sy);
    }
    theta = std::move(trial);
    g = std::move(g_new);
    f = f_new;
    gnorm = g.norm();
  }
  Matrix w;
  Vector b;
  unpack(theta, w, b);
  clf.weights = std::move(w);
  clf.biases = std::move(b);
  clf.reg_strength = reg_strength;
  clf.iterations = it;
  clf.gradient_norm = gnorm;
  return clf;
}

double classifier_accuracy(const SoftmaxClassifier& clf, const Matrix& x, std::span<const int> y) {
  if (y.empty()) raise(ErrorKind::InvalidArgument, "accuracy over zero items");
  const auto pred = clf.predict(x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

std::vector<double> default_reg_grid() {
  return {1e6, 1e5, 1e4, 1e3, 1e2, 1e1, 1.0, 1e-1, 1e-2, 1e-3, 1e-4};
}

double select_reg_strength(const Matrix& x, std::span<const int> y, std::size_t n_folds,
                           std::span<const double> grid, std::uint64_t seed) {
  if (grid.empty()) raise(ErrorKind::InvalidArgument, "empty regularization grid");
  if (n_folds < 2) return 1.0;
  // Stratified: the f-th shuffled item of every class lands in fold f.
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fold(y.size());
  for (auto& [cls, items] : by_class) {
    std::shuffle(items.begin(), items.end(), rng);
    for (std::size_t p = 0; p < items.size(); ++p) fold[items[p]] = p % n_folds;
  }

  double best_acc = -1.0, best_ce = std::numeric_limits<double>::infinity(), best_reg = grid.front();
  for (double reg : grid) {
    double acc = 0.0, ce = 0.0;
    std::size_t used = 0;
    for (std::size_t f = 0; f < n_folds; ++f) {
      std::vector<Index> tr, va;
      std::vector<int> ytr, yva;
      for (std::size_t i = 0; i < y.size(); ++i) {
        (fold[i] == f ? va : tr).push_back(i);
        (fold[i] == f ? yva : ytr).push_back(y[i]);
      }
      if (va.empty()) continue;
      const SoftmaxClassifier clf = fit_softmax_classifier(gather_rows(x, tr), ytr, reg);
      const Matrix xva = gather_rows(x, va);
      acc += classifier_accuracy(clf, xva, yva);
      ce += mean_cross_entropy(clf, xva, yva);
      ++used;
    }
    acc /= static_cast<double>(used);
    ce /= static_cast<double>(used);
    if (acc > best_acc || (acc == best_acc && ce < best_ce)) {
      best_acc = acc;
      best_ce = ce;
      best_reg = reg;
    }
  }
  return best_reg;
}

EvalReport evaluate_fewshot(const EmbeddingMatrix& m, const LinearTransform* transform, std::size_t n_shots,
                            LabelKind kind, std::span<const double> reg_grid, std::size_t n_runs,
                            std::uint64_t seed) {
  if (n_runs == 0) raise(ErrorKind::InvalidArgument, "n_runs must be positive");
  if (reg_grid.empty()) raise(ErrorKind::InvalidArgument, "empty regularization grid");
  const auto& labels = episode_labels(m, kind);
  const Matrix data = transform ? transform->apply(m.data()) : m.data();

  std::vector<double> accuracy(n_runs), chosen_reg(n_runs);
  std::vector<std::size_t> n_test(n_runs);
  parallel_for(n_runs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const std::uint64_t run_seed = derive_seed(seed, r);
      const FewShotEpisode ep = sample_episode(m, n_shots, kind, run_seed);
      if (ep.test_indices.empty()) raise(ErrorKind::InsufficientClassExamples, "no test items left after sampling");
      std::vector<int> ytr, yte;
      for (Index i : ep.train_indices) ytr.push_back(labels[i]);
      for (Index i : ep.test_indices) yte.push_back(labels[i]);
      const Matrix xtr = gather_rows(data, ep.train_indices);
      const double reg = select_reg_strength(xtr, ytr, n_shots, reg_grid, derive_seed(run_seed, 1));
      const SoftmaxClassifier clf = fit_softmax_classifier(xtr, ytr, reg);
      accuracy[r] = classifier_accuracy(clf, gather_rows(data, ep.test_indices), yte);
      chosen_reg[r] = reg;
      n_test[r] = yte.size();
    }
  }, 1);

  double mean = 0.0;
  for (double a : accuracy) mean += a;
  mean /= static_cast<double>(n_runs);
  double var = 0.0;
  for (double a : accuracy) var += (a - mean) * (a - mean);
  const double std_acc = n_runs > 1 ? std::sqrt(var / static_cast<double>(n_runs - 1)) : 0.0;

  EvalReport report;
  report.task = Task::FewShot;
  report.metrics["mean_acc"] = mean;
  report.metrics["std_acc"] = std_acc;
  report.metadata["n_shots"] = std::to_string(n_shots);
  report.metadata["label_kind"] = to_string(kind);
  report.metadata["n_runs"] = std::to_string(n_runs);
  report.metadata["seed"] = std::to_string(seed);
  report.columns = {"run", "n_shots", "label_kind", "reg_strength", "n_test", "accuracy"};
  for (std::size_t r = 0; r < n_runs; ++r)
    report.rows.push_back({std::to_string(r), std::to_string(n_shots), to_string(kind),
                           io::format_double(chosen_reg[r]), std::to_string(n_test[r]),
                           io::format_double(accuracy[r])});
  return report;
}

}  // namespace glocal::fewshot
