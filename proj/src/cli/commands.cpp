#include "glocal/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "glocal/analysis.hpp"
#include "glocal/anomaly.hpp"
#include "glocal/error.hpp"
#include "glocal/fewshot.hpp"
#include "glocal/io.hpp"
#include "glocal/parallel.hpp"
#include "glocal/random.hpp"
#include "glocal/report.hpp"
#include "glocal/similarity.hpp"
#include "glocal/synth.hpp"
#include "glocal/training.hpp"

namespace glocal::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const std::set<std::string> kCommands = {"fit", "eval", "analyze", "synth"};

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& flag) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    std::string_view cell(text.data() + start, comma - start);
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
    T v{};
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
      raise(ErrorKind::InvalidArgument, flag + ": '" + std::string(cell) + "' is not a valid list entry");
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

std::string json_scalar(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  raise(ErrorKind::MalformedValue, "config key '" + key + "' must be a string, number, boolean or list");
}

// Turns `--config FILE` into flags spliced right after the subcommand path,
// so that flags on the command line come later and win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) raise(ErrorKind::InvalidArgument, "--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return rest;

  json cfg;
  try {
    cfg = json::parse(io::read_file(*path));
  } catch (const json::parse_error& e) {
    raise(ErrorKind::MalformedValue, *path + ": " + e.what());
  }
  if (!cfg.is_object()) raise(ErrorKind::MalformedValue, *path + ": config must be a JSON object");
  std::vector<std::string> injected;
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) injected.push_back(flag);
      continue;
    }
    injected.push_back(flag);
    if (value.is_array()) {
      std::string joined;
      for (const auto& e : value) joined += (joined.empty() ? "" : ",") + json_scalar(e, key);
      injected.push_back(joined);
    } else {
      injected.push_back(json_scalar(value, key));
    }
  }

  std::size_t at = rest.size();
  for (std::size_t i = 0; i < rest.size(); ++i)
    if (kCommands.count(rest[i])) {
      at = i + 1;
      if ((rest[i] == "eval" || rest[i] == "analyze") && at < rest.size()) ++at;
      break;
    }
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(at), injected.begin(), injected.end());
  return rest;
}

std::size_t resolve_threads(long flag) {
  if (flag >= 0) return static_cast<std::size_t>(flag);
  if (const char* env = std::getenv("GLOCAL_THREADS"); env && *env) {
    const auto v = parse_list<std::size_t>(env, "GLOCAL_THREADS");
    if (v.size() != 1) raise(ErrorKind::InvalidArgument, "GLOCAL_THREADS must be a single integer");
    return v[0];
  }
  return 0;
}

// FNV-1a over the resolved configuration and the bytes of every input file.
std::string config_hash(const json& config, const std::vector<std::string>& inputs) {
  std::string bytes = config.dump();
  for (const auto& p : inputs) {
    if (p.empty()) continue;
    bytes.push_back('\0');
    bytes += io::read_file(p);
  }
  return fnv1a_hex(bytes);
}

void print_metric(std::ostream& out, const std::string& name, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  out << name << ": " << buf << "\n";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorKind::IoFailure, "cannot create directory '" + dir + "': " + ec.message());
}

void emit_report(EvalReport& report, const json& config, const std::vector<std::string>& inputs,
                 const std::string& out_dir, const std::string& headline, std::ostream& out) {
  report.metadata["config_hash"] = config_hash(config, inputs);
  report.validate();
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    report.write(fs::path(out_dir) / "report.json", fs::path(out_dir) / "report.csv");
  }
  print_metric(out, headline, report.metrics.at(headline));
}

EmbeddingMatrix load_embedding_with_labels(const std::string& path, const std::string& labels) {
  EmbeddingMatrix m = io::load_embeddings(path);
  return labels.empty() ? m : io::load_labels(labels, m);
}

std::optional<LinearTransform> load_optional_transform(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return io::load_transform(path);
}

// Prefixes `variant` to every table row; metrics of `original` are kept
// under "original_<name>" when a transformed report is present.
EvalReport pair_variants(EvalReport original, std::optional<EvalReport> transformed) {
  EvalReport out = transformed ? *transformed : original;
  out.columns.insert(out.columns.begin(), "variant");
  out.rows.clear();
  for (auto row : original.rows) {
    row.insert(row.begin(), "original");
    out.rows.push_back(std::move(row));
  }
  if (transformed) {
    for (auto row : transformed->rows) {
      row.insert(row.begin(), "transformed");
      out.rows.push_back(std::move(row));
    }
    for (const auto& [name, value] : original.metrics) out.metrics["original_" + name] = value;
  }
  return out;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string align_emb, triplets, local_emb, out;
  std::string objective = "naive";
  std::string train_sim = "dot";
  FitConfig cfg;
  bool grid_default = false;
  std::string grid_eta, grid_lambda, grid_alpha, grid_tau;
  double test_fraction = 0.5;
};

void add_fit(CLI::App& app, FitArgs& a) {
  app.add_option("--align-emb", a.align_emb, "Embeddings of the triplet items")->required();
  app.add_option("--triplets", a.triplets, "Triplet CSV (a,b,odd)")->required();
  app.add_option("--local-emb", a.local_emb, "Local-structure embeddings (glocal)");
  app.add_option("--objective", a.objective, "naive | global | glocal");
  app.add_option("--lambda", a.cfg.lambda);
  app.add_option("--alpha", a.cfg.alpha);
  app.add_option("--tau", a.cfg.tau);
  app.add_option("--eta", a.cfg.eta);
  app.add_option("--momentum", a.cfg.momentum);
  app.add_option("--epochs", a.cfg.epochs);
  app.add_option("--batch-triplets", a.cfg.batch_triplets);
  app.add_option("--batch-items", a.cfg.batch_items);
  app.add_option("--folds", a.cfg.folds);
  app.add_option("--seed", a.cfg.seed);
  app.add_option("--train-sim", a.train_sim, "dot | cosine");
  app.add_flag("--grid-default", a.grid_default, "Search the default hyperparameter grid");
  app.add_option("--grid-eta", a.grid_eta, "Comma-separated learning rates");
  app.add_option("--grid-lambda", a.grid_lambda);
  app.add_option("--grid-alpha", a.grid_alpha);
  app.add_option("--grid-tau", a.grid_tau);
  app.add_option("--test-fraction", a.test_fraction, "Hold out this fraction of items (0 = train on all)");
  app.add_option("--out", a.out, "Output directory")->required();
}

std::string grid_csv(const training::GridSearchResult& gs) {
  std::string out = "eta,lambda,alpha,tau,cv_loss,cv_accuracy,diverged,selected\n";
  for (std::size_t i = 0; i < gs.cells.size(); ++i) {
    const auto& c = gs.cells[i];
    out += io::format_double(c.config.eta) + "," + io::format_double(c.config.lambda) + "," +
           io::format_double(c.config.alpha) + "," + io::format_double(c.config.tau) + "," +
           (c.diverged ? std::string("inf") : io::format_double(c.cv_loss)) + "," + io::format_double(c.cv_accuracy) +
           "," + (c.diverged ? "1" : "0") + "," + (i == gs.best_index ? "1" : "0") + "\n";
  }
  return out;
}

json loss_json(const losses::LossValue& v) {
  return json{{"total", v.total}, {"alignment", v.alignment}, {"local", v.local}, {"penalty", v.penalty}};
}

int cmd_fit(FitArgs& a, std::ostream& out) {
  FitConfig cfg = a.cfg;
  cfg.objective = parse_objective(a.objective);
  cfg.train_sim = parse_sim_kind(a.train_sim);
  const bool any_grid =
      a.grid_default || !a.grid_eta.empty() || !a.grid_lambda.empty() || !a.grid_alpha.empty() || !a.grid_tau.empty();
  if (any_grid) {
    HyperGrid g = a.grid_default ? HyperGrid::defaults() : HyperGrid{{cfg.eta}, {cfg.lambda}, {cfg.alpha}, {cfg.tau}};
    if (!a.grid_eta.empty()) g.eta = parse_list<double>(a.grid_eta, "--grid-eta");
    if (!a.grid_lambda.empty()) g.lambda = parse_list<double>(a.grid_lambda, "--grid-lambda");
    if (!a.grid_alpha.empty()) g.alpha = parse_list<double>(a.grid_alpha, "--grid-alpha");
    if (!a.grid_tau.empty()) g.tau = parse_list<double>(a.grid_tau, "--grid-tau");
    cfg.grids = g;
  }
  cfg.validate();
  if (cfg.objective == Objective::GLocal && a.local_emb.empty())
    raise(ErrorKind::InvalidArgument, "objective glocal requires --local-emb");
  if (!(a.test_fraction >= 0.0 && a.test_fraction < 1.0))
    raise(ErrorKind::InvalidArgument, "--test-fraction must be in [0, 1)");

  const EmbeddingMatrix x = io::load_embeddings(a.align_emb);
  const TripletDataset d = io::load_triplets(a.triplets, x.n_items());
  std::optional<EmbeddingMatrix> y;
  if (cfg.objective == Objective::GLocal) y = io::load_embeddings(a.local_emb);

  training::ObjectSplit split;
  if (a.test_fraction > 0.0) {
    split = training::object_disjoint_split(d, x.n_items(), a.test_fraction, cfg.seed);
  } else {
    split.train = d;
    split.test.n_items = split.discarded.n_items = d.n_items;
    for (Index i = 0; i < x.n_items(); ++i) split.train_items.push_back(i);
  }

  const EmbeddingMatrix* local = y ? &*y : nullptr;
  training::FitResult result;
  FitConfig chosen = cfg;
  std::optional<training::GridSearchResult> gs;
  if (cfg.grids) {
    gs = training::grid_search(x, split, local, cfg);
    result = gs->best_fit;
    chosen = gs->best_config;
  } else {
    result = training::fit(x, split.train, local, cfg);
  }

  json config = to_json(cfg);
  config["test_fraction"] = a.test_fraction;
  const std::string hash = config_hash(config, {a.align_emb, a.triplets, y ? a.local_emb : ""});

  json log;
  log["command"] = "fit";
  log["config_hash"] = hash;
  log["config"] = config;
  log["selected_config"] = to_json(chosen);
  log["n_items"] = x.n_items();
  log["n_train_triplets"] = split.train.size();
  log["n_test_triplets"] = split.test.size();
  json metrics = json::object();
  metrics["train_accuracy"] = similarity::odd_one_out_accuracy(x, split.train, &result.transform);
  metrics["train_accuracy_identity"] = similarity::odd_one_out_accuracy(x, split.train);
  if (split.test.size() > 0) {
    metrics["test_accuracy"] = similarity::odd_one_out_accuracy(x, split.test, &result.transform);
    metrics["test_accuracy_identity"] = similarity::odd_one_out_accuracy(x, split.test);
  }
  log["metrics"] = metrics;
  if (!result.trace.empty()) log["final_loss"] = loss_json(result.trace.back().mean);
  json trace = json::array();
  for (const auto& e : result.trace) {
    json r = loss_json(e.mean);
    r["epoch"] = e.epoch;
    trace.push_back(std::move(r));
  }
  log["trace"] = trace;
  if (gs) log["grid"] = json{{"n_cells", gs->cells.size()}, {"best_index", gs->best_index}};

  ensure_dir(a.out);
  io::save_transform(result.transform, fs::path(a.out) / "transform.gltf");
  if (gs) io::write_file(fs::path(a.out) / "grid.csv", grid_csv(*gs));
  io::write_file(fs::path(a.out) / "run_log.json", log.dump(2) + "\n");

  print_metric(out, "train_accuracy", metrics["train_accuracy"].get<double>());
  if (metrics.contains("test_accuracy")) print_metric(out, "test_accuracy", metrics["test_accuracy"].get<double>());
  return 0;
}

// ---------------------------------------------------------------- eval

struct OooArgs {
  std::string emb, triplets, transform, out;
};

void add_ooo(CLI::App& app, OooArgs& a) {
  app.add_option("--emb", a.emb)->required();
  app.add_option("--triplets", a.triplets)->required();
  app.add_option("--transform", a.transform);
  app.add_option("--out", a.out, "Report directory");
}

EvalReport ooo_report(const EmbeddingMatrix& m, const TripletDataset& d, const LinearTransform* t) {
  EvalReport r;
  r.task = Task::Ooo;
  const double acc = similarity::odd_one_out_accuracy(m, d, t);
  r.metrics["accuracy"] = acc;
  r.columns = {"accuracy", "n_triplets"};
  r.rows.push_back({io::format_double(acc), std::to_string(d.size())});
  return r;
}

int cmd_ooo(const OooArgs& a, std::ostream& out) {
  const EmbeddingMatrix m = io::load_embeddings(a.emb);
  const TripletDataset d = io::load_triplets(a.triplets, m.n_items());
  const auto t = load_optional_transform(a.transform);
  std::optional<EvalReport> transformed;
  if (t) transformed = ooo_report(m, d, &*t);
  EvalReport report = pair_variants(ooo_report(m, d, nullptr), transformed);
  emit_report(report, json{{"command", "eval ooo"}}, {a.emb, a.triplets, a.transform}, a.out, "accuracy", out);
  return 0;
}

struct FewShotArgs {
  std::string emb, labels, transform, out;
  std::size_t shots = 5;
  std::string label_kind = "fine";
  std::size_t runs = 5;
  std::uint64_t seed = 0;
  std::string reg_grid;
};

void add_fewshot(CLI::App& app, FewShotArgs& a) {
  app.add_option("--emb", a.emb)->required();
  app.add_option("--labels", a.labels, "Labels CSV (id,label[,superclass])")->required();
  app.add_option("--transform", a.transform);
  app.add_option("--shots", a.shots);
  app.add_option("--label-kind", a.label_kind, "fine | coarse");
  app.add_option("--runs", a.runs);
  app.add_option("--seed", a.seed);
  app.add_option("--reg-grid", a.reg_grid, "Comma-separated regularization strengths");
  app.add_option("--out", a.out);
}

int cmd_fewshot(const FewShotArgs& a, std::ostream& out) {
  const EmbeddingMatrix m = load_embedding_with_labels(a.emb, a.labels);
  const auto t = load_optional_transform(a.transform);
  const fewshot::LabelKind kind = fewshot::parse_label_kind(a.label_kind);
  const std::vector<double> grid =
      a.reg_grid.empty() ? fewshot::default_reg_grid() : parse_list<double>(a.reg_grid, "--reg-grid");
  std::optional<EvalReport> transformed;
  if (t) transformed = fewshot::evaluate_fewshot(m, &*t, a.shots, kind, grid, a.runs, a.seed);
  EvalReport report =
      pair_variants(fewshot::evaluate_fewshot(m, nullptr, a.shots, kind, grid, a.runs, a.seed), transformed);
  json config{{"command", "eval fewshot"}, {"shots", a.shots},  {"label_kind", a.label_kind},
              {"runs", a.runs},            {"seed", a.seed},    {"reg_grid", grid}};
  emit_report(report, config, {a.emb, a.labels, a.transform}, a.out, "mean_acc", out);
  return 0;
}

struct AdArgs {
  std::string train_emb, train_labels, test_emb, test_labels, anomaly_emb, transform, out;
  std::string protocol = "one-vs-rest";
  std::size_t k = anomaly::kDefaultK;
  std::uint64_t seed = 0;
};

void add_ad(CLI::App& app, AdArgs& a) {
  app.add_option("--train-emb", a.train_emb, "Nominal training embeddings")->required();
  app.add_option("--train-labels", a.train_labels);
  app.add_option("--test-emb", a.test_emb, "Test embeddings (default: stratified half of --train-emb)");
  app.add_option("--test-labels", a.test_labels);
  app.add_option("--anomaly-emb", a.anomaly_emb, "Anomalous test embeddings (cross-dataset)");
  app.add_option("--protocol", a.protocol, "one-vs-rest | loo | cross-dataset");
  app.add_option("--k", a.k);
  app.add_option("--transform", a.transform);
  app.add_option("--seed", a.seed, "Seed of the default train/test halving");
  app.add_option("--out", a.out);
}

// Per class, a shuffled half of the items goes to test (the smaller half
// when odd).
std::pair<EmbeddingMatrix, EmbeddingMatrix> stratified_halves(const EmbeddingMatrix& m, std::uint64_t seed) {
  if (!m.labels()) raise(ErrorKind::MissingLabel, "splitting into train/test needs labels");
  std::map<int, std::vector<Index>> by_class;
  for (Index i = 0; i < m.n_items(); ++i) by_class[(*m.labels())[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<Index> train, test;
  for (auto& [label, items] : by_class) {
    std::shuffle(items.begin(), items.end(), rng);
    for (std::size_t i = 0; i < items.size(); ++i) (i % 2 == 0 ? train : test).push_back(items[i]);
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {m.select_rows(train), m.select_rows(test)};
}

int cmd_ad(const AdArgs& a, std::ostream& out) {
  const auto t = load_optional_transform(a.transform);
  json config{{"command", "eval ad"}, {"protocol", a.protocol}, {"k", a.k}};
  std::vector<std::string> inputs{a.train_emb, a.train_labels, a.test_emb, a.test_labels, a.anomaly_emb, a.transform};
  auto both = [&](auto&& bench) {
    std::optional<EvalReport> transformed;
    if (t) transformed = bench(&*t);
    return pair_variants(bench(nullptr), transformed);
  };

  if (a.protocol == "cross-dataset") {
    if (a.test_emb.empty() || a.anomaly_emb.empty())
      raise(ErrorKind::InvalidArgument, "cross-dataset needs --test-emb and --anomaly-emb");
    const EmbeddingMatrix train = io::load_embeddings(a.train_emb);
    const EmbeddingMatrix test = io::load_embeddings(a.test_emb);
    const EmbeddingMatrix anom = io::load_embeddings(a.anomaly_emb);
    EvalReport report = both([&](const LinearTransform* tr) {
      return anomaly::cross_dataset_benchmark(train, test, anom, a.k, tr);
    });
    emit_report(report, config, inputs, a.out, "auroc", out);
    return 0;
  }
  if (a.protocol != "one-vs-rest" && a.protocol != "loo")
    raise(ErrorKind::InvalidArgument, "unknown protocol '" + a.protocol + "'");
  if (a.train_labels.empty()) raise(ErrorKind::MissingLabel, "--train-labels is required for " + a.protocol);

  EmbeddingMatrix train = load_embedding_with_labels(a.train_emb, a.train_labels);
  EmbeddingMatrix test;
  if (a.test_emb.empty()) {
    auto halves = stratified_halves(train, a.seed);
    train = std::move(halves.first);
    test = std::move(halves.second);
    config["seed"] = a.seed;
  } else {
    if (a.test_labels.empty()) raise(ErrorKind::MissingLabel, "--test-labels is required with --test-emb");
    test = load_embedding_with_labels(a.test_emb, a.test_labels);
  }
  EvalReport report = both([&](const LinearTransform* tr) {
    return a.protocol == "loo" ? anomaly::leave_one_out_benchmark(train, test, a.k, tr)
                               : anomaly::one_vs_rest_benchmark(train, test, a.k, tr);
  });
  emit_report(report, config, inputs, a.out, "mean_auroc", out);
  return 0;
}

struct RsaArgs {
  std::string model_rsm, emb, transform, human_rsm, vice_emb, out;
  std::string kernel = "pearson";
};

void add_rsa(CLI::App& app, RsaArgs& a) {
  app.add_option("--model-rsm", a.model_rsm, "Precomputed model RSM (square CSV)");
  app.add_option("--emb", a.emb, "Embeddings to build the model RSM from");
  app.add_option("--transform", a.transform);
  app.add_option("--kernel", a.kernel, "dot | cosine | pearson");
  app.add_option("--human-rsm", a.human_rsm, "Human RSM (square CSV)");
  app.add_option("--vice-emb", a.vice_emb, "Non-negative object embedding to build the human RSM from");
  app.add_option("--out", a.out);
}

int cmd_rsa(const RsaArgs& a, std::ostream& out) {
  if (a.model_rsm.empty() == a.emb.empty()) raise(ErrorKind::InvalidArgument, "give exactly one of --model-rsm, --emb");
  if (a.human_rsm.empty() == a.vice_emb.empty())
    raise(ErrorKind::InvalidArgument, "give exactly one of --human-rsm, --vice-emb");
  if (!a.transform.empty() && a.emb.empty()) raise(ErrorKind::InvalidArgument, "--transform needs --emb");

  EvalReport report;
  report.task = Task::Rsa;
  similarity::SimilarityMatrix human;
  if (!a.human_rsm.empty()) {
    human.values = io::load_square_matrix_csv(a.human_rsm);
  } else {
    bool negative = false;
    human = similarity::rsm_from_vice(io::load_embeddings(a.vice_emb), &negative);
    report.metadata["vice_negative_entries"] = negative ? "true" : "false";
  }
  if (!a.model_rsm.empty()) {
    report.metrics["rho"] = analysis::rsa_compare({io::load_square_matrix_csv(a.model_rsm)}, human);
  } else {
    const similarity::Kernel kernel = similarity::parse_kernel(a.kernel);
    const EmbeddingMatrix m = io::load_embeddings(a.emb);
    const double original = analysis::rsa_compare(similarity::pairwise_similarity(m, kernel), human);
    report.metrics["rho"] = original;
    if (const auto t = load_optional_transform(a.transform)) {
      report.metrics["original_rho"] = original;
      report.metrics["rho"] =
          analysis::rsa_compare(similarity::pairwise_similarity(t->apply(m.data()), kernel), human);
    }
  }
  json config{{"command", "eval rsa"}, {"kernel", a.kernel}};
  emit_report(report, config, {a.model_rsm, a.emb, a.transform, a.human_rsm, a.vice_emb}, a.out, "rho", out);
  return 0;
}

// ---------------------------------------------------------------- analyze

struct CkaArgs {
  std::vector<std::string> specs;
  std::string out;
};

void add_cka(CLI::App& app, CkaArgs& a) {
  app.add_option("embeddings", a.specs, "Two or more EMB or EMB@TRANSFORM")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--out", a.out);
}

int cmd_cka(const CkaArgs& a, std::ostream& out) {
  if (a.specs.size() < 2) raise(ErrorKind::InvalidArgument, "cka needs at least two embeddings");
  std::vector<Matrix> reps;
  std::vector<std::string> inputs;
  for (const auto& spec : a.specs) {
    const std::size_t at = spec.find('@');
    const std::string emb = spec.substr(0, at);
    Matrix x = io::load_embeddings(emb).data();
    inputs.push_back(emb);
    if (at != std::string::npos) {
      const std::string tr = spec.substr(at + 1);
      x = io::load_transform(tr).apply(x);
      inputs.push_back(tr);
    }
    reps.push_back(std::move(x));
  }
  EvalReport report;
  report.task = Task::Cka;
  report.columns = {"a", "b", "cka"};
  for (std::size_t i = 0; i < reps.size(); ++i)
    for (std::size_t j = i + 1; j < reps.size(); ++j) {
      const double v = analysis::lcka(reps[i], reps[j]);
      if (i == 0 && j == 1) report.metrics["cka"] = v;
      report.rows.push_back({a.specs[i], a.specs[j], io::format_double(v)});
    }
  emit_report(report, json{{"command", "analyze cka"}, {"embeddings", a.specs}}, inputs, a.out, "cka", out);
  return 0;
}

struct NnRecallArgs {
  std::string emb, transform, transformed_emb, out;
  std::string ks = "1,5,10,25";
};

void add_nnrecall(CLI::App& app, NnRecallArgs& a) {
  app.add_option("--emb", a.emb, "Original embeddings")->required();
  app.add_option("--transform", a.transform);
  app.add_option("--transformed-emb", a.transformed_emb, "Already-transformed embeddings");
  app.add_option("--ks", a.ks, "Comma-separated neighbor ranks");
  app.add_option("--out", a.out);
}

int cmd_nnrecall(const NnRecallArgs& a, std::ostream& out) {
  if (a.transform.empty() == a.transformed_emb.empty())
    raise(ErrorKind::InvalidArgument, "give exactly one of --transform, --transformed-emb");
  const std::vector<std::size_t> ks = parse_list<std::size_t>(a.ks, "--ks");
  const EmbeddingMatrix m = io::load_embeddings(a.emb);
  const Matrix moved =
      a.transform.empty() ? io::load_embeddings(a.transformed_emb).data() : io::load_transform(a.transform).apply(m.data());
  const std::vector<double> recall = analysis::nn_preservation_recall(m.data(), moved, ks);
  EvalReport report;
  report.task = Task::NnRecall;
  report.columns = {"k", "recall"};
  for (std::size_t i = 0; i < ks.size(); ++i) {
    report.metrics["recall@" + std::to_string(ks[i])] = recall[i];
    report.rows.push_back({std::to_string(ks[i]), io::format_double(recall[i])});
  }
  json config{{"command", "analyze nnrecall"}, {"ks", ks}};
  emit_report(report, config, {a.emb, a.transform, a.transformed_emb}, a.out, "recall@" + std::to_string(ks[0]), out);
  return 0;
}

struct TruncateArgs {
  std::string emb, out_emb, out;
  std::string mode = "drop_top";
  std::size_t r = 1;
};

void add_truncate(CLI::App& app, TruncateArgs& a) {
  app.add_option("--emb", a.emb)->required();
  app.add_option("--mode", a.mode, "keep_top | drop_top");
  app.add_option("--r", a.r, "Number of leading components");
  app.add_option("--out-emb", a.out_emb, "Where to write the truncated embeddings")->required();
  app.add_option("--out", a.out);
}

int cmd_truncate(const TruncateArgs& a, std::ostream& out) {
  const analysis::TruncateMode mode = analysis::parse_truncate_mode(a.mode);
  const EmbeddingMatrix m = io::load_embeddings(a.emb);
  const EmbeddingMatrix t = analysis::truncate_pcs(m, mode, a.r);
  const Vector s = analysis::center_and_decompose(m.data()).singular_values;
  const double total = s.squaredNorm();
  const double top = s.head(static_cast<Eigen::Index>(a.r)).squaredNorm();
  EvalReport report;
  report.task = Task::Truncate;
  report.metrics["retained_variance"] = total > 0.0 ? (mode == analysis::TruncateMode::KeepTop ? top : total - top) / total : 0.0;
  report.columns = {"component", "singular_value", "kept"};
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const bool in_top = static_cast<std::size_t>(i) < a.r;
    const bool kept = mode == analysis::TruncateMode::KeepTop ? in_top : !in_top;
    report.rows.push_back({std::to_string(i), io::format_double(s(i)), kept ? "1" : "0"});
  }
  io::save_embeddings(t, a.out_emb);
  json config{{"command", "analyze truncate"}, {"mode", a.mode}, {"r", a.r}};
  emit_report(report, config, {a.emb}, a.out, "retained_variance", out);
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  synth::SynthSpec spec;
  std::string out;
  std::size_t n_triplets = 5000;
  std::string choice = "argmax";
  std::size_t relevant_dims = 4;
  double irrelevant_scale = 0.2;
  bool rotate = false;
  std::size_t n_local = 100;
  double local_jitter = 0.1;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--n-super", a.spec.n_superclasses);
  app.add_option("--subs", a.spec.subclasses_per_super, "Subclasses per superclass");
  app.add_option("--items", a.spec.items_per_subclass, "Items per subclass");
  app.add_option("--dim", a.spec.dim);
  app.add_option("--within", a.spec.within_scale);
  app.add_option("--between", a.spec.between_scale);
  app.add_option("--noise", a.spec.noise_scale);
  app.add_option("--seed", a.spec.seed);
  app.add_option("--n-triplets", a.n_triplets);
  app.add_option("--choice", a.choice, "argmax | sampled");
  app.add_option("--relevant-dims", a.relevant_dims, "Leading dims the ground truth keeps at scale 1");
  app.add_option("--irrelevant-scale", a.irrelevant_scale, "Ground-truth scale of the remaining dims");
  app.add_flag("--rotate", a.rotate, "Rotate the ground-truth axes randomly");
  app.add_option("--n-local", a.n_local, "Items in the local-structure set");
  app.add_option("--local-jitter", a.local_jitter, "Local-set spread in the relevant dims");
  app.add_option("--out", a.out, "Dataset directory")->required();
}

int cmd_synth(SynthArgs& a, std::ostream& out) {
  if (a.relevant_dims == 0 || a.relevant_dims > a.spec.dim)
    raise(ErrorKind::InvalidArgument, "--relevant-dims must be in [1, dim]");
  if (!(a.irrelevant_scale >= 0.0) || !(a.local_jitter > 0.0))
    raise(ErrorKind::InvalidArgument, "--irrelevant-scale must be >= 0 and --local-jitter > 0");
  const synth::ChoiceNoise noise = synth::parse_choice_noise(a.choice);
  std::vector<double> scales(a.spec.dim, a.irrelevant_scale);
  std::fill(scales.begin(), scales.begin() + static_cast<std::ptrdiff_t>(a.relevant_dims), 1.0);
  a.spec.planted_transform = synth::planted_transform(scales, a.rotate, derive_seed(a.spec.seed, 1));

  const EmbeddingMatrix m = synth::generate_embeddings(a.spec);
  const LinearTransform& gt = *a.spec.planted_transform;
  const TripletDataset d = synth::generate_triplets(m, gt, a.n_triplets, noise, derive_seed(a.spec.seed, 2));
  std::vector<double> local_scales(a.spec.dim, 1.0);
  std::fill(local_scales.begin(), local_scales.begin() + static_cast<std::ptrdiff_t>(a.relevant_dims), a.local_jitter);
  const EmbeddingMatrix local = synth::generate_anisotropic(a.n_local, local_scales, derive_seed(a.spec.seed, 3));
  const similarity::SimilarityMatrix rsm = similarity::pairwise_similarity(gt.apply(m.data()), similarity::Kernel::Cosine);

  const fs::path dir(a.out);
  ensure_dir(a.out);
  io::save_embeddings(m, dir / "embeddings.glfm");
  io::save_labels(m, dir / "labels.csv");
  io::save_triplets(d, dir / "triplets.csv");
  io::save_transform(gt, dir / "ground_truth.gltf");
  io::save_embeddings(local, dir / "local.glfm");
  io::save_matrix_csv(rsm.values, dir / "human_rsm.csv");

  json config{{"command", "synth"},
              {"n_superclasses", a.spec.n_superclasses},
              {"subclasses_per_super", a.spec.subclasses_per_super},
              {"items_per_subclass", a.spec.items_per_subclass},
              {"dim", a.spec.dim},
              {"within_scale", a.spec.within_scale},
              {"between_scale", a.spec.between_scale},
              {"noise_scale", a.spec.noise_scale},
              {"seed", a.spec.seed},
              {"n_triplets", a.n_triplets},
              {"choice", a.choice},
              {"relevant_dims", a.relevant_dims},
              {"irrelevant_scale", a.irrelevant_scale},
              {"rotate", a.rotate},
              {"n_local", a.n_local},
              {"local_jitter", a.local_jitter}};
  json manifest;
  manifest["command"] = "synth";
  manifest["config_hash"] = config_hash(config, {});
  manifest["config"] = config;
  manifest["files"] = json{{"embeddings", "embeddings.glfm"}, {"labels", "labels.csv"},
                           {"triplets", "triplets.csv"},      {"ground_truth", "ground_truth.gltf"},
                           {"local", "local.glfm"},           {"human_rsm", "human_rsm.csv"}};
  manifest["n_items"] = m.n_items();
  manifest["n_classes"] = m.n_classes();
  manifest["n_superclasses"] = m.n_superclasses();
  manifest["ground_truth_accuracy"] = similarity::odd_one_out_accuracy(m, d, &gt);
  manifest["identity_accuracy"] = similarity::odd_one_out_accuracy(m, d);
  io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  out << "n_items: " << m.n_items() << "\n";
  print_metric(out, "identity_accuracy", manifest["identity_accuracy"].get<double>());
  return 0;
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message) {
  json j;
  j["error"] = json{{"kind", kind}, {"message", message}};
  err << j.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Align embedding spaces with human similarity judgments and evaluate them.", "glocal"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();
  long threads = -1;
  app.add_option("--threads", threads, "Worker threads (default: GLOCAL_THREADS, then all cores)");
  app.add_option("--config", "JSON file whose keys supply flags; explicit flags win");

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit a linear transform to triplet judgments");
  add_fit(*fit, fit_args);

  auto* eval = app.add_subcommand("eval", "Evaluate a representation");
  eval->require_subcommand(1);
  OooArgs ooo_args;
  auto* ooo = eval->add_subcommand("ooo", "Odd-one-out accuracy");
  add_ooo(*ooo, ooo_args);
  FewShotArgs fewshot_args;
  auto* fs_cmd = eval->add_subcommand("fewshot", "Few-shot linear probe accuracy");
  add_fewshot(*fs_cmd, fewshot_args);
  AdArgs ad_args;
  auto* ad = eval->add_subcommand("ad", "kNN anomaly detection AUROC");
  add_ad(*ad, ad_args);
  RsaArgs rsa_args;
  auto* rsa = eval->add_subcommand("rsa", "Spearman correlation between RSMs");
  add_rsa(*rsa, rsa_args);

  auto* analyze = app.add_subcommand("analyze", "Representation analyses");
  analyze->require_subcommand(1);
  CkaArgs cka_args;
  auto* cka = analyze->add_subcommand("cka", "Linear CKA between representations");
  add_cka(*cka, cka_args);
  NnRecallArgs nn_args;
  auto* nn = analyze->add_subcommand("nnrecall", "Nearest-neighbor preservation recall");
  add_nnrecall(*nn, nn_args);
  TruncateArgs trunc_args;
  auto* trunc = analyze->add_subcommand("truncate", "Keep or drop leading principal components");
  add_truncate(*trunc, trunc_args);

  SynthArgs synth_args;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  add_synth(*syn, synth_args);

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
    try {
      app.parse(args);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      report_error(err, "UsageError", e.what());
      return 1;
    }
    set_thread_count(resolve_threads(threads));

    if (*fit) return cmd_fit(fit_args, out);
    if (*ooo) return cmd_ooo(ooo_args, out);
    if (*fs_cmd) return cmd_fewshot(fewshot_args, out);
    if (*ad) return cmd_ad(ad_args, out);
    if (*rsa) return cmd_rsa(rsa_args, out);
    if (*cka) return cmd_cka(cka_args, out);
    if (*nn) return cmd_nnrecall(nn_args, out);
    if (*trunc) return cmd_truncate(trunc_args, out);
    if (*syn) return cmd_synth(synth_args, out);
    report_error(err, "UsageError", "no command given");
    return 1;
  } catch (const Error& e) {
    report_error(err, std::string(to_string(e.kind())), e.message());
  } catch (const std::exception& e) {
    report_error(err, "InternalError", e.what());
  }
  return 1;
}

}  // namespace glocal::cli
