#include "glocal/report.hpp"

#include <cmath>
#include <cstdio>

#include "glocal/error.hpp"
#include "glocal/io.hpp"

namespace glocal {

const char* to_string(Task t) {
  switch (t) {
    case Task::Ooo: return "ooo";
    case Task::FewShot: return "fewshot";
    case Task::Anomaly: return "anomaly";
    case Task::Rsa: return "rsa";
    case Task::Cka: return "cka";
    case Task::NnRecall: return "nnrecall";
    case Task::Truncate: return "truncate";
  }
  return "?";
}

void EvalReport::validate() const {
  for (const auto& [name, value] : metrics)
    if (!std::isfinite(value)) raise(ErrorKind::NonFiniteValue, "metric '" + name + "'");
  for (const auto& row : rows)
    if (row.size() != columns.size())
      raise(ErrorKind::DimensionMismatch, "report row width " + std::to_string(row.size()) + " vs " +
                                              std::to_string(columns.size()) + " columns");
}

nlohmann::ordered_json EvalReport::to_json() const {
  validate();
  nlohmann::ordered_json j;
  j["task"] = to_string(task);
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : metrics) j["metrics"][name] = value;
  j["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : metadata) j["metadata"][key] = value;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < columns.size(); ++c) r[columns[c]] = row[c];
    j["rows"].push_back(std::move(r));
  }
  return j;
}

std::string EvalReport::to_csv() const {
  validate();
  std::string out;
  if (!columns.empty()) {
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
    out += "\n";
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + row[c];
      out += "\n";
    }
    return out;
  }
  out = "metric,value\n";
  for (const auto& [name, value] : metrics) out += name + "," + io::format_double(value) + "\n";
  return out;
}

void EvalReport::write(const std::filesystem::path& json_path, const std::filesystem::path& csv_path) const {
  io::write_file(json_path, to_json().dump(2) + "\n");
  io::write_file(csv_path, to_csv());
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::ordered_json to_json(const FitConfig& cfg) {
  nlohmann::ordered_json j;
  j["objective"] = to_string(cfg.objective);
  j["lambda"] = cfg.lambda;
  j["alpha"] = cfg.alpha;
  j["tau"] = cfg.tau;
  j["eta"] = cfg.eta;
  j["momentum"] = cfg.momentum;
  j["epochs"] = cfg.epochs;
  j["batch_triplets"] = cfg.batch_triplets;
  j["batch_items"] = cfg.batch_items;
  j["folds"] = cfg.folds;
  j["seed"] = cfg.seed;
  j["train_sim"] = to_string(cfg.train_sim);
  if (cfg.grids) {
    j["grids"] = {{"eta", cfg.grids->eta},
                  {"lambda", cfg.grids->lambda},
                  {"alpha", cfg.grids->alpha},
                  {"tau", cfg.grids->tau}};
  }
  return j;
}

}  // namespace glocal
