#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "glocal/cli.hpp"
#include "helpers.hpp"

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = glocal::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Small synthetic dataset shared by the cases below.
std::filesystem::path make_data(const testing::TempDir& dir) {
  const auto data = dir / "data";
  const Result r = run({"synth", "--n-super", "3", "--subs", "2", "--items", "10", "--dim", "8", "--relevant-dims",
                        "3", "--n-triplets", "1500", "--n-local", "30", "--seed", "2", "--out", data.string()});
  REQUIRE(r.code == 0);
  return data;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes a complete dataset") {
  testing::TempDir dir;
  const auto data = make_data(dir);
  for (const char* f : {"embeddings.glfm", "labels.csv", "triplets.csv", "ground_truth.gltf", "local.glfm",
                        "human_rsm.csv", "manifest.json"})
    CHECK(std::filesystem::exists(data / f));
  const auto manifest = nlohmann::json::parse(slurp(data / "manifest.json"));
  CHECK(manifest.contains("config"));
}

TEST_CASE("ground truth scores perfectly on its own triplets") {
  testing::TempDir dir;
  const auto data = make_data(dir);
  const Result r = run({"eval", "ooo", "--emb", (data / "embeddings.glfm").string(), "--triplets",
                        (data / "triplets.csv").string(), "--transform", (data / "ground_truth.gltf").string(),
                        "--out", (dir / "ooo").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("accuracy: 1.000000") != std::string::npos);
  const auto rep = nlohmann::json::parse(slurp(dir / "ooo" / "report.json"));
  CHECK(rep["metrics"]["accuracy"] == 1.0);
}

TEST_CASE("grid search writes one row per configuration") {
  testing::TempDir dir;
  const auto data = make_data(dir);
  const Result r = run({"fit", "--align-emb", (data / "embeddings.glfm").string(), "--triplets",
                        (data / "triplets.csv").string(), "--objective", "global", "--grid-default", "--epochs", "2",
                        "--folds", "2", "--out", (dir / "fit").string()});
  REQUIRE(r.code == 0);
  const std::string grid = slurp(dir / "fit" / "grid.csv");
  CHECK(count_lines(grid) == 17);
  CHECK(grid.rfind("eta,lambda,alpha,tau,cv_loss,cv_accuracy,diverged,selected", 0) == 0);
  CHECK(std::filesystem::exists(dir / "fit" / "transform.gltf"));
  const auto log = nlohmann::json::parse(slurp(dir / "fit" / "run_log.json"));
  CHECK(log.contains("selected_config"));
}

TEST_CASE("errors are reported as JSON naming the input") {
  testing::TempDir dir;
  const std::string missing = (dir / "nope.glfm").string();
  const Result r = run({"eval", "ooo", "--emb", missing, "--triplets", missing});
  CHECK(r.code == 1);
  const auto err = nlohmann::json::parse(r.err);
  CHECK(err["error"]["kind"] == "IoFailure");
  CHECK(err["error"]["message"].get<std::string>().find(missing) != std::string::npos);

  const Result bad = run({"fit", "--no-such-flag"});
  CHECK(bad.code == 1);
  CHECK(nlohmann::json::parse(bad.err)["error"]["kind"] == "UsageError");
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("reruns produce identical reports") {
  testing::TempDir dir;
  const auto data = make_data(dir);
  const auto fewshot = [&](const std::string& out) {
    return run({"eval", "fewshot", "--emb", (data / "embeddings.glfm").string(), "--labels",
                (data / "labels.csv").string(), "--shots", "2", "--runs", "3", "--seed", "4", "--out", out});
  };
  REQUIRE(fewshot((dir / "a").string()).code == 0);
  REQUIRE(fewshot((dir / "b").string()).code == 0);
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
}

TEST_CASE("config file supplies options and flags override it") {
  testing::TempDir dir;
  const auto data = make_data(dir);
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"ks": [1, 2], "emb": ")" << (data / "embeddings.glfm").string() << R"("})";
  }
  const Result from_file = run({"--config", (dir / "cfg.json").string(), "analyze", "nnrecall", "--transform",
                                (data / "ground_truth.gltf").string(), "--out", (dir / "nn1").string()});
  REQUIRE(from_file.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "nn1" / "report.json"))["rows"].size() == 2);

  const Result overridden =
      run({"--config", (dir / "cfg.json").string(), "analyze", "nnrecall", "--transform",
           (data / "ground_truth.gltf").string(), "--ks", "1,2,3", "--out", (dir / "nn2").string()});
  REQUIRE(overridden.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "nn2" / "report.json"))["rows"].size() == 3);
}

}  // TEST_SUITE
