#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <doctest.h>

#include "glocal/error.hpp"
#include "glocal/types.hpp"

#define CHECK_ERROR_KIND(expr, expected_kind)           \
  do {                                                  \
    bool caught_ = false;                               \
    try {                                               \
      (void)(expr);                                     \
    } catch (const glocal::Error& e_) {                 \
      caught_ = true;                                   \
      CHECK_MESSAGE(e_.kind() == (expected_kind), std::string(e_.what())); \
    }                                                   \
    CHECK_MESSAGE(caught_, "no glocal::Error thrown");  \
  } while (0)

namespace testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("glocal_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline glocal::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  glocal::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = d(rng);
  return m;
}

inline glocal::Matrix float_rounded(glocal::Matrix m) {
  return m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

inline glocal::TripletDataset random_triplets(std::size_t n, glocal::Index n_items, std::mt19937_64& rng) {
  std::uniform_int_distribution<glocal::Index> pick(0, n_items - 1);
  glocal::TripletDataset d;
  d.n_items = n_items;
  while (d.triplets.size() < n) {
    const glocal::Index a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || a == c || b == c) continue;
    d.triplets.push_back(glocal::Triplet::make(a, b, c));
  }
  return d;
}

}  // namespace testing
