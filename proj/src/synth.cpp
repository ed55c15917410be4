#include "glocal/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "glocal/error.hpp"
#include "glocal/similarity.hpp"

namespace glocal::synth {

namespace {

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

Vector gaussian(std::mt19937_64& rng, Eigen::Index n, double scale) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * dist(rng);
  return v;
}

}  // namespace

void SynthSpec::validate() const {
  if (dim < 2) raise(ErrorKind::InvalidArgument, "dim must be >= 2");
  if (n_superclasses == 0 || subclasses_per_super == 0 || items_per_subclass == 0)
    raise(ErrorKind::InvalidArgument, "class and item counts must be positive");
  if (!(within_scale > 0.0) || !(between_scale > 0.0) || !(noise_scale >= 0.0) || !std::isfinite(within_scale) ||
      !std::isfinite(between_scale) || !std::isfinite(noise_scale))
    raise(ErrorKind::InvalidArgument, "scales must be positive and finite");
  if (planted_transform) {
    if (planted_transform->dim() != dim)
      raise(ErrorKind::InvalidArgument, "planted transform is " + std::to_string(planted_transform->dim()) +
                                            "-dimensional, spec dim is " + std::to_string(dim));
    planted_transform->validate();
  }
}

EmbeddingMatrix generate_embeddings(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  Matrix data(static_cast<Eigen::Index>(spec.n_items()), d);
  std::vector<int> fine, coarse;
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < spec.n_superclasses; ++s) {
    const Vector super_mean = gaussian(rng, d, spec.between_scale);
    for (std::size_t c = 0; c < spec.subclasses_per_super; ++c) {
      const Vector sub_mean = super_mean + gaussian(rng, d, spec.within_scale);
      for (std::size_t i = 0; i < spec.items_per_subclass; ++i) {
        const Vector item = spec.noise_scale > 0.0 ? Vector(sub_mean + gaussian(rng, d, spec.noise_scale)) : sub_mean;
        data.row(row++) = item.unaryExpr(&to_float).transpose();
        fine.push_back(static_cast<int>(s * spec.subclasses_per_super + c));
        coarse.push_back(static_cast<int>(s));
      }
    }
  }
  return EmbeddingMatrix(std::move(data), {}, std::move(fine), std::move(coarse));
}

ChoiceNoise parse_choice_noise(const std::string& s) {
  if (s == "argmax") return ChoiceNoise::Argmax;
  if (s == "sampled") return ChoiceNoise::Sampled;
  raise(ErrorKind::InvalidArgument, "unknown choice noise '" + s + "'");
}

const char* to_string(ChoiceNoise n) { return n == ChoiceNoise::Argmax ? "argmax" : "sampled"; }

TripletDataset generate_triplets(const EmbeddingMatrix& m, const LinearTransform& ground_truth,
                                 std::size_t n_triplets, ChoiceNoise noise, std::uint64_t seed) {
  const Index n = m.n_items();
  if (n < 3) raise(ErrorKind::InvalidArgument, "need at least 3 items, got " + std::to_string(n));
  if (ground_truth.dim() != m.dim())
    raise(ErrorKind::DimensionMismatch, "ground truth is " + std::to_string(ground_truth.dim()) +
                                            "-dimensional, embedding is " + std::to_string(m.dim()));
  const Matrix unit = similarity::unit_rows(ground_truth.apply(m.data()));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  TripletDataset out;
  out.n_items = n;
  out.triplets.reserve(n_triplets);
  for (std::size_t t = 0; t < n_triplets; ++t) {
    Index i = pick(rng), j = pick(rng), k = pick(rng);
    while (j == i) j = pick(rng);
    while (k == i || k == j) k = pick(rng);
    std::array<Index, 3> s{i, j, k};
    std::sort(s.begin(), s.end());
    Index odd = 0;
    if (noise == ChoiceNoise::Argmax) {
      odd = similarity::predict_odd_one_out_unit(unit, Triplet{s[0], s[1], s[2]});
    } else {
      auto cos = [&](Index a, Index b) { return unit.row(static_cast<Eigen::Index>(a)).dot(unit.row(static_cast<Eigen::Index>(b))); };
      const auto p = similarity::pair_probabilities(cos(s[0], s[1]), cos(s[0], s[2]), cos(s[1], s[2]));
      const double u = coin(rng);
      // p[0] keeps {s0,s1}, p[1] keeps {s0,s2}, p[2] keeps {s1,s2}.
      odd = u < p[0] ? s[2] : (u < p[0] + p[1] ? s[1] : s[0]);
    }
    std::array<Index, 2> pair{};
    std::size_t w = 0;
    for (Index x : s)
      if (x != odd) pair[w++] = x;
    out.triplets.push_back(Triplet::make(pair[0], pair[1], odd));
  }
  return out;
}

EmbeddingMatrix generate_anisotropic(std::size_t n_items, const std::vector<double>& scales, std::uint64_t seed) {
  if (scales.size() < 2) raise(ErrorKind::InvalidArgument, "need at least 2 dimensions");
  for (double s : scales)
    if (!(s >= 0.0) || !std::isfinite(s)) raise(ErrorKind::InvalidArgument, "scales must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix data(static_cast<Eigen::Index>(n_items), static_cast<Eigen::Index>(scales.size()));
  for (Eigen::Index r = 0; r < data.rows(); ++r)
    for (Eigen::Index c = 0; c < data.cols(); ++c) data(r, c) = to_float(scales[static_cast<std::size_t>(c)] * dist(rng));
  return EmbeddingMatrix(std::move(data));
}

LinearTransform planted_transform(const std::vector<double>& scales, bool rotate, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(scales.size());
  if (d < 2) raise(ErrorKind::InvalidArgument, "need at least 2 dimensions");
  Vector diag(d);
  for (Eigen::Index i = 0; i < d; ++i) diag(i) = scales[static_cast<std::size_t>(i)];
  LinearTransform t{Matrix(diag.asDiagonal()), Vector::Zero(d)};
  if (rotate) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix g(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) g(r, c) = dist(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    // Fix column signs so Q does not depend on the QR sign convention.
    const Matrix rr = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < d; ++c)
      if (rr(c, c) < 0.0) q.col(c) *= -1.0;
    t.W = q * diag.asDiagonal() * q.transpose();
  }
  t.validate();
  return t;
}

}  // namespace glocal::synth
