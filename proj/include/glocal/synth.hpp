#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "glocal/types.hpp"

namespace glocal::synth {

struct SynthSpec {
  std::size_t n_superclasses = 4;
  std::size_t subclasses_per_super = 3;
  std::size_t items_per_subclass = 10;
  std::size_t dim = 16;
  double within_scale = 1.0;   // subclass means around their superclass mean
  double between_scale = 4.0;  // superclass means around the origin
  double noise_scale = 0.25;   // items around their subclass mean
  // Ground truth for triplet generation; identity when absent.
  std::optional<LinearTransform> planted_transform;
  std::uint64_t seed = 0;

  // Throws InvalidArgument (dim < 2, zero counts, non-positive scales,
  // planted transform of the wrong size).
  void validate() const;
  std::size_t n_items() const { return n_superclasses * subclasses_per_super * items_per_subclass; }
};

// Hierarchical Gaussian items, values rounded to float. Fine labels are the
// global subclass index, superclass labels the superclass index. Items are
// ordered superclass-major. noise_scale = 0 is accepted and gives identical
// items within a subclass.
EmbeddingMatrix generate_embeddings(const SynthSpec& spec);

enum class ChoiceNoise { Argmax, Sampled };

ChoiceNoise parse_choice_noise(const std::string& s);
const char* to_string(ChoiceNoise n);

// Triplets of distinct items drawn uniformly. The chosen pair is the most
// cosine-similar pair of the ground-truth-transformed rows (ties as in
// predict_odd_one_out), or is sampled from the softmax over the three pair
// cosines. The stored pair is in ascending index order.
TripletDataset generate_triplets(const EmbeddingMatrix& m, const LinearTransform& ground_truth,
                                 std::size_t n_triplets, ChoiceNoise noise, std::uint64_t seed);

// n x scales.size() Gaussian rows, column c with standard deviation
// scales[c]; float-rounded.
EmbeddingMatrix generate_anisotropic(std::size_t n_items, const std::vector<double>& scales, std::uint64_t seed);

// W = Q diag(scales) Q^T with Q a seeded random rotation (identity when
// rotate is false); b = 0.
LinearTransform planted_transform(const std::vector<double>& scales, bool rotate, std::uint64_t seed);

}  // namespace glocal::synth
