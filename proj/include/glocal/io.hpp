#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "glocal/types.hpp"

// File formats. All multi-byte integers and floats are little-endian.
//
//   Embedding binary (.glfm): "GLFM" | u32 version=1 | u64 n_items | u64 dim |
//       n_items*dim f32 row-major | n_items x (u32 byte length + UTF-8 id)
//   Embedding CSV: item_id,v0,v1,...            (one row per item, no header)
//   Triplet CSV:   a,b,o                        (pair {a,b} most similar, o odd-one-out;
//                                                optional header line)
//   Transform binary (.gltf): "GLTF" | u32 version=1 | u64 dim | dim*dim f32 W row-major |
//       dim f32 b
//   Labels CSV:    item_id,label[,superclass_label]   (optional header line)
//   Matrix CSV:    v0,v1,...                    (one row per line, no header; used for RSMs)
//
// The binary formats store float32, so a binary round trip is bit-exact for
// float32-representable values. CSV writes the shortest decimal that
// round-trips a double.
namespace glocal::io {

enum class EmbeddingFormat { Binary, Csv };

// ".csv" selects CSV; anything else is binary.
EmbeddingFormat format_for_path(const std::filesystem::path& path);

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, EmbeddingFormat format);
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);

// Without `n_items` the dataset is bound to max index + 1.
TripletDataset load_triplets(const std::filesystem::path& path, std::optional<Index> n_items = std::nullopt);
void save_triplets(const TripletDataset& d, const std::filesystem::path& path);

LinearTransform load_transform(const std::filesystem::path& path);
void save_transform(const LinearTransform& t, const std::filesystem::path& path);

// Attaches labels keyed by item id; every item of `m` must be present.
EmbeddingMatrix load_labels(const std::filesystem::path& path, const EmbeddingMatrix& m);
void save_labels(const EmbeddingMatrix& m, const std::filesystem::path& path);

// Square numeric matrix, e.g. a precomputed RSM. Throws DimensionMismatch
// for ragged or non-square input.
Matrix load_square_matrix_csv(const std::filesystem::path& path);
void save_matrix_csv(const Matrix& m, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

// Shortest round-trip decimal for a double.
std::string format_double(double v);

}  // namespace glocal::io
