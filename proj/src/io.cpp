#include "glocal/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "glocal/error.hpp"

namespace glocal::io {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr char kEmbeddingMagic[4] = {'G', 'L', 'F', 'M'};
constexpr char kTransformMagic[4] = {'G', 'L', 'T', 'F'};

class ByteWriter {
 public:
  void bytes(const char* p, std::size_t n) { buf_.append(p, n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

// Cursor over a file image; every failure reports the byte offset.
class ByteReader {
 public:
  ByteReader(const std::string& data, std::string path) : data_(data), path_(std::move(path)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n)
      raise(ErrorKind::MalformedHeader, path_ + ": truncated at byte " + std::to_string(pos_) +
                                            " reading " + what + " (need " + std::to_string(n) +
                                            " bytes, have " + std::to_string(remaining()) + ")");
  }
  void magic(const char (&expected)[4]) {
    need(4, "magic");
    if (std::memcmp(data_.data() + pos_, expected, 4) != 0)
      raise(ErrorKind::MalformedHeader, path_ + ": bad magic at byte 0, expected '" +
                                            std::string(expected, 4) + "'");
    pos_ += 4;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f32(const char* what) {
    const std::size_t at = pos_;
    const float f = std::bit_cast<float>(u32(what));
    if (!std::isfinite(f))
      raise(ErrorKind::NonFiniteValue, path_ + ": " + what + " at byte " + std::to_string(at));
    return static_cast<double>(f);
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

void check_version(ByteReader& r, const std::string& path) {
  const std::size_t at = r.offset();
  const std::uint32_t v = r.u32("version");
  if (v != kVersion)
    raise(ErrorKind::MalformedHeader, path + ": unsupported version " + std::to_string(v) + " at byte " +
                                          std::to_string(at));
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> csv_lines(const std::string& text) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::string_view rest(text);
  std::size_t number = 0;
  while (!rest.empty()) {
    ++number;
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    line = trim(line);
    if (!line.empty()) lines.emplace_back(number, line);
  }
  return lines;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  s = trim(s);
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ": line " + std::to_string(line);
}

EmbeddingMatrix load_binary(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string p = path.string();
  ByteReader r(bytes, p);
  r.magic(kEmbeddingMagic);
  check_version(r, p);
  const std::uint64_t n = r.u64("n_items");
  const std::uint64_t dim = r.u64("dim");
  if (dim != 0 && n > std::numeric_limits<std::uint64_t>::max() / dim / 4)
    raise(ErrorKind::MalformedHeader, p + ": implausible shape " + std::to_string(n) + "x" + std::to_string(dim));
  if (r.remaining() < n * dim * 4)
    raise(ErrorKind::DimensionMismatch, p + ": header declares " + std::to_string(n) + "x" + std::to_string(dim) +
                                            " values but only " + std::to_string(r.remaining()) +
                                            " bytes follow at byte " + std::to_string(r.offset()));
  Matrix data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < dim; ++j) {
      const std::size_t at = r.offset();
      const float f = std::bit_cast<float>(r.u32("value"));
      if (!std::isfinite(f))
        raise(ErrorKind::NonFiniteValue, p + ": row " + std::to_string(i) + ", column " + std::to_string(j) +
                                             " at byte " + std::to_string(at));
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f;
    }
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint32_t len = r.u32("id length");
    ids.push_back(r.str(len, "item id"));
  }
  if (r.remaining() != 0)
    raise(ErrorKind::MalformedHeader, p + ": " + std::to_string(r.remaining()) +
                                          " trailing bytes at byte " + std::to_string(r.offset()));
  return EmbeddingMatrix(std::move(data), std::move(ids));
}

EmbeddingMatrix load_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = csv_lines(text);
  if (lines.empty()) raise(ErrorKind::MalformedValue, path.string() + ": no rows");
  const std::size_t width = split_commas(lines.front().second).size();
  if (width < 2) raise(ErrorKind::DimensionMismatch, where(path, lines.front().first) + ": no value columns");
  Matrix data(static_cast<Eigen::Index>(lines.size()), static_cast<Eigen::Index>(width - 1));
  std::vector<std::string> ids;
  ids.reserve(lines.size());
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto [number, line] = lines[r];
    const auto cells = split_commas(line);
    if (cells.size() != width)
      raise(ErrorKind::DimensionMismatch, where(path, number) + ": " + std::to_string(cells.size() - 1) +
                                              " values, expected " + std::to_string(width - 1));
    ids.emplace_back(trim(cells[0]));
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto v = parse_double(cells[c]);
      if (!v)
        raise(ErrorKind::MalformedValue, where(path, number) + ", column " + std::to_string(c) + ": '" +
                                             std::string(cells[c]) + "' is not a number");
      if (!std::isfinite(*v))
        raise(ErrorKind::NonFiniteValue, where(path, number) + ", column " + std::to_string(c));
      data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = *v;
    }
  }
  return EmbeddingMatrix(std::move(data), std::move(ids));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoFailure, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) raise(ErrorKind::IoFailure, "read error on '" + path.string() + "'");
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoFailure, "cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) raise(ErrorKind::IoFailure, "write error on '" + path.string() + "'");
}

EmbeddingFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? EmbeddingFormat::Csv : EmbeddingFormat::Binary;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format) {
  return format == EmbeddingFormat::Binary ? load_binary(path) : load_csv(path);
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  return load_embeddings(path, format_for_path(path));
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, EmbeddingFormat format) {
  const Matrix& data = m.data();
  if (format == EmbeddingFormat::Binary) {
    ByteWriter w;
    w.bytes(kEmbeddingMagic, 4);
    w.u32(kVersion);
    w.u64(m.n_items());
    w.u64(m.dim());
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      for (Eigen::Index j = 0; j < data.cols(); ++j) w.f32(data(i, j));
    for (const auto& id : m.item_ids()) {
      w.u32(static_cast<std::uint32_t>(id.size()));
      w.bytes(id.data(), id.size());
    }
    write_file(path, w.str());
    return;
  }
  std::string out;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    out += m.item_ids()[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      out += ',';
      out += format_double(data(i, j));
    }
    out += '\n';
  }
  write_file(path, out);
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  save_embeddings(m, path, format_for_path(path));
}

TripletDataset load_triplets(const std::filesystem::path& path, std::optional<Index> n_items) {
  const std::string text = read_file(path);
  const auto lines = csv_lines(text);
  TripletDataset d;
  Index max_index = 0;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto [number, line] = lines[r];
    const auto cells = split_commas(line);
    std::array<std::optional<Index>, 3> idx{};
    if (cells.size() == 3)
      for (int c = 0; c < 3; ++c) idx[c] = parse_int<Index>(cells[c]);
    const bool ok = cells.size() == 3 && idx[0] && idx[1] && idx[2];
    if (!ok) {
      if (r == 0 && number == 1) continue;  // header
      raise(ErrorKind::MalformedValue, where(path, number) + ": expected 'a,b,o' integer indices");
    }
    try {
      d.triplets.push_back(Triplet::make(*idx[0], *idx[1], *idx[2]));
    } catch (const Error& e) {
      raise(e.kind(), where(path, number) + ": " + std::string(line));
    }
    max_index = std::max({max_index, *idx[0], *idx[1], *idx[2]});
  }
  d.n_items = d.triplets.empty() ? 0 : max_index + 1;
  if (n_items) d = d.bound_to(*n_items);
  return d;
}

void save_triplets(const TripletDataset& d, const std::filesystem::path& path) {
  std::string out;
  for (const auto& t : d.triplets)
    out += std::to_string(t.pair_a) + "," + std::to_string(t.pair_b) + "," + std::to_string(t.odd_one_out) + "\n";
  write_file(path, out);
}

LinearTransform load_transform(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string p = path.string();
  ByteReader r(bytes, p);
  r.magic(kTransformMagic);
  check_version(r, p);
  const std::uint64_t dim = r.u64("dim");
  if (dim > (1u << 20)) raise(ErrorKind::MalformedHeader, p + ": implausible dim " + std::to_string(dim));
  const std::uint64_t expected = (dim * dim + dim) * 4;
  if (r.remaining() != expected)
    raise(ErrorKind::DimensionMismatch, p + ": header dim " + std::to_string(dim) + " needs " +
                                            std::to_string(expected) + " payload bytes, found " +
                                            std::to_string(r.remaining()));
  const auto d = static_cast<Eigen::Index>(dim);
  LinearTransform t{Matrix(d, d), Vector(d)};
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) t.W(i, j) = r.f32("W entry");
  for (Eigen::Index i = 0; i < d; ++i) t.b(i) = r.f32("bias entry");
  return t;
}

void save_transform(const LinearTransform& t, const std::filesystem::path& path) {
  t.validate();
  ByteWriter w;
  w.bytes(kTransformMagic, 4);
  w.u32(kVersion);
  w.u64(t.dim());
  for (Eigen::Index i = 0; i < t.W.rows(); ++i)
    for (Eigen::Index j = 0; j < t.W.cols(); ++j) w.f32(t.W(i, j));
  for (Eigen::Index i = 0; i < t.b.size(); ++i) w.f32(t.b(i));
  write_file(path, w.str());
}

EmbeddingMatrix load_labels(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  const std::string text = read_file(path);
  const auto lines = csv_lines(text);
  std::unordered_map<std::string, std::pair<int, std::optional<int>>> by_id;
  std::optional<bool> has_super;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto [number, line] = lines[r];
    const auto cells = split_commas(line);
    std::optional<int> label, super;
    if (cells.size() == 2 || cells.size() == 3) label = parse_int<int>(cells[1]);
    if (cells.size() == 3) super = parse_int<int>(cells[2]);
    const bool ok = label && (cells.size() == 2 || super);
    if (!ok) {
      if (r == 0 && number == 1) continue;  // header
      raise(ErrorKind::MalformedValue, where(path, number) + ": expected 'item_id,label[,superclass_label]'");
    }
    if (has_super && *has_super != super.has_value())
      raise(ErrorKind::MalformedValue, where(path, number) + ": inconsistent superclass column");
    has_super = super.has_value();
    by_id[std::string(trim(cells[0]))] = {*label, super};
  }
  std::vector<int> labels;
  std::optional<std::vector<int>> supers;
  if (has_super.value_or(false)) supers.emplace();
  for (const auto& id : m.item_ids()) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) raise(ErrorKind::MissingLabel, path.string() + ": no label for item '" + id + "'");
    labels.push_back(it->second.first);
    if (supers) supers->push_back(*it->second.second);
  }
  return m.with_labels(std::move(labels), std::move(supers));
}

void save_labels(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  if (!m.labels()) raise(ErrorKind::MissingLabel, "embedding has no labels to save");
  std::string out;
  for (std::size_t i = 0; i < m.n_items(); ++i) {
    out += m.item_ids()[i] + "," + std::to_string((*m.labels())[i]);
    if (m.superclass_labels()) out += "," + std::to_string((*m.superclass_labels())[i]);
    out += "\n";
  }
  write_file(path, out);
}

Matrix load_square_matrix_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = csv_lines(text);
  const auto n = static_cast<Eigen::Index>(lines.size());
  if (n == 0) raise(ErrorKind::MalformedValue, path.string() + ": no rows");
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto [number, line] = lines[static_cast<std::size_t>(r)];
    const auto cells = split_commas(line);
    if (static_cast<Eigen::Index>(cells.size()) != n)
      raise(ErrorKind::DimensionMismatch, where(path, number) + ": " + std::to_string(cells.size()) +
                                              " values, expected " + std::to_string(n));
    for (Eigen::Index c = 0; c < n; ++c) {
      const std::string_view cell = cells[static_cast<std::size_t>(c)];
      const auto v = parse_double(cell);
      if (!v)
        raise(ErrorKind::MalformedValue, where(path, number) + ", column " + std::to_string(c + 1) + ": '" +
                                             std::string(cell) + "' is not a number");
      if (!std::isfinite(*v))
        raise(ErrorKind::NonFiniteValue, where(path, number) + ", column " + std::to_string(c + 1));
      m(r, c) = *v;
    }
  }
  return m;
}

void save_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace glocal::io
