#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "glocal/io.hpp"
#include "helpers.hpp"

using namespace glocal;

TEST_SUITE("core_data") {

TEST_CASE("minimal embedding csv") {
  testing::TempDir dir;
  io::write_file(dir / "e.csv", "a,1,0,0\nb,0,1,0\n");
  const EmbeddingMatrix m = io::load_embeddings(dir / "e.csv");
  CHECK(m.n_items() == 2);
  CHECK(m.dim() == 3);
  CHECK(m.item_ids() == std::vector<std::string>{"a", "b"});
  CHECK(m.data()(1, 1) == 1.0);
  CHECK(m.data()(0, 1) == 0.0);
}

TEST_CASE("binary embedding round trip keeps shape and bits") {
  std::mt19937_64 rng(11);
  testing::TempDir dir;
  const Matrix data = testing::float_rounded(testing::random_matrix(1854, 768, rng));
  io::save_embeddings(EmbeddingMatrix(data), dir / "big.glfm");
  const std::string bytes = io::read_file(dir / "big.glfm");
  CHECK(bytes.substr(0, 4) == "GLFM");
  const EmbeddingMatrix back = io::load_embeddings(dir / "big.glfm");
  REQUIRE(back.n_items() == 1854);
  REQUIRE(back.dim() == 768);
  CHECK(back.data() == data);
  CHECK(back.item_ids()[17] == "17");
}

TEST_CASE("small binary round trip is bit exact and csv round trip exact") {
  std::mt19937_64 rng(12);
  testing::TempDir dir;
  const Matrix f = testing::float_rounded(testing::random_matrix(10, 4, rng));
  io::save_embeddings(EmbeddingMatrix(f, {"p", "q", "r", "s", "t", "u", "v", "w", "x", "y"}), dir / "m.glfm");
  const EmbeddingMatrix back = io::load_embeddings(dir / "m.glfm");
  for (Eigen::Index r = 0; r < 10; ++r)
    for (Eigen::Index c = 0; c < 4; ++c)
      CHECK(std::bit_cast<std::uint64_t>(back.data()(r, c)) == std::bit_cast<std::uint64_t>(f(r, c)));
  CHECK(back.item_ids()[9] == "y");

  const Matrix d = testing::random_matrix(10, 4, rng, 1e3);
  io::save_embeddings(EmbeddingMatrix(d), dir / "m.csv");
  const EmbeddingMatrix csv = io::load_embeddings(dir / "m.csv");
  const double max_abs = d.cwiseAbs().maxCoeff();
  CHECK((csv.data() - d).cwiseAbs().maxCoeff() <= 1e-9 * max_abs);
  CHECK(csv.data() == d);
}

TEST_CASE("embedding file errors") {
  testing::TempDir dir;
  SUBCASE("nan cell names its position") {
    io::write_file(dir / "nan.csv", "a,1,2\nb,3,nan\n");
    try {
      io::load_embeddings(dir / "nan.csv");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFiniteValue);
      CHECK(std::string(e.what()).find("line 2, column 2") != std::string::npos);
    }
  }
  SUBCASE("nan in binary names the byte offset") {
    Matrix m(1, 2);
    m << 1.0, 2.0;
    io::save_embeddings(EmbeddingMatrix(m), dir / "x.glfm");
    std::string bytes = io::read_file(dir / "x.glfm");
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bytes.data() + 24 + 4, &nan, 4);
    io::write_file(dir / "x.glfm", bytes);
    try {
      io::load_embeddings(dir / "x.glfm");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFiniteValue);
      CHECK(std::string(e.what()).find("byte 28") != std::string::npos);
    }
  }
  SUBCASE("bad magic, truncation, trailing bytes, ragged csv") {
    io::write_file(dir / "bad.glfm", "NOPE0000");
    CHECK_ERROR_KIND(io::load_embeddings(dir / "bad.glfm"), ErrorKind::MalformedHeader);
    Matrix m = Matrix::Ones(3, 2);
    io::save_embeddings(EmbeddingMatrix(m), dir / "ok.glfm");
    const std::string bytes = io::read_file(dir / "ok.glfm");
    io::write_file(dir / "short.glfm", bytes.substr(0, 20));
    CHECK_ERROR_KIND(io::load_embeddings(dir / "short.glfm"), ErrorKind::MalformedHeader);
    io::write_file(dir / "cut.glfm", bytes.substr(0, 30));
    CHECK_ERROR_KIND(io::load_embeddings(dir / "cut.glfm"), ErrorKind::DimensionMismatch);
    io::write_file(dir / "long.glfm", bytes + "xx");
    CHECK_ERROR_KIND(io::load_embeddings(dir / "long.glfm"), ErrorKind::MalformedHeader);
    io::write_file(dir / "ragged.csv", "a,1,2\nb,3\n");
    CHECK_ERROR_KIND(io::load_embeddings(dir / "ragged.csv"), ErrorKind::DimensionMismatch);
    io::write_file(dir / "word.csv", "a,1,zz\n");
    CHECK_ERROR_KIND(io::load_embeddings(dir / "word.csv"), ErrorKind::MalformedValue);
  }
  SUBCASE("missing and unwritable paths") {
    CHECK_ERROR_KIND(io::load_embeddings(dir / "absent.glfm"), ErrorKind::IoFailure);
    CHECK_ERROR_KIND(io::save_embeddings(EmbeddingMatrix(Matrix::Ones(1, 2)), dir / "no" / "such" / "dir.glfm"),
                     ErrorKind::IoFailure);
  }
}

TEST_CASE("embedding matrix invariants") {
  Matrix m = Matrix::Ones(2, 2);
  CHECK_ERROR_KIND(EmbeddingMatrix(m, {"a", "a"}), ErrorKind::DuplicateItemId);
  CHECK_ERROR_KIND(EmbeddingMatrix(m, {"a"}), ErrorKind::DimensionMismatch);
  CHECK_ERROR_KIND(EmbeddingMatrix(m, {}, std::vector<int>{0}), ErrorKind::DimensionMismatch);
  CHECK_ERROR_KIND(EmbeddingMatrix(m, {}, std::vector<int>{0, -1}), ErrorKind::InvalidArgument);
  Matrix bad = m;
  bad(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_ERROR_KIND(EmbeddingMatrix(bad), ErrorKind::NonFiniteValue);
  const EmbeddingMatrix ok(m, {}, std::vector<int>{0, 2});
  CHECK(ok.n_classes() == 3);
  CHECK(ok.n_superclasses() == 0);
}

TEST_CASE("triplet parsing") {
  testing::TempDir dir;
  io::write_file(dir / "one.csv", "0,1,2\n");
  const TripletDataset one = io::load_triplets(dir / "one.csv");
  REQUIRE(one.size() == 1);
  CHECK(one.triplets[0] == Triplet{0, 1, 2});
  CHECK(one.n_items == 3);

  io::write_file(dir / "dup.csv", "5,5,2\n");
  CHECK_ERROR_KIND(io::load_triplets(dir / "dup.csv"), ErrorKind::DuplicateIndexInTriplet);

  io::write_file(dir / "three.csv", "a,b,odd\n4,0,1\n2,3,0\n1,2,3\n");
  const TripletDataset three = io::load_triplets(dir / "three.csv");
  REQUIRE(three.size() == 3);
  CHECK(three.triplets[0] == Triplet{4, 0, 1});
  CHECK(three.triplets[1] == Triplet{2, 3, 0});
  CHECK(three.triplets[2] == Triplet{1, 2, 3});
  CHECK(three.n_items == 5);
  CHECK_ERROR_KIND(io::load_triplets(dir / "three.csv", 4), ErrorKind::IndexOutOfRange);

  io::save_triplets(three, dir / "again.csv");
  CHECK(io::load_triplets(dir / "again.csv").triplets == three.triplets);

  io::write_file(dir / "junk.csv", "0,1,2\n0,x,2\n");
  CHECK_ERROR_KIND(io::load_triplets(dir / "junk.csv"), ErrorKind::MalformedValue);
  CHECK_ERROR_KIND(Triplet::make(1, 2, 1), ErrorKind::DuplicateIndexInTriplet);
}

TEST_CASE("transform files") {
  testing::TempDir dir;
  const LinearTransform id = LinearTransform::identity(4);
  io::save_transform(id, dir / "id.gltf");
  const LinearTransform id_back = io::load_transform(dir / "id.gltf");
  CHECK(id_back.W == id.W);
  CHECK(id_back.b == id.b);

  std::mt19937_64 rng(5);
  LinearTransform t{testing::float_rounded(testing::random_matrix(16, 16, rng)),
                    testing::float_rounded(testing::random_matrix(16, 1, rng)).col(0)};
  io::save_transform(t, dir / "t.gltf");
  const LinearTransform back = io::load_transform(dir / "t.gltf");
  for (Eigen::Index i = 0; i < 16; ++i) {
    CHECK(std::bit_cast<std::uint64_t>(back.b(i)) == std::bit_cast<std::uint64_t>(t.b(i)));
    for (Eigen::Index j = 0; j < 16; ++j)
      CHECK(std::bit_cast<std::uint64_t>(back.W(i, j)) == std::bit_cast<std::uint64_t>(t.W(i, j)));
  }

  const std::string bytes = io::read_file(dir / "t.gltf");
  io::write_file(dir / "trunc.gltf", bytes.substr(0, 10));
  CHECK_ERROR_KIND(io::load_transform(dir / "trunc.gltf"), ErrorKind::MalformedHeader);
  io::write_file(dir / "short.gltf", bytes.substr(0, bytes.size() - 8));
  CHECK_ERROR_KIND(io::load_transform(dir / "short.gltf"), ErrorKind::DimensionMismatch);
}

TEST_CASE("labels attach by id") {
  testing::TempDir dir;
  const EmbeddingMatrix m(Matrix::Identity(3, 3), {"x", "y", "z"});
  io::write_file(dir / "l.csv", "item,label,super\nz,2,1\nx,0,0\ny,1,0\nextra,7,3\n");
  const EmbeddingMatrix lab = io::load_labels(dir / "l.csv", m);
  CHECK(*lab.labels() == std::vector<int>{0, 1, 2});
  CHECK(*lab.superclass_labels() == std::vector<int>{0, 0, 1});
  io::save_labels(lab, dir / "again.csv");
  CHECK(*io::load_labels(dir / "again.csv", m).labels() == *lab.labels());
  io::write_file(dir / "partial.csv", "x,0\ny,1\n");
  CHECK_ERROR_KIND(io::load_labels(dir / "partial.csv", m), ErrorKind::MissingLabel);
}

TEST_CASE("square matrix csv") {
  testing::TempDir dir;
  Matrix m(2, 2);
  m << 1.0, 0.25, 0.25, 1.0 / 3.0;
  io::save_matrix_csv(m, dir / "r.csv");
  CHECK(io::load_square_matrix_csv(dir / "r.csv") == m);
  io::write_file(dir / "rect.csv", "1,2,3\n4,5,6\n");
  CHECK_ERROR_KIND(io::load_square_matrix_csv(dir / "rect.csv"), ErrorKind::DimensionMismatch);
}

TEST_CASE("linear transform application") {
  Matrix rows(2, 4);
  rows << 1, 2, 3, 4, -1, 0.5, 0, 2;
  CHECK(LinearTransform::identity(4).apply(rows) == rows);

  LinearTransform two{2.0 * Matrix::Identity(2, 2), Vector::Zero(2)};
  Matrix one(1, 2);
  one << 1, 1;
  CHECK(two.apply(one) == 2.0 * one);

  std::mt19937_64 rng(9);
  LinearTransform t{testing::random_matrix(4, 4, rng), testing::random_matrix(4, 1, rng).col(0)};
  const Matrix x = testing::random_matrix(3, 4, rng);
  const Matrix z = t.apply(x);
  for (Eigen::Index r = 0; r < 3; ++r)
    for (Eigen::Index i = 0; i < 4; ++i) {
      double acc = t.b(i);
      for (Eigen::Index j = 0; j < 4; ++j) acc += t.W(i, j) * x(r, j);
      CHECK(z(r, i) == doctest::Approx(acc).epsilon(1e-14));
    }
  CHECK_ERROR_KIND(t.apply(Matrix::Ones(2, 3)), ErrorKind::DimensionMismatch);
}

TEST_CASE("fit config validation") {
  FitConfig c;
  CHECK_NOTHROW(c.validate());
  c.objective = Objective::GLocal;
  c.tau = 0.0;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::TemperatureNonPositive);
  c.tau = 0.1;
  c.alpha = 1.5;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::InvalidArgument);
  c.alpha = 0.1;
  c.eta = -1.0;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::InvalidArgument);
  CHECK(parse_objective("glocal") == Objective::GLocal);
  CHECK_ERROR_KIND(parse_objective("other"), ErrorKind::InvalidArgument);
}

}  // TEST_SUITE
