#include <catch2/catch_amalgamated.hpp>

#include "edsh/dataset.hpp"
#include "helpers.hpp"

using edsh::DenseMatrix;

TEST_CASE("matrix file roundtrip") {
  testutil::TempDir tmp;
  const DenseMatrix m(3, 2, {1.5, -2.25, 0.0, 1e-300, 3.75, -0.5});
  edsh::save_matrix(tmp.path / "m.edshmat", m);
  const DenseMatrix back = edsh::load_matrix(tmp.path / "m.edshmat");
  REQUIRE(back.rows == 3);
  REQUIRE(back.cols == 2);
  REQUIRE(back.values == m.values);
}

TEST_CASE("matrix file corruption") {
  testutil::TempDir tmp;
  const auto path = tmp.path / "m.edshmat";
  edsh::save_matrix(path, DenseMatrix(2, 2, {1, 2, 3, 4}));
  const std::vector<unsigned char> good = testutil::slurp(path);

  auto rewrite = [&](std::vector<unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  };

  SECTION("wrong magic") {
    auto bad = good;
    bad[0] = 'X';
    rewrite(bad);
    try {
      edsh::load_matrix(path);
      FAIL("expected a format error");
    } catch (const edsh::FormatError& e) {
      REQUIRE(e.offset == 0);
    }
  }
  SECTION("payload shorter than the header claims") {
    auto bad = good;
    bad.resize(16 + 3 * 8);  // 2x2 declared, 3 values present
    rewrite(bad);
    try {
      edsh::load_matrix(path);
      FAIL("expected a format error");
    } catch (const edsh::FormatError& e) {
      REQUIRE(e.offset == 40);
    }
  }
  SECTION("file shorter than the header") {
    auto bad = good;
    bad.resize(10);
    rewrite(bad);
    REQUIRE_THROWS_AS(edsh::load_matrix(path), edsh::FormatError);
  }
  SECTION("trailing bytes") {
    auto bad = good;
    bad.push_back(0);
    rewrite(bad);
    try {
      edsh::load_matrix(path);
      FAIL("expected a format error");
    } catch (const edsh::FormatError& e) {
      REQUIRE(e.offset == good.size());
    }
  }
  SECTION("non-finite payload value") {
    auto bad = good;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::memcpy(bad.data() + 16 + 8, &nan, 8);  // second value
    rewrite(bad);
    try {
      edsh::load_matrix(path);
      FAIL("expected a format error");
    } catch (const edsh::FormatError& e) {
      REQUIRE(e.offset == 24);
    }
  }
  SECTION("refusing to save non-finite values") {
    DenseMatrix m(1, 2, {1.0, std::numeric_limits<double>::infinity()});
    REQUIRE_THROWS_AS(edsh::save_matrix(tmp.path / "bad.edshmat", m), edsh::FormatError);
  }
  SECTION("missing file") {
    REQUIRE_THROWS_AS(edsh::load_matrix(tmp.path / "nope.edshmat"), edsh::IoError);
  }
}

TEST_CASE("center") {
  SECTION("hand case") {
    const auto [centered, mean] = edsh::center(DenseMatrix(2, 2, {1, 3, 2, 4}));
    REQUIRE(centered.values == std::vector<double>{-1, 1, -1, 1});
    REQUIRE(mean == std::vector<double>{2, 3});
  }
  SECTION("rows sum to zero") {
    std::mt19937_64 rng(7);
    const DenseMatrix x = testutil::random_matrix(rng, 5, 17);
    const auto [centered, mean] = edsh::center(x);
    for (std::size_t i = 0; i < centered.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < centered.cols; ++j) s += centered(i, j);
      REQUIRE(std::abs(s) <= 1e-9 * double(centered.cols));
    }
    const auto [again, mean2] = edsh::center(centered);
    for (double v : mean2) REQUIRE(std::abs(v) < 1e-12);
  }
  SECTION("single column centers to zero") {
    const auto [centered, mean] = edsh::center(DenseMatrix(3, 1, {4, 5, 6}));
    REQUIRE(centered.values == std::vector<double>(3, 0.0));
    REQUIRE(mean == std::vector<double>{4, 5, 6});
  }
  SECTION("empty input") {
    REQUIRE_THROWS_AS(edsh::center(DenseMatrix(3, 0)), edsh::ArgumentError);
  }
}

TEST_CASE("apply_center") {
  const DenseMatrix x(2, 1, {3, 5});
  REQUIRE(edsh::apply_center(x, {0, 0}).values == x.values);
  REQUIRE(edsh::apply_center(x, {3, 5}).values == std::vector<double>{0, 0});
  REQUIRE(edsh::apply_center(x, {1, 2}).values == std::vector<double>{2, 3});
  REQUIRE_THROWS_AS(edsh::apply_center(x, {1, 2, 3}), edsh::ShapeError);
}

TEST_CASE("center commutes with column shuffles") {
  std::mt19937_64 rng(8);
  const DenseMatrix x = testutil::random_matrix(rng, 4, 9);
  std::vector<std::size_t> perm(x.cols);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  auto permute = [&](const DenseMatrix& m) {
    DenseMatrix out(m.rows, m.cols);
    for (std::size_t j = 0; j < m.cols; ++j)
      for (std::size_t i = 0; i < m.rows; ++i) out(i, j) = m(i, perm[j]);
    return out;
  };
  const DenseMatrix a = edsh::center(permute(x)).first;
  const DenseMatrix b = permute(edsh::center(x).first);
  REQUIRE(testutil::max_abs_diff(a, b) < 1e-12);
}

namespace {

edsh::Dataset sentinel_dataset(std::size_t n, std::size_t classes) {
  edsh::Dataset ds;
  ds.x1 = DenseMatrix(2, n);
  ds.x2 = DenseMatrix(1, n);
  ds.labels = DenseMatrix(classes, n);
  for (std::size_t j = 0; j < n; ++j) {
    ds.x1(0, j) = double(j);  // sentinel identifying the original sample
    ds.x1(1, j) = 1.0;
    ds.x2(0, j) = double(j);
    ds.labels(j % classes, j) = 1.0;
  }
  return ds;
}

}  // namespace

TEST_CASE("split") {
  const edsh::Dataset ds = sentinel_dataset(4, 2);

  SECTION("cardinality and disjointness") {
    const auto [train, query] = edsh::split(ds, 0.25, 3);
    REQUIRE(train.size() == 3);
    REQUIRE(query.size() == 1);
    std::vector<double> seen;
    for (std::size_t j = 0; j < train.size(); ++j) seen.push_back(train.x1(0, j));
    for (std::size_t j = 0; j < query.size(); ++j) seen.push_back(query.x1(0, j));
    std::sort(seen.begin(), seen.end());
    REQUIRE(seen == std::vector<double>{0, 1, 2, 3});
  }
  SECTION("same seed reproduces the split") {
    const auto [t1, q1] = edsh::split(ds, 0.25, 9);
    const auto [t2, q2] = edsh::split(ds, 0.25, 9);
    REQUIRE(t1.x1.values == t2.x1.values);
    REQUIRE(q1.labels.values == q2.labels.values);
  }
  SECTION("rounding keeps both parts nonempty") {
    const edsh::Dataset two = sentinel_dataset(2, 2);
    const auto [train, query] = edsh::split(two, 0.99, 1);
    REQUIRE(train.size() == 1);
    REQUIRE(query.size() == 1);
  }
  SECTION("degenerate fractions") {
    REQUIRE_THROWS_AS(edsh::split(ds, 0.0, 1), edsh::ArgumentError);
    REQUIRE_THROWS_AS(edsh::split(ds, 1.0, 1), edsh::ArgumentError);
    REQUIRE_THROWS_AS(edsh::split(ds, -0.2, 1), edsh::ArgumentError);
  }
  SECTION("columns keep their feature/label pairing") {
    const edsh::Dataset big = sentinel_dataset(24, 4);
    const auto [train, query] = edsh::split(big, 0.3, 11);
    auto check = [](const edsh::Dataset& part) {
      double prev = -1.0;
      for (std::size_t j = 0; j < part.size(); ++j) {
        const double sentinel = part.x1(0, j);
        REQUIRE(part.x2(0, j) == sentinel);
        const std::size_t expect_class = std::size_t(sentinel) % 4;
        REQUIRE(part.labels(expect_class, j) == 1.0);
        REQUIRE(sentinel > prev);  // original column order preserved
        prev = sentinel;
      }
    };
    check(train);
    check(query);
  }
}

TEST_CASE("synth determinism and structure") {
  const edsh::SynthSpec spec{100, 2, 6, 4, 0.05, 21};

  SECTION("same spec and seed reproduce the dataset") {
    const edsh::Dataset a = edsh::synth(spec);
    const edsh::Dataset b = edsh::synth(spec);
    REQUIRE(a.x1.values == b.x1.values);
    REQUIRE(a.x2.values == b.x2.values);
    REQUIRE(a.labels.values == b.labels.values);
  }
  SECTION("one-hot accounting") {
    const edsh::Dataset ds = edsh::synth(spec);
    double total = 0.0;
    for (std::size_t j = 0; j < ds.labels.cols; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < ds.labels.rows; ++i) col += ds.labels(i, j);
      REQUIRE(col == 1.0);
      total += col;
    }
    REQUIRE(total == 100.0);
  }
  SECTION("zero noise collapses each class to its center") {
    edsh::SynthSpec quiet = spec;
    quiet.noise_sigma = 0.0;
    const edsh::Dataset ds = edsh::synth(quiet);
    auto class_of = [&](std::size_t j) {
      for (std::size_t i = 0; i < ds.labels.rows; ++i)
        if (ds.labels(i, j) == 1.0) return i;
      return std::size_t(-1);
    };
    for (std::size_t j = 1; j < ds.size(); ++j)
      for (std::size_t j2 = 0; j2 < j; ++j2)
        if (class_of(j) == class_of(j2))
          for (std::size_t i = 0; i < ds.x1.rows; ++i)
            REQUIRE(ds.x1(i, j) == ds.x1(i, j2));
  }
  SECTION("spec validation") {
    REQUIRE_THROWS_AS(edsh::synth({10, 1, 4, 4, 0.1, 0}), edsh::ArgumentError);
    REQUIRE_THROWS_AS(edsh::synth({1, 2, 4, 4, 0.1, 0}), edsh::ArgumentError);
    REQUIRE_THROWS_AS(edsh::synth({10, 2, 0, 4, 0.1, 0}), edsh::ArgumentError);
    REQUIRE_THROWS_AS(edsh::synth({10, 2, 4, 4, -0.1, 0}), edsh::ArgumentError);
  }
  SECTION("impossible center separation") {
    // three unit vectors in one dimension cannot be pairwise separated
    REQUIRE_THROWS_AS(edsh::synth({9, 3, 1, 4, 0.1, 0}), edsh::GenerationError);
  }
  SECTION("1-NN on raw features recovers labels") {
    const edsh::Dataset ds = edsh::synth({400, 5, 16, 12, 0.02, 33});
    auto class_of = [&](std::size_t j) {
      for (std::size_t i = 0; i < ds.labels.rows; ++i)
        if (ds.labels(i, j) == 1.0) return i;
      return std::size_t(-1);
    };
    std::size_t hits = 0;
    for (std::size_t j = 0; j < ds.size(); ++j) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t j2 = 0; j2 < ds.size(); ++j2) {
        if (j2 == j) continue;
        double d = 0.0;
        for (std::size_t i = 0; i < ds.x1.rows; ++i) {
          const double diff = ds.x1(i, j) - ds.x1(i, j2);
          d += diff * diff;
        }
        if (d < best) {
          best = d;
          arg = j2;
        }
      }
      hits += class_of(arg) == class_of(j);
    }
    REQUIRE(double(hits) >= 0.99 * double(ds.size()));
  }
}

TEST_CASE("dataset directory save and load") {
  testutil::TempDir tmp;
  const edsh::Dataset ds = edsh::synth({30, 3, 5, 4, 0.1, 2});
  edsh::save_dataset(tmp.path / "ds", ds);
  const edsh::Dataset back = edsh::load_dataset(tmp.path / "ds");
  REQUIRE(back.x1.values == ds.x1.values);
  REQUIRE(back.x2.values == ds.x2.values);
  REQUIRE(back.labels.values == ds.labels.values);

  SECTION("column count mismatch is rejected") {
    edsh::save_matrix(tmp.path / "ds" / "x2.edshmat", DenseMatrix(4, 29));
    REQUIRE_THROWS_AS(edsh::load_dataset(tmp.path / "ds"), edsh::ShapeError);
  }
  SECTION("non-binary labels are rejected") {
    DenseMatrix labels = ds.labels;
    labels(0, 0) = 0.5;
    edsh::save_matrix(tmp.path / "ds" / "labels.edshmat", labels);
    REQUIRE_THROWS_AS(edsh::load_dataset(tmp.path / "ds"), edsh::ArgumentError);
  }
  SECTION("unlabeled sample is rejected") {
    DenseMatrix labels = ds.labels;
    for (std::size_t i = 0; i < labels.rows; ++i) labels(i, 0) = 0.0;
    edsh::save_matrix(tmp.path / "ds" / "labels.edshmat", labels);
    REQUIRE_THROWS_AS(edsh::load_dataset(tmp.path / "ds"), edsh::ArgumentError);
  }
}
