#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>

#include "doctest.h"
#include "ols/dataset.hpp"
#include "ols/rng.hpp"

using namespace ols;

namespace {

std::vector<std::uint8_t> make_idx_images(std::int64_t n) {
  IdxData d;
  d.type_code = 0x08;
  d.dims = {n, 28, 28};
  d.payload.assign(static_cast<std::size_t>(n * 28 * 28), 0);
  for (std::size_t i = 0; i < d.payload.size(); ++i)
    d.payload[i] = static_cast<std::uint8_t>(i % 251);
  return serialize_idx(d);
}

GlyphSet constant_glyphs(double level) {
  GlyphSet set;
  set.source = "synthetic(const)";
  for (int c = 0; c < 10; ++c)
    set.glyphs[static_cast<std::size_t>(c)].push_back(Tensor::full({kGlyph, kGlyph}, level));
  return set;
}

}  // namespace

TEST_CASE("parse_idx accepts the canonical magics") {
  const auto images = make_idx_images(2);
  // 0x00000803: ubyte, 3 dims.
  const IdxData d = parse_idx(images);
  CHECK(d.dims == std::vector<std::int64_t>{2, 28, 28});
  CHECK(d.payload.size() == 1568);

  IdxData labels;
  labels.dims = {5};
  labels.payload = {0, 1, 2, 3, 4};
  const IdxData back = parse_idx(serialize_idx(labels));  // 0x00000801 path
  CHECK(back.dims == std::vector<std::int64_t>{5});
}

TEST_CASE("parse_idx names truncation sizes") {
  auto bytes = make_idx_images(2);
  bytes.pop_back();
  CHECK_THROWS_WITH_AS((void)parse_idx(bytes),
                       doctest::Contains("expected 1568 bytes, got 1567"), std::runtime_error);
}

TEST_CASE("parse_idx rejects bad magic and overflowing dims") {
  auto bytes = make_idx_images(1);
  bytes[0] = 0x7f;
  CHECK_THROWS_WITH_AS((void)parse_idx(bytes), doctest::Contains("magic"), std::runtime_error);

  auto wrong_type = make_idx_images(1);
  wrong_type[2] = 0x0d;  // float type
  CHECK_THROWS_WITH_AS((void)parse_idx(wrong_type), doctest::Contains("type code"),
                       std::runtime_error);

  // Dimension overflow: 2^30 x 2^30.
  std::vector<std::uint8_t> huge = {0, 0, 8, 2, 0x40, 0, 0, 0, 0x40, 0, 0, 0};
  CHECK_THROWS_WITH_AS((void)parse_idx(huge), doctest::Contains("overflow"), std::runtime_error);
}

TEST_CASE("serialize/parse round trip is the identity") {
  const auto bytes = make_idx_images(3);
  CHECK(serialize_idx(parse_idx(bytes)) == bytes);
}

TEST_CASE("glyphs_from_idx distributes by label") {
  IdxData images;
  images.dims = {10, 28, 28};
  images.payload.assign(10 * 28 * 28, 128);
  IdxData labels;
  labels.dims = {10};
  for (std::uint8_t c = 0; c < 10; ++c) labels.payload.push_back(c);
  const GlyphSet set = glyphs_from_idx(images, labels);
  for (int c = 0; c < 10; ++c) REQUIRE(set.glyphs[static_cast<std::size_t>(c)].size() == 1);
  CHECK(set.glyphs[0][0].at(0) == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("synthetic glyphs are deterministic and well-formed") {
  const GlyphSet a = synthetic_glyphs(1234, 5);
  const GlyphSet b = synthetic_glyphs(1234, 5);
  a.check();
  for (int c = 0; c < 10; ++c) {
    REQUIRE(a.glyphs[static_cast<std::size_t>(c)].size() == 5);
    for (int v = 0; v < 5; ++v) {
      CHECK(a.glyphs[static_cast<std::size_t>(c)][static_cast<std::size_t>(v)].data ==
            b.glyphs[static_cast<std::size_t>(c)][static_cast<std::size_t>(v)].data);
      for (double p : a.glyphs[static_cast<std::size_t>(c)][static_cast<std::size_t>(v)].data) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
  }
  // Distinct classes render distinct strokes.
  CHECK(max_abs_diff(a.glyphs[0][0], a.glyphs[1][0]) > 0.1);
  // Distinct seeds give distinct jitter.
  const GlyphSet c = synthetic_glyphs(99, 5);
  CHECK(max_abs_diff(a.glyphs[0][0], c.glyphs[0][0]) > 0.0);
}

TEST_CASE("compose_canvas: labels, bounds, determinism") {
  const GlyphSet glyphs = synthetic_glyphs(7, 4);
  {
    Rng rng(100);
    const CanvasSample s = compose_canvas(glyphs, 3, rng);
    CHECK(s.label.size() == 3);
    s.check();
  }
  {
    Rng r1(55), r2(55);
    const CanvasSample a = compose_canvas(glyphs, 2, r1);
    const CanvasSample b = compose_canvas(glyphs, 2, r2);
    CHECK(a.image.data == b.image.data);
    CHECK(a.label == b.label);
  }
  Rng bad_rng(1);
  CHECK_THROWS_AS(compose_canvas(glyphs, 0, bad_rng), std::invalid_argument);
}

TEST_CASE("10k canvases have zero pairwise overlaps by direct recount") {
  const GlyphSet glyphs = synthetic_glyphs(11, 3);
  Rng rng(2001);
  for (int i = 0; i < 10000; ++i) {
    const int count = 1 + static_cast<int>(rng.below(3));
    const CanvasSample s = compose_canvas(glyphs, count, rng);
    // Direct interval intersection test on the placements.
    for (std::size_t a = 0; a < s.placements.size(); ++a) {
      for (std::size_t b = a + 1; b < s.placements.size(); ++b) {
        const std::int64_t xa = s.placements[a].second, xb = s.placements[b].second;
        CHECK((xa + kGlyph <= xb || xb + kGlyph <= xa));
      }
    }
    // Label order matches ascending x.
    for (std::size_t a = 0; a + 1 < s.placements.size(); ++a)
      CHECK(s.placements[a].second <= s.placements[a + 1].second);
  }
}

TEST_CASE("build_dataset counts and digit-count histogram") {
  const GlyphSet glyphs = synthetic_glyphs(3, 3);
  const Dataset small = build_dataset(glyphs, glyphs, 10, 4, 42);
  CHECK(small.header.at("n_train") == 10);
  CHECK(small.train.size() == 10);
  CHECK(small.test.size() == 4);

  const Dataset big = build_dataset(glyphs, glyphs, 3000, 1, 42);
  std::array<std::int64_t, 4> counts{};
  for (const CanvasSample& s : big.train) counts[s.label.size()] += 1;
  for (int k = 1; k <= 3; ++k) {
    const double frac = static_cast<double>(counts[static_cast<std::size_t>(k)]) / 3000.0;
    CHECK(std::abs(frac - 1.0 / 3.0) < 0.03);
  }
}

TEST_CASE("train and test draw from their own glyph sources") {
  const GlyphSet train_g = constant_glyphs(0.25);
  const GlyphSet test_g = constant_glyphs(0.75);
  const Dataset ds = build_dataset(train_g, test_g, 5, 5, 9);
  // Pixels are 2p-1: train maxima at -0.5, test at 0.5.
  for (const CanvasSample& s : ds.train) {
    double mx = -1.0;
    for (double v : s.image.data) mx = std::max(mx, v);
    CHECK(mx == doctest::Approx(-0.5));
  }
  for (const CanvasSample& s : ds.test) {
    double mx = -1.0;
    for (double v : s.image.data) mx = std::max(mx, v);
    CHECK(mx == doctest::Approx(0.5));
  }
}

TEST_CASE("OLDS1 round-trips bit-exactly") {
  const GlyphSet glyphs = synthetic_glyphs(5, 3);
  const Dataset ds = build_dataset(glyphs, glyphs, 12, 6, 77);
  const auto bytes = dataset_to_bytes(ds);
  const Dataset back = dataset_from_bytes(bytes);
  CHECK(dataset_to_bytes(back) == bytes);
  REQUIRE(back.train.size() == 12);
  CHECK(back.train[3].label == ds.train[3].label);
  // f32 container: values match after one quantization.
  CHECK(max_abs_diff(back.train[0].image, ds.train[0].image) < 1e-7);

  const std::string path =
      (std::filesystem::temp_directory_path() / "ols_dataset_test.olds").string();
  save_dataset(ds, path);
  const Dataset loaded = load_dataset(path);
  CHECK(dataset_to_bytes(loaded) == bytes);
}

TEST_CASE("OLDS1 rejects corrupted containers") {
  const GlyphSet glyphs = synthetic_glyphs(5, 3);
  const Dataset ds = build_dataset(glyphs, glyphs, 2, 1, 1);
  auto bytes = dataset_to_bytes(ds);
  auto bad = bytes;
  bad[0] = 'Z';
  CHECK_THROWS_WITH_AS((void)dataset_from_bytes(bad), doctest::Contains("magic"),
                       std::runtime_error);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS(dataset_from_bytes(truncated));
  auto padded = bytes;
  padded.push_back(0);
  CHECK_THROWS_WITH_AS((void)dataset_from_bytes(padded), doctest::Contains("trailing"),
                       std::runtime_error);
}
