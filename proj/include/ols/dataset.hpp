#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ols/rng.hpp"
#include "ols/tensor.hpp"

namespace ols {

/// Per-class 28x28 grayscale bitmaps in [0,1].
struct GlyphSet {
  std::array<std::vector<Tensor>, 10> glyphs;
  std::string source;  // "idx" or "synthetic(<seed>)"

  void check() const;  // every class non-empty, every bitmap 28x28
};

/// Parsed IDX stream: unsigned-byte payload with big-endian dimensions.
struct IdxData {
  std::vector<std::int64_t> dims;
  std::vector<std::uint8_t> payload;
  int type_code = 0x08;
};

IdxData parse_idx(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> serialize_idx(const IdxData& data);

GlyphSet glyphs_from_idx(const IdxData& images, const IdxData& labels);
/// Ten procedural stroke patterns rendered with seeded jitter; bit-stable
/// across platforms for a given seed.
GlyphSet synthetic_glyphs(std::uint64_t seed, int per_class = 20);

/// One 28x112 canvas in [-1,1] with 1-3 non-overlapping digits, label
/// ordered by x placement.
struct CanvasSample {
  Tensor image;  // shape [1, 28, 112]
  std::vector<std::int64_t> label;
  std::vector<std::pair<std::int64_t, std::int64_t>> placements;  // (digit, x offset)

  void check() const;
};

constexpr std::int64_t kCanvasH = 28;
constexpr std::int64_t kCanvasW = 112;
constexpr std::int64_t kGlyph = 28;

CanvasSample compose_canvas(const GlyphSet& glyphs, int digit_count, Rng& rng);

struct Dataset {
  std::vector<CanvasSample> train, test;
  nlohmann::json header;
};

/// Train samples from the train glyphs, test from the test glyphs, digit
/// counts uniform over {1,2,3}; sample i is a pure function of (seed, i).
Dataset build_dataset(const GlyphSet& train_glyphs, const GlyphSet& test_glyphs,
                      std::int64_t n_train, std::int64_t n_test, std::uint64_t seed);

/// OLDS1 container: magic, u32-LE header length, JSON header, then images as
/// raw little-endian f32 and labels as length-prefixed byte lists.
std::vector<unsigned char> dataset_to_bytes(const Dataset& dataset);
Dataset dataset_from_bytes(const std::vector<unsigned char>& bytes);
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace ols
