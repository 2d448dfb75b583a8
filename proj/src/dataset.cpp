#include "ols/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ols {

namespace {

using nlohmann::json;

constexpr int kIdxImagesMagic = 0x00000803;
constexpr int kIdxLabelsMagic = 0x00000801;

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

void GlyphSet::check() const {
  for (int c = 0; c < 10; ++c) {
    if (glyphs[static_cast<std::size_t>(c)].empty())
      throw std::invalid_argument("glyph set: class " + std::to_string(c) + " is empty");
    for (const Tensor& g : glyphs[static_cast<std::size_t>(c)]) {
      if (g.shape != std::vector<std::int64_t>{kGlyph, kGlyph})
        throw std::invalid_argument("glyph set: bitmap is not 28x28");
    }
  }
}

IdxData parse_idx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw std::runtime_error("idx: truncated magic (have " +
                                                 std::to_string(bytes.size()) + " bytes)");
  const std::uint32_t magic = read_be32(bytes.data());
  if ((magic >> 16) != 0) throw std::runtime_error("idx: bad magic high bytes");
  const int type_code = static_cast<int>((magic >> 8) & 0xff);
  const int ndims = static_cast<int>(magic & 0xff);
  if (type_code != 0x08)
    throw std::runtime_error("idx: unsupported type code " + std::to_string(type_code) +
                             " (only unsigned byte 0x08)");
  if (ndims < 1 || ndims > 4) throw std::runtime_error("idx: implausible dimension count");
  if (bytes.size() < 4 + 4 * static_cast<std::size_t>(ndims))
    throw std::runtime_error("idx: truncated dimension table");
  IdxData data;
  data.type_code = type_code;
  std::int64_t expected = 1;
  for (int d = 0; d < ndims; ++d) {
    const std::uint32_t extent = read_be32(bytes.data() + 4 + 4 * d);
    if (extent == 0 || extent > (1u << 28)) throw std::runtime_error("idx: dimension overflow");
    data.dims.push_back(static_cast<std::int64_t>(extent));
    expected *= static_cast<std::int64_t>(extent);
    if (expected > (std::int64_t(1) << 33)) throw std::runtime_error("idx: dimension overflow");
  }
  const std::size_t offset = 4 + 4 * static_cast<std::size_t>(ndims);
  const std::int64_t actual = static_cast<std::int64_t>(bytes.size() - offset);
  if (actual != expected)
    throw std::runtime_error("idx: payload size mismatch, expected " + std::to_string(expected) +
                             " bytes, got " + std::to_string(actual));
  data.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return data;
}

std::vector<std::uint8_t> serialize_idx(const IdxData& data) {
  std::vector<std::uint8_t> out;
  std::uint32_t magic = (static_cast<std::uint32_t>(data.type_code) << 8) |
                        static_cast<std::uint32_t>(data.dims.size());
  write_be32(out, magic);
  for (std::int64_t d : data.dims) write_be32(out, static_cast<std::uint32_t>(d));
  out.insert(out.end(), data.payload.begin(), data.payload.end());
  return out;
}

GlyphSet glyphs_from_idx(const IdxData& images, const IdxData& labels) {
  if (images.dims.size() != 3 || images.dims[1] != kGlyph || images.dims[2] != kGlyph)
    throw std::runtime_error("idx: image file must be [n, 28, 28]");
  if (labels.dims.size() != 1 || labels.dims[0] != images.dims[0])
    throw std::runtime_error("idx: label count does not match image count");
  GlyphSet set;
  set.source = "idx";
  const std::int64_t n = images.dims[0];
  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint8_t label = labels.payload[static_cast<std::size_t>(i)];
    if (label > 9) throw std::runtime_error("idx: label out of range");
    Tensor g = Tensor::zeros({kGlyph, kGlyph});
    for (std::int64_t p = 0; p < kGlyph * kGlyph; ++p)
      g.at(p) = static_cast<double>(images.payload[static_cast<std::size_t>(i * kGlyph * kGlyph + p)]) / 255.0;
    set.glyphs[label].push_back(std::move(g));
  }
  set.check();
  return set;
}

namespace {

struct Segment {
  double x0, y0, x1, y1;
};

// Seven-segment skeleton in a 28x28 box plus a diagonal for 7.
const std::array<Segment, 8> kSegments = {{
    {8, 5, 20, 5},    // A top
    {20, 5, 20, 14},  // B upper right
    {20, 14, 20, 23}, // C lower right
    {8, 23, 20, 23},  // D bottom
    {8, 14, 8, 23},   // E lower left
    {8, 5, 8, 14},    // F upper left
    {8, 14, 20, 14},  // G middle
    {20, 5, 11, 23},  // H diagonal (used by 7)
}};

const std::array<std::vector<int>, 10> kDigitSegments = {{
    {0, 1, 2, 3, 4, 5},     // 0
    {1, 2},                 // 1
    {0, 1, 6, 4, 3},        // 2
    {0, 1, 6, 2, 3},        // 3
    {5, 6, 1, 2},           // 4
    {0, 5, 6, 2, 3},        // 5
    {0, 5, 6, 4, 2, 3},     // 6
    {0, 7},                 // 7
    {0, 1, 2, 3, 4, 5, 6},  // 8
    {0, 1, 2, 3, 5, 6},     // 9
}};

double point_segment_dist(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = s.x0 + t * dx, cy = s.y0 + t * dy;
  return std::hypot(px - cx, py - cy);
}

}  // namespace

GlyphSet synthetic_glyphs(std::uint64_t seed, int per_class) {
  if (per_class < 1) throw std::invalid_argument("synthetic_glyphs: per_class must be >= 1");
  GlyphSet set;
  set.source = "synthetic(" + std::to_string(seed) + ")";
  Rng root(seed);
  for (int digit = 0; digit < 10; ++digit) {
    Rng class_rng = root.split(static_cast<std::uint64_t>(digit));
    for (int v = 0; v < per_class; ++v) {
      Rng r = class_rng.split(static_cast<std::uint64_t>(v));
      const double dx = r.uniform(-1.8, 1.8);
      const double dy = r.uniform(-1.4, 1.4);
      const double scale = r.uniform(0.88, 1.08);
      const double thick = r.uniform(1.3, 1.9);
      Tensor g = Tensor::zeros({kGlyph, kGlyph});
      for (std::int64_t y = 0; y < kGlyph; ++y) {
        for (std::int64_t x = 0; x < kGlyph; ++x) {
          // Map pixel back into the unscaled skeleton frame.
          const double sx = (static_cast<double>(x) - 14.0 - dx) / scale + 14.0;
          const double sy = (static_cast<double>(y) - 14.0 - dy) / scale + 14.0;
          double dist = 1e9;
          for (int si : kDigitSegments[static_cast<std::size_t>(digit)])
            dist = std::min(dist, point_segment_dist(sx, sy, kSegments[static_cast<std::size_t>(si)]));
          const double val = std::clamp(1.2 * (thick - dist), 0.0, 1.0);
          g.at(y * kGlyph + x) = val;
        }
      }
      set.glyphs[static_cast<std::size_t>(digit)].push_back(std::move(g));
    }
  }
  set.check();
  return set;
}

void CanvasSample::check() const {
  if (image.shape != std::vector<std::int64_t>{1, kCanvasH, kCanvasW})
    throw std::invalid_argument("canvas: wrong image shape " + shape_str(image.shape));
  if (label.size() < 1 || label.size() > 3)
    throw std::invalid_argument("canvas: label must list 1-3 digits");
  if (label.size() != placements.size())
    throw std::invalid_argument("canvas: label/placement arity mismatch");
  for (double v : image.data)
    if (v < -1.0 || v > 1.0) throw std::invalid_argument("canvas: pixel outside [-1,1]");
  for (std::size_t i = 0; i + 1 < placements.size(); ++i) {
    if (placements[i].second > placements[i + 1].second)
      throw std::invalid_argument("canvas: placements not sorted by x");
    if (placements[i].second + kGlyph > placements[i + 1].second)
      throw std::invalid_argument("canvas: glyphs overlap");
  }
  for (std::size_t i = 0; i < placements.size(); ++i) {
    if (placements[i].first != label[i])
      throw std::invalid_argument("canvas: label order does not match placements");
    if (placements[i].second < 0 || placements[i].second + kGlyph > kCanvasW)
      throw std::invalid_argument("canvas: glyph outside canvas");
  }
}

CanvasSample compose_canvas(const GlyphSet& glyphs, int digit_count, Rng& rng) {
  if (digit_count < 1 || digit_count > 3)
    throw std::invalid_argument("compose_canvas: digit_count must be 1..3");
  const std::int64_t max_off = kCanvasW - kGlyph;  // 84
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(digit_count));
  bool placed = false;
  for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
    for (auto& o : offsets) o = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(max_off + 1)));
    std::vector<std::int64_t> sorted = offsets;
    std::sort(sorted.begin(), sorted.end());
    placed = true;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
      if (sorted[i] + kGlyph > sorted[i + 1]) placed = false;
  }
  assert(placed && "placement cannot fail for <= 3 glyphs of width 28 on width 112");

  CanvasSample sample;
  std::vector<std::pair<std::int64_t, std::int64_t>> chosen;  // (x offset, digit)
  for (int k = 0; k < digit_count; ++k) {
    const auto digit = static_cast<std::int64_t>(rng.below(10));
    chosen.push_back({offsets[static_cast<std::size_t>(k)], digit});
  }
  std::sort(chosen.begin(), chosen.end());
  Tensor img = Tensor::zeros({1, kCanvasH, kCanvasW});
  for (auto& [off, digit] : chosen) {
    const auto& variants = glyphs.glyphs[static_cast<std::size_t>(digit)];
    const Tensor& g = variants[rng.below(variants.size())];
    for (std::int64_t y = 0; y < kGlyph; ++y)
      for (std::int64_t x = 0; x < kGlyph; ++x)
        img.at(y * kCanvasW + off + x) = std::max(img.at(y * kCanvasW + off + x), g.at(y * kGlyph + x));
    sample.label.push_back(digit);
    sample.placements.push_back({digit, off});
  }
  // [0,1] -> [-1,1]
  for (double& v : img.data) v = 2.0 * v - 1.0;
  sample.image = std::move(img);
  sample.check();
  return sample;
}

Dataset build_dataset(const GlyphSet& train_glyphs, const GlyphSet& test_glyphs,
                      std::int64_t n_train, std::int64_t n_test, std::uint64_t seed) {
  if (n_train < 1 || n_test < 1)
    throw std::invalid_argument("build_dataset: counts must be >= 1");
  train_glyphs.check();
  test_glyphs.check();
  Dataset ds;
  Rng root(seed);
  auto make = [&](const GlyphSet& glyphs, std::int64_t n, const char* split) {
    std::vector<CanvasSample> out;
    Rng split_rng = root.split(split);
    out.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      Rng r = split_rng.split(static_cast<std::uint64_t>(i));
      const int digit_count = 1 + static_cast<int>(r.below(3));
      out.push_back(compose_canvas(glyphs, digit_count, r));
    }
    return out;
  };
  ds.train = make(train_glyphs, n_train, "train");
  ds.test = make(test_glyphs, n_test, "test");
  ds.header = json{{"format", "OLDS1"},
                   {"n_train", n_train},
                   {"n_test", n_test},
                   {"seed", seed},
                   {"source", train_glyphs.source},
                   {"image_shape", {std::int64_t(1), kCanvasH, kCanvasW}}};
  return ds;
}

namespace {

void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_samples(std::vector<unsigned char>& out, const std::vector<CanvasSample>& samples) {
  for (const CanvasSample& s : samples) {
    for (double v : s.image.data) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      put_u32le(out, bits);
    }
  }
  for (const CanvasSample& s : samples) {
    out.push_back(static_cast<unsigned char>(s.label.size()));
    for (std::int64_t d : s.label) out.push_back(static_cast<unsigned char>(d));
  }
}

}  // namespace

std::vector<unsigned char> dataset_to_bytes(const Dataset& dataset) {
  std::vector<unsigned char> out;
  const char magic[] = "OLDS1";
  out.insert(out.end(), magic, magic + 5);
  const std::string htext = dataset.header.dump();
  put_u32le(out, static_cast<std::uint32_t>(htext.size()));
  out.insert(out.end(), htext.begin(), htext.end());
  put_samples(out, dataset.train);
  put_samples(out, dataset.test);
  return out;
}

Dataset dataset_from_bytes(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 9 || std::memcmp(bytes.data(), "OLDS1", 5) != 0)
    throw std::runtime_error("OLDS1: bad magic");
  std::size_t pos = 5;
  const std::uint32_t hlen = get_u32le(bytes.data() + pos);
  pos += 4;
  if (pos + hlen > bytes.size()) throw std::runtime_error("OLDS1: truncated header");
  Dataset ds;
  ds.header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                          bytes.begin() + static_cast<std::ptrdiff_t>(pos + hlen));
  pos += hlen;
  const std::int64_t n_train = ds.header.at("n_train").get<std::int64_t>();
  const std::int64_t n_test = ds.header.at("n_test").get<std::int64_t>();
  const std::vector<std::int64_t> shape =
      ds.header.at("image_shape").get<std::vector<std::int64_t>>();
  const std::int64_t numel = shape_numel(shape);
  auto read_split = [&](std::int64_t n) {
    std::vector<CanvasSample> out(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      if (pos + static_cast<std::size_t>(numel) * 4 > bytes.size())
        throw std::runtime_error("OLDS1: truncated image payload");
      std::vector<double> data(static_cast<std::size_t>(numel));
      for (std::int64_t p = 0; p < numel; ++p) {
        data[static_cast<std::size_t>(p)] =
            static_cast<double>(std::bit_cast<float>(get_u32le(bytes.data() + pos)));
        pos += 4;
      }
      out[static_cast<std::size_t>(i)].image = Tensor(shape, std::move(data));
    }
    for (std::int64_t i = 0; i < n; ++i) {
      if (pos >= bytes.size()) throw std::runtime_error("OLDS1: truncated label payload");
      const unsigned char len = bytes[pos++];
      if (pos + len > bytes.size()) throw std::runtime_error("OLDS1: truncated label payload");
      for (unsigned char k = 0; k < len; ++k)
        out[static_cast<std::size_t>(i)].label.push_back(bytes[pos++]);
    }
    return out;
  };
  ds.train = read_split(n_train);
  ds.test = read_split(n_test);
  if (pos != bytes.size()) throw std::runtime_error("OLDS1: trailing bytes");
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  const auto bytes = dataset_to_bytes(dataset);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return dataset_from_bytes(bytes);
}

}  // namespace ols
