#include "ols/model_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace ols {

namespace {

using nlohmann::json;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_f32(std::vector<unsigned char>& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

std::uint64_t fnv1a64(const unsigned char* data, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

struct NamedTensor {
  std::string name;
  const Tensor* tensor;
};

void append_cell(std::vector<NamedTensor>& list, const std::string& prefix,
                 const LayerParams& cell) {
  list.push_back({prefix + ".w_ih", &cell.w_ih});
  list.push_back({prefix + ".w_hh", &cell.w_hh});
  list.push_back({prefix + ".b_h", &cell.b_h});
  list.push_back({prefix + ".w_ho", &cell.w_ho});
  list.push_back({prefix + ".b_o", &cell.b_o});
}

json cell_json(const LayerParams& cell) {
  return json{{"hidden", cell.rnn_hidden()}, {"input", cell.rnn_input()},
              {"vocab", cell.rnn_vocab()}};
}

json vocab_json(const Vocabulary& vocab) {
  return json{{"tokens", vocab.tokens},
              {"eos_index", vocab.eos_index},
              {"embed_dim", vocab.embed_dim()}};
}

std::vector<unsigned char> assemble(json header, const std::vector<NamedTensor>& weights) {
  json wlist = json::array();
  std::vector<unsigned char> blob;
  for (const NamedTensor& w : weights) {
    wlist.push_back(json{{"name", w.name}, {"shape", w.tensor->shape}});
    for (double v : w.tensor->data) put_f32(blob, static_cast<float>(v));
  }
  header["weights"] = wlist;
  header["checksum"] = hex64(fnv1a64(blob.data(), blob.size()));
  const std::string htext = header.dump();
  std::vector<unsigned char> out;
  const char magic[] = "OLSM1";
  out.insert(out.end(), magic, magic + 5);
  put_u32(out, static_cast<std::uint32_t>(htext.size()));
  out.insert(out.end(), htext.begin(), htext.end());
  put_u64(out, blob.size());
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

class BlobReader {
 public:
  BlobReader(const unsigned char* p, std::size_t len) : p_(p), len_(len) {}
  Tensor read(const json& spec) {
    std::vector<std::int64_t> shape = spec.at("shape").get<std::vector<std::int64_t>>();
    const std::int64_t n = shape_numel(shape);
    if (pos_ + static_cast<std::size_t>(n) * 4 > len_)
      throw std::runtime_error("OLSM1: weight blob truncated at " + spec.at("name").get<std::string>());
    std::vector<double> data(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      data[static_cast<std::size_t>(i)] = static_cast<double>(get_f32(p_ + pos_));
      pos_ += 4;
    }
    return Tensor(std::move(shape), std::move(data));
  }
  std::size_t consumed() const { return pos_; }

 private:
  const unsigned char* p_;
  std::size_t len_;
  std::size_t pos_ = 0;
};

json encoder_layer_json(const LayerParams& layer) {
  switch (layer.kind) {
    case LayerKind::Linear:
      return json{{"kind", "linear"}, {"out", layer.weight.dim(0)}, {"in", layer.weight.dim(1)}};
    case LayerKind::Conv2D:
      return json{{"kind", "conv2d"},   {"out_c", layer.weight.dim(0)},
                  {"in_c", layer.in_c}, {"kh", layer.weight.dim(2)},
                  {"kw", layer.weight.dim(3)}, {"in_h", layer.in_h},
                  {"in_w", layer.in_w}, {"stride", layer.stride},
                  {"pad", layer.pad}};
    case LayerKind::ReLU:
      return json{{"kind", "relu"}};
    default:
      throw std::invalid_argument("save_model: unsupported encoder layer kind");
  }
}

}  // namespace

std::vector<unsigned char> model_to_bytes(const CaptionerModel& model) {
  model.validate();
  json header;
  header["format"] = "OLSM1";
  header["kind"] = "captioner";
  header["max_unroll"] = model.max_unroll;
  header["input_shape"] = model.input_shape;
  header["domain"] = {model.domain_lo, model.domain_hi};
  json enc = json::array();
  for (const LayerParams& l : model.encoder) enc.push_back(encoder_layer_json(l));
  header["encoder"] = enc;
  header["decoder_cell"] = cell_json(model.decoder_cell);
  header["vocab"] = vocab_json(model.vocab);

  std::vector<NamedTensor> weights;
  for (std::size_t i = 0; i < model.encoder.size(); ++i) {
    const LayerParams& l = model.encoder[i];
    if (l.kind == LayerKind::ReLU) continue;
    weights.push_back({"encoder." + std::to_string(i) + ".weight", &l.weight});
    weights.push_back({"encoder." + std::to_string(i) + ".bias", &l.bias});
  }
  append_cell(weights, "decoder_cell", model.decoder_cell);
  weights.push_back({"vocab.embedding", &model.vocab.embedding});
  return assemble(std::move(header), weights);
}

std::vector<unsigned char> model_to_bytes(const Seq2SeqModel& model) {
  model.validate();
  json header;
  header["format"] = "OLSM1";
  header["kind"] = "seq2seq";
  header["max_unroll"] = model.max_unroll;
  header["in_vocab"] = vocab_json(model.in_vocab);
  header["out_vocab"] = vocab_json(model.out_vocab);
  header["encoder_cell"] = cell_json(model.encoder_cell);
  header["decoder_cell"] = cell_json(model.decoder_cell);

  std::vector<NamedTensor> weights;
  weights.push_back({"in_vocab.embedding", &model.in_vocab.embedding});
  append_cell(weights, "encoder_cell", model.encoder_cell);
  append_cell(weights, "decoder_cell", model.decoder_cell);
  weights.push_back({"out_vocab.embedding", &model.out_vocab.embedding});
  return assemble(std::move(header), weights);
}

namespace {

LayerParams cell_from(BlobReader& reader, const json& specs, std::size_t& cursor) {
  Tensor w_ih = reader.read(specs.at(cursor++));
  Tensor w_hh = reader.read(specs.at(cursor++));
  Tensor b_h = reader.read(specs.at(cursor++));
  Tensor w_ho = reader.read(specs.at(cursor++));
  Tensor b_o = reader.read(specs.at(cursor++));
  return LayerParams::rnn_cell(std::move(w_ih), std::move(w_hh), std::move(b_h), std::move(w_ho),
                               std::move(b_o));
}

Vocabulary vocab_from(const json& vj, Tensor embedding) {
  return Vocabulary::make(vj.at("tokens").get<std::vector<std::string>>(),
                          vj.at("eos_index").get<std::int64_t>(), std::move(embedding));
}

}  // namespace

AnyModel model_from_bytes(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 9 || std::memcmp(bytes.data(), "OLSM1", 5) != 0)
    throw std::runtime_error("OLSM1: bad magic");
  std::size_t pos = 5;
  const std::uint32_t hlen = get_u32(bytes.data() + pos);
  pos += 4;
  if (pos + hlen + 8 > bytes.size()) throw std::runtime_error("OLSM1: truncated header");
  const json header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + hlen));
  pos += hlen;
  const std::uint64_t blen = get_u64(bytes.data() + pos);
  pos += 8;
  if (pos + blen != bytes.size())
    throw std::runtime_error("OLSM1: blob length mismatch (declared " + std::to_string(blen) +
                             ", have " + std::to_string(bytes.size() - pos) + ")");
  const std::string checksum = hex64(fnv1a64(bytes.data() + pos, blen));
  if (checksum != header.at("checksum").get<std::string>())
    throw std::runtime_error("OLSM1: checksum mismatch");

  BlobReader reader(bytes.data() + pos, blen);
  const json& wspecs = header.at("weights");
  std::size_t cursor = 0;
  const std::string kind = header.at("kind").get<std::string>();
  if (kind == "captioner") {
    CaptionerModel model;
    model.max_unroll = header.at("max_unroll").get<std::int64_t>();
    model.input_shape = header.at("input_shape").get<std::vector<std::int64_t>>();
    model.domain_lo = header.at("domain").at(0).get<double>();
    model.domain_hi = header.at("domain").at(1).get<double>();
    for (const json& lj : header.at("encoder")) {
      const std::string lk = lj.at("kind").get<std::string>();
      if (lk == "relu") {
        model.encoder.push_back(LayerParams::relu());
      } else if (lk == "linear") {
        Tensor w = reader.read(wspecs.at(cursor++));
        Tensor b = reader.read(wspecs.at(cursor++));
        model.encoder.push_back(LayerParams::linear(std::move(w), std::move(b)));
      } else if (lk == "conv2d") {
        Tensor w = reader.read(wspecs.at(cursor++));
        Tensor b = reader.read(wspecs.at(cursor++));
        model.encoder.push_back(LayerParams::conv2d(
            std::move(w), std::move(b), lj.at("in_c").get<std::int64_t>(),
            lj.at("in_h").get<std::int64_t>(), lj.at("in_w").get<std::int64_t>(),
            lj.at("stride").get<std::int64_t>(), lj.at("pad").get<std::int64_t>()));
      } else {
        throw std::runtime_error("OLSM1: unknown encoder layer kind " + lk);
      }
    }
    model.decoder_cell = cell_from(reader, wspecs, cursor);
    model.vocab = vocab_from(header.at("vocab"), reader.read(wspecs.at(cursor++)));
    model.validate();
    return model;
  }
  if (kind == "seq2seq") {
    Seq2SeqModel model;
    model.max_unroll = header.at("max_unroll").get<std::int64_t>();
    Tensor in_emb = reader.read(wspecs.at(cursor++));
    model.encoder_cell = cell_from(reader, wspecs, cursor);
    model.decoder_cell = cell_from(reader, wspecs, cursor);
    Tensor out_emb = reader.read(wspecs.at(cursor++));
    model.in_vocab = vocab_from(header.at("in_vocab"), std::move(in_emb));
    model.out_vocab = vocab_from(header.at("out_vocab"), std::move(out_emb));
    model.validate();
    return model;
  }
  throw std::runtime_error("OLSM1: unknown model kind " + kind);
}

namespace {

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
}

}  // namespace

void save_model(const CaptionerModel& model, const std::string& path) {
  write_file(path, model_to_bytes(model));
}

void save_model(const Seq2SeqModel& model, const std::string& path) {
  write_file(path, model_to_bytes(model));
}

AnyModel load_model(const std::string& path) { return model_from_bytes(read_file(path)); }

CaptionerModel load_captioner(const std::string& path) {
  AnyModel m = load_model(path);
  if (auto* c = std::get_if<CaptionerModel>(&m)) return std::move(*c);
  throw std::runtime_error(path + ": not a captioner model");
}

Seq2SeqModel load_seq2seq(const std::string& path) {
  AnyModel m = load_model(path);
  if (auto* s = std::get_if<Seq2SeqModel>(&m)) return std::move(*s);
  throw std::runtime_error(path + ": not a seq2seq model");
}

}  // namespace ols
