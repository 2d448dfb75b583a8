#pragma once

#include <string>
#include <variant>
#include <vector>

#include "ols/models.hpp"

namespace ols {

/// OLSM1 container: magic "OLSM1", u32-LE header length, JSON header
/// (architecture, shapes, vocabulary, eos index, max unroll, checksum and
/// the weight-blob order), u64-LE blob length, then raw little-endian f32
/// weights in header-declared order. Round-trips are bit-exact.
void save_model(const CaptionerModel& model, const std::string& path);
void save_model(const Seq2SeqModel& model, const std::string& path);

std::vector<unsigned char> model_to_bytes(const CaptionerModel& model);
std::vector<unsigned char> model_to_bytes(const Seq2SeqModel& model);

using AnyModel = std::variant<CaptionerModel, Seq2SeqModel>;
AnyModel load_model(const std::string& path);
AnyModel model_from_bytes(const std::vector<unsigned char>& bytes);

CaptionerModel load_captioner(const std::string& path);
Seq2SeqModel load_seq2seq(const std::string& path);

}  // namespace ols
