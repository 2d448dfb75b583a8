#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ols/attack.hpp"
#include "ols/branch_bound.hpp"
#include "ols/train.hpp"

namespace ols {

struct CommonOpts {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

struct TrainRunConfig {
  CommonOpts common;
  std::string arch = "captioner";  // captioner | seq2seq
  std::string dataset_path = "dataset.olds";
  std::string model_out = "model.olsm";
  std::int64_t n_train = 500;
  std::int64_t n_test = 100;
  CaptionerTrainConfig captioner;
  Seq2SeqTrainConfig seq2seq;

  nlohmann::json echo() const;
};

struct AttackRunConfig {
  CommonOpts common;
  std::string model_path = "model.olsm";
  std::string dataset_path = "dataset.olds";
  std::string mode = "pgd";  // pgd | random | gumbel
  std::vector<double> deltas = {0.1};
  std::int64_t samples = 100;
  std::int64_t budget = 300;  // PGD iterations / random rounds
  double alpha = 5e-4;
  double eps = 0.1;
  double tau = 1.0;
  double tau_end = 1.0;
  std::int64_t hist_cap = 100;
  std::optional<std::int64_t> khat;
  std::int64_t seq_len = 6;  // reference length for seq2seq attacks
  bool embedding_space = false;

  nlohmann::json echo() const;
};

struct VerifyRunConfig {
  CommonOpts common;
  std::string model_path = "model.olsm";
  std::string dataset_path = "dataset.olds";
  std::vector<double> deltas = {0.001};
  std::int64_t samples = 20;
  double timeout_s = 60.0;
  std::optional<std::int64_t> khat;  // default: ground-truth label length

  nlohmann::json echo() const;
};

struct ReportRunConfig {
  CommonOpts common;
  std::vector<std::string> inputs;
  std::string prefix = "report";

  nlohmann::json echo() const;
};

/// Each run writes its result JSON plus a config echo into out_dir and
/// returns the result document. Timings live in "wall_ms" fields, which the
/// reproducibility contract treats as the separate timing channel.
nlohmann::json run_train(const TrainRunConfig& cfg);
nlohmann::json run_attack(const AttackRunConfig& cfg);
nlohmann::json run_verify(const VerifyRunConfig& cfg);
nlohmann::json run_report(const ReportRunConfig& cfg);

/// Strips every "wall_ms" field, recursively; the remainder must be
/// byte-identical across re-runs with the same config.
nlohmann::json strip_timings(nlohmann::json doc);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace ols
