// Command-line surface: train toy models, run attacks, run verification
// sweeps, merge result files into CSV/Markdown tables.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ols/runs.hpp"

namespace {

using nlohmann::json;

// Config files carry the same keys as the long flags (without the leading
// dashes), either as a JSON object or as key=value lines.
std::map<std::string, std::string> parse_config_file(const std::string& path) {
  const std::string text = ols::read_text_file(path);
  std::map<std::string, std::string> kv;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const json j = json::parse(text);
    for (const auto& [key, value] : j.items()) {
      if (value.is_string())
        kv[key] = value.get<std::string>();
      else if (value.is_array()) {
        std::string list;
        for (const auto& v : value) {
          if (!list.empty()) list += ",";
          list += v.dump();
        }
        kv[key] = list;
      } else
        kv[key] = value.dump();
    }
    return kv;
  }
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto start = line.find_first_not_of(" \t\r\n");
    if (start == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r\n");
    line = line.substr(start, end - start + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

// Applies config-file values onto an already-wired CLI11 subcommand by
// feeding them as flag tokens; CLI flags given on the command line win.
void apply_config(CLI::App* cmd, const std::map<std::string, std::string>& kv) {
  std::set<std::string> known;
  for (const CLI::Option* opt : cmd->get_options()) {
    for (const std::string& name : opt->get_lnames()) known.insert(name);
  }
  for (const auto& [key, value] : kv) {
    if (!known.count(key))
      throw CLI::ValidationError("config", "unknown key '" + key + "' for subcommand " +
                                               cmd->get_name());
    CLI::Option* opt = cmd->get_option("--" + key);
    if (opt->count() > 0) continue;  // explicit flag overrides the file
    if (opt->get_expected_min() == 0)
      opt->add_result(value == "true" || value == "1" ? "true" : "false");
    else
      opt->add_result(value);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"output-length attack and verification toolkit"};
  app.require_subcommand(1);

  std::string config_path;

  ols::TrainRunConfig train;
  ols::AttackRunConfig attack;
  ols::VerifyRunConfig verify;
  ols::ReportRunConfig report;
  std::string attack_deltas = "0.1", verify_deltas = "0.001", report_inputs;
  std::int64_t attack_khat = -1, verify_khat = -1;

  CLI::App* t = app.add_subcommand("train", "train a toy captioner or seq2seq model");
  t->add_option("--seed", train.common.seed, "global seed");
  t->add_option("--out-dir", train.common.out_dir, "output directory");
  t->add_option("--arch", train.arch, "captioner | seq2seq");
  t->add_option("--dataset", train.dataset_path, "dataset path (built if missing)");
  t->add_option("--model-out", train.model_out, "model output path");
  t->add_option("--n-train", train.n_train, "training samples when building the dataset");
  t->add_option("--n-test", train.n_test, "test samples when building the dataset");
  t->add_option("--steps", train.captioner.steps, "training steps");
  t->add_option("--batch", train.captioner.batch, "batch size");
  t->add_option("--lr", train.captioner.lr, "learning rate");
  t->add_option("--embed", train.captioner.embed, "embedding width");
  t->add_option("--hidden", train.captioner.hidden, "decoder state width");
  t->add_option("--max-unroll", train.captioner.max_unroll, "decode cap T");
  t->add_option("--length-cap", train.seq2seq.length_cap, "seq2seq training length cap");
  t->add_option("--data-vocab", train.seq2seq.data_vocab, "seq2seq payload vocabulary size");

  CLI::App* a = app.add_subcommand("attack", "run PGD / random-search attacks");
  a->add_option("--seed", attack.common.seed, "global seed");
  a->add_option("--out-dir", attack.common.out_dir, "output directory");
  a->add_option("--model", attack.model_path, "OLSM1 model path");
  a->add_option("--dataset", attack.dataset_path, "OLDS1 dataset path (captioner attacks)");
  a->add_option("--mode", attack.mode, "pgd | random | gumbel");
  a->add_option("--delta", attack_deltas, "perturbation radii, comma separated (repeatable)")
      ->join(',');
  a->add_option("--samples", attack.samples, "number of inputs to attack");
  a->add_option("--budget", attack.budget, "PGD iterations / random rounds per input");
  a->add_option("--alpha", attack.alpha, "step size");
  a->add_option("--eps", attack.eps, "proxy-loss clip");
  a->add_option("--tau", attack.tau, "Gumbel temperature");
  a->add_option("--tau-end", attack.tau_end, "Gumbel temperature at the last step");
  a->add_option("--hist-cap", attack.hist_cap, "histogram overflow bucket threshold");
  a->add_option("--khat", attack_khat, "success threshold (default: original length)");
  a->add_option("--seq-len", attack.seq_len, "reference length cap for seq2seq attacks");
  a->add_flag("--embedding-space", attack.embedding_space,
              "optimize token embeddings directly (results marked NON-REALIZABLE)");

  CLI::App* v = app.add_subcommand("verify", "verify the length spec over L-inf regions");
  v->add_option("--seed", verify.common.seed, "global seed");
  v->add_option("--out-dir", verify.common.out_dir, "output directory");
  v->add_option("--model", verify.model_path, "OLSM1 captioner path");
  v->add_option("--dataset", verify.dataset_path, "OLDS1 dataset path");
  v->add_option("--delta", verify_deltas, "perturbation radii, comma separated (repeatable)")
      ->join(',');
  v->add_option("--samples", verify.samples, "number of inputs to verify");
  v->add_option("--timeout-s", verify.timeout_s, "solver timeout per sample");
  v->add_option("--khat", verify_khat, "length threshold (default: ground-truth label length)");

  CLI::App* r = app.add_subcommand("report", "merge result JSONs into CSV/Markdown tables");
  r->add_option("--seed", report.common.seed, "global seed (echoed only)");
  r->add_option("--out-dir", report.common.out_dir, "output directory");
  r->add_option("--inputs", report_inputs, "result JSON files, comma separated")->join(',');
  r->add_option("--prefix", report.prefix, "output file prefix");

  for (CLI::App* cmd : {t, a, v, r})
    cmd->add_option("--config", config_path, "config file (JSON object or key=value lines)");

  try {
    app.parse(argc, argv);
    if (!config_path.empty()) {
      const auto kv = parse_config_file(config_path);
      for (CLI::App* cmd : {t, a, v, r})
        if (cmd->parsed()) apply_config(cmd, kv);
      // Re-run the callbacks so config values land in the bound variables.
      for (CLI::App* cmd : {t, a, v, r})
        if (cmd->parsed())
          for (CLI::Option* opt : cmd->get_options())
            if (opt->count() > 0) opt->run_callback();
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  try {
    if (t->parsed()) {
      train.seq2seq.steps = train.captioner.steps;
      train.seq2seq.batch = train.captioner.batch;
      train.seq2seq.lr = train.captioner.lr == 3e-3 && train.arch == "seq2seq"
                             ? 5e-3
                             : train.captioner.lr;
      train.seq2seq.embed = train.arch == "seq2seq" && train.captioner.embed == 16
                                ? 8
                                : train.captioner.embed;
      train.seq2seq.hidden = train.captioner.hidden;
      train.seq2seq.max_unroll = train.captioner.max_unroll;
      const json result = ols::run_train(train);
      std::printf("%s\n", result.dump(2).c_str());
    } else if (a->parsed()) {
      attack.deltas = parse_double_list(attack_deltas);
      if (attack_khat >= 0) attack.khat = attack_khat;
      const json result = ols::run_attack(attack);
      std::printf("%s\n", result.dump(2).c_str());
    } else if (v->parsed()) {
      verify.deltas = parse_double_list(verify_deltas);
      if (verify_khat >= 0) verify.khat = verify_khat;
      const json result = ols::run_verify(verify);
      std::printf("%s\n", result.dump(2).c_str());
    } else if (r->parsed()) {
      report.inputs = parse_string_list(report_inputs);
      const json result = ols::run_report(report);
      std::printf("%s\n", result.dump(2).c_str());
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
