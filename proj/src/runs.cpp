#include "ols/runs.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "ols/model_io.hpp"

namespace ols {

namespace {

using nlohmann::json;

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
}

void write_result(const CommonOpts& common, const std::string& name, const json& config_echo,
                  const json& result) {
  ensure_dir(common.out_dir);
  write_text_file(join_path(common.out_dir, name + ".config.json"), config_echo.dump(2) + "\n");
  write_text_file(join_path(common.out_dir, name + ".json"), result.dump(2) + "\n");
}

}  // namespace

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

json strip_timings(json doc) {
  if (doc.is_object()) {
    doc.erase("wall_ms");
    for (auto& [k, v] : doc.items()) v = strip_timings(v);
  } else if (doc.is_array()) {
    for (auto& v : doc) v = strip_timings(v);
  }
  return doc;
}

json TrainRunConfig::echo() const {
  json j{{"subcommand", "train"},
         {"seed", common.seed},
         {"out_dir", common.out_dir},
         {"arch", arch},
         {"dataset", dataset_path},
         {"model_out", model_out},
         {"n_train", n_train},
         {"n_test", n_test}};
  if (arch == "captioner") {
    j["steps"] = captioner.steps;
    j["batch"] = captioner.batch;
    j["lr"] = captioner.lr;
    j["conv1"] = captioner.conv1_channels;
    j["conv2"] = captioner.conv2_channels;
    j["fc_hidden"] = captioner.fc_hidden;
    j["embed"] = captioner.embed;
    j["hidden"] = captioner.hidden;
    j["max_unroll"] = captioner.max_unroll;
  } else {
    j["steps"] = seq2seq.steps;
    j["batch"] = seq2seq.batch;
    j["lr"] = seq2seq.lr;
    j["data_vocab"] = seq2seq.data_vocab;
    j["embed"] = seq2seq.embed;
    j["hidden"] = seq2seq.hidden;
    j["length_cap"] = seq2seq.length_cap;
    j["max_unroll"] = seq2seq.max_unroll;
  }
  return j;
}

json run_train(const TrainRunConfig& cfg) {
  json result{{"arch", cfg.arch}};
  if (cfg.arch == "captioner") {
    Dataset dataset;
    if (std::filesystem::exists(cfg.dataset_path)) {
      dataset = load_dataset(cfg.dataset_path);
    } else {
      const GlyphSet train_g = synthetic_glyphs(cfg.common.seed ^ 0x5eedu, 20);
      const GlyphSet test_g = synthetic_glyphs(cfg.common.seed ^ 0x7e57u, 20);
      dataset = build_dataset(train_g, test_g, cfg.n_train, cfg.n_test, cfg.common.seed);
      ensure_dir(std::filesystem::path(cfg.dataset_path).parent_path().string().empty()
                     ? "."
                     : std::filesystem::path(cfg.dataset_path).parent_path().string());
      save_dataset(dataset, cfg.dataset_path);
      result["dataset_built"] = true;
    }
    CaptionerTrainConfig tc = cfg.captioner;
    tc.seed = cfg.common.seed;
    CaptionerModel model = init_captioner(
        tc, dataset.header.at("image_shape").get<std::vector<std::int64_t>>());
    const TrainMetrics metrics = train_captioner(model, dataset, tc);
    save_model(model, cfg.model_out);
    result["loss_curve"] = metrics.loss_curve;
    result["exact_sequence_accuracy"] = metrics.exact_sequence_accuracy;
    result["diverged"] = metrics.diverged;
    result["steps_completed"] = metrics.steps_completed;
    // Decode-length sweep over the training set, the desk-scale mirror of
    // "all predictions on the training set have lengths no more than 3".
    std::int64_t max_len = 0;
    bool any_overflow = false;
    for (const CanvasSample& s : dataset.train) {
      const auto len = output_length(model, s.image);
      if (!len)
        any_overflow = true;
      else
        max_len = std::max(max_len, *len);
    }
    result["train_max_decode_length"] = any_overflow ? json("OVERFLOW") : json(max_len);
  } else if (cfg.arch == "seq2seq") {
    Seq2SeqTrainConfig tc = cfg.seq2seq;
    tc.seed = cfg.common.seed;
    Seq2SeqModel model = init_seq2seq(tc);
    const TrainMetrics metrics = train_copy_seq2seq(model, tc);
    save_model(model, cfg.model_out);
    result["loss_curve"] = metrics.loss_curve;
    result["exact_sequence_accuracy"] = metrics.exact_sequence_accuracy;
    result["diverged"] = metrics.diverged;
    result["steps_completed"] = metrics.steps_completed;
  } else {
    throw std::invalid_argument("train: unknown arch " + cfg.arch);
  }
  write_result(cfg.common, "train", cfg.echo(), result);
  return result;
}

json AttackRunConfig::echo() const {
  json j{{"subcommand", "attack"},
         {"seed", common.seed},
         {"out_dir", common.out_dir},
         {"model", model_path},
         {"dataset", dataset_path},
         {"mode", mode},
         {"delta", deltas},
         {"samples", samples},
         {"budget", budget},
         {"alpha", alpha},
         {"eps", eps},
         {"tau", tau},
         {"tau_end", tau_end},
         {"hist_cap", hist_cap},
         {"seq_len", seq_len},
         {"embedding_space", embedding_space}};
  if (khat) j["khat"] = *khat;
  return j;
}

namespace {

json attack_captioner(const AttackRunConfig& cfg, const CaptionerModel& model) {
  const Dataset dataset = load_dataset(cfg.dataset_path);
  const std::vector<CanvasSample>& pool = dataset.test.empty() ? dataset.train : dataset.test;
  if (pool.empty()) throw std::runtime_error("attack: dataset has no samples");
  const std::int64_t n = std::min<std::int64_t>(cfg.samples,
                                                static_cast<std::int64_t>(pool.size()));
  json per_delta = json::array();
  for (double delta : cfg.deltas) {
    json rows = json::array();
    LengthHistogram hist;
    hist.cap = cfg.hist_cap;
    std::int64_t successes = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      const CanvasSample& sample = pool[static_cast<std::size_t>(i)];
      const ContinuousBox region(sample.image, delta, model.domain_lo, model.domain_hi);
      AttackConfig ac;
      ac.steps = cfg.budget;
      ac.step_size = cfg.alpha;
      ac.clip_eps = cfg.eps;
      ac.seed = cfg.common.seed ^ static_cast<std::uint64_t>(i);
      ac.khat = cfg.khat;
      AttackReport report;
      if (cfg.mode == "pgd") {
        report = pgd_continuous(model, region, ac);
        hist.add(report.best_length);
      } else if (cfg.mode == "random") {
        Rng rng(ac.seed);
        RandomSearchResult rs = random_search(model, region, std::max<std::int64_t>(cfg.budget, 1),
                                              rng, cfg.hist_cap, cfg.khat);
        report = rs.report;
        for (const auto& [len, c] : rs.histogram.counts) hist.counts[len] += c;
        hist.over += rs.histogram.over;
      } else {
        throw std::invalid_argument("attack: mode " + cfg.mode + " needs a seq2seq model");
      }
      successes += report.success ? 1 : 0;
      json row = report_to_json(report);
      row["sample"] = i;
      rows.push_back(std::move(row));
    }
    per_delta.push_back(json{{"delta", delta},
                             {"rows", rows},
                             {"histogram", histogram_to_json(hist)},
                             {"successes", successes},
                             {"samples", n}});
  }
  return json{{"kind", "captioner"}, {"mode", cfg.mode}, {"per_delta", per_delta}};
}

json attack_seq2seq(const AttackRunConfig& cfg, const Seq2SeqModel& model) {
  json per_delta = json::array();
  Rng ref_rng = Rng(cfg.common.seed).split("attack-references");
  std::vector<std::vector<std::int64_t>> references;
  for (std::int64_t i = 0; i < cfg.samples; ++i) {
    const std::int64_t len =
        1 + static_cast<std::int64_t>(ref_rng.below(static_cast<std::uint64_t>(cfg.seq_len)));
    std::vector<std::int64_t> seq(static_cast<std::size_t>(len));
    for (auto& t : seq)
      t = static_cast<std::int64_t>(
          ref_rng.below(static_cast<std::uint64_t>(model.in_vocab.size() - 1)));
    references.push_back(std::move(seq));
  }
  for (double delta : cfg.deltas) {
    json rows = json::array();
    LengthHistogram hist;
    hist.cap = cfg.hist_cap;
    std::int64_t successes = 0;
    for (std::int64_t i = 0; i < cfg.samples; ++i) {
      AttackConfig ac;
      ac.steps = cfg.budget;
      ac.step_size = cfg.alpha;
      ac.clip_eps = cfg.eps;
      ac.tau = cfg.tau;
      ac.tau_end = cfg.tau_end;
      ac.seed = cfg.common.seed ^ static_cast<std::uint64_t>(i);
      ac.khat = cfg.khat;
      ac.embedding_space = cfg.embedding_space;
      Rng pos_rng = Rng(ac.seed).split("positions");
      const DiscreteBudget region =
          DiscreteBudget::make(references[static_cast<std::size_t>(i)], delta, pos_rng);
      AttackReport report;
      if (cfg.mode == "gumbel") {
        report = pgd_discrete_gumbel(model, region, ac);
        hist.add(report.best_length);
      } else if (cfg.mode == "random") {
        Rng rng = Rng(ac.seed).split("random-search");
        RandomSearchResult rs = random_search(model, region, std::max<std::int64_t>(cfg.budget, 1),
                                              rng, cfg.hist_cap, cfg.khat);
        report = rs.report;
        for (const auto& [len, c] : rs.histogram.counts) hist.counts[len] += c;
        hist.over += rs.histogram.over;
      } else {
        throw std::invalid_argument("attack: mode " + cfg.mode + " needs a captioner model");
      }
      if (report.success && !report.non_realizable) successes += 1;
      json row = report_to_json(report);
      row["sample"] = i;
      row["reference"] = references[static_cast<std::size_t>(i)];
      rows.push_back(std::move(row));
    }
    per_delta.push_back(json{{"delta", delta},
                             {"rows", rows},
                             {"histogram", histogram_to_json(hist)},
                             {"successes", successes},
                             {"samples", cfg.samples}});
  }
  return json{{"kind", "seq2seq"}, {"mode", cfg.mode}, {"per_delta", per_delta}};
}

}  // namespace

json run_attack(const AttackRunConfig& cfg) {
  AnyModel any = load_model(cfg.model_path);
  json result;
  if (auto* cap = std::get_if<CaptionerModel>(&any)) {
    result = attack_captioner(cfg, *cap);
  } else {
    result = attack_seq2seq(cfg, std::get<Seq2SeqModel>(any));
  }
  result["config"] = cfg.echo();
  write_result(cfg.common, "attack", cfg.echo(), result);
  return result;
}

json VerifyRunConfig::echo() const {
  json j{{"subcommand", "verify"},
         {"seed", common.seed},
         {"out_dir", common.out_dir},
         {"model", model_path},
         {"dataset", dataset_path},
         {"delta", deltas},
         {"samples", samples},
         {"timeout_s", timeout_s}};
  if (khat) j["khat"] = *khat;
  return j;
}

json run_verify(const VerifyRunConfig& cfg) {
  const CaptionerModel model = load_captioner(cfg.model_path);
  const Dataset dataset = load_dataset(cfg.dataset_path);
  const std::vector<CanvasSample>& pool = dataset.test.empty() ? dataset.train : dataset.test;
  if (pool.empty()) throw std::runtime_error("verify: dataset has no samples");
  const std::int64_t n =
      std::min<std::int64_t>(cfg.samples, static_cast<std::int64_t>(pool.size()));
  json per_delta = json::array();
  for (double delta : cfg.deltas) {
    json rows = json::array();
    std::int64_t robust = 0, vulnerable = 0, unknown = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      const CanvasSample& sample = pool[static_cast<std::size_t>(i)];
      const std::int64_t khat =
          cfg.khat.value_or(static_cast<std::int64_t>(sample.label.size()));
      const ContinuousBox region(sample.image, delta, model.domain_lo, model.domain_hi);
      BnbOptions opt;
      opt.timeout_s = cfg.timeout_s;
      const VerificationVerdict verdict = verify_region(model, region, khat, opt);
      json row = verdict_to_json(verdict);
      row["sample"] = i;
      row["khat"] = khat;
      rows.push_back(std::move(row));
      switch (verdict.status) {
        case VerdictStatus::Robust:
          ++robust;
          break;
        case VerdictStatus::Counterexample:
          ++vulnerable;
          break;
        default:
          ++unknown;  // UNKNOWN and TIMEOUT rows are never dropped
          break;
      }
    }
    const double dn = static_cast<double>(n);
    per_delta.push_back(json{{"delta", delta},
                             {"rows", rows},
                             {"robust", robust},
                             {"vulnerable", vulnerable},
                             {"unknown", unknown},
                             {"fractions",
                              {{"robust", robust / dn},
                               {"vulnerable", vulnerable / dn},
                               {"unknown", unknown / dn}}},
                             {"samples", n}});
  }
  json result{{"kind", "verify"}, {"per_delta", per_delta}, {"config", cfg.echo()}};
  write_result(cfg.common, "verify", cfg.echo(), result);
  return result;
}

json ReportRunConfig::echo() const {
  return json{{"subcommand", "report"},
              {"seed", common.seed},
              {"out_dir", common.out_dir},
              {"inputs", inputs},
              {"prefix", prefix}};
}

json run_report(const ReportRunConfig& cfg) {
  if (cfg.inputs.empty()) throw std::invalid_argument("report: no input files");
  // delta -> (length-or-overflow -> count); lengths keyed as strings.
  std::map<double, std::map<std::string, std::int64_t>> histograms;
  std::map<double, json> fractions;
  std::set<std::string> hist_keys;
  for (const std::string& path : cfg.inputs) {
    json doc;
    try {
      doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path + ": not valid JSON (" + std::string(e.what()) + ")");
    }
    if (!doc.contains("per_delta"))
      throw std::runtime_error(path + ": missing field per_delta");
    for (const json& pd : doc["per_delta"]) {
      if (!pd.contains("delta"))
        throw std::runtime_error(path + ": per_delta entry missing field delta");
      const double delta = pd["delta"].get<double>();
      if (pd.contains("histogram")) {
        for (const auto& [key, count] : pd["histogram"].items()) {
          histograms[delta][key] += count.get<std::int64_t>();
          hist_keys.insert(key);
        }
      }
      if (pd.contains("fractions")) fractions[delta] = pd["fractions"];
    }
  }

  std::string hist_csv = "length";
  for (const auto& [delta, _] : histograms) hist_csv += ",delta=" + std::to_string(delta);
  hist_csv += "\n";
  // Numeric keys sorted ascending, the overflow bucket last.
  std::vector<std::string> ordered;
  for (const std::string& k : hist_keys)
    if (!k.empty() && k[0] != '>') ordered.push_back(k);
  std::sort(ordered.begin(), ordered.end(), [](const std::string& a, const std::string& b) {
    return std::stoll(a) < std::stoll(b);
  });
  for (const std::string& k : hist_keys)
    if (!k.empty() && k[0] == '>') ordered.push_back(k);
  for (const std::string& key : ordered) {
    hist_csv += key;
    for (const auto& [delta, counts] : histograms) {
      auto it = counts.find(key);
      hist_csv += "," + std::to_string(it == counts.end() ? 0 : it->second);
    }
    hist_csv += "\n";
  }

  std::string frac_csv = "delta,robust,vulnerable,unknown\n";
  std::string frac_md = "| delta | robust | vulnerable | unknown |\n|---|---|---|---|\n";
  for (const auto& [delta, f] : fractions) {
    char line[160];
    std::snprintf(line, sizeof(line), "%g,%g,%g,%g\n", delta, f.at("robust").get<double>(),
                  f.at("vulnerable").get<double>(), f.at("unknown").get<double>());
    frac_csv += line;
    std::snprintf(line, sizeof(line), "| %g | %g | %g | %g |\n", delta,
                  f.at("robust").get<double>(), f.at("vulnerable").get<double>(),
                  f.at("unknown").get<double>());
    frac_md += line;
  }

  ensure_dir(cfg.common.out_dir);
  json result{{"kind", "report"}, {"inputs", cfg.inputs}};
  if (!histograms.empty()) {
    const std::string path = join_path(cfg.common.out_dir, cfg.prefix + "_histogram.csv");
    write_text_file(path, hist_csv);
    result["histogram_csv"] = path;
  }
  if (!fractions.empty()) {
    const std::string csv_path = join_path(cfg.common.out_dir, cfg.prefix + "_fractions.csv");
    const std::string md_path = join_path(cfg.common.out_dir, cfg.prefix + "_fractions.md");
    write_text_file(csv_path, frac_csv);
    write_text_file(md_path, frac_md);
    result["fractions_csv"] = csv_path;
    result["fractions_md"] = md_path;
  }
  write_result(cfg.common, "report", cfg.echo(), result);
  return result;
}

}  // namespace ols
