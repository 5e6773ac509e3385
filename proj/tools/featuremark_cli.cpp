// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

// featuremark: calibrate, embed, detect, bench, attack, bound.
//
// Exit codes: 0 success, 2 detect rejected every key, 1 runtime error,
// 64 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "featuremark/featuremark.hpp"
#include "featuremark/remote_extractor.hpp"
#include "featuremark/remote_generator.hpp"

namespace fm = featuremark;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitReject = 2;
constexpr int kExitUsage = 64;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_all(std::istream& in) {
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_input(const std::string& path) {
  if (path.empty() || path == "-") return read_all(std::cin);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fm::Error(fm::Errc::io_error, "cannot open " + path);
  return read_all(in);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw fm::Error(fm::Errc::io_error, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

// Where the feature extractor comes from.
struct ExtractorOptions {
  std::string url;
  std::string id;
  std::uint32_t dim = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--extractor-url", url, "HTTP extractor base URL (default: built-in)");
    cmd->add_option("--extractor-id", id, "Model id served by --extractor-url");
    cmd->add_option("--extractor-dim", dim, "Feature width served by --extractor-url");
  }

  std::unique_ptr<fm::FeatureExtractor> make() const {
    if (url.empty()) return std::make_unique<fm::BuiltinExtractor>();
    if (id.empty() || dim == 0) throw UsageError("--extractor-url needs --extractor-id and --extractor-dim");
    return std::make_unique<fm::HttpExtractor>(url, id, dim);
  }
};

// Where the watermark keys come from.
struct KeyOptions {
  std::string registry;
  std::string secret_hex;
  std::size_t bits = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--keys", registry, "Key registry JSON");
    cmd->add_option("--secret", secret_hex, "Secret as 32 hex digits (instead of --keys)");
    cmd->add_option("--bits", bits, "Message width when using --secret");
  }

  fm::KeyRegistry load() const {
    if (!registry.empty()) {
      if (!secret_hex.empty()) throw UsageError("use either --keys or --secret, not both");
      return fm::KeyRegistry::load(registry);
    }
    if (secret_hex.empty()) throw UsageError("one of --keys or --secret is required");
    fm::KeyRegistry r;
    r.secret = fm::Secret::from_hex(secret_hex);
    r.bits = bits;
    if (r.bits == 0) throw UsageError("--secret needs --bits");
    return r;
  }
};

struct GeneratorOptions {
  std::string kind = "simulated";
  std::string api_base;
  std::string model = "default";

  void add(CLI::App* cmd) {
    cmd->add_option("--generator", kind, "simulated | remote")
        ->check(CLI::IsMember({"simulated", "remote"}));
    cmd->add_option("--api-base", api_base, "Chat-completions base URL (env FEATUREMARK_API_BASE)");
    cmd->add_option("--api-model", model, "Model name sent to the remote generator");
  }

  std::shared_ptr<fm::GeneratorAdapter> make() const {
    if (kind == "simulated") return std::make_shared<fm::SimulatedGenerator>();
    auto c = fm::RemoteGeneratorConfig::from_env();
    if (!api_base.empty()) c.api_base = api_base;
    c.model = model;
    return std::make_shared<fm::RemoteGenerator>(c);
  }
};

fm::DomainKind parse_domain(const std::string& s) {
  return s == "code" ? fm::DomainKind::code : fm::DomainKind::natural_language;
}

// calibrate ---------------------------------------------------------------

struct CalibrateCmd {
  std::string out;
  std::string corpus;
  std::size_t units = 2000;
  std::uint64_t seed = 1;
  double df_threshold = fm::kDefaultDfThreshold;
  std::string domain = "text";
  ExtractorOptions extractor;

  int run() const {
    const auto ex = extractor.make();
    const auto kind = parse_domain(domain);
    std::vector<fm::Unit> calibration;
    if (!corpus.empty()) {
      for (const auto& rec : fm::read_jsonl_corpus(corpus)) {
        if (rec.reference.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        for (auto& u : fm::segment_text(rec.reference, kind, fm::kPipelineSegmentation)) {
          calibration.push_back(std::move(u));
        }
      }
    } else {
      fm::SimulatedGenerator gen;
      calibration = fm::simulated_units(gen, units, fm::hash_combine(seed, fm::kCalibrationSalt));
    }
    const auto model = fm::fit(calibration, *ex, {df_threshold, ""});
    fm::save(model, out);
    std::cout << "calibrated " << model.sorted_samples.size() << " units; mu=" << model.mu
              << " sigma=" << model.sigma << " masked=" << model.mask.excluded().size() << '\n';
    return kExitOk;
  }
};

// embed -------------------------------------------------------------------

struct EmbedCmd {
  std::string model_path;
  std::string message;
  std::string prompt_file;
  std::string audit_path;
  std::string domain = "text";
  fm::EmbedParams params;
  KeyOptions keys;
  ExtractorOptions extractor;
  GeneratorOptions generator;

  int run() const {
    const auto registry = keys.load();
    const auto ex = extractor.make();
    const auto model = fm::load_calibration(model_path);
    const fm::Pipeline pipeline(*ex, model, parse_domain(domain));
    const auto msg = fm::Message::parse(message);
    if (msg.size() != registry.bits) {
      throw UsageError("message has " + std::to_string(msg.size()) + " bits, keys expect " +
                       std::to_string(registry.bits));
    }
    const auto key = fm::message_to_key(msg, registry.secret);
    const std::string prompt = read_input(prompt_file);
    auto gen = generator.make();
    const auto result = fm::embed(prompt, key, *gen, pipeline, params);
    std::cout << result.text << '\n';
    if (!audit_path.empty()) {
      nlohmann::json units = nlohmann::json::array();
      for (const auto& u : result.per_unit) {
        units.push_back({{"target", u.target},
                         {"achieved", u.achieved},
                         {"residual", u.residual},
                         {"candidates_seen", u.candidates_seen},
                         {"chosen_index", u.chosen_index}});
      }
      write_json(audit_path, {{"message", msg.to_string()},
                              {"aligned", result.aligned},
                              {"attempts_used", result.attempts_used},
                              {"units", units},
                              {"generator_seconds", result.timing.generator_seconds},
                              {"pipeline_seconds", result.timing.pipeline_seconds},
                              {"generator_calls", result.timing.generator_calls}});
    }
    if (!result.aligned) std::cerr << "warning: no attempt passed alignment\n";
    return kExitOk;
  }
};

// detect ------------------------------------------------------------------

struct DetectCmd {
  std::string model_path;
  std::string input;
  std::string domain = "text";
  double alpha = 0.01;
  bool bonferroni = false;
  bool verbose = false;
  fm::AlignmentThresholds thresholds;
  KeyOptions keys;
  ExtractorOptions extractor;

  int run() const {
    const auto registry = keys.load();
    const auto ex = extractor.make();
    const auto model = fm::load_calibration(model_path);
    const fm::Pipeline pipeline(*ex, model, parse_domain(domain));
    const auto all = registry.keys();
    const std::string text = read_input(input);
    fm::DetectOptions options{thresholds, alpha,
                              bonferroni ? fm::Correction::bonferroni : fm::Correction::none};
    const auto report = fm::detect(text, all, pipeline, options);
    std::cout << (report.decision ? report.decision->to_string() : std::string("REJECT")) << '\n';
    if (verbose) {
      std::cout << "units " << report.z.size() << " alpha " << report.alpha << " effective_alpha "
                << report.effective_alpha << '\n';
      std::cout << "message,aligned,status,t,p\n";
      for (const auto& s : report.per_key) {
        const char* status = s.status == fm::KeyStatus::accepted          ? "accepted"
                             : s.status == fm::KeyStatus::not_significant ? "not_significant"
                                                                          : "alignment_rejected";
        std::cout << s.key.message.to_string() << ',' << (s.alignment_passed ? 1 : 0) << ','
                  << status << ',';
        if (s.t) std::cout << *s.t;
        std::cout << ',';
        if (s.p) std::cout << *s.p;
        std::cout << '\n';
      }
    }
    return report.rejected() ? kExitReject : kExitOk;
  }
};

// bench / attack -----------------------------------------------------------

nlohmann::json report_summary(const fm::MetricsReport& r) { return fm::to_json(r); }

struct BenchCmd {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  GeneratorOptions generator;

  fm::EvalConfig config() const {
    auto c = config_path.empty() ? fm::EvalConfig{} : fm::load_eval_config(config_path);
    if (trials) c.trials = *trials;
    if (seed) c.master_seed = *seed;
    if (threads) c.threads = *threads;
    c.validate();
    return c;
  }

  int run() const {
    const auto c = config();
    fs::create_directories(out_dir);
    const auto env = fm::make_environment(c, generator.make());
    const auto report = fm::evaluate_detection(c, env);
    fm::write_roc_csv(fs::path(out_dir) / "roc.csv", report.roc);
    write_json(fs::path(out_dir) / "metrics.json", report_summary(report));
    std::cout << std::setprecision(6) << "accuracy " << report.accuracy << " recall "
              << report.recall << " f1 " << report.f1 << " fpr " << report.fpr << " auc "
              << report.auc << " exact " << report.exact_message_accuracy << '\n';
    return kExitOk;
  }
};

std::string cell_name(const fm::AttackSpec& s, std::size_t i) {
  std::ostringstream name;
  name << i << '_' << fm::to_string(s.kind) << '_' << s.intensity
       << (s.keep_structure ? "_keep" : "_free");
  return name.str();
}

struct AttackCmd {
  BenchCmd bench;

  int run() const {
    const auto c = bench.config();
    fs::create_directories(bench.out_dir);
    const auto env = fm::make_environment(c, bench.generator.make());
    const auto cells = fm::run_attack_eval(c, env);
    nlohmann::json all = nlohmann::json::array();
    std::cout << "cell,auc,f1\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto name = cell_name(cells[i].spec, i);
      fm::write_roc_csv(fs::path(bench.out_dir) / ("roc_" + name + ".csv"), cells[i].report.roc);
      auto j = report_summary(cells[i].report);
      j["attack"] = {{"kind", fm::to_string(cells[i].spec.kind)},
                     {"intensity", cells[i].spec.intensity},
                     {"keep_structure", cells[i].spec.keep_structure}};
      all.push_back(j);
      std::cout << name << ',' << cells[i].report.auc << ',' << cells[i].report.f1 << '\n';
    }
    write_json(fs::path(bench.out_dir) / "attacks.json", all);
    return kExitOk;
  }
};

// bound -------------------------------------------------------------------

struct BoundCmd {
  fm::theory::BoundInputs in;
  std::vector<std::uint64_t> ns = {5, 10, 20, 50};

  int run() const {
    const double p = fm::theory::p_min(in.eps_tol, in.mu, in.sigma);
    std::cout << std::fixed << std::setprecision(6) << "p_min " << p << '\n';
    std::cout << "N,success\n";
    for (const auto& row : fm::theory::bound_table(in, ns)) {
      std::cout << row.n << ',' << std::setprecision(3) << row.success << std::setprecision(6) << '\n';
    }
    return kExitOk;
  }
};

void add_thresholds(CLI::App* cmd, fm::AlignmentThresholds& th) {
  cmd->add_option("--r-min", th.r_min, "Lower range-ratio bound");
  cmd->add_option("--r-max", th.r_max, "Upper range-ratio bound");
  cmd->add_option("--o-min", th.o_min, "Minimum target overlap share");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-bit text watermarking by feature-guided best-of-N selection"};
  app.require_subcommand(1);

  CalibrateCmd calibrate;
  auto* cal = app.add_subcommand("calibrate", "Fit the background mask and the statistic's distribution");
  cal->add_option("--out,-o", calibrate.out, "Calibration model output path")->required();
  cal->add_option("--corpus", calibrate.corpus, "JSONL corpus whose references are calibrated on");
  cal->add_option("--units", calibrate.units, "Simulated calibration units");
  cal->add_option("--seed", calibrate.seed, "Master seed for the simulated corpus");
  cal->add_option("--df-threshold", calibrate.df_threshold, "Mask features active in more than this share of units");
  cal->add_option("--domain", calibrate.domain, "text | code")->check(CLI::IsMember({"text", "code"}));
  calibrate.extractor.add(cal);

  EmbedCmd embed;
  auto* emb = app.add_subcommand("embed", "Generate watermarked text carrying a message");
  emb->add_option("--model", embed.model_path, "Calibration model")->required();
  emb->add_option("--message", embed.message, "Message bits, e.g. 1011")->required();
  emb->add_option("--prompt-file", embed.prompt_file, "Prompt path (default: stdin)");
  emb->add_option("--audit", embed.audit_path, "Write per-unit targets and residuals as JSON");
  emb->add_option("-N,--candidates", embed.params.n_candidates, "Candidates per unit");
  emb->add_option("-M,--units", embed.params.units, "Units per text");
  emb->add_option("-K,--attempts", embed.params.attempts, "Whole-text attempts");
  emb->add_option("--temperature", embed.params.temperature, "Sampling temperature");
  emb->add_option("--max-new-tokens", embed.params.max_new_tokens, "Token cap per candidate");
  emb->add_option("--seed", embed.params.seed, "Generation seed");
  emb->add_option("--domain", embed.domain, "text | code")->check(CLI::IsMember({"text", "code"}));
  add_thresholds(emb, embed.params.thresholds);
  embed.keys.add(emb);
  embed.extractor.add(emb);
  embed.generator.add(emb);

  DetectCmd detect;
  auto* det = app.add_subcommand("detect", "Decode the message of a text or REJECT");
  det->add_option("--model", detect.model_path, "Calibration model")->required();
  det->add_option("--input,-i", detect.input, "Text path (default: stdin)");
  det->add_option("--alpha", detect.alpha, "Significance level");
  det->add_flag("--bonferroni", detect.bonferroni, "Divide alpha by the number of keys");
  det->add_flag("--verbose,-v", detect.verbose, "Print per-key scores");
  det->add_option("--domain", detect.domain, "text | code")->check(CLI::IsMember({"text", "code"}));
  add_thresholds(det, detect.thresholds);
  detect.keys.add(det);
  detect.extractor.add(det);

  BenchCmd bench;
  auto* ben = app.add_subcommand("bench", "Evaluate detection over simulated or corpus trials");
  auto add_bench = [](CLI::App* cmd, BenchCmd& b) {
    cmd->add_option("--config,-c", b.config_path, "Evaluation config JSON");
    cmd->add_option("--out-dir", b.out_dir, "Directory for CSV and JSON artifacts");
    cmd->add_option("--trials", b.trials, "Override trials");
    cmd->add_option("--seed", b.seed, "Override master seed");
    cmd->add_option("--threads", b.threads, "Worker threads (0 = all cores)");
    b.generator.add(cmd);
  };
  add_bench(ben, bench);

  AttackCmd attack;
  auto* att = app.add_subcommand("attack", "Evaluate detection under the configured attacks");
  add_bench(att, attack.bench);

  BoundCmd bound;
  auto* bnd = app.add_subcommand("bound", "Lower bound on per-unit success versus N");
  bnd->add_option("--mu", bound.in.mu, "Mean of the statistic");
  bnd->add_option("--sigma", bound.in.sigma, "Standard deviation of the statistic");
  bnd->add_option("--tol", bound.in.eps_tol, "Relative tolerance");
  bnd->add_option("--n", bound.ns, "Candidate counts")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*cal) return calibrate.run();
    if (*emb) return embed.run();
    if (*det) return detect.run();
    if (*ben) return bench.run();
    if (*att) return attack.run();
    if (*bnd) return bound.run();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const fm::Error& e) {
    std::cerr << "error [" << fm::to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}
