#include "duogesture/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "duogesture/archive.hpp"
#include "duogesture/datagen.hpp"
#include "duogesture/errors.hpp"
#include "duogesture/kinalysis.hpp"
#include "duogesture/metrics.hpp"
#include "duogesture/model.hpp"
#include "duogesture/objectives.hpp"
#include "duogesture/rvq.hpp"

namespace duogesture::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr std::uint64_t kGenerateStream = 0x6E7;
constexpr std::uint64_t kAnalyzeStream = 0xA7A;

struct ConfigFlags {
  std::string path;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.path, "Model config JSON; missing keys come from the preset")->check(CLI::ExistingFile);
  cmd->add_option("--preset", f.preset, "Base config: desk or full")->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--seed", f.seed, "Seed for every random draw of this invocation");
}

ModelConfig load_config(const ConfigFlags& f) {
  const ModelConfig base = f.preset == "full" ? ModelConfig{} : ModelConfig::desk();
  ModelConfig cfg = f.path.empty() ? base : ModelConfig::load(f.path, base);
  if (f.seed) cfg.seed = *f.seed;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
  if (!text.empty() && text.back() != '\n') os << '\n';
}

void check_clips_match(const std::vector<Clip>& clips, const ModelConfig& cfg) {
  if (clips.empty()) throw DataError("dataset holds no clips");
  for (const Clip& c : clips) {
    if (c.motion.joints != cfg.joints || c.motion.length != cfg.clip_length) {
      throw DataError("clip shape " + std::to_string(c.motion.length) + " x " + std::to_string(c.motion.joints) +
                      " does not match config " + std::to_string(cfg.clip_length) + " x " +
                      std::to_string(cfg.joints));
    }
  }
}

std::vector<MotionSequence> motions_of(const std::vector<Clip>& clips) {
  std::vector<MotionSequence> out;
  out.reserve(clips.size());
  for (const Clip& c : clips) out.push_back(c.motion);
  return out;
}

json matrix_json(const ag::Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
  }
  return rows;
}

NdArray f64_array(const ag::Matrix& m) {
  return NdArray::from_f64({static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
                           std::vector<double>(m.data(), m.data() + m.size()));
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> clips;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthSpec spec = a.spec.empty() ? SynthSpec::matching(ModelConfig::desk()) : SynthSpec::load(a.spec);
  if (a.seed) spec.rng_seed = *a.seed;
  if (a.clips) spec.n_clips = *a.clips;
  spec.validate();
  write_dataset(spec, a.out);
  const auto clips = read_dataset(a.out);
  json r;
  r["command"] = "synth";
  r["out"] = a.out;
  r["clips"] = clips.size();
  r["semantic_fraction"] = semantic_frame_fraction(clips);
  r["seed"] = spec.rng_seed;
  out << r.dump(2) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- pretrain-codec

struct PretrainArgs {
  std::string data;
  std::string out;
  ConfigFlags config;
  std::optional<int> steps;
};

int cmd_pretrain(const PretrainArgs& a, std::ostream& out) {
  ModelConfig cfg = load_config(a.config);
  if (a.steps) cfg.codec_steps = *a.steps;
  cfg.validate();
  const auto clips = read_dataset(a.data);
  check_clips_match(clips, cfg);
  const auto motions = motions_of(clips);
  spdlog::info("pretraining codecs on {} clips for {} steps", motions.size(), cfg.codec_steps);
  CodecTrainLog log;
  const CodecSet codecs = pretrain_codec(motions, cfg, &log);
  codecs.save(a.out, cfg);

  json r;
  r["format"] = "duogesture-codec-log";
  r["config_hash"] = cfg.hash();
  r["seed"] = cfg.seed;
  r["initial_recon_mse"] = log.initial_recon_mse;
  r["final_recon_mse"] = log.final_recon_mse;
  json levels = json::array();
  for (int l = 1; l <= cfg.rvq_levels; ++l) levels.push_back(codec_reconstruction_mse(codecs, motions, l));
  r["recon_mse_by_levels"] = levels;
  r["recon_mse"] = log.recon_mse;
  r["commitment"] = log.commitment;
  write_text(fs::path(a.out) / "codec_log.json", r.dump(2));
  json summary = r;
  summary.erase("recon_mse");
  summary.erase("commitment");
  summary["command"] = "pretrain-codec";
  summary["codec_hash"] = codecs.hash();
  out << summary.dump(2) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string codecs;
  std::string out;
  ConfigFlags config;
  std::optional<int> epochs;
  std::optional<double> beta_phys;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  ModelConfig cfg = load_config(a.config);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.beta_phys) cfg.beta_phys_target = *a.beta_phys;
  cfg.validate();
  auto clips = read_dataset(a.data);
  check_clips_match(clips, cfg);
  DuoGestureModel model(cfg, CodecSet::load(a.codecs, cfg));
  Trainer trainer(model, std::move(clips));
  const auto logs = trainer.fit([](const EpochLog& e) {
    spdlog::info("epoch {} lr {:.2e} total {:.5f} lat {:.5f} cls {:.4f} sem {:.4f} kl {:.4f} acc {:.3e}", e.epoch,
                 e.lr, e.mean.total, e.mean.l_lat, e.mean.l_cls, e.mean.l_sem, e.mean.l_kl, e.mean.l_acc);
  });
  model.save(a.out);
  write_text(fs::path(a.out) / "run_log.json", run_log_json(cfg, logs));
  json r;
  r["command"] = "train";
  r["out"] = a.out;
  r["config_hash"] = cfg.hash();
  r["seed"] = cfg.seed;
  r["epochs"] = logs.size();
  r["parameter_hash"] = model.params().hash();
  r["final"] = json::parse(logs.back().mean.to_json());
  out << r.dump(2) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string ckpt;
  std::string clip;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const DuoGestureModel model = DuoGestureModel::load(a.ckpt);
  const ModelConfig& cfg = model.config();
  const Clip input = read_archive(a.clip);
  Rng rng(a.seed.value_or(cfg.seed), kGenerateStream);
  const Generation g = model.generate(input.features, &rng);

  Clip result;
  result.motion = g.motion;
  result.motion.emotion_id = input.motion.emotion_id;
  result.motion.word_spans = input.motion.word_spans;
  result.features = input.features;
  result.audio_onsets = input.audio_onsets;
  write_archive(result, a.out);

  NamedArrays trace;
  trace.format = "duogesture-gate-trace";
  json meta;
  meta["config_hash"] = cfg.hash();
  meta["seed"] = a.seed.value_or(cfg.seed);
  meta["source_clip"] = fs::path(a.clip).filename().string();
  trace.metadata_json = meta.dump();
  trace.arrays.emplace_back("psi", NdArray::from_f64({static_cast<std::uint32_t>(g.gate.psi.size())}, g.gate.psi));
  trace.arrays.emplace_back("mu", f64_array(g.gate.mu));
  trace.arrays.emplace_back("logvar", f64_array(g.gate.logvar));
  trace.arrays.emplace_back("eps", f64_array(g.gate.eps));
  trace.arrays.emplace_back("z", f64_array(g.gate.z));
  trace.arrays.emplace_back("timing", f64_array(g.gate.timing));
  for (Region r : kAllRegions) {
    const TokenGrid& grid = g.latents.tokens[static_cast<std::size_t>(r)];
    trace.arrays.emplace_back(
        "tokens_" + std::string(region_name(r)),
        NdArray::from_i32({static_cast<std::uint32_t>(grid.rows), static_cast<std::uint32_t>(grid.levels)}, grid.tokens));
  }
  write_named_arrays(trace, fs::path(a.out) / "gate_trace");

  double psi_mean = 0.0;
  for (double p : g.gate.psi) psi_mean += p;
  psi_mean /= static_cast<double>(g.gate.psi.size());
  json r;
  r["command"] = "generate";
  r["out"] = a.out;
  r["config_hash"] = cfg.hash();
  r["psi_mean"] = psi_mean;
  r["semantic_frames"] = std::count(result.motion.semantic_flags.begin(), result.motion.semantic_flags.end(), 1);
  out << r.dump(2) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- gate-dump

struct GateDumpArgs {
  std::string ckpt;
  std::string data;
  std::string out;
};

int cmd_gate_dump(const GateDumpArgs& a, std::ostream& out) {
  const DuoGestureModel model = DuoGestureModel::load(a.ckpt);
  const auto dirs = list_clip_dirs(a.data);
  json clips = json::array();
  std::vector<double> all_psi;
  std::vector<int> all_flags;
  for (const auto& dir : dirs) {
    const Clip clip = read_archive(dir);
    ag::NoGradGuard guard;
    const GateTrace trace = model.forward(clip.features, nullptr).gate.trace();
    json c;
    c["clip"] = dir.filename().string();
    c["psi"] = trace.psi;
    c["semantic_flags"] = clip.motion.semantic_flags;
    c["sigma2"] = trace.sigma2();
    clips.push_back(c);
    all_psi.insert(all_psi.end(), trace.psi.begin(), trace.psi.end());
    all_flags.insert(all_flags.end(), clip.motion.semantic_flags.begin(), clip.motion.semantic_flags.end());
  }
  json summary;
  summary["frames"] = all_psi.size();
  summary["psi_std"] = stddev(all_psi);
  const bool both = std::count(all_flags.begin(), all_flags.end(), 1) > 0 &&
                    std::count(all_flags.begin(), all_flags.end(), 0) > 0;
  summary["auc"] = both ? json(roc_auc(all_psi, all_flags)) : json(nullptr);
  json doc;
  doc["format"] = "duogesture-gate-dump";
  doc["config_hash"] = model.config().hash();
  doc["summary"] = summary;
  doc["clips"] = clips;
  write_text(a.out, doc.dump(2));
  json r;
  r["command"] = "gate-dump";
  r["out"] = a.out;
  r["summary"] = summary;
  out << r.dump(2) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string data;
  std::string out;
  std::string psd_table;
  std::uint64_t seed = 0;
  int replicates = 2000;
  int min_window = 15;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  if (a.replicates < 1) throw ConfigError("--replicates must be positive");
  if (a.min_window < 3) throw ConfigError("--min-window must be at least 3");
  const auto clips = read_dataset(a.data);
  AnalysisOptions opts;
  opts.bootstrap_replicates = a.replicates;
  opts.min_window = a.min_window;
  const DatasetReport report = analyze_dataset(clips, opts, Rng(a.seed, kAnalyzeStream));
  json doc = json::parse(report.to_json());
  doc["format"] = "duogesture-analysis";
  doc["seed"] = a.seed;
  doc["clips"] = clips.size();
  if (!a.psd_table.empty()) {
    std::string csv = "freq_hz,beat,semantic\n";
    for (const auto& row : doc["normalised_psd_table"]["rows"]) {
      csv += std::to_string(row[0].get<double>()) + "," + std::to_string(row[1].get<double>()) + "," +
             std::to_string(row[2].get<double>()) + "\n";
    }
    write_text(a.psd_table, csv);
  }
  if (a.out.empty()) {
    out << doc.dump(2) << '\n';
  } else {
    write_text(a.out, doc.dump(2));
    json r;
    r["command"] = "analyze";
    r["out"] = a.out;
    r["matched"] = doc["matched"];
    r["windows"] = doc["windows"];
    r["peak_hz"] = doc["statistics"]["peak_hz"];
    out << r.dump(2) << '\n';
  }
  return kSuccess;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string real;
  std::string generated;
  std::string out;
  std::uint64_t seed = 0;
  int featureizer_steps = 400;
  double sigma = 0.1;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  if (!(a.sigma > 0)) throw ConfigError("--ba-sigma must be positive");
  if (a.featureizer_steps < 1) throw ConfigError("--featureizer-steps must be positive");
  const auto real = motions_of(read_dataset(a.real));
  const auto gen_clips = read_dataset(a.generated);
  const auto gen = motions_of(gen_clips);
  const int joints = real.front().joints;
  for (const auto& m : gen) {
    if (m.joints != joints) throw DataError("real and generated motions differ in joint count");
  }

  FeatureizerOptions fo;
  fo.seed = a.seed;
  fo.steps = a.featureizer_steps;
  json options;
  options["featureizer"] = {{"chunk", fo.chunk}, {"hidden", fo.hidden}, {"feature_dim", fo.feature_dim},
                            {"steps", fo.steps}, {"lr", fo.lr}, {"seed", fo.seed}};
  options["ba_sigma_s"] = a.sigma;
  const std::string options_text = options.dump();
  const std::uint64_t config_hash = fnv1a64(options_text.data(), options_text.size());

  MotionFeatureizer featureizer(joints, fo);
  featureizer.fit(real);
  const Eigen::MatrixXd fr = featureizer.features(real);
  const Eigen::MatrixXd fg = featureizer.features(gen);
  if (frechet_rank_warning(fr, fg)) spdlog::warn("fewer feature rows than dimensions + 1; covariance is singular");

  json records = json::array();
  auto record = [&](const char* name, json value) {
    records.push_back({{"metric", name}, {"value", value}, {"config_hash", config_hash}});
  };
  record("frechet", frechet(fr, fg));
  record("diversity_l1", gen.size() >= 2 ? json(diversity_l1(gen)) : json(nullptr));
  double ba = 0.0;
  int ba_clips = 0;
  for (const Clip& c : gen_clips) {
    if (c.audio_onsets.empty()) continue;
    ba += beat_alignment(c.audio_onsets, c.motion, a.sigma);
    ++ba_clips;
  }
  record("beat_alignment", ba_clips > 0 ? json(ba / ba_clips) : json(nullptr));

  json doc;
  doc["format"] = "duogesture-metrics";
  doc["options"] = options;
  doc["records"] = records;
  if (a.out.empty()) {
    out << doc.dump(2) << '\n';
  } else {
    write_text(a.out, doc.dump(2));
    out << records.dump(2) << '\n';
  }
  return kSuccess;
}

class LoggerScope {
 public:
  explicit LoggerScope(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("duogesture", sink);
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  }
  ~LoggerScope() { spdlog::set_default_logger(previous_); }
  LoggerScope(const LoggerScope&) = delete;
  LoggerScope& operator=(const LoggerScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  LoggerScope logger(err);
  CLI::App app{"Dual-stream co-speech gesture generator", "duogesture"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic dataset");
  c_synth->add_option("--spec", synth.spec, "SynthSpec JSON")->check(CLI::ExistingFile);
  c_synth->add_option("--out", synth.out, "Output dataset directory")->required();
  c_synth->add_option("--seed", synth.seed, "Overrides rng_seed");
  c_synth->add_option("--clips", synth.clips, "Overrides n_clips");

  PretrainArgs pretrain;
  auto* c_pretrain = app.add_subcommand("pretrain-codec", "Train and freeze the regional codecs");
  c_pretrain->add_option("--data", pretrain.data, "Dataset directory")->required();
  c_pretrain->add_option("--out", pretrain.out, "Codec checkpoint directory")->required();
  c_pretrain->add_option("--steps", pretrain.steps, "Overrides codec_steps");
  add_config_flags(c_pretrain, pretrain.config);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Stage-2 training over frozen codecs");
  c_train->add_option("--data", train.data, "Dataset directory")->required();
  c_train->add_option("--codecs", train.codecs, "Codec checkpoint directory")->required();
  c_train->add_option("--out", train.out, "Model checkpoint directory")->required();
  c_train->add_option("--epochs", train.epochs, "Overrides epochs");
  c_train->add_option("--beta-phys", train.beta_phys, "Overrides beta_phys_target");
  add_config_flags(c_train, train.config);

  GenerateArgs generate;
  auto* c_generate = app.add_subcommand("generate", "Generate motion for one clip");
  c_generate->add_option("--ckpt", generate.ckpt, "Model checkpoint directory")->required();
  c_generate->add_option("--clip", generate.clip, "Input clip archive")->required();
  c_generate->add_option("--out", generate.out, "Output clip archive")->required();
  c_generate->add_option("--seed", generate.seed, "Gate sampling seed (used with stochastic_eval)");

  GateDumpArgs gate_dump;
  auto* c_gate = app.add_subcommand("gate-dump", "Per-frame gate values next to semantic flags");
  c_gate->add_option("--ckpt", gate_dump.ckpt, "Model checkpoint directory")->required();
  c_gate->add_option("--data", gate_dump.data, "Dataset directory or clip archive")->required();
  c_gate->add_option("--out", gate_dump.out, "Output JSON file")->required();

  AnalyzeArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze", "Kinematic beat/semantic analysis");
  c_analyze->add_option("--data", analyze.data, "Dataset directory")->required();
  c_analyze->add_option("--out", analyze.out, "Report JSON file (stdout when omitted)");
  c_analyze->add_option("--psd-table", analyze.psd_table, "CSV of normalised mean PSD per class");
  c_analyze->add_option("--seed", analyze.seed, "Sampling and bootstrap seed");
  c_analyze->add_option("--replicates", analyze.replicates, "Bootstrap replicates");
  c_analyze->add_option("--min-window", analyze.min_window, "Minimum window length in frames");

  MetricsArgs metrics;
  auto* c_metrics = app.add_subcommand("metrics", "Frechet distance, diversity and beat alignment");
  c_metrics->add_option("--real", metrics.real, "Reference dataset directory")->required();
  c_metrics->add_option("--generated", metrics.generated, "Generated clips directory")->required();
  c_metrics->add_option("--out", metrics.out, "Output JSON file (stdout when omitted)");
  c_metrics->add_option("--seed", metrics.seed, "Featureizer seed");
  c_metrics->add_option("--featureizer-steps", metrics.featureizer_steps, "Featureizer training steps");
  c_metrics->add_option("--ba-sigma", metrics.sigma, "Beat-alignment kernel width in seconds");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsageOrConfig;
  }

  try {
    if (c_synth->parsed()) return cmd_synth(synth, out);
    if (c_pretrain->parsed()) return cmd_pretrain(pretrain, out);
    if (c_train->parsed()) return cmd_train(train, out);
    if (c_generate->parsed()) return cmd_generate(generate, out);
    if (c_gate->parsed()) return cmd_gate_dump(gate_dump, out);
    if (c_analyze->parsed()) return cmd_analyze(analyze, out);
    if (c_metrics->parsed()) return cmd_metrics(metrics, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsageOrConfig;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace duogesture::cli
