#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "merc/checkpoint.hpp"
#include "merc/config.hpp"
#include "merc/data.hpp"
#include "merc/error.hpp"
#include "merc/trainer.hpp"

namespace {

using namespace merc;

// Metrics go to --metrics when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw Error("cannot write metrics file '" + path + "'");
    }
  }
  void line(const std::string& s) {
    std::ostream& os = file_ ? *file_ : std::cout;
    os << s << '\n';
    os.flush();
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

Config load_config(const std::string& path) { return path.empty() ? Config{} : Config::load(path); }

Dataset dataset_for(const Config& cfg, const std::string& data_path) {
  return data_path.empty() ? synth_generate(synth_spec(cfg)) : load_dataset(data_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal emotion recognition in conversations"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string train_config, train_data, train_out, train_metrics;
  bool train_synth = false;
  train_cmd->add_option("--config", train_config, "Config file (key=value)")->check(CLI::ExistingFile);
  auto* synth_flag = train_cmd->add_flag("--synth", train_synth, "Train on generated data");
  auto* data_opt = train_cmd->add_option("--data", train_data, "Dataset file")->check(CLI::ExistingFile);
  synth_flag->excludes(data_opt);
  train_cmd->add_option("--out", train_out, "Checkpoint output path")->required();
  train_cmd->add_option("--metrics", train_metrics, "JSON-lines metrics file (default stdout)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data, eval_metrics;
  std::size_t eval_threads = 0;
  eval_cmd->add_option("--ckpt", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_data)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--threads", eval_threads, "Worker threads (0 = all cores)");
  eval_cmd->add_option("--metrics", eval_metrics, "JSON-lines metrics file (default stdout)");

  // gradcheck
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  std::string gc_config, gc_data;
  double gc_tol = 1e-5;
  GradCheckOptions gc_opts;
  std::size_t gc_convs = 2;
  gc_cmd->add_option("--config", gc_config)->check(CLI::ExistingFile);
  gc_cmd->add_option("--tolerance", gc_tol, "Maximum allowed relative error");
  gc_cmd->add_option("--data", gc_data, "Dataset file (default: generated)")->check(CLI::ExistingFile);
  gc_cmd->add_option("--conversations", gc_convs, "Generated conversations when no --data");
  gc_cmd->add_option("--samples", gc_opts.samples, "Parameters sampled");
  gc_cmd->add_option("--step", gc_opts.step, "Central-difference step");
  gc_cmd->add_option("--seed", gc_opts.seed, "Sampling seed");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a generated dataset");
  std::string synth_out, synth_config;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--out", synth_out)->required();
  synth_cmd->add_option("--seed", synth_seed)->required();
  synth_cmd->add_option("--config", synth_config, "Takes synth_* keys from this config")
      ->check(CLI::ExistingFile);

  // ablate
  auto* ab_cmd = app.add_subcommand("ablate", "Train the full model and ablated variants");
  std::vector<std::string> ab_flags;
  std::string ab_config, ab_data, ab_metrics;
  double ab_frac = 0.75;
  std::uint64_t ab_split_seed = 0;
  ab_cmd->add_option("--flag", ab_flags,
                     "Variant to train (flag name or comma-separated set); default: each single flag");
  ab_cmd->add_option("--config", ab_config)->check(CLI::ExistingFile);
  ab_cmd->add_option("--data", ab_data)->check(CLI::ExistingFile);
  ab_cmd->add_option("--train-frac", ab_frac, "Fraction of conversations used for training");
  ab_cmd->add_option("--split-seed", ab_split_seed);
  ab_cmd->add_option("--metrics", ab_metrics, "JSON-lines metrics file (default stdout)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*train_cmd) {
      const Config cfg = load_config(train_config);
      const Dataset data = dataset_for(cfg, train_data);
      Sink sink(train_metrics);
      TrainResult r = train(cfg, data, [&](const StepRecord& s) { sink.line(to_json_line(s)); });
      r.checkpoint.save(train_out);
      sink.line(to_json_line("train", r.checkpoint.step, evaluate(r.checkpoint, data)));
      if (r.diverged) {
        std::cerr << "error: training diverged (" << r.divergence
                  << "); wrote last finite checkpoint\n";
        return 2;
      }
    } else if (*eval_cmd) {
      const Checkpoint ckpt = Checkpoint::load(eval_ckpt);
      Sink sink(eval_metrics);
      sink.line(to_json_line("eval", ckpt.step, evaluate(ckpt, load_dataset(eval_data), eval_threads)));
    } else if (*gc_cmd) {
      Config cfg = load_config(gc_config);
      cfg.synth_conversations = gc_convs;
      const Dataset data = dataset_for(cfg, gc_data);
      const GradCheckReport rep = gradient_check(cfg, data, gc_opts);
      const bool ok = rep.max_rel_error < gc_tol;
      std::printf(
          "{\"type\":\"gradcheck\",\"checked\":%zu,\"max_rel_error\":%.6e,\"worst_param\":\"%s\","
          "\"worst_index\":%zu,\"analytic\":%.17g,\"numeric\":%.17g,\"tolerance\":%g,\"pass\":%s}\n",
          rep.checked, rep.max_rel_error, rep.worst_param.c_str(), rep.worst_index,
          rep.worst_analytic, rep.worst_numeric, gc_tol, ok ? "true" : "false");
      return ok ? 0 : 1;
    } else if (*synth_cmd) {
      Config cfg = load_config(synth_config);
      cfg.seed = synth_seed;
      write_dataset(synth_generate(synth_spec(cfg)), synth_out);
    } else if (*ab_cmd) {
      const Config cfg = load_config(ab_config);
      const Dataset data = dataset_for(cfg, ab_data);
      std::vector<AblationFlags> variants;
      if (ab_flags.empty()) ab_flags = {"disable_decoupler", "disable_shared_branch",
                                        "disable_private_branch", "disable_transformer_fusion"};
      for (const auto& f : ab_flags) variants.push_back(parse_ablation_flags(f));
      Sink sink(ab_metrics);
      for (const auto& o : run_ablations(cfg, data, variants, ab_frac, ab_split_seed))
        sink.line(to_json_line(o));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
