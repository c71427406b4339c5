#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "relstab/corruption.hpp"
#include "relstab/datagen.hpp"
#include "relstab/explainers.hpp"
#include "relstab/model.hpp"
#include "relstab/rssa.hpp"

namespace relstab {

inline constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Everything a command needs. Filled from defaults, then an optional
// key=value file, then command-line flags (later sources win).
struct ExperimentConfig {
  std::filesystem::path corpus = "corpus";
  std::filesystem::path checkpoint;  // train defaults to <out>/model.rlb
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;
  std::size_t jobs = 0;  // 0: one worker per hardware thread

  SyntheticSpec spec;
  TrainConfig train;
  double split_ratio = 0.8;

  // Noise kinds plus, optionally, "didactic".
  std::vector<std::string> kinds{"gaussian", "rician", "chisq"};
  std::vector<double> lambdas{0.0, 0.05, 0.10, 0.15, 0.20};
  std::vector<double> fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<ExplainerKind> explainers{ExplainerKind::kLrp, ExplainerKind::kLime,
                                        ExplainerKind::kOcclusion};
  ExplainerSuite suite;
  RssaOptions rssa;  // rssa_window=gaussian|whole
  TargetRule target_rule = TargetRule::kPredicted;  // target_class=predicted|label

  std::size_t sweep_epochs = 2;
  bool test_only = false;
  std::size_t eval_images = 8;        // rssa command
  std::size_t sweep_eval_images = 2;  // per sweep cell
  std::size_t sweep_lime_samples = 200;

  // corrupt command
  std::string corrupt_kind = "rician";
  double corrupt_lambda = 0.15;
  double corrupt_fraction = 1.0;

  // explain command
  std::vector<std::size_t> ids{0};

  // plot command
  std::filesystem::path input;
  std::string plot = "line";  // line | heatmap
  std::string x;
  std::vector<std::string> y;
  std::string series;
  std::vector<std::string> filters;  // column=value
  std::string title;

  // Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);
  void validate() const;

  std::size_t worker_count() const;
  std::vector<NoiseKind> noise_kinds() const;  // kinds minus "didactic"
  bool has_didactic() const;
};

std::vector<std::string> config_keys();

struct TrainOutcome {
  Model model;
  TrainTrace trace;
  double val_accuracy = 0.0;
};

// Split, seeded init, SGD; no files.
TrainOutcome train_on_corpus(const ExperimentConfig& config,
                             const Dataset& corpus);

// "epoch,loss,val_accuracy" with one row per epoch.
std::string trace_csv(const TrainTrace& trace);

struct SweepRow {
  std::string kind;
  double lambda = 0.0;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  double val_accuracy = kNan;
  double rssa_lrp = kNan;
  double rssa_lime = kNan;
  double rssa_occlusion = kNan;
  double stamp_fraction = kNan;
  std::string status = "ok";
};

// Grid order: kind, then lambda, then fraction. A didactic kind contributes
// one row per fraction (lambda reported as 0). Each cell retrains from the
// same seeded initialization on a training split with a fraction p of the
// images corrupted and scores clean validation images; in test-only mode the
// clean model scores a validation set corrupted the same way. Failures are
// recorded in the status column.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config,
                                const Dataset& corpus, std::ostream* log);

std::string sweep_csv(const std::vector<SweepRow>& rows);

// Subcommands; each writes its outputs under config.out (generate writes the
// corpus there, plot writes the SVG to config.out itself).
void cmd_generate(const ExperimentConfig& config, std::ostream& log);
void cmd_train(const ExperimentConfig& config, std::ostream& log);
void cmd_corrupt(const ExperimentConfig& config, std::ostream& log);
void cmd_explain(const ExperimentConfig& config, std::ostream& log);
void cmd_rssa(const ExperimentConfig& config, std::ostream& log);
void cmd_sweep(const ExperimentConfig& config, std::ostream& log);
void cmd_plot(const ExperimentConfig& config, std::ostream& log);

// Full command line (args[0] is the program name). Returns the exit code:
// 0 success, 2 configuration or input error, 3 I/O error.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace relstab
