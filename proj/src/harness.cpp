#include "relstab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <ostream>
#include <thread>

#include "relstab/csv.hpp"
#include "relstab/errors.hpp"
#include "relstab/fileio.hpp"
#include "relstab/keyvalue.hpp"
#include "relstab/mapio.hpp"
#include "relstab/plot.hpp"
#include "relstab/rssa.hpp"

namespace relstab {

namespace {

namespace fs = std::filesystem;

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("invalid value '" + v + "' for " + key);
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> out;
  for (const std::string& item : split(value, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

template <typename T>
Setter number_setter(const char* key, T ExperimentConfig::*member) {
  return [key, member](ExperimentConfig& c, const std::string& v) {
    c.*member = parse_number<T>(key, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["corpus"] = [](ExperimentConfig& c, const std::string& v) { c.corpus = v; };
    t["checkpoint"] = [](ExperimentConfig& c, const std::string& v) { c.checkpoint = v; };
    t["out"] = [](ExperimentConfig& c, const std::string& v) { c.out = v; };
    t["seed"] = number_setter("seed", &ExperimentConfig::seed);
    t["jobs"] = number_setter("jobs", &ExperimentConfig::jobs);
    t["split_ratio"] = number_setter("split_ratio", &ExperimentConfig::split_ratio);
    t["epochs"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.epochs = parse_number<std::size_t>("epochs", v);
    };
    t["batch_size"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.batch_size = parse_number<std::size_t>("batch_size", v);
    };
    t["learning_rate"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.learning_rate = parse_number<float>("learning_rate", v);
    };
    t["shuffle"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.shuffle = parse_bool("shuffle", v);
    };
    t["track_train_accuracy"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.track_train_accuracy = parse_bool("track_train_accuracy", v);
    };
    t["kinds"] = [](ExperimentConfig& c, const std::string& v) { c.kinds = parse_list(v); };
    t["lambdas"] = [](ExperimentConfig& c, const std::string& v) {
      c.lambdas = parse_number_list<double>("lambdas", v);
    };
    t["fractions"] = [](ExperimentConfig& c, const std::string& v) {
      c.fractions = parse_number_list<double>("fractions", v);
    };
    t["explainers"] = [](ExperimentConfig& c, const std::string& v) {
      c.explainers.clear();
      for (const std::string& name : parse_list(v))
        c.explainers.push_back(parse_explainer(name));
    };
    t["sweep_epochs"] = number_setter("sweep_epochs", &ExperimentConfig::sweep_epochs);
    t["test_only"] = [](ExperimentConfig& c, const std::string& v) {
      c.test_only = parse_bool("test_only", v);
    };
    t["eval_images"] = number_setter("eval_images", &ExperimentConfig::eval_images);
    t["sweep_eval_images"] =
        number_setter("sweep_eval_images", &ExperimentConfig::sweep_eval_images);
    t["sweep_lime_samples"] =
        number_setter("sweep_lime_samples", &ExperimentConfig::sweep_lime_samples);
    t["lime_samples"] = [](ExperimentConfig& c, const std::string& v) {
      c.suite.lime.n_samples = parse_number<std::size_t>("lime_samples", v);
    };
    t["lime_grid"] = [](ExperimentConfig& c, const std::string& v) {
      c.suite.lime.grid = parse_number<std::size_t>("lime_grid", v);
    };
    t["lime_ridge"] = [](ExperimentConfig& c, const std::string& v) {
      c.suite.lime.ridge = parse_number<double>("lime_ridge", v);
    };
    t["lrp_epsilon"] = [](ExperimentConfig& c, const std::string& v) {
      c.suite.lrp.epsilon = parse_number<double>("lrp_epsilon", v);
    };
    t["occlusion_patch"] = [](ExperimentConfig& c, const std::string& v) {
      c.suite.occlusion.patch = parse_number<std::size_t>("occlusion_patch", v);
    };
    t["occlusion_stride"] = [](ExperimentConfig& c, const std::string& v) {
      c.suite.occlusion.stride = parse_number<std::size_t>("occlusion_stride", v);
    };
    t["corrupt_kind"] = [](ExperimentConfig& c, const std::string& v) {
      c.corrupt_kind = trim(v);
    };
    t["corrupt_lambda"] = number_setter("corrupt_lambda", &ExperimentConfig::corrupt_lambda);
    t["corrupt_fraction"] =
        number_setter("corrupt_fraction", &ExperimentConfig::corrupt_fraction);
    t["ids"] = [](ExperimentConfig& c, const std::string& v) {
      c.ids = parse_number_list<std::size_t>("ids", v);
    };
    t["input"] = [](ExperimentConfig& c, const std::string& v) { c.input = v; };
    t["plot"] = [](ExperimentConfig& c, const std::string& v) { c.plot = trim(v); };
    t["x"] = [](ExperimentConfig& c, const std::string& v) { c.x = trim(v); };
    t["y"] = [](ExperimentConfig& c, const std::string& v) { c.y = parse_list(v); };
    t["series"] = [](ExperimentConfig& c, const std::string& v) { c.series = trim(v); };
    t["filter"] = [](ExperimentConfig& c, const std::string& v) {
      c.filters.push_back(trim(v));
    };
    t["title"] = [](ExperimentConfig& c, const std::string& v) { c.title = v; };
    t["rssa_window"] = [](ExperimentConfig& c, const std::string& v) {
      const std::string mode = trim(v);
      if (mode == "gaussian")
        c.rssa.mode = WindowMode::kGaussian;
      else if (mode == "whole")
        c.rssa.mode = WindowMode::kWholeImage;
      else
        throw ConfigError("rssa_window must be gaussian or whole, got '" + mode + "'");
    };
    t["target_class"] = [](ExperimentConfig& c, const std::string& v) {
      const std::string rule = trim(v);
      if (rule == "predicted")
        c.target_rule = TargetRule::kPredicted;
      else if (rule == "label")
        c.target_rule = TargetRule::kLabel;
      else
        throw ConfigError("target_class must be predicted or label, got '" + rule + "'");
    };

    // Corpus generation parameters go straight to the synthetic spec.
    for (const auto& [key, unused] : parse_key_values(SyntheticSpec{}.to_text())) {
      if (key == "seed") continue;
      t[key] = [key](ExperimentConfig& c, const std::string& v) {
        c.spec = SyntheticSpec::from_text(c.spec.to_text() + key + "=" + v + "\n");
      };
    }
    return t;
  }();
  return table;
}

bool is_didactic(const std::string& kind) { return kind == "didactic"; }

}  // namespace

namespace {

int target_for(TargetRule rule, const LogitFn& scorer, const Tensor& image,
               int label) {
  return rule == TargetRule::kLabel ? label : predicted_class(scorer, image);
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, value);
}

void ExperimentConfig::load_file(const fs::path& path) {
  for (const auto& [key, value] : parse_key_values(read_file(path)))
    set(key, value);
}

void ExperimentConfig::validate() const {
  train.validate();
  if (!(split_ratio > 0.0 && split_ratio < 1.0))
    throw ConfigError("split_ratio must lie in (0,1)");
  if (kinds.empty()) throw ConfigError("kinds must not be empty");
  for (const std::string& k : kinds)
    if (!is_didactic(k)) parse_noise_kind(k);
  if (lambdas.empty()) throw ConfigError("lambdas must not be empty");
  for (double l : lambdas)
    if (!(l >= 0.0) || !std::isfinite(l))
      throw ConfigError("lambda values must be finite and >= 0");
  if (fractions.empty()) throw ConfigError("fractions must not be empty");
  for (double p : fractions)
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError("fractions must lie in [0,1]");
  if (explainers.empty()) throw ConfigError("explainers must not be empty");
  if (eval_images < 1 || sweep_eval_images < 1)
    throw ConfigError("evaluation image counts must be >= 1");
  const std::size_t segments = suite.lime.grid * suite.lime.grid;
  if (suite.lime.n_samples < segments || sweep_lime_samples < segments)
    throw ConfigError("LIME sample counts must be >= the segment count (" +
                      std::to_string(segments) + ")");
  if (!(corrupt_fraction >= 0.0 && corrupt_fraction <= 1.0))
    throw ConfigError("corrupt_fraction must lie in [0,1]");
  if (!(corrupt_lambda >= 0.0) || !std::isfinite(corrupt_lambda))
    throw ConfigError("corrupt_lambda must be finite and >= 0");
  if (!is_didactic(corrupt_kind)) parse_noise_kind(corrupt_kind);
}

std::size_t ExperimentConfig::worker_count() const {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<NoiseKind> ExperimentConfig::noise_kinds() const {
  std::vector<NoiseKind> out;
  for (const std::string& k : kinds)
    if (!is_didactic(k)) out.push_back(parse_noise_kind(k));
  return out;
}

bool ExperimentConfig::has_didactic() const {
  return std::any_of(kinds.begin(), kinds.end(), is_didactic);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, unused] : setters()) keys.push_back(key);
  return keys;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t image_side(const Dataset& d) {
  if (d.empty()) throw InputError("corpus is empty");
  const Shape& s = d.images.front().shape();
  if (s.size() != 3 || s[0] != 1 || s[1] != s[2])
    throw InputError("corpus images must be square single-channel [1,H,W]");
  return s[1];
}

Model initial_model(const ExperimentConfig& config, const Dataset& corpus) {
  return build_model(default_model_config(image_side(corpus)), config.seed);
}

double final_accuracy(const TrainTrace& trace, const Model& model,
                      const Dataset& val) {
  return trace.val_accuracy.empty() ? evaluate(model, val)
                                    : trace.val_accuracy.back();
}

TrainConfig seeded(TrainConfig t, std::uint64_t seed) {
  t.seed = seed;
  return t;
}

Dataset head(const Dataset& d, std::size_t n) {
  std::vector<std::size_t> idx(std::min(n, d.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return d.subset(idx);
}

bool same_images(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!bit_identical(a.images[i], b.images[i])) return false;
  return true;
}

CorruptionPlan make_plan(const std::string& kind, double lambda, double fraction,
                         std::uint64_t seed) {
  CorruptionPlan plan;
  plan.fraction = fraction;
  plan.master_seed = seed;
  if (is_didactic(kind))
    plan.corruptor = StampSpec::default_spec();
  else
    plan.corruptor = NoiseParams{parse_noise_kind(kind), lambda, seed};
  return plan;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace

TrainOutcome train_on_corpus(const ExperimentConfig& config,
                             const Dataset& corpus) {
  const Split split = split_train_val(corpus, config.split_ratio, config.seed);
  TrainOutcome out{initial_model(config, corpus), {}, 0.0};
  out.trace = train(seeded(config.train, config.seed), out.model, split.train,
                    split.val);
  out.val_accuracy = final_accuracy(out.trace, out.model, split.val);
  return out;
}

std::string trace_csv(const TrainTrace& trace) {
  std::string out = "epoch,loss,val_accuracy\n";
  for (std::size_t e = 0; e < trace.loss.size(); ++e)
    out += std::to_string(e + 1) + "," + csv_number(trace.loss[e]) + "," +
           csv_number(trace.val_accuracy[e]) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

struct SweepContext {
  const ExperimentConfig& config;
  Split split;
  Dataset eval;
  ExplainerSuite suite;
  TrainConfig train;
  Model init;
  Model clean;
  double clean_accuracy = 0.0;
};

double didactic_rssa(ExplainerKind kind, const Model& model, const Dataset& eval,
                     const ExperimentConfig& config, const ExplainerSuite& suite) {
  const StampSpec stamp = StampSpec::default_spec();
  const LogitFn scorer = model_scorer(model);
  double sum = 0.0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const int target =
        target_for(config.target_rule, scorer, eval.images[i], eval.labels[i]);
    const Tensor stamped = didactic_stamp(eval.images[i], eval.labels[i], stamp);
    sum += rssa_global(explain(kind, model, stamped, target, suite).values,
                       explain(kind, model, eval.images[i], target, suite).values,
                       config.rssa);
  }
  return sum / static_cast<double>(eval.size());
}

double stamp_relevance(const Model& model, const Dataset& eval,
                       const ExperimentConfig& config, const ExplainerSuite& suite) {
  const StampSpec stamp = StampSpec::default_spec();
  const LogitFn scorer = model_scorer(model);
  double sum = 0.0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const Tensor stamped = didactic_stamp(eval.images[i], eval.labels[i], stamp);
    const int target =
        target_for(config.target_rule, scorer, eval.images[i], eval.labels[i]);
    const RelevanceMap map =
        explain(ExplainerKind::kLrp, model, stamped, target, suite);
    sum += region_relevance_fraction(
               map.values,
               stamp_footprint(eval.images[i].shape(), eval.labels[i], stamp))
               .fraction;
  }
  return sum / static_cast<double>(eval.size());
}

void run_cell(const SweepContext& ctx, SweepRow& row) {
  try {
    const CorruptionPlan plan =
        make_plan(row.kind, row.lambda, row.fraction, row.seed);
    const Model* model = &ctx.clean;
    Model retrained;
    if (ctx.config.test_only) {
      const CorruptionResult val = corrupt_corpus(ctx.split.val, plan);
      row.val_accuracy = evaluate(ctx.clean, val.dataset);
    } else {
      const CorruptionResult tr = corrupt_corpus(ctx.split.train, plan);
      if (same_images(tr.dataset, ctx.split.train)) {
        row.val_accuracy = ctx.clean_accuracy;
      } else {
        retrained = ctx.init;
        const TrainTrace trace =
            train(ctx.train, retrained, tr.dataset, ctx.split.val);
        row.val_accuracy = final_accuracy(trace, retrained, ctx.split.val);
        model = &retrained;
      }
    }

    for (ExplainerKind kind : ctx.config.explainers) {
      double value;
      if (is_didactic(row.kind)) {
        value = didactic_rssa(kind, *model, ctx.eval, ctx.config, ctx.suite);
      } else {
        const NoiseGrid grid{{parse_noise_kind(row.kind)}, {row.lambda}, row.seed};
        value = rssa_matrix(kind, *model, ctx.eval, grid, ctx.suite,
                            ctx.config.rssa, ctx.config.target_rule)
                    .values[0];
      }
      switch (kind) {
        case ExplainerKind::kLrp: row.rssa_lrp = value; break;
        case ExplainerKind::kLime: row.rssa_lime = value; break;
        case ExplainerKind::kOcclusion: row.rssa_occlusion = value; break;
      }
    }
    if (is_didactic(row.kind))
      row.stamp_fraction = stamp_relevance(*model, ctx.eval, ctx.config, ctx.suite);
  } catch (const std::exception& e) {
    row.status = "error: " + sanitize(e.what());
  }
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& config,
                                const Dataset& corpus, std::ostream* log) {
  config.validate();
  SweepContext ctx{config,
                   split_train_val(corpus, config.split_ratio, config.seed),
                   {},
                   config.suite,
                   seeded(config.train, config.seed),
                   initial_model(config, corpus),
                   {},
                   0.0};
  ctx.eval = head(ctx.split.val, config.sweep_eval_images);
  ctx.suite.lime.n_samples = config.sweep_lime_samples;
  ctx.suite.lime.seed = config.seed;
  ctx.train.epochs = config.sweep_epochs;

  // Every cell whose training data equals the clean split shares this run.
  ctx.clean = ctx.init;
  const TrainTrace clean_trace =
      train(ctx.train, ctx.clean, ctx.split.train, ctx.split.val);
  ctx.clean_accuracy = final_accuracy(clean_trace, ctx.clean, ctx.split.val);
  if (log) *log << "clean baseline: val_accuracy " << ctx.clean_accuracy << "\n";

  std::vector<SweepRow> rows;
  for (const std::string& kind : config.kinds) {
    const std::vector<double> lambdas =
        is_didactic(kind) ? std::vector<double>{0.0} : config.lambdas;
    for (double lambda : lambdas)
      for (double fraction : config.fractions) {
        SweepRow row;
        row.kind = kind;
        row.lambda = lambda;
        row.fraction = fraction;
        row.seed = config.seed;
        rows.push_back(row);
      }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= rows.size()) return;
      run_cell(ctx, rows[i]);
      const std::size_t finished = ++done;
      if (log) {
        std::lock_guard lock(log_mutex);
        *log << "[" << finished << "/" << rows.size() << "] " << rows[i].kind
             << " lambda=" << csv_number(rows[i].lambda)
             << " p=" << csv_number(rows[i].fraction)
             << " acc=" << csv_number(rows[i].val_accuracy) << " "
             << rows[i].status << "\n";
      }
    }
  };
  const std::size_t workers = std::min(config.worker_count(), rows.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "kind,lambda,fraction,seed,val_accuracy,rssa_lrp,rssa_lime,"
      "rssa_occlusion,stamp_fraction,status\n";
  for (const SweepRow& r : rows)
    out += r.kind + "," + csv_number(r.lambda) + "," + csv_number(r.fraction) +
           "," + std::to_string(r.seed) + "," + csv_number(r.val_accuracy) +
           "," + csv_number(r.rssa_lrp) + "," + csv_number(r.rssa_lime) + "," +
           csv_number(r.rssa_occlusion) + "," + csv_number(r.stamp_fraction) +
           "," + sanitize(r.status) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

SyntheticSpec corpus_spec(const fs::path& corpus) {
  const fs::path p = corpus / "spec.txt";
  return fs::exists(p) ? SyntheticSpec::from_text(read_file(p)) : SyntheticSpec{};
}

Model load_model(const ExperimentConfig& config) {
  if (config.checkpoint.empty())
    throw ConfigError("a checkpoint path is required (--checkpoint)");
  return load_checkpoint(config.checkpoint).model;
}

void write_svg(const fs::path& path, const std::string& svg) {
  write_file_atomic(path, svg);
}

}  // namespace

void cmd_generate(const ExperimentConfig& config, std::ostream& log) {
  SyntheticSpec spec = config.spec;
  spec.seed = config.seed;
  const Dataset d = generate_dataset(spec);
  save_corpus(config.out, d, spec);
  log << "wrote " << d.size() << " images to " << config.out.string() << "\n";
}

void cmd_train(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset corpus = load_corpus(config.corpus);
  const TrainOutcome r = train_on_corpus(config, corpus);
  const fs::path checkpoint =
      config.checkpoint.empty() ? config.out / "model.rlb" : config.checkpoint;
  save_checkpoint(checkpoint, {kCheckpointVersion, r.model});
  write_file_atomic(config.out / "trace.csv", trace_csv(r.trace));

  LinePlot plot;
  plot.title = "Training loss";
  plot.x_label = "epoch";
  plot.y_label = "loss";
  Series loss{"loss", {}, r.trace.loss};
  for (std::size_t e = 0; e < r.trace.loss.size(); ++e)
    loss.x.push_back(static_cast<double>(e + 1));
  plot.series.push_back(loss);
  write_svg(config.out / "loss.svg", render_line_svg(plot));

  std::string summary = "epochs=" + std::to_string(r.trace.loss.size()) + "\n";
  summary += "final_loss=" +
             csv_number(r.trace.loss.empty() ? kNan : r.trace.loss.back()) + "\n";
  summary += "val_accuracy=" + csv_number(r.val_accuracy) + "\n";
  if (!r.trace.train_accuracy.empty()) {
    std::string per_epoch = "epoch,train_accuracy\n";
    std::size_t first_perfect = 0;
    for (std::size_t e = 0; e < r.trace.train_accuracy.size(); ++e) {
      per_epoch += std::to_string(e + 1) + "," +
                   csv_number(r.trace.train_accuracy[e]) + "\n";
      if (first_perfect == 0 && r.trace.train_accuracy[e] == 1.0)
        first_perfect = e + 1;
    }
    write_file_atomic(config.out / "train_accuracy.csv", per_epoch);
    summary += "train_accuracy=" + csv_number(r.trace.train_accuracy.back()) + "\n";
    summary += "first_perfect_epoch=" + std::to_string(first_perfect) + "\n";
  }
  write_file_atomic(config.out / "train_summary.txt", summary);
  log << "trained " << r.trace.loss.size() << " epochs in "
      << seconds_since(t0) << " s, val_accuracy " << r.val_accuracy << "\n";
}

void cmd_corrupt(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const Dataset corpus = load_corpus(config.corpus);
  const CorruptionPlan plan = make_plan(config.corrupt_kind, config.corrupt_lambda,
                                        config.corrupt_fraction, config.seed);
  const CorruptionResult r = corrupt_corpus(corpus, plan);
  save_corpus(config.out, r.dataset, corpus_spec(config.corpus));
  write_file_atomic(config.out / "manifest.csv", corruption_manifest(r, plan));
  log << "corrupted " << r.corrupted.size() << " of " << corpus.size()
      << " images (" << plan.kind_name() << ")\n";
}

void cmd_explain(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const Model model = load_model(config);
  const Dataset corpus = load_corpus(config.corpus);
  std::vector<std::size_t> positions;
  for (std::size_t id : config.ids) {
    auto it = std::find(corpus.ids.begin(), corpus.ids.end(), id);
    if (it == corpus.ids.end())
      throw ConfigError("unknown image id " + std::to_string(id));
    positions.push_back(static_cast<std::size_t>(it - corpus.ids.begin()));
  }
  ExplainerSuite suite = config.suite;
  suite.lime.seed = config.seed;
  const LogitFn scorer = model_scorer(model);
  std::string predictions = "id,label,predicted\n";
  for (std::size_t pos : positions) {
    const Tensor& image = corpus.images[pos];
    const std::size_t id = corpus.ids[pos];
    const int target =
        target_for(config.target_rule, scorer, image, corpus.labels[pos]);
    predictions += std::to_string(id) + "," + std::to_string(corpus.labels[pos]) +
                   "," + std::to_string(target) + "\n";
    std::string stem = corpus_image_name(id);
    stem.resize(stem.size() - 4);
    for (ExplainerKind kind : config.explainers) {
      const RelevanceMap map = explain(kind, model, image, target, suite);
      save_scaled_map(config.out / "maps" / (stem + "_" + explainer_name(kind)),
                      map.values,
                      {0.0, 0.0, explainer_name(kind), target,
                       kind == ExplainerKind::kLime ? suite.lime.seed : 0});
    }
  }
  write_file_atomic(config.out / "predictions.csv", predictions);
  log << "explained " << positions.size() << " images with "
      << config.explainers.size() << " explainers\n";
}

void cmd_rssa(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const Model model = load_model(config);
  const Dataset corpus = load_corpus(config.corpus);
  const Split split = split_train_val(corpus, config.split_ratio, config.seed);
  const Dataset eval = head(split.val, config.eval_images);
  ExplainerSuite suite = config.suite;
  suite.lime.seed = config.seed;
  const NoiseGrid grid{config.noise_kinds(), config.lambdas, config.seed};
  const LogitFn scorer = model_scorer(model);
  const StampSpec stamp = StampSpec::default_spec();
  constexpr double kHighlightLambda = 0.15;

  std::string comparison = "explainer,kind,lambda,mean_rssa\n";
  std::string didactic =
      "id,explainer,target,rssa,stamp_fraction,brain_fraction\n";
  for (ExplainerKind kind : config.explainers) {
    const std::string name = explainer_name(kind);
    double highlight = kNan;
    if (!grid.kinds.empty()) {
      const RssaMatrix m =
          rssa_matrix(kind, model, eval, grid, suite, config.rssa, config.target_rule);
      const std::string csv = m.to_csv();
      write_file_atomic(config.out / ("rssa_" + name + ".csv"), csv);
      write_svg(config.out / ("rssa_" + name + ".svg"),
                render_heatmap_svg(heatmap_from_csv(parse_csv(csv),
                                                    "RSSA matrix (" + name + ")")));
      for (std::size_t r = 0; r < m.row_names.size(); ++r)
        for (std::size_t c = 0; c < m.lambdas.size(); ++c)
          if (m.row_names[r] == "rician" && m.lambdas[c] == kHighlightLambda)
            highlight = m.at(r, c);
    }
    if (std::isnan(highlight))
      highlight = rssa_matrix(kind, model, eval,
                              {{NoiseKind::kRician}, {kHighlightLambda}, config.seed},
                              suite, config.rssa, config.target_rule)
                      .values[0];
    comparison += name + ",rician," + csv_number(kHighlightLambda) + "," +
                  csv_number(highlight) + "\n";

    for (std::size_t i = 0; i < eval.size(); ++i) {
      const Tensor& image = eval.images[i];
      const int target =
          target_for(config.target_rule, scorer, image, eval.labels[i]);
      std::string stem = corpus_image_name(eval.ids[i]);
      stem.resize(stem.size() - 4);
      const fs::path base = config.out / "rssa_maps" / (stem + "_" + name);
      const RelevanceMap clean = explain(kind, model, image, target, suite);

      const Tensor stamped = didactic_stamp(image, eval.labels[i], stamp);
      const RelevanceMap marked = explain(kind, model, stamped, target, suite);
      const RssaMap didactic_map = rssa_map(marked.values, clean.values, config.rssa);
      save_scaled_map(base.string() + "_didactic",
                      Tensor({didactic_map.rows, didactic_map.cols},
                             std::vector<float>(didactic_map.values.begin(),
                                                didactic_map.values.end())),
                      {0.0, 0.0, name, target, config.seed});
      const double stamp_share =
          region_relevance_fraction(
              marked.values, stamp_footprint(image.shape(), eval.labels[i], stamp))
              .fraction;
      const double brain_share =
          eval.has_masks()
              ? region_relevance_fraction(marked.values, eval.masks[i]).fraction
              : kNan;
      didactic += std::to_string(eval.ids[i]) + "," + name + "," +
                  std::to_string(target) + "," + csv_number(didactic_map.mean) +
                  "," + csv_number(stamp_share) + "," + csv_number(brain_share) +
                  "\n";

      const Tensor noisy = corrupt_image(
          image, {NoiseKind::kRician, kHighlightLambda,
                  config.seed ^ static_cast<std::uint64_t>(eval.ids[i])});
      const RssaMap noise_map =
          rssa_map(explain(kind, model, noisy, target, suite).values, clean.values,
                   config.rssa);
      save_scaled_map(base.string() + "_rician",
                      Tensor({noise_map.rows, noise_map.cols},
                             std::vector<float>(noise_map.values.begin(),
                                                noise_map.values.end())),
                      {0.0, 0.0, name, target, config.seed});
    }
    log << "rssa " << name << ": rician " << kHighlightLambda << " mean "
        << highlight << "\n";
  }
  write_file_atomic(config.out / "rssa_comparison.csv", comparison);
  write_file_atomic(config.out / "didactic.csv", didactic);
}

void cmd_sweep(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset corpus = load_corpus(config.corpus);
  const std::vector<SweepRow> rows = run_sweep(config, corpus, &log);
  const std::string csv = sweep_csv(rows);
  write_file_atomic(config.out / "sweep.csv", csv);

  std::string meta = "mode=" + std::string(config.test_only ? "test-only" : "train") + "\n";
  meta += "validation=clean\n";
  meta += "sweep_epochs=" + std::to_string(config.sweep_epochs) + "\n";
  meta += "sweep_eval_images=" + std::to_string(config.sweep_eval_images) + "\n";
  meta += "sweep_lime_samples=" + std::to_string(config.sweep_lime_samples) + "\n";
  meta += "seed=" + std::to_string(config.seed) + "\n";
  meta += "stamp_fraction=lrp\n";
  meta += "noise_scale=sigma^2=lambda*var(image)\n";
  meta += std::string("rssa_window=") +
          (config.rssa.mode == WindowMode::kGaussian ? "gaussian" : "whole") + "\n";
  meta += std::string("target_class=") +
          (config.target_rule == TargetRule::kLabel ? "label" : "predicted") + "\n";
  write_file_atomic(config.out / "sweep_meta.txt", meta);

  const CsvTable table = parse_csv(csv);
  std::vector<std::string> plotted;
  for (const SweepRow& r : rows) {
    if (std::find(plotted.begin(), plotted.end(), r.kind) != plotted.end()) continue;
    plotted.push_back(r.kind);
    LinePlotSpec spec;
    spec.x = "fraction";
    spec.y = {"val_accuracy"};
    spec.series = "lambda";
    spec.filters = {{"kind", r.kind}};
    spec.title = "Validation accuracy vs corrupted fraction (" + r.kind + ")";
    write_svg(config.out / ("accuracy_" + r.kind + ".svg"),
              render_line_svg(line_plot_from_csv(table, spec)));
  }
  for (ExplainerKind kind : config.explainers) {
    LinePlotSpec spec;
    spec.x = "lambda";
    spec.y = {"rssa_" + explainer_name(kind)};
    spec.series = "kind";
    spec.filters = {{"fraction", csv_number(config.fractions.front())}};
    spec.title = "RSSA vs lambda (" + explainer_name(kind) + ")";
    write_svg(config.out / ("rssa_vs_lambda_" + explainer_name(kind) + ".svg"),
              render_line_svg(line_plot_from_csv(table, spec)));
  }
  log << "sweep: " << rows.size() << " rows in " << seconds_since(t0) << " s\n";
}

void cmd_plot(const ExperimentConfig& config, std::ostream& log) {
  if (config.input.empty()) throw ConfigError("plot needs an input CSV (--input)");
  const CsvTable table = parse_csv(read_file(config.input));
  std::string svg;
  if (config.plot == "heatmap") {
    svg = render_heatmap_svg(heatmap_from_csv(
        table, config.title.empty() ? config.input.stem().string() : config.title));
  } else if (config.plot == "line") {
    LinePlotSpec spec;
    spec.x = config.x;
    spec.y = config.y;
    spec.series = config.series;
    if (spec.x.empty()) {
      if (table.has_column("epoch")) {
        spec.x = "epoch";
        if (spec.y.empty()) spec.y = {"loss"};
      } else {
        spec.x = "fraction";
        if (spec.y.empty()) spec.y = {"val_accuracy"};
        if (spec.series.empty()) spec.series = "lambda";
      }
    }
    if (spec.y.empty()) throw ConfigError("line plot needs --y");
    for (const std::string& f : config.filters) {
      const auto eq = f.find('=');
      if (eq == std::string::npos)
        throw ConfigError("filter '" + f + "' is not column=value");
      spec.filters.emplace_back(trim(f.substr(0, eq)), trim(f.substr(eq + 1)));
    }
    spec.title = config.title.empty() ? config.input.stem().string() : config.title;
    svg = render_line_svg(line_plot_from_csv(table, spec));
  } else {
    throw ConfigError("unknown plot type '" + config.plot + "' (line, heatmap)");
  }
  fs::path target = config.out;
  if (target.extension() != ".svg")
    target /= config.input.stem().string() + ".svg";
  write_svg(target, svg);
  log << "wrote " << target.string() << "\n";
}

}  // namespace relstab
