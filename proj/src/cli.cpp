#include <algorithm>
#include <functional>
#include <map>
#include <ostream>

#include <CLI11.hpp>

#include "relstab/errors.hpp"
#include "relstab/harness.hpp"

namespace relstab {

namespace {

using Command = void (*)(const ExperimentConfig&, std::ostream&);

struct CommandInfo {
  const char* name;
  const char* help;
  Command run;
  std::vector<const char*> keys;  // flags offered as --key-name
};

const std::vector<CommandInfo>& commands() {
  static const std::vector<CommandInfo> list = {
      {"generate", "Generate the synthetic two-class corpus into --out",
       cmd_generate,
       {"count_class0", "count_class1", "side", "blob_delta", "blob_offset_x",
        "blob_radius", "blob_jitter", "noise_sigma"}},
      {"train", "Train the CNN on a corpus; writes checkpoint, trace.csv, loss.svg",
       cmd_train,
       {"corpus", "checkpoint", "epochs", "batch_size", "learning_rate",
        "split_ratio", "track_train_accuracy"}},
      {"corrupt", "Write a copy of a corpus with a fraction of images corrupted",
       cmd_corrupt,
       {"corpus", "corrupt_kind", "corrupt_lambda", "corrupt_fraction"}},
      {"explain", "Write relevance maps for selected images", cmd_explain,
       {"corpus", "checkpoint", "ids", "explainers", "lime_samples"}},
      {"rssa", "RSSA matrices, didactic maps and the explainer comparison",
       cmd_rssa,
       {"corpus", "checkpoint", "kinds", "lambdas", "explainers", "eval_images",
        "lime_samples", "split_ratio"}},
      {"sweep", "Retrain per (kind, lambda, fraction) cell; writes sweep.csv",
       cmd_sweep,
       {"corpus", "kinds", "lambdas", "fractions", "explainers", "sweep_epochs",
        "sweep_eval_images", "sweep_lime_samples", "test_only", "split_ratio",
        "batch_size", "learning_rate"}},
      {"plot", "Render a CSV as an SVG line plot or heatmap", cmd_plot,
       {"input", "plot", "x", "y", "series", "filter", "title"}},
  };
  return list;
}

const char* describe(const std::string& key) {
  static const std::map<std::string, const char*> text = {
      {"count_class0", "Images of class 0"},
      {"count_class1", "Images of class 1"},
      {"side", "Image side in pixels"},
      {"blob_delta", "Blob intensity above the brain"},
      {"blob_offset_x", "Horizontal blob offset per class, px"},
      {"blob_radius", "Blob radius, px"},
      {"blob_jitter", "Per-image blob position jitter, px"},
      {"noise_sigma", "Pixel noise floor"},
      {"corpus", "Corpus directory"},
      {"checkpoint", "Model checkpoint path"},
      {"epochs", "Training epochs"},
      {"batch_size", "SGD mini-batch size"},
      {"learning_rate", "SGD learning rate"},
      {"split_ratio", "Training share of the stratified split"},
      {"track_train_accuracy", "Record training accuracy every epoch"},
      {"corrupt_kind", "gaussian, rician, chisq or didactic"},
      {"corrupt_lambda", "Noise variance as a fraction of image variance"},
      {"corrupt_fraction", "Fraction of images to corrupt"},
      {"ids", "Image ids, comma separated"},
      {"explainers", "lrp, lime, occlusion (comma separated)"},
      {"lime_samples", "LIME perturbation samples"},
      {"kinds", "Noise kinds (comma separated; sweep also takes didactic)"},
      {"lambdas", "Noise levels (comma separated)"},
      {"fractions", "Corrupted fractions (comma separated)"},
      {"eval_images", "Validation images explained per matrix cell"},
      {"sweep_epochs", "Epochs per sweep cell"},
      {"sweep_eval_images", "Validation images explained per sweep cell"},
      {"sweep_lime_samples", "LIME samples inside the sweep"},
      {"test_only", "Corrupt validation images instead of training images"},
      {"input", "CSV file to plot"},
      {"plot", "line or heatmap"},
      {"x", "x column"},
      {"y", "y columns (comma separated)"},
      {"series", "Column that splits lines"},
      {"filter", "Keep rows with column=value (repeatable)"},
      {"title", "Figure title"},
  };
  const auto it = text.find(key);
  return it == text.end() ? "" : it->second;
}

bool is_switch(const std::string& key) {
  return key == "track_train_accuracy" || key == "test_only";
}

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Relevance-map stability experiments on synthetic brain slices"};
  app.require_subcommand(1);
  app.fallthrough();

  // Flag values in command-line order; applied after the config file.
  std::vector<std::pair<std::string, std::string>> given;
  auto record = [&given](const std::string& key) {
    return [&given, key](const std::string& v) { given.emplace_back(key, v); };
  };

  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file");
  app.name("relstab");
  app.add_option("--seed", "Master seed for data, init, splits and noise")
      ->each(record("seed"))->type_name("N");
  app.add_option("--out", "Output directory (plot: SVG path)")
      ->each(record("out"))->type_name("PATH");
  app.add_option("--jobs", "Sweep worker threads (0: all cores)")
      ->each(record("jobs"))->type_name("N");

  Command selected = nullptr;
  for (const CommandInfo& c : commands()) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    for (const char* key : c.keys) {
      if (is_switch(key))
        sub->add_flag_callback(flag_name(key), [&given, key] {
          given.emplace_back(key, "true");
        }, std::string(describe(key)));
      else
        sub->add_option(flag_name(key))
            ->description(describe(key))
            ->each(record(key))
            ->type_name("VALUE");
    }
    sub->add_option("--set", "Any configuration key: --set key=value")
        ->each([&given](const std::string& kv) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos)
            throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
          given.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        })
        ->type_name("KEY=VALUE");
    Command run = c.run;
    sub->callback([&selected, run] { selected = run; });
  }

  std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    ExperimentConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& [key, value] : given) config.set(key, value);
    selected(config, err);
    return 0;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace relstab
