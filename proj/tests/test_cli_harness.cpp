#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "relstab/csv.hpp"
#include "relstab/datagen.hpp"
#include "relstab/errors.hpp"
#include "relstab/fileio.hpp"
#include "relstab/harness.hpp"
#include "relstab/model.hpp"

using namespace relstab;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "relstab");
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "relstab_tests" / "cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small corpus shared by the tests below: 12 images per class.
const fs::path& corpus() {
  static const fs::path dir = [] {
    const fs::path d = fresh_dir("corpus");
    const Run r = invoke({"generate", "--out", d.string(), "--count-class0", "12",
                           "--count-class1", "12"});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::vector<fs::path> files_under(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir));
  std::sort(out.begin(), out.end());
  return out;
}

bool no_partial_files(const fs::path& dir) {
  for (const fs::path& p : files_under(dir))
    if (p.extension() == ".partial") return false;
  return true;
}

}  // namespace

TEST_SUITE("cli_harness") {

TEST_CASE("help exits cleanly and unknown options are usage errors") {
  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"generate", "--bogus", "1"}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
}

TEST_CASE("generate is byte-reproducible") {
  const fs::path a = fresh_dir("gen_a"), b = fresh_dir("gen_b");
  for (const fs::path& d : {a, b})
    REQUIRE(invoke({"generate", "--out", d.string(), "--count-class0", "3",
                     "--count-class1", "4", "--seed", "9"})
                .code == 0);
  const std::vector<fs::path> fa = files_under(a);
  CHECK(fa == files_under(b));
  CHECK(fa.size() == 2 * 7 + 2);  // images, masks, labels.csv, spec.txt
  for (const fs::path& f : fa) CHECK(read_file(a / f) == read_file(b / f));
  CHECK(no_partial_files(a));
}

TEST_CASE("generate rejects a blob that leaves the brain") {
  const fs::path d = fresh_dir("gen_bad");
  const Run r = invoke({"generate", "--out", d.string(), "--blob-offset-x", "40"});
  CHECK(r.code == 2);
  CHECK(r.err.find("blob") != std::string::npos);
  CHECK(files_under(d).empty());
}

TEST_CASE("training with zero epochs writes the seeded initialization") {
  const fs::path d = fresh_dir("train0");
  REQUIRE(invoke({"train", "--corpus", corpus().string(), "--out", d.string(),
                   "--epochs", "0", "--seed", "5"})
              .code == 0);
  CHECK(read_file(d / "trace.csv") == "epoch,loss,val_accuracy\n");
  const Checkpoint ck = load_checkpoint(d / "model.rlb");
  const Model init = build_model(default_model_config(64), 5);
  REQUIRE(ck.model.params.tensors.size() == init.params.tensors.size());
  for (std::size_t i = 0; i < init.params.tensors.size(); ++i)
    CHECK(bit_identical(ck.model.params.tensors[i], init.params.tensors[i]));
  CHECK(fs::exists(d / "loss.svg"));
}

TEST_CASE("training traces are reproducible and list one row per epoch") {
  const fs::path a = fresh_dir("train_a"), b = fresh_dir("train_b");
  for (const fs::path& d : {a, b})
    REQUIRE(invoke({"train", "--corpus", corpus().string(), "--out", d.string(),
                     "--epochs", "2", "--track-train-accuracy"})
                .code == 0);
  const std::string trace = read_file(a / "trace.csv");
  CHECK(trace == read_file(b / "trace.csv"));
  CHECK(read_file(a / "model.rlb") == read_file(b / "model.rlb"));
  const CsvTable t = parse_csv(trace);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.cell(1, "epoch") == "2");
  CHECK(parse_csv(read_file(a / "train_accuracy.csv")).rows.size() == 2);
  CHECK(read_file(a / "train_summary.txt").find("first_perfect_epoch=") != std::string::npos);
}

TEST_CASE("explain writes one map and sidecar per explainer") {
  const fs::path model = fresh_dir("explain_model"), d = fresh_dir("explain");
  REQUIRE(invoke({"train", "--corpus", corpus().string(), "--out", model.string(),
                   "--epochs", "0"})
              .code == 0);
  const std::string ck = (model / "model.rlb").string();
  REQUIRE(invoke({"explain", "--corpus", corpus().string(), "--checkpoint", ck, "--out",
                   d.string(), "--ids", "0,13", "--lime-samples", "100"})
              .code == 0);
  CHECK(files_under(d / "maps").size() == 2 * 3 * 2);
  for (const char* exp : {"lrp", "lime", "occlusion"}) {
    CHECK(fs::exists(d / "maps" / ("0013_" + std::string(exp) + ".pgm")));
    CHECK(fs::exists(d / "maps" / ("0000_" + std::string(exp) + ".csv")));
  }
  CHECK(parse_csv(read_file(d / "predictions.csv")).rows.size() == 2);

  const Run bad_id = invoke({"explain", "--corpus", corpus().string(), "--checkpoint", ck,
                              "--out", d.string(), "--ids", "999"});
  CHECK(bad_id.code == 2);
  CHECK(bad_id.err.find("unknown image id 999") != std::string::npos);
  CHECK(invoke({"explain", "--corpus", corpus().string(), "--checkpoint", ck, "--out",
                 d.string(), "--explainers", "gradcam"})
            .code == 2);
  CHECK(invoke({"explain", "--corpus", corpus().string(), "--checkpoint",
                 (model / "missing.rlb").string(), "--out", d.string()})
            .code == 3);
}

TEST_CASE("plot output is deterministic and validates its input") {
  const fs::path d = fresh_dir("plot");
  write_file_atomic(d / "data.csv", "x,y,g\n0,1,a\n1,2,a\n0,0.5,b\n1,0.25,b\n");
  const std::vector<std::string> args{"plot", "--input", (d / "data.csv").string(), "--x", "x",
                                      "--y", "y", "--series", "g"};
  auto with_out = [&](const std::string& name) {
    std::vector<std::string> a = args;
    a.insert(a.end(), {"--out", (d / name).string()});
    return a;
  };
  REQUIRE(invoke(with_out("one.svg")).code == 0);
  REQUIRE(invoke(with_out("two.svg")).code == 0);
  CHECK(read_file(d / "one.svg") == read_file(d / "two.svg"));
  CHECK(read_file(d / "one.svg").rfind("<svg", 0) != std::string::npos);

  write_file_atomic(d / "empty.csv", "x,y\n");
  CHECK(invoke({"plot", "--input", (d / "empty.csv").string(), "--x", "x", "--y", "y",
                 "--out", (d / "e.svg").string()})
            .code == 2);
  CHECK(invoke({"plot", "--input", (d / "data.csv").string(), "--x", "x", "--y", "nope",
                 "--out", (d / "m.svg").string()})
            .code == 2);

  write_file_atomic(d / "grid.csv", "kind,0,0.1,0.2\ngaussian,1,0.9,0.8\nrician,1,0.8,0.7\n");
  REQUIRE(invoke({"plot", "--plot", "heatmap", "--input", (d / "grid.csv").string(), "--out",
                   (d / "h.svg").string()})
              .code == 0);
  const std::string svg = read_file(d / "h.svg");
  std::size_t cells = 0;
  for (std::size_t at = svg.find("class=\"cell\""); at != std::string::npos;
       at = svg.find("class=\"cell\"", at + 1))
    ++cells;
  CHECK(cells == 6);
  CHECK(no_partial_files(d));
}

TEST_CASE("a small sweep fills every cell and keeps clean cells equal") {
  const fs::path d = fresh_dir("sweep");
  const Run r = invoke({"sweep", "--corpus", corpus().string(), "--out", d.string(),
                         "--kinds", "gaussian,rician", "--lambdas", "0,0.2", "--fractions",
                         "0,1", "--explainers", "lrp", "--sweep-epochs", "1",
                         "--sweep-eval-images", "2"});
  REQUIRE(r.code == 0);
  const CsvTable t = parse_csv(read_file(d / "sweep.csv"));
  REQUIRE(t.rows.size() == 8);
  std::string clean_acc;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(t.cell(i, "status") == "ok");
    const bool clean = t.number(i, "lambda") == 0.0 || t.number(i, "fraction") == 0.0;
    if (clean) {
      if (clean_acc.empty()) clean_acc = t.cell(i, "val_accuracy");
      CHECK(t.cell(i, "val_accuracy") == clean_acc);
    }
    if (t.number(i, "lambda") == 0.0) CHECK(std::fabs(t.number(i, "rssa_lrp") - 1.0) <= 1e-6);
    CHECK(std::isnan(t.number(i, "rssa_lime")));
  }
  CHECK(fs::exists(d / "sweep_meta.txt"));
  CHECK(fs::exists(d / "accuracy_gaussian.svg"));
  CHECK(no_partial_files(d));
}

TEST_CASE("configuration files, unknown keys and missing inputs") {
  const fs::path d = fresh_dir("config");
  write_file_atomic(d / "run.cfg", "# comment\ncount_class0=2\ncount_class1=3\nseed=4\n");
  REQUIRE(invoke({"--config", (d / "run.cfg").string(), "generate", "--out",
                   (d / "gen").string()})
              .code == 0);
  CHECK(load_corpus(d / "gen").size() == 5);

  ExperimentConfig c;
  c.load_file(d / "run.cfg");
  CHECK(c.seed == 4);
  CHECK(SyntheticSpec::from_text(read_file(d / "gen" / "spec.txt")).seed == 4);
  CHECK_THROWS_AS(c.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("epochs", "many"), ConfigError);

  write_file_atomic(d / "bad.cfg", "no_such_key=1\n");
  CHECK(invoke({"--config", (d / "bad.cfg").string(), "generate", "--out",
                 (d / "gen2").string()})
            .code == 2);
  CHECK(invoke({"generate", "--out", (d / "gen3").string(), "--set", "colour=red"}).code == 2);
  CHECK(invoke({"train", "--corpus", (d / "nowhere").string(), "--out",
                 (d / "t").string()})
            .code == 3);
  CHECK(invoke({"sweep", "--corpus", corpus().string(), "--out", (d / "s").string(),
                 "--sweep-lime-samples", "10"})
            .code == 2);
  CHECK_FALSE(fs::exists(d / "s" / "sweep.csv"));
  CHECK(no_partial_files(d));
}

}  // TEST_SUITE
