#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tempomap/cli.hpp"
#include "tempomap/serialize.hpp"
#include "test_support.hpp"

using namespace tempomap;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) { return run_cli(args); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Data rows of a CSV, skipping "#" comment lines; the first row is the header.
std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  REQUIRE(it != header.end());
  return static_cast<std::size_t>(it - header.begin());
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(TEMPOMAP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small dataset plus a trained bundle shared by the read-only tests.
struct Workspace {
  fs::path dir;
  fs::path data;
  fs::path model;
};

const Workspace& workspace() {
  static const Workspace w = [] {
    Workspace out;
    out.dir = testing::scratch_dir("cli");
    out.data = out.dir / "data.csv";
    out.model = out.dir / "model.json";
    REQUIRE(cli({"simulate", "--out", out.data.string(), "--n-per-class", "8", "--d", "6", "--d-informative", "2",
                 "--t", "6", "--seed", "3"}) == kExitOk);
    REQUIRE(cli({"train", "--data", out.data.string(), "--out", out.model.string(), "--max-epochs", "12",
                 "--relevance-start", "3", "--grid-rows", "3", "--grid-cols", "3", "--basis-rows", "2",
                 "--basis-cols", "2"}) == kExitOk);
    return out;
  }();
  return w;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate writes the requested shape and is seeded") {
    const auto dir = testing::scratch_dir("cli_sim");
    REQUIRE(cli({"simulate", "--out", (dir / "a.csv").string(), "--n-per-class", "5", "--d", "7", "--d-informative",
                 "3", "--t", "4", "--seed", "11"}) == kExitOk);
    const auto data = load_csv(dir / "a.csv");
    CHECK(data.size() == 10);
    CHECK(data.length() == 4);
    CHECK(data.dims() == 7);
    const auto meta = load_metadata(dir / "a.meta.json");
    CHECK(meta["metadata"]["informative_features"].size() == 3);

    REQUIRE(cli({"simulate", "--out", (dir / "b.csv").string(), "--n-per-class", "5", "--d", "7", "--d-informative",
                 "3", "--t", "4", "--seed", "11"}) == kExitOk);
    REQUIRE(cli({"simulate", "--out", (dir / "c.csv").string(), "--n-per-class", "5", "--d", "7", "--d-informative",
                 "3", "--t", "4", "--seed", "12"}) == kExitOk);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));

    testing::WarningCapture warnings;
    REQUIRE(cli({"simulate", "--out", (dir / "d.csv").string(), "--n-per-class", "3", "--d", "4", "--d-informative",
                 "0"}) == kExitOk);
    CHECK(warnings.messages.size() == 1);
  }

  TEST_CASE("train writes a loadable bundle") {
    const auto& w = workspace();
    const auto bundle = load_bundle(w.model);
    CHECK(bundle.model.label_set == std::vector<std::string>{"0", "1"});
    CHECK(bundle.model.submodels.size() == 2);
    CHECK(bundle.model.submodels[0].states() == 9);
    CHECK(bundle.model.metric.dims() == 6);
    CHECK(bundle.model.metric.constraint_satisfied(1e-12));
    CHECK(bundle.svm.has_value());
  }

  TEST_CASE("train is byte-deterministic and honours --no-relevance") {
    const auto& w = workspace();
    const auto dir = testing::scratch_dir("cli_train");
    const std::vector<std::string> base{"train", "--data", w.data.string(), "--max-epochs", "12", "--relevance-start",
                                        "3", "--grid-rows", "3", "--grid-cols", "3", "--basis-rows", "2",
                                        "--basis-cols", "2"};
    auto again = base;
    again.insert(again.end(), {"--out", (dir / "again.json").string()});
    REQUIRE(cli(again) == kExitOk);
    CHECK(slurp(dir / "again.json") == slurp(w.model));

    auto frozen = base;
    frozen.insert(frozen.end(), {"--out", (dir / "frozen.json").string(), "--no-relevance"});
    REQUIRE(cli(frozen) == kExitOk);
    const auto m = load_bundle(dir / "frozen.json").model;
    CHECK(m.metric.lambda == MetricParams::uniform(6, MetricKind::diagonal).lambda);

    // A JSON config is overridden by explicit flags.
    std::ofstream(dir / "cfg.json") << R"({"max_epochs": 2, "grid_rows": 2})";
    REQUIRE(cli({"train", "--data", w.data.string(), "--out", (dir / "cfg_model.json").string(), "--config",
                 (dir / "cfg.json").string(), "--grid-rows", "3", "--grid-cols", "3", "--basis-rows", "2",
                 "--basis-cols", "2"}) == kExitOk);
    const auto c = load_bundle(dir / "cfg_model.json").model;
    CHECK(c.log.epochs <= 2);
    CHECK(c.config.grid_rows == 3);
  }

  TEST_CASE("predict emits one row per sample") {
    const auto& w = workspace();
    const auto out = w.dir / "pred.csv";
    REQUIRE(cli({"predict", "--model", w.model.string(), "--data", w.data.string(), "--out", out.string()}) ==
            kExitOk);
    CHECK(slurp(out).rfind("# schema=tempomap-predictions-1\n", 0) == 0);
    const auto rows = read_rows(out);
    REQUIRE(rows.size() == 17);
    const auto& header = rows[0];
    const auto pred = column(header, "predicted_label");
    const auto ml = column(header, "ml_label");
    const auto ll0 = column(header, "loglik_0");
    const auto ll1 = column(header, "loglik_1");
    int correct = 0;
    const auto data = load_csv(w.data);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      REQUIRE(rows[i].size() == header.size());
      CHECK((rows[i][pred] == "0" || rows[i][pred] == "1"));
      CHECK((rows[i][ml] == "0" || rows[i][ml] == "1"));
      const double a = std::stod(rows[i][ll0]);
      const double b = std::stod(rows[i][ll1]);
      CHECK(rows[i][ml] == (a >= b ? "0" : "1"));
      correct += rows[i][pred] == data.labels[i - 1];
    }
    CHECK(correct >= 14);
  }

  TEST_CASE("predict rejects a dimension mismatch") {
    const auto& w = workspace();
    const auto other = w.dir / "other.csv";
    REQUIRE(cli({"simulate", "--out", other.string(), "--n-per-class", "3", "--d", "5", "--d-informative", "1"}) ==
            kExitOk);
    CHECK(cli({"predict", "--model", w.model.string(), "--data", other.string(), "--out",
               (w.dir / "x.csv").string()}) == kExitData);
  }

  TEST_CASE("export-map matches Viterbi decoding") {
    const auto& w = workspace();
    const auto out = w.dir / "map.csv";
    REQUIRE(cli({"export-map", "--model", w.model.string(), "--data", w.data.string(), "--out", out.string()}) ==
            kExitOk);
    const auto rows = read_rows(out);
    const auto bundle = load_bundle(w.model);
    const auto data = load_csv(w.data);
    const auto norm = prepare_for_model(bundle.model, data);
    REQUIRE(rows.size() == 1 + data.size() * 6);
    const auto& header = rows[0];
    const auto state = column(header, "state");
    const auto sub = column(header, "submodel");
    const auto is_start = column(header, "is_start");
    const auto is_end = column(header, "is_end");
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto& model = bundle.model.submodels[bundle.model.label_index(data.labels[n])];
      const auto path = viterbi_path(model, norm.sequences[n], bundle.model.metric);
      for (std::size_t t = 0; t < 6; ++t) {
        const auto& row = rows[1 + n * 6 + t];
        const int k = std::stoi(row[state]);
        CHECK(k >= 1);
        CHECK(k <= 9);
        CHECK(k == path[t] + 1);
        CHECK(row[sub] == data.labels[n]);
        CHECK(row[is_start] == (t == 0 ? "1" : "0"));
        CHECK(row[is_end] == (t == 5 ? "1" : "0"));
      }
    }
    CHECK(cli({"export-map", "--model", w.model.string(), "--data", w.data.string(), "--out", out.string(),
               "--submodel", "7"}) == kExitUsage);
  }

  TEST_CASE("relevance export flags features above the threshold") {
    const auto& w = workspace();
    const auto out = w.dir / "rel.csv";
    REQUIRE(cli({"relevance", "--model", w.model.string(), "--out", out.string()}) == kExitOk);
    const auto rows = read_rows(out);
    REQUIRE(rows.size() == 7);
    CHECK(rows[0] ==
          std::vector<std::string>{"feature_name", "relevance_mean", "relevance_min", "relevance_std", "selected"});
    const auto first = slurp(out).substr(0, slurp(out).find('\n'));
    const double zeta = std::stod(first.substr(first.find("zeta=") + 5));
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i][4] == (std::stod(rows[i][1]) > zeta ? "1" : "0"));
    }
    CHECK(cli({"relevance", "--out", out.string()}) == kExitUsage);
  }

  TEST_CASE("crossval writes report, summary and relevance files") {
    const auto& w = workspace();
    const auto dir = testing::scratch_dir("cli_cv");
    REQUIRE(cli({"crossval", "--data", w.data.string(), "--out-dir", dir.string(), "--folds", "2", "--reps", "2",
                 "--max-epochs", "6", "--relevance-start", "2", "--grid-rows", "3", "--grid-cols", "3",
                 "--basis-rows", "2", "--basis-cols", "2", "--threads", "2"}) == kExitOk);
    const auto report = report_from_json(read_json(dir / "cv_report.json"));
    CHECK(report.svm_accuracy.size() == 4);
    const auto summary = read_rows(dir / "cv_summary.csv");
    REQUIRE(summary.size() == 3);
    CHECK(summary[1][0] == "svm");
    CHECK(std::stod(summary[1][1]) == doctest::Approx(report.svm_mean));
    CHECK(read_rows(dir / "relevance.csv").size() == 7);

    const auto rel = dir / "from_report.csv";
    REQUIRE(cli({"relevance", "--report", (dir / "cv_report.json").string(), "--out", rel.string()}) == kExitOk);
    CHECK(slurp(rel) == slurp(dir / "relevance.csv"));
  }

  TEST_CASE("exit codes") {
    const auto& w = workspace();
    CHECK(cli({}) == kExitUsage);
    CHECK(cli({"frobnicate"}) == kExitUsage);
    CHECK(cli({"train", "--data", w.data.string()}) == kExitUsage);
    CHECK(cli({"train", "--data", w.data.string(), "--out", "x.json", "--grid-rows", "0"}) == kExitUsage);
    CHECK(cli({"train", "--data", (w.dir / "missing.csv").string(), "--out", (w.dir / "m.json").string()}) ==
          kExitData);
    CHECK(cli({"predict", "--model", w.data.string(), "--data", w.data.string(), "--out",
               (w.dir / "p.csv").string()}) == kExitData);
    CHECK(cli({"--help"}) == kExitOk);

    CHECK(run_binary("--help") == kExitOk);
    CHECK(run_binary("frobnicate") == kExitUsage);
    CHECK(run_binary("predict --model /nonexistent.json --data " + w.data.string() + " --out /dev/null") ==
          kExitData);
  }
}
