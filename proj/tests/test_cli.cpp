#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "emseg/dataset_io.hpp"

using namespace emseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("emseg_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(EMSEG_BIN_PATH) + " " + args + " >" + log + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string gen_config_text() {
  return "classes = 4\nfeature_dim = 5\nmu = [14]\nk_min = 3\nk_max = 5\n"
         "sigma = 0.6\nsep = 2.0\nseed = 7\nannotate = \"tss\"\n";
}

std::string train_config_text() {
  return "n_init = 40\nn_max = 4\nm_iters = 2\nlr = 0.4\nline_search = true\n"
         "init_optimizer = \"adam\"\nseed = 7\n";
}

}  // namespace

TEST_CASE("cli end-to-end: generate, train, evaluate, inspect") {
  TempDir dir;
  atomic_write(dir.file("gen.toml"), gen_config_text());
  atomic_write(dir.file("train.toml"), train_config_text());

  REQUIRE(run("generate --config " + dir.file("gen.toml") + " --n 6 --out " +
                  dir.file("data.jsonl"),
              dir.file("gen.log")) == 0);
  CHECK(fs::exists(dir.file("data.jsonl")));
  CHECK(fs::exists(dir.file("stats.json")));
  CHECK(fs::exists(dir.file("manifest.json")));
  const Corpus corpus = load_corpus_jsonl(dir.file("data.jsonl"));
  CHECK(corpus.videos.size() == 6);
  CHECK(corpus.fully_annotated());

  const std::string out = dir.file("run");
  REQUIRE(run("train --mode em-tss --config " + dir.file("train.toml") + " --data " +
                  dir.file("data.jsonl") + " --out " + out + " --jobs 2",
              dir.file("train.log")) == 0);
  CHECK(fs::exists(out + "/params.json"));
  CHECK(fs::exists(out + "/diagnostics.csv"));
  CHECK(fs::exists(out + "/metrics.json"));
  CHECK(fs::exists(out + "/predictions.jsonl"));
  CHECK(fs::exists(out + "/manifest.json"));

  const json metrics = json::parse(read_file(out + "/metrics.json"));
  CHECK(metrics.contains("mof"));
  CHECK(metrics.contains("edit"));
  CHECK(metrics.contains("f1_10"));
  CHECK(metrics.contains("f1_25"));
  CHECK(metrics.contains("f1_50"));
  CHECK(metrics.contains("boundary_error_pct"));

  REQUIRE(run("evaluate --pred " + out + "/predictions.jsonl --data " + dir.file("data.jsonl") +
                  " --out " + dir.file("metrics2.json"),
              dir.file("eval.log")) == 0);
  const json m2 = json::parse(read_file(dir.file("metrics2.json")));
  CHECK(m2["mof"] == metrics["mof"]);

  REQUIRE(run("inspect-posterior --data " + dir.file("data.jsonl") + " --params " + out +
                  "/params.json --mode em-tss --out " + dir.file("inspect"),
              dir.file("inspect.log")) == 0);
  CHECK(fs::exists(dir.file("inspect") + "/weights.csv"));
  CHECK(fs::exists(dir.file("inspect") + "/posterior.csv"));

  REQUIRE(run("inspect-posterior --data " + dir.file("data.jsonl") + " --params " + out +
                  "/params.json --mode em-gen --out " + dir.file("inspect_gen"),
              dir.file("inspect2.log")) == 0);
  CHECK(fs::exists(dir.file("inspect_gen") + "/case_mass.csv"));

  // weights.csv rows sum to one per frame
  std::ifstream wcsv(dir.file("inspect") + "/weights.csv");
  std::string line;
  std::getline(wcsv, line);
  CHECK(line == "frame,class,weight");
}

TEST_CASE("cli determinism: identical runs produce identical outputs") {
  TempDir dir;
  atomic_write(dir.file("gen.toml"), gen_config_text());
  atomic_write(dir.file("train.toml"), train_config_text());
  REQUIRE(run("generate --config " + dir.file("gen.toml") + " --n 4 --out " +
                  dir.file("data.jsonl"),
              dir.file("gen.log")) == 0);
  // Identical command (including --out) run twice: equal manifests must
  // mean equal outputs.
  const std::string train_cmd = "train --mode em-tss --config " + dir.file("train.toml") +
                                " --data " + dir.file("data.jsonl") + " --out " +
                                dir.file("run");
  REQUIRE(run(train_cmd, dir.file("a.log")) == 0);
  const std::string params_a = read_file(dir.file("run") + "/params.json");
  const std::string diags_a = read_file(dir.file("run") + "/diagnostics.csv");
  const std::string manifest_a = read_file(dir.file("run") + "/manifest.json");
  REQUIRE(run(train_cmd, dir.file("b.log")) == 0);
  CHECK(read_file(dir.file("run") + "/manifest.json") == manifest_a);
  CHECK(read_file(dir.file("run") + "/params.json") == params_a);
  CHECK(read_file(dir.file("run") + "/diagnostics.csv") == diags_a);

  // Same generate run reproduces the corpus bytes.
  REQUIRE(run("generate --config " + dir.file("gen.toml") + " --n 4 --out " +
                  dir.file("data2.jsonl"),
              dir.file("gen2.log")) == 0);
  CHECK(read_file(dir.file("data.jsonl")) == read_file(dir.file("data2.jsonl")));
}

TEST_CASE("cli failure paths exit nonzero with diagnostics") {
  TempDir dir;
  CHECK(run("train --mode em-tss --data /nonexistent.jsonl --out " + dir.file("x"),
            dir.file("t1.log")) != 0);
  CHECK(run("frobnicate", dir.file("t2.log")) != 0);

  atomic_write(dir.file("bad.jsonl"), "{\"id\": \"a\"}\n");
  CHECK(run("train --mode em-tss --data " + dir.file("bad.jsonl") + " --out " + dir.file("y"),
            dir.file("t3.log")) != 0);
  const std::string log = read_file(dir.file("t3.log"));
  CHECK(log.find(":1:") != std::string::npos);  // line-numbered message

  atomic_write(dir.file("bad.toml"), "lr == 0.1\n");
  atomic_write(dir.file("ok.jsonl"),
               "{\"id\": \"a\", \"features\": [[1.0],[2.0]], \"labels\": [0,1], "
               "\"stamps\": [[0,0],[1,1]], \"mode\": \"tss\"}\n");
  CHECK(run("train --mode em-tss --config " + dir.file("bad.toml") + " --data " +
                dir.file("ok.jsonl") + " --out " + dir.file("z"),
            dir.file("t4.log")) != 0);

  atomic_write(dir.file("unknown.toml"), "not_a_key = 3\n");
  CHECK(run("train --mode em-tss --config " + dir.file("unknown.toml") + " --data " +
                dir.file("ok.jsonl") + " --out " + dir.file("w"),
            dir.file("t5.log")) != 0);
  CHECK(read_file(dir.file("t5.log")).find("unknown config keys") != std::string::npos);
}

TEST_CASE("cli --version and --help") {
  TempDir dir;
  CHECK(run("--version", dir.file("v.log")) == 0);
  CHECK(read_file(dir.file("v.log")).find("emseg") != std::string::npos);
  CHECK(run("--help", dir.file("h.log")) == 0);
  const std::string help = read_file(dir.file("h.log"));
  CHECK(help.find("generate") != std::string::npos);
  CHECK(help.find("train") != std::string::npos);
  CHECK(help.find("evaluate") != std::string::npos);
  CHECK(help.find("inspect-posterior") != std::string::npos);
}
