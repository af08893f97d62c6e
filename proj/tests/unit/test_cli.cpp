#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "commands.hpp"
#include "prefrobust/error.hpp"
#include "prefrobust/policy.hpp"
#include "run_record.hpp"

namespace fs = std::filesystem;
using namespace prefrobust::cli;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("prefrobust-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name) << content;
    return file(name);
  }

 private:
  fs::path path_;
};

struct Outcome {
  int code;
  std::string err;
};

Outcome run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, err.str()};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& path) {
  const auto text = read_text(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const char* const kTinyWorld =
    "n_tasks = 1\ncandidates_per_task = 5\npairs_per_task = 1\nrepeats = 3\nseed = 2\n"
    "env.n_arms = 6\nenv.budget = 1\nenv.horizon = 3\n";

const char* const kDeterministicArm =
    "{\"transitions\": [[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [0.0, 1.0]]], \"features\": {}}\n";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2") {
    CHECK(run_cli({}).code == kExitInput);
    CHECK(run_cli({"bogus"}).code == kExitInput);
    CHECK(run_cli({"gen-data", "--out", "x"}).code == kExitInput);
  }

  TEST_CASE("gen-data: tiny manifest, malformed manifest, sidecar and rerun hash") {
    TempDir dir;
    const auto cfg = dir.write("m.cfg", kTinyWorld);
    const auto out = dir.file("d.jsonl");
    REQUIRE(run_cli({"gen-data", "--config", cfg, "--out", out}).code == kExitOk);
    CHECK(count_lines(out) == 1);
    CHECK(fs::exists(out + ".tasks.json"));
    CHECK(fs::exists(out + ".run.json"));
    const auto first = git_blob_hash_file(out);
    REQUIRE(run_cli({"gen-data", "--config", cfg, "--out", out, "--jobs", "3"}).code == kExitOk);
    CHECK(git_blob_hash_file(out) == first);

    const auto bad = dir.write("bad.cfg", "n_tasks = two\n");
    const auto r = run_cli({"gen-data", "--config", bad, "--out", dir.file("e.jsonl")});
    CHECK(r.code == kExitInput);
    CHECK(r.err.find("n_tasks") != std::string::npos);
    CHECK(run_cli(
              {"gen-data", "--config", dir.write("u.cfg", "n_tasks = 1\ncolour = red\n"), "--out", dir.file("e.jsonl")})
              .code == kExitInput);
    CHECK(run_cli({"gen-data", "--config", dir.file("missing.cfg"), "--out", dir.file("e.jsonl")}).code == kExitInput);
  }

  TEST_CASE("train: epochs=0 keeps the initialisation; bad methods exit 2") {
    TempDir dir;
    const auto data = dir.file("d.jsonl");
    REQUIRE(run_cli({"gen-data", "--config", dir.write("m.cfg", kTinyWorld), "--out", data}).code == kExitOk);
    const std::string env_keys = "env.n_arms = 6\nenv.budget = 1\nenv.horizon = 3\n";

    const auto zero = dir.write("z.cfg", env_keys + "train.method = dpo-pro\ntrain.rho = 0.1\ntrain.epochs = 0\n");
    const auto ckpt = dir.file("c.json");
    REQUIRE(run_cli({"train", "--config", zero, "--data", data, "--out", ckpt}).code == kExitOk);
    std::ifstream in(ckpt);
    const auto c = prefrobust::policy::read_checkpoint(in);
    CHECK(c.theta == c.theta_ref);
    for (double v : c.theta) CHECK(v == 0.0);
    CHECK(count_lines(ckpt + ".metrics.csv") == 1);

    const auto eps = dir.write("r.cfg", env_keys + "train.method = rdpo\ntrain.eps = 0.5\n");
    CHECK(run_cli({"train", "--config", eps, "--data", data, "--out", dir.file("r.json")}).code == kExitInput);
    const auto ipo = dir.write("i.cfg", env_keys + "train.method = ipo\n");
    CHECK(run_cli({"train", "--config", ipo, "--data", data, "--out", dir.file("i.json")}).code == kExitInput);
    CHECK(run_cli({"train", "--config", eps, "--data", dir.file("none.jsonl"), "--out", dir.file("n.json")}).code ==
          kExitInput);

    const auto blowup =
        dir.write("x.cfg", env_keys + "train.method = dpo\ntrain.learning_rate = 1e308\ntrain.beta = 1e10\n");
    const auto r = run_cli({"train", "--config", blowup, "--data", data, "--out", dir.file("x.json")});
    CHECK(r.code == kExitNumeric);
    CHECK(r.err.find("sample 0") != std::string::npos);

    const auto ok = dir.write("o.cfg", env_keys + "train.method = dpo-pro\ntrain.rho = 0.1\ntrain.epochs = 3\n");
    REQUIRE(run_cli({"train", "--config", ok, "--data", data, "--out", ckpt}).code == kExitOk);
    const auto eval_cfg = dir.write("e.cfg", env_keys + "eval.pool_size = 3\neval.pools = 2\n");
    const auto report = dir.file("report.json");
    REQUIRE(run_cli({"eval", "--checkpoint", ckpt, "--data", data, "--config", eval_cfg, "--out", report}).code ==
            kExitOk);
    CHECK(read_text(report).find("\"win_rate\"") != std::string::npos);
    CHECK(fs::exists(dir.file("report.csv")));
  }

  TEST_CASE("whittle: examples and errors") {
    TempDir dir;
    const auto program = dir.write("p.txt", "s\n");
    const auto arms = dir.write("a.jsonl", kDeterministicArm);
    const auto out = dir.file("w.csv");
    REQUIRE(run_cli({"whittle", "--env", arms, "--program", program, "--discount", "0.5", "--out", out}).code ==
            kExitOk);
    std::istringstream rows(read_text(out));
    std::string header, r0, r1;
    std::getline(rows, header);
    std::getline(rows, r0);
    std::getline(rows, r1);
    CHECK(header == "arm,state,index");
    CHECK(std::abs(std::stod(r0.substr(4)) - 1.0) <= 1e-5);
    CHECK(std::abs(std::stod(r1.substr(4))) <= 1e-5);

    const auto flat = dir.write(
        "f.jsonl", "{\"transitions\": [[[0.3, 0.7], [0.3, 0.7]], [[0.6, 0.4], [0.6, 0.4]]], \"features\": {}}\n");
    REQUIRE(run_cli({"whittle", "--env", flat, "--program", program, "--out", out}).code == kExitOk);
    std::istringstream flat_rows(read_text(out));
    std::getline(flat_rows, header);
    for (std::string line; std::getline(flat_rows, line);) CHECK(std::abs(std::stod(line.substr(4))) <= 1e-5);

    const auto bad = dir.write(
        "b.jsonl", "{\"transitions\": [[[0.5, 0.6], [0.3, 0.7]], [[0.6, 0.4], [0.6, 0.4]]], \"features\": {}}\n");
    CHECK(run_cli({"whittle", "--env", bad, "--program", program, "--out", out}).code == kExitInput);
    CHECK(run_cli({"whittle", "--env", arms, "--program", dir.write("q.txt", "return s"), "--out", out}).code ==
          kExitInput);
  }

  TEST_CASE("gen-data: full-scale manifest") {
    TempDir dir;
    const auto cfg = dir.write("p.cfg", "n_tasks = 190\ncandidates_per_task = 20\npairs_per_task = 50\nrepeats = 10\n");
    REQUIRE(run_cli({"gen-data", "--config", cfg, "--out", dir.file("d.jsonl"), "--jobs", "4"}).code == kExitOk);
    CHECK(count_lines(dir.file("d.jsonl")) == 9500);
  }

  TEST_CASE("error classes map to exit codes") {
    std::ostringstream err;
    CHECK(report_error(std::make_exception_ptr(prefrobust::ModelAssumptionError("arm 3: not indexable")), err) ==
          kExitModelAssumption);
    CHECK(err.str().find("arm 3") != std::string::npos);
    CHECK(report_error(std::make_exception_ptr(prefrobust::NumericError("nan")), err) == kExitNumeric);
    CHECK(report_error(std::make_exception_ptr(prefrobust::ParseError("bad", 2)), err) == kExitInput);
    CHECK(report_error(std::make_exception_ptr(std::runtime_error("other")), err) == kExitFailure);
  }

  TEST_CASE("sweep: row counts") {
    TempDir dir;
    const auto cfg =
        dir.write("s.cfg", std::string(kTinyWorld) + "train.epochs = 2\neval.pool_size = 3\neval.pools = 1\n");
    REQUIRE(run_cli({"sweep", "--config", cfg, "--out", dir.file(""), "--alphas", "0.3", "--methods", "dpo", "--seeds",
                     "0"})
                .code == kExitOk);
    CHECK(count_lines(dir.file("sweep.csv")) == 2);
    REQUIRE(run_cli({"sweep", "--config", cfg, "--out", dir.file(""), "--alphas", "0,0.3", "--methods", "dpo,dpo-pro",
                     "--seeds", "0-9", "--jobs", "4"})
                .code == kExitOk);
    const auto text = read_text(dir.file("sweep.csv"));
    CHECK(count_lines(dir.file("sweep.csv")) == 41);
    CHECK(text.rfind("method,noise,seed,win_rate,eval_reward,status\n", 0) == 0);
    CHECK(text.find(",error") == std::string::npos);
    CHECK(run_cli({"sweep", "--config", cfg, "--out", dir.file(""), "--methods", "ipo"}).code == kExitInput);
  }

  TEST_CASE("coef-curve writes one row per grid point") {
    TempDir dir;
    const auto out = dir.file("c.csv");
    REQUIRE(run_cli({"coef-curve", "--rhos", "0.1,4", "--step", "0.01", "--out", out}).code == kExitOk);
    CHECK(count_lines(out) == 1 + 2 * 101);
    CHECK(run_cli({"coef-curve", "--step", "0", "--out", out}).code == kExitInput);
  }
}
