#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <CLI11.hpp>
#include <json.hpp>

#include "experiment.hpp"
#include "prefrobust/dro.hpp"
#include "prefrobust/error.hpp"
#include "prefrobust/format.hpp"
#include "run_record.hpp"
#include "sweep.hpp"

namespace prefrobust::cli {
namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::optional<std::string> config;
  std::optional<std::string> data;
  std::optional<std::string> env;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write " + path.string());
  f << content;
  if (!f) throw InputError("write failed for " + path.string());
}

KeyValueConfig load_config(const std::optional<std::string>& path) {
  return path ? KeyValueConfig::load(*path) : KeyValueConfig{};
}

std::vector<prefdata::PreferenceSample> load_data(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  return prefdata::read_jsonl(in);
}

std::optional<fs::path> optional_path(const std::optional<std::string>& p) {
  return p ? std::optional<fs::path>(*p) : std::nullopt;
}

class Recorder {
 public:
  Recorder(std::string command_line) : start_(std::chrono::steady_clock::now()) {
    record_.command_line = std::move(command_line);
  }

  void input(const fs::path& p) { record_.inputs.push_back(p); }
  void output(const fs::path& p) { record_.outputs.push_back(p); }
  void config(const KeyValueConfig& cfg) { record_.config_hash = git_blob_hash(cfg.to_string()); }
  void seed(std::uint64_t s) { record_.seed = s; }

  void finish() {
    record_.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    record_.write_sidecars();
  }

 private:
  RunRecord record_;
  std::chrono::steady_clock::time_point start_;
};

void cmd_make_env(const CommonOptions& o, Recorder& rec) {
  KeyValueConfig cfg = load_config(o.config);
  cfg.reject_unknown(environment_keys());
  if (o.seed) cfg.set("env.seed", std::to_string(*o.seed));
  const auto env = load_environment(std::nullopt, cfg);
  std::ostringstream ss;
  rmab::write_arms_jsonl(ss, env.arms);
  write_file(*o.out, ss.str());
  rec.config(cfg);
  rec.seed(cfg.get_uint("env.seed", rmab::DeskEnvironmentOptions{}.seed));
  rec.output(*o.out);
}

void cmd_gen_data(const CommonOptions& o, Recorder& rec) {
  KeyValueConfig cfg = load_config(o.config);
  std::set<std::string> allowed(prefdata::DatasetManifest::config_keys().begin(),
                                prefdata::DatasetManifest::config_keys().end());
  allowed.insert(environment_keys().begin(), environment_keys().end());
  cfg.reject_unknown(allowed);
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  const auto manifest = prefdata::DatasetManifest::from_config(cfg);
  const auto env = load_environment(optional_path(o.env), cfg);

  const Dataset d = generate(manifest, env, o.jobs);
  std::ostringstream data, tasks;
  prefdata::write_jsonl(data, d.samples);
  prefdata::write_tasks_json(tasks, d.tasks);
  const fs::path out = *o.out;
  const fs::path tasks_path = out.string() + ".tasks.json";
  write_file(out, data.str());
  write_file(tasks_path, tasks.str());
  spdlog::info("wrote {} samples over {} tasks to {}", d.samples.size(), d.tasks.size(), out.string());

  rec.config(cfg);
  rec.seed(manifest.seed);
  if (o.config) rec.input(*o.config);
  if (o.env) rec.input(*o.env);
  rec.output(out);
  rec.output(tasks_path);
}

void cmd_train(const CommonOptions& o, Recorder& rec) {
  KeyValueConfig cfg = load_config(o.config);
  for (const auto& [key, value] : cfg.entries()) {
    const bool ok = key.starts_with("train.") || key.starts_with("noise.") || environment_keys().contains(key);
    if (!ok) throw InputError("config key " + key + " is not valid for train");
  }
  if (o.seed) cfg.set("train.seed", std::to_string(*o.seed));
  const auto config = trainer::TrainConfig::from_config(cfg);
  const auto noise_spec = noise::NoiseSpec::from_config(cfg);
  const auto env = load_environment(optional_path(o.env), cfg);

  const auto clean = load_data(*o.data);
  const auto noisy = noise::apply_noise(clean, noise_spec);
  const auto featurizer = make_featurizer(env, clean);
  policy::LogLinearPolicy pol(featurizer);
  const auto result = trainer::train(config, noisy, pol, o.jobs);

  std::ostringstream ckpt, metrics;
  policy::write_checkpoint(ckpt, policy::make_checkpoint(pol, featurizer->id()));
  trainer::write_metrics_csv(metrics, result.log);
  const fs::path out = *o.out;
  const fs::path metrics_path = out.string() + ".metrics.csv";
  write_file(out, ckpt.str());
  write_file(metrics_path, metrics.str());
  if (!result.log.empty()) {
    spdlog::info("{}: final loss {} mean |margin| {}", trainer::to_string(config.method), result.log.back().loss,
                 result.log.back().mean_abs_margin);
  }

  rec.config(cfg);
  rec.seed(config.seed);
  if (o.config) rec.input(*o.config);
  rec.input(*o.data);
  if (o.env) rec.input(*o.env);
  rec.output(out);
  rec.output(metrics_path);
}

void cmd_eval(const CommonOptions& o, const std::string& checkpoint_path, std::optional<std::string> tasks_path,
              Recorder& rec) {
  KeyValueConfig cfg = load_config(o.config);
  std::set<std::string> allowed = eval_keys();
  allowed.insert(environment_keys().begin(), environment_keys().end());
  cfg.reject_unknown(allowed);
  if (o.seed) cfg.set("eval.seed", std::to_string(*o.seed));
  const auto settings = EvalSettings::from_config(cfg);
  const auto env = load_environment(optional_path(o.env), cfg);

  const auto data = load_data(*o.data);
  if (!tasks_path) tasks_path = *o.data + ".tasks.json";
  std::ifstream tin(*tasks_path);
  if (!tin) throw InputError("cannot read " + *tasks_path);
  const auto tasks = prefdata::read_tasks_json(tin);

  std::ifstream cin_(checkpoint_path);
  if (!cin_) throw InputError("cannot read " + checkpoint_path);
  const auto ckpt = policy::read_checkpoint(cin_);
  const auto featurizer = make_featurizer(env, data);
  if (ckpt.featurizer_id != featurizer->id()) {
    throw InputError("checkpoint featurizer '" + ckpt.featurizer_id + "' does not match the data ('" +
                     featurizer->id() + "')");
  }
  policy::LogLinearPolicy pol(featurizer, ckpt.theta, ckpt.theta_ref);

  const auto eval_tasks =
      evalmetrics::make_eval_tasks(tasks, data, rmab::desk_feature_categories(), settings.pool_size, settings.pools,
                                   derive_seed(settings.seed, {1}), derive_seed(settings.seed, {2}));
  evalmetrics::EvalOptions opts;
  opts.rollouts = settings.rollouts;
  const auto report = evalmetrics::rmab_win_rate(pol, eval_tasks, env, opts, o.jobs);

  std::ostringstream json, csv;
  evalmetrics::write_report_json(json, report);
  evalmetrics::write_report_csv(csv, report);
  const fs::path out = *o.out;
  fs::path csv_path = out;
  csv_path.replace_extension(".csv");
  if (csv_path == out) csv_path = out.string() + ".csv";
  write_file(out, json.str());
  write_file(csv_path, csv.str());
  spdlog::info("win rate {} (se {}), eval reward {}", report.win_rate.value, report.win_rate.standard_error,
               report.eval_reward.value);

  rec.config(cfg);
  rec.seed(settings.seed);
  if (o.config) rec.input(*o.config);
  rec.input(*o.data);
  rec.input(*tasks_path);
  rec.input(checkpoint_path);
  if (o.env) rec.input(*o.env);
  rec.output(out);
  rec.output(csv_path);
}

void cmd_whittle(const CommonOptions& o, const std::string& program_path, std::optional<double> discount,
                 Recorder& rec) {
  KeyValueConfig cfg = load_config(o.config);
  cfg.reject_unknown({"env.discount"});
  if (discount) cfg.set("env.discount", format_double(*discount));
  // Indices are per arm; the budget only matters when the policy is rolled out.
  KeyValueConfig env_cfg = cfg;
  env_cfg.set("env.budget", "0");
  const auto env = load_environment(fs::path(*o.env), env_cfg);

  std::string source = read_file(program_path);
  while (!source.empty() && (source.back() == '\n' || source.back() == '\r' || source.back() == ' ')) source.pop_back();
  if (source.find('\n') != std::string::npos) throw InputError("reward program must be a single line");
  const auto program = rmab::parse_reward(source, env.feature_names());

  const auto table = rmab::whittle_table(env, program, {}, o.jobs);
  std::ostringstream csv;
  csv << "arm,state,index\n";
  for (std::size_t arm = 0; arm < table.index.size(); ++arm) {
    for (int s = 0; s < 2; ++s) csv << arm << ',' << s << ',' << format_double(table.at(arm, s)) << '\n';
  }
  write_file(*o.out, csv.str());

  rec.config(cfg);
  if (o.config) rec.input(*o.config);
  rec.input(*o.env);
  rec.input(program_path);
  rec.output(*o.out);
}

void cmd_sweep(const CommonOptions& o, const std::optional<std::string>& alphas,
               const std::optional<std::string>& methods, const std::optional<std::string>& seeds, Recorder& rec) {
  KeyValueConfig cfg = load_config(o.config);
  if (alphas) cfg.set("sweep.alphas", *alphas);
  if (methods) cfg.set("sweep.methods", *methods);
  if (seeds) cfg.set("sweep.seeds", *seeds);
  if (o.seed) cfg.set("sweep.seeds", std::to_string(*o.seed));
  const auto spec = SweepSpec::from_config(cfg);
  const auto env = load_environment(optional_path(o.env), cfg);

  const auto rows = run_sweep(spec, env, o.jobs);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  const fs::path out = fs::path(*o.out) / "sweep.csv";
  write_file(out, csv.str());
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.status != "ok";
  spdlog::info("sweep: {} cells, {} failed, results in {}", rows.size(), failed, out.string());

  rec.config(cfg);
  rec.seed(spec.seeds.front());
  if (o.config) rec.input(*o.config);
  if (o.env) rec.input(*o.env);
  rec.output(out);
}

void cmd_coef_curve(const CommonOptions& o, const std::string& rhos, double step, Recorder& rec) {
  if (!(step > 0.0 && step <= 0.5)) throw InputError("--step must lie in (0, 0.5]");
  const auto values = parse_alpha_list(rhos);
  std::ostringstream csv;
  csv << "rho,q,coefficient_toward_one,coefficient_toward_zero\n";
  const auto n = static_cast<std::size_t>(std::llround(1.0 / step));
  for (double rho : values) {
    if (!(rho >= 0.0)) throw InputError("rho must be >= 0");
    for (std::size_t i = 0; i <= n; ++i) {
      const double q = std::min(1.0, static_cast<double>(i) * step);
      csv << format_double(rho) << ',' << format_double(q) << ','
          << format_double(dro::regularizer_coefficient(q, rho, dro::Direction::toward_one)) << ','
          << format_double(dro::regularizer_coefficient(q, rho, dro::Direction::toward_zero)) << '\n';
    }
  }
  write_file(*o.out, csv.str());
  KeyValueConfig cfg;
  cfg.set("rhos", rhos);
  cfg.set("step", format_double(step));
  rec.config(cfg);
  rec.output(*o.out);
}

std::string join_args(const std::vector<std::string>& args) {
  std::string s = "prefrobust";
  for (const auto& a : args) s += " " + a;
  return s;
}

}  // namespace

void configure_logging() {
  auto logger = spdlog::get("prefrobust");
  if (!logger) logger = spdlog::stderr_color_mt("prefrobust");
  spdlog::set_default_logger(logger);
  const char* level = std::getenv("PREFROBUST_LOG");
  const std::string name = level ? level : "info";
  if (name == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (name == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (name != "info") spdlog::warn("PREFROBUST_LOG='{}' not recognised; using info", name);
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributionally robust preference optimisation toolkit", "prefrobust"};
  app.require_subcommand(1);

  CommonOptions o;
  auto add_jobs = [&](CLI::App* cmd) {
    cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
  };

  auto* make_env = app.add_subcommand("make-env", "Write the synthetic desk environment as arms JSONL");
  make_env->add_option("--config", o.config, "key=value file with env.* keys");
  make_env->add_option("--seed", o.seed, "Environment seed (overrides env.seed)");
  make_env->add_option("--out", o.out, "Output arms JSONL")->required();

  auto* gen = app.add_subcommand("gen-data", "Generate a preference dataset");
  gen->add_option("--config", o.config, "Dataset manifest")->required();
  gen->add_option("--env", o.env, "Arms JSONL (default: synthetic desk environment)");
  gen->add_option("--out", o.out, "Output JSONL")->required();
  gen->add_option("--seed", o.seed, "Data seed (overrides the manifest)");
  add_jobs(gen);

  auto* train = app.add_subcommand("train", "Train a policy on a preference dataset");
  train->add_option("--config", o.config, "Training config")->required();
  train->add_option("--data", o.data, "Dataset JSONL")->required();
  train->add_option("--env", o.env, "Arms JSONL defining the feature set");
  train->add_option("--out", o.out, "Output checkpoint JSON")->required();
  train->add_option("--seed", o.seed, "Training seed (overrides train.seed)");
  add_jobs(train);

  std::string checkpoint;
  std::optional<std::string> tasks;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the RMAB benchmark");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  eval->add_option("--data", o.data, "Clean dataset JSONL providing references")->required();
  eval->add_option("--tasks", tasks, "Tasks JSON (default: <data>.tasks.json)");
  eval->add_option("--config", o.config, "key=value file with eval.* and env.* keys");
  eval->add_option("--env", o.env, "Arms JSONL");
  eval->add_option("--out", o.out, "Output report JSON")->required();
  eval->add_option("--seed", o.seed, "Evaluation seed (overrides eval.seed)");
  add_jobs(eval);

  std::string program;
  std::optional<double> discount;
  auto* whittle = app.add_subcommand("whittle", "Per-arm Whittle index table");
  whittle->add_option("--env", o.env, "Arms JSONL")->required();
  whittle->add_option("--program", program, "Reward program text file")->required();
  whittle->add_option("--config", o.config, "key=value file with env.* keys");
  whittle->add_option("--discount", discount, "Discount factor (default 0.9)");
  whittle->add_option("--out", o.out, "Output CSV")->required();
  add_jobs(whittle);

  std::optional<std::string> alphas, methods, seeds;
  auto* sweep = app.add_subcommand("sweep", "Noise x method x seed grid");
  sweep->add_option("--config", o.config, "Sweep config")->required();
  sweep->add_option("--env", o.env, "Arms JSONL");
  sweep->add_option("--out", o.out, "Output directory")->required();
  sweep->add_option("--alphas", alphas, "Comma-separated noise levels");
  sweep->add_option("--methods", methods, "Comma-separated methods");
  sweep->add_option("--seeds", seeds, "Comma-separated seeds or ranges such as 0-9");
  sweep->add_option("--seed", o.seed, "Single seed");
  add_jobs(sweep);

  std::string rhos = "0.1,4";
  double step = 1e-3;
  auto* coef = app.add_subcommand("coef-curve", "Uncertainty-weighted coefficient over a q grid");
  coef->add_option("--rhos", rhos, "Comma-separated radii");
  coef->add_option("--step", step, "q grid step");
  coef->add_option("--out", o.out, "Output CSV")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    Recorder rec(join_args(args));
    if (*make_env) {
      cmd_make_env(o, rec);
    } else if (*gen) {
      cmd_gen_data(o, rec);
    } else if (*train) {
      cmd_train(o, rec);
    } else if (*eval) {
      cmd_eval(o, checkpoint, tasks, rec);
    } else if (*whittle) {
      cmd_whittle(o, program, discount, rec);
    } else if (*sweep) {
      cmd_sweep(o, alphas, methods, seeds, rec);
    } else if (*coef) {
      cmd_coef_curve(o, rhos, step, rec);
    }
    rec.finish();
    return kExitOk;
  } catch (...) {
    return report_error(std::current_exception(), err);
  }
}

int report_error(std::exception_ptr error, std::ostream& err) {
  try {
    std::rethrow_exception(error);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ModelAssumptionError& e) {
    err << "model assumption violated: " << e.what() << '\n';
    return kExitModelAssumption;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitFailure;
  } catch (...) {
    err << "internal error: unknown exception\n";
    return kExitFailure;
  }
}

}  // namespace prefrobust::cli
