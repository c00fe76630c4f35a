#include "conther/cli/commands.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"

#include "conther/env/server.hpp"
#include "conther/error.hpp"
#include "conther/nets/checkpoint.hpp"
#include "conther/trainer/metrics.hpp"

namespace conther::cli {

namespace fs = std::filesystem;
using trainer::RunMetrics;
using trainer::TrainConfig;

namespace {

std::string utc_format(const char* fmt) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, fmt);
  return s.str();
}

// A fresh directory under root; appends -2, -3, ... on a name clash.
fs::path fresh_dir(const fs::path& root, const std::string& name) {
  fs::path dir = root / name;
  for (int i = 2; fs::exists(dir); ++i) dir = root / (name + "-" + std::to_string(i));
  return dir;
}

std::string format_number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string format_fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Assignments load_assignments(const std::string& config_path, const std::vector<std::string>& sets, Assignments& overrides) {
  Assignments file;
  if (!config_path.empty()) {
    try {
      file = load_config_file(config_path);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  for (const auto& s : sets) overrides.push_back(parse_override(s));
  return file;
}

fs::path output_root(const std::string& out) { return out.empty() ? default_output_root() : fs::path(out); }

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

}  // namespace

fs::path default_output_root() {
  const char* env = std::getenv("CONTHER_OUT");
  return (env && *env) ? fs::path(env) : fs::path("runs");
}

std::string run_dir_name(const std::string& timestamp, const std::string& variant, std::uint64_t seed) {
  return timestamp + "-" + variant + "-" + std::to_string(seed);
}

std::string utc_timestamp_compact() { return utc_format("%Y%m%dT%H%M%SZ"); }
std::string utc_timestamp_iso() { return utc_format("%Y-%m-%dT%H:%M:%SZ"); }

TrainConfig resolve_config(const Assignments& file, const Assignments& overrides, std::optional<std::uint64_t> seed) {
  Assignments all = file;
  all.insert(all.end(), overrides.begin(), overrides.end());
  if (seed) all.emplace_back("run.seed", std::to_string(*seed));
  return trainer::config_from_assignments(all);
}

TrainOutcome train_into(const TrainConfig& config, const fs::path& run_dir, std::ostream& log) {
  if (fs::exists(run_dir / "manifest.json")) {
    throw ContractError("run directory " + run_dir.string() + " already holds a run");
  }
  fs::create_directories(run_dir);
  TrainOutcome outcome;
  outcome.run_dir = run_dir;
  RunManifest& m = outcome.manifest;
  m.variant = config.variant;
  m.seed = config.seed;
  m.config = trainer::format_config(config);
  m.started = utc_timestamp_iso();
  m.status = "running";
  m.output_dir = run_dir.string();
  m.metrics = "metrics.jsonl";
  m.actor_checkpoint = "actor.ckpt";
  m.critic_checkpoint = "critic.ckpt";
  write_text_file(run_dir / "config.cfg", m.config);
  write_manifest(run_dir / "manifest.json", m);

  trainer::MetricsWriter writer(run_dir / m.metrics);
  trainer::TrainOptions options;
  options.metrics = &writer;
  options.checkpoint_dir = run_dir;
  options.failure_dir = run_dir;
  options.on_epoch = [&](const trainer::EpochMetrics& e) {
    log << config.variant << " seed " << config.seed << " epoch " << e.epoch << "/" << config.epochs
        << " reward " << format_fixed(e.mean_reward, 4) << " success " << format_fixed(e.success_rate, 4) << " ("
        << format_fixed(e.seconds, 1) << " s)\n"
        << std::flush;
  };
  try {
    outcome.metrics = trainer::train(config, options);
  } catch (const std::exception& e) {
    m.status = std::string("failed: ") + e.what();
    m.finished = utc_timestamp_iso();
    write_manifest(run_dir / "manifest.json", m);
    throw;
  }
  m.status = "completed";
  m.finished = utc_timestamp_iso();
  write_manifest(run_dir / "manifest.json", m);
  return outcome;
}

double final_success(const RunMetrics& metrics, std::size_t count) {
  if (metrics.epochs.empty()) throw ContractError("run has no epoch metrics");
  const std::size_t n = std::min(count, metrics.epochs.size());
  double sum = 0.0;
  for (std::size_t i = metrics.epochs.size() - n; i < metrics.epochs.size(); ++i) sum += metrics.epochs[i].success_rate;
  return sum / static_cast<double>(n);
}

std::string format_bench_table(const std::vector<std::string>& variants, const std::vector<BenchCell>& cells) {
  struct Row {
    std::size_t runs = 0, ok = 0;
    double sum = 0.0;
  };
  std::vector<Row> rows(variants.size());
  for (const auto& c : cells) {
    for (std::size_t i = 0; i < variants.size(); ++i) {
      if (variants[i] != c.variant) continue;
      ++rows[i].runs;
      if (c.final_success) {
        ++rows[i].ok;
        rows[i].sum += *c.final_success;
      }
    }
  }
  auto mean = [&](std::size_t i) -> std::optional<double> {
    if (rows[i].ok == 0) return std::nullopt;
    return rows[i].sum / static_cast<double>(rows[i].ok);
  };

  const bool compare = variants.size() > 1;
  std::size_t name_w = 7;
  for (const auto& v : variants) name_w = std::max(name_w, v.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_w + 2)) << "variant" << std::setw(8) << "runs" << std::setw(16)
      << "final5_success";
  if (compare) out << "vs_" << variants.front();
  out << '\n';
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto a = mean(i);
    out << std::left << std::setw(static_cast<int>(name_w + 2)) << variants[i] << std::setw(8)
        << (std::to_string(rows[i].ok) + "/" + std::to_string(rows[i].runs)) << std::setw(16)
        << (a ? format_fixed(*a, 4) : "FAILED");
    if (compare) {
      const auto b = mean(0);
      if (i == 0) {
        out << "-";
      } else if (!a || !b) {
        out << "n/a";
      } else if (*b == 0.0) {
        out << "n/a (baseline 0)";
      } else {
        const double rel = 100.0 * (*a - *b) / *b;
        out << (rel >= 0 ? "+" : "") << format_fixed(rel, 2) << "%";
      }
    }
    out << '\n';
  }
  for (const auto& c : cells) {
    if (!c.final_success) out << "FAILED " << c.variant << " seed " << c.seed << ": " << c.error << '\n';
  }
  return out.str();
}

std::size_t export_plots(const std::vector<fs::path>& run_dirs, const fs::path& out_dir, std::ostream& log) {
  struct Run {
    std::string name;
    RunMetrics metrics;
  };
  std::vector<Run> runs;
  std::map<std::string, int> names;
  for (const auto& dir : run_dirs) {
    const fs::path file = dir / "metrics.jsonl";
    if (!fs::exists(file)) {
      log << "warning: " << dir.string() << " has no metrics.jsonl, skipped\n";
      continue;
    }
    Run r;
    try {
      r.metrics = trainer::read_metrics(file);
    } catch (const std::exception& e) {
      log << "warning: " << dir.string() << ": " << e.what() << ", skipped\n";
      continue;
    }
    std::string base = fs::path(dir).lexically_normal().filename().string();
    if (base.empty()) base = fs::path(dir).lexically_normal().parent_path().filename().string();
    const int seen = names[base]++;
    r.name = seen == 0 ? base : base + "-" + std::to_string(seen + 1);
    runs.push_back(std::move(r));
  }

  fs::create_directories(out_dir);
  for (const auto& r : runs) {
    const fs::path dir = out_dir / r.name;
    fs::create_directories(dir);
    std::ofstream actor(dir / "actor_loss.csv"), critic(dir / "critic_loss.csv");
    std::ofstream reward(dir / "mean_reward.csv"), success(dir / "success_rate.csv");
    actor << "update_idx,epoch,actor_loss\n";
    critic << "update_idx,epoch,critic_loss\n";
    reward << "epoch,mean_reward\n";
    success << "epoch,success_rate\n";
    for (const auto& u : r.metrics.updates) {
      critic << u.update_idx << ',' << u.epoch << ',' << format_number(u.critic_loss) << '\n';
      if (u.actor_loss) actor << u.update_idx << ',' << u.epoch << ',' << format_number(*u.actor_loss) << '\n';
    }
    for (const auto& e : r.metrics.epochs) {
      reward << e.epoch << ',' << format_number(e.mean_reward) << '\n';
      success << e.epoch << ',' << format_number(e.success_rate) << '\n';
    }
    if (!actor || !critic || !reward || !success) throw std::runtime_error("cannot write plot data in " + dir.string());
  }

  // Aligned tables: one row per index, one column per run, empty where a run
  // has no value at that index.
  auto aligned = [&](const std::string& file, const std::string& index_name, auto extract) {
    std::map<std::size_t, std::vector<std::optional<double>>> table;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      for (const auto& [idx, v] : extract(runs[i].metrics)) {
        auto& row = table[idx];
        row.resize(runs.size());
        row[i] = v;
      }
    }
    std::ofstream out(out_dir / file);
    out << index_name;
    for (const auto& r : runs) out << ',' << r.name;
    out << '\n';
    for (auto& [idx, row] : table) {
      row.resize(runs.size());
      out << idx;
      for (const auto& v : row) out << ',' << (v ? format_number(*v) : "");
      out << '\n';
    }
    if (!out) throw std::runtime_error("cannot write " + (out_dir / file).string());
  };
  using Series = std::vector<std::pair<std::size_t, double>>;
  aligned("aligned_success_rate.csv", "epoch", [](const RunMetrics& m) {
    Series s;
    for (const auto& e : m.epochs) s.emplace_back(e.epoch, e.success_rate);
    return s;
  });
  aligned("aligned_mean_reward.csv", "epoch", [](const RunMetrics& m) {
    Series s;
    for (const auto& e : m.epochs) s.emplace_back(e.epoch, e.mean_reward);
    return s;
  });
  aligned("aligned_critic_loss.csv", "update_idx", [](const RunMetrics& m) {
    Series s;
    for (const auto& u : m.updates) s.emplace_back(u.update_idx, u.critic_loss);
    return s;
  });
  aligned("aligned_actor_loss.csv", "update_idx", [](const RunMetrics& m) {
    Series s;
    for (const auto& u : m.updates) {
      if (u.actor_loss) s.emplace_back(u.update_idx, *u.actor_loss);
    }
    return s;
  });
  return runs.size();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"conther: transformer-context TD3 with hindsight relabeling on a kinematic arm"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  auto* train = app.add_subcommand("train", "Train one run into <out>/<timestamp>-<variant>-<seed>");
  train->add_option("--config", config_path, "Config file (key=value sections) or a run's manifest.json");
  train->add_option("--set", sets, "Override, key=value (repeatable)");
  train->add_option("--out", out_dir, "Output root (default: $CONTHER_OUT or ./runs)");
  train->add_option("--seed", seed, "Seed override");

  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  auto* bench = app.add_subcommand("bench", "Train a variant x seed matrix and print the comparison table");
  bench->add_option("--config", config_path, "Base config file");
  bench->add_option("--set", sets, "Override, key=value (repeatable)");
  bench->add_option("--out", out_dir, "Output root (default: $CONTHER_OUT or ./runs)");
  bench->add_option("--variants", variants, "Comma-separated variants")->delimiter(',')->required();
  bench->add_option("--seeds", seeds, "Comma-separated seeds")->delimiter(',')->required();
  bench->add_option("--jobs", jobs, "Cells run as parallel processes")->check(CLI::PositiveNumber);

  std::vector<std::string> run_dirs;
  auto* plots = app.add_subcommand("export-plots", "Export per-run and aligned CSV series");
  plots->add_option("runs", run_dirs, "Run directories")->required();
  plots->add_option("--out", out_dir, "Destination directory (default: ./plots)");

  std::string bind = "127.0.0.1:5555", arm_name = "planar4", task_name = "reach";
  auto* serve = app.add_subcommand("serve", "Serve the kinematic environment over TCP until interrupted");
  serve->add_option("--bind", bind, "host:port");
  serve->add_option("--arm", arm_name, "Arm used when a client does not name one");
  serve->add_option("--task", task_name, "Task used when a client does not name one");

  std::string eval_dir;
  std::size_t episodes = 10;
  auto* eval = app.add_subcommand("eval", "Replay a run's actor checkpoint without exploration noise");
  eval->add_option("run", eval_dir, "Run directory")->required();
  eval->add_option("--episodes", episodes, "Validation episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "Seed base for the episodes (default: the run's seed)");

  std::vector<std::string> argv_store{"conther"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      Assignments overrides;
      const Assignments file = load_assignments(config_path, sets, overrides);
      const TrainConfig config = resolve_config(file, overrides, seed);
      const fs::path dir = fresh_dir(output_root(out_dir), run_dir_name(utc_timestamp_compact(), config.variant, config.seed));
      try {
        const TrainOutcome o = train_into(config, dir, err);
        out << o.run_dir.string() << '\n';
        return kExitOk;
      } catch (const std::exception& e) {
        err << "error: run aborted: " << e.what() << "\n(partial results in " << dir.string() << ")\n";
        return kExitFailure;
      }
    }

    if (*bench) {
      Assignments overrides;
      const Assignments file = load_assignments(config_path, sets, overrides);
      std::vector<std::pair<TrainConfig, fs::path>> plan;
      const fs::path root = fresh_dir(output_root(out_dir), "bench-" + utc_timestamp_compact());
      for (const auto& v : variants) {
        for (const auto s : seeds) {
          Assignments with_variant = overrides;
          with_variant.emplace_back("run.variant", v);
          TrainConfig c = resolve_config(file, with_variant, s);
          plan.emplace_back(c, root / (v + "-" + std::to_string(s)));
        }
      }
      fs::create_directories(root);
      auto run_cell = [&](std::size_t i, std::ostream& log) {
        try {
          train_into(plan[i].first, plan[i].second, log);
          return true;
        } catch (const std::exception& e) {
          log << "error: " << e.what() << '\n';
          return false;
        }
      };
      if (jobs <= 1) {
        for (std::size_t i = 0; i < plan.size(); ++i) run_cell(i, err);
      } else {
        // Each cell in its own process; its log goes to <cell>/train.log.
        std::size_t next = 0, running = 0;
        err << std::flush;
        out << std::flush;
        while (next < plan.size() || running > 0) {
          if (next < plan.size() && running < jobs) {
            fs::create_directories(plan[next].second);
            const pid_t pid = fork();
            if (pid < 0) throw std::runtime_error("fork failed");
            if (pid == 0) {
              std::ofstream log(plan[next].second / "train.log");
              const bool ok = run_cell(next, log);
              log.flush();
              std::_Exit(ok ? 0 : 1);
            }
            ++next;
            ++running;
            continue;
          }
          int status = 0;
          if (wait(&status) > 0) --running;
        }
      }
      std::vector<BenchCell> cells;
      for (const auto& [config, dir] : plan) {
        BenchCell cell{config.variant, config.seed, std::nullopt, ""};
        try {
          const RunManifest m = read_manifest(dir / "manifest.json");
          if (m.status != "completed") {
            cell.error = m.status;
          } else {
            cell.final_success = final_success(trainer::read_metrics(dir / m.metrics));
          }
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        cells.push_back(cell);
      }
      const std::string table = format_bench_table(variants, cells);
      write_text_file(root / "bench.txt", table);
      out << table << "runs in " << root.string() << '\n';
      return kExitOk;
    }

    if (*plots) {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      const fs::path dest = out_dir.empty() ? fs::path("plots") : fs::path(out_dir);
      const std::size_t n = export_plots(dirs, dest, err);
      out << "exported " << n << " of " << dirs.size() << " runs to " << dest.string() << '\n';
      return n > 0 ? kExitOk : kExitFailure;
    }

    if (*serve) {
      env::ServerOptions options;
      options.bind = bind;
      options.default_arm = trainer::make_arm(arm_name);
      options.default_task = trainer::make_task(task_name);
      options.log = [&err](const std::string& line) { err << line << '\n' << std::flush; };
      std::unique_ptr<env::EnvServer> server;
      try {
        server = std::make_unique<env::EnvServer>(options);
      } catch (const std::exception& e) {
        err << "error: cannot bind " << bind << ": " << e.what() << '\n';
        return kExitFailure;
      }
      g_stop.store(false);
      auto old_int = std::signal(SIGINT, on_signal);
      auto old_term = std::signal(SIGTERM, on_signal);
      err << "serving on port " << server->port() << '\n' << std::flush;
      server->run(g_stop);
      std::signal(SIGINT, old_int);
      std::signal(SIGTERM, old_term);
      err << "shutdown\n";
      return kExitOk;
    }

    if (*eval) {
      const fs::path dir(eval_dir);
      const RunManifest m = read_manifest(dir / "manifest.json");
      const TrainConfig config = trainer::config_from_assignments(parse_config_text(m.config, "manifest"));
      auto environment = trainer::make_env(config);
      const nets::NetConfig nc =
          trainer::net_config(config, environment->observation_dim(), environment->goal_dim(), environment->action_dim());
      nets::ActorNet actor(nc, 0);
      nets::load_parameters(dir / m.actor_checkpoint, actor.parameters());
      const auto result = trainer::validate(trainer::actor_policy(actor), *environment, nc.window, episodes,
                                            seed.value_or(config.seed));
      out << "episodes " << episodes << " mean_reward " << format_fixed(result.mean_reward, 4) << " success_rate "
          << format_fixed(result.success_rate, 4) << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace conther::cli
