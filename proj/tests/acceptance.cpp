// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// the number of failures. Pass criterion names to run a subset.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "conther/cli/commands.hpp"
#include "conther/env/environment.hpp"
#include "conther/env/server.hpp"
#include "conther/ndnum/gradcheck.hpp"
#include "conther/ndnum/ops.hpp"
#include "conther/nets/actor_critic.hpp"
#include "conther/replay/sampling.hpp"
#include "conther/trainer/config.hpp"
#include "conther/trainer/trainer.hpp"

using namespace conther;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------- gradients

Outcome gradients() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::size_t instances = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (nets::Wiring wiring : {nets::Wiring::V0, nets::Wiring::V1}) {
      nets::NetConfig c;
      c.input_dim = 9;  // planar2 observation ++ goal
      c.action_dim = 2;
      c.window = 7;
      c.wiring = wiring;
      c.d_model = 16;
      c.heads = 2;
      c.ff_width = 24;
      c.hidden = 16;
      c.output_scale = 1.0;
      nets::ActorNet actor(c, 2 * seed + 1);
      nets::CriticNet critic(c, 2 * seed + 2);
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> n(0.0, 1.0);
      const std::size_t batch = 2;
      std::vector<double> w(batch * c.window * c.input_dim), a(batch * c.action_dim);
      for (auto& x : w) x = n(rng);
      for (auto& x : a) x = std::tanh(n(rng));
      const nd::Tensor windows = nd::Tensor::from({batch * c.window, c.input_dim}, w);
      const nd::Tensor actions = nd::Tensor::from({batch, c.action_dim}, a, true);

      std::vector<nd::Tensor> ap, cp;
      for (const auto& p : actor.parameters()) ap.push_back(p.tensor);
      for (const auto& p : critic.parameters()) cp.push_back(p.tensor);
      cp.push_back(actions);
      nd::GradCheckOptions opt;
      opt.max_coords = 600;
      opt.seed = seed;
      worst = std::max(worst, nd::finite_diff_check([&] { return nd::sum(nd::square(actor.forward(windows))); }, ap,
                                                    opt));
      worst = std::max(worst, nd::finite_diff_check(
                                  [&] {
                                    const nets::QPair q = critic.forward(windows, actions);
                                    return nd::add(nd::sum(nd::square(q.q1)), nd::sum(nd::tanh(q.q2)));
                                  },
                                  cp, opt));
      ++instances;
    }
  }
  const double took = seconds_since(start);
  return {worst < 1e-4 && took < 60.0, std::to_string(instances) + " instances x (actor, critic), max rel error " +
                                           fmt("%.2e", worst) + ", " + fmt("%.1f", took) + " s"};
}

// ---------------------------------------------------------------- HER oracle

replay::Episode numbered_episode(double tag, std::size_t records) {
  replay::Episode ep;
  for (std::size_t t = 0; t < records; ++t) {
    const double td = static_cast<double>(t);
    ep.push_back({{tag * 100 + td, 0.5 * td, -td, 1.0, 2.0, 3.0},
                  {0.3 + tag, -0.2, 0.1 * td},
                  {0.01 * td, tag + 0.02 * td, -0.5},
                  {std::sin(td), std::cos(td)}});
  }
  return ep;
}

Outcome her_oracle() {
  const auto start = Clock::now();
  replay::MainBuffer buffer(3);
  const std::vector<std::size_t> lengths{4, 9, 15};
  for (std::size_t e = 0; e < lengths.size(); ++e) buffer.store_episode(numbered_episode(double(e), lengths[e]));
  const env::TaskSpec task = env::TaskSpec::reach();

  std::size_t mismatches = 0, relabeled = 0, nonzero = 0;
  std::ostringstream why;
  for (std::size_t k : {0, 2, 6}) {
    using Key = std::tuple<std::size_t, std::size_t, std::vector<std::size_t>>;
    std::set<Key> legal;
    for (std::size_t e = 0; e < lengths.size(); ++e) {
      for (std::size_t t = 0; t + 2 <= lengths[e]; ++t) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i <= k; ++i) idx.push_back(t + i >= k ? t + i - k : 0);
        legal.insert({e, t, idx});
      }
    }
    std::set<Key> seen;
    std::mt19937_64 rng(k + 11);
    for (int round = 0; round < 40; ++round) {
      replay::SampledBatch batch = replay::sample_batch(buffer, 256, k, 1.0, rng);
      for (auto& w : batch.windows) {
        const Key key{w.episode, w.anchor, w.step_indices};
        seen.insert(key);
        if (!legal.count(key)) {
          ++mismatches;
          continue;
        }
        const replay::Episode& ep = buffer.episode(w.episode);
        for (std::size_t i = 0; i <= k; ++i) {
          const auto& s = ep[w.step_indices[i]];
          if (w.steps[i].obs != s.obs || w.steps[i].goal != s.goal || w.steps[i].action != s.action) ++mismatches;
        }
        if (w.next_achieved_goal != ep[w.anchor + 1].achieved_goal) ++mismatches;
        if (!w.relabeled) continue;
        replay::her_relabel(w);
        ++relabeled;
      }
      replay::compute_rewards(batch, task);
      for (const auto& w : batch.windows) {
        const auto& g = w.steps.back().goal;
        const auto& ag = w.next_achieved_goal;
        const double d = std::hypot(g[0] - ag[0], g[1] - ag[1], g[2] - ag[2]);
        if (w.relabeled && (w.reward != 0.0 || d != 0.0)) ++nonzero;
      }
    }
    if (seen != legal) {
      ++mismatches;
      why << " K=" << k << " support " << seen.size() << " vs " << legal.size();
    }
  }
  const double took = seconds_since(start);
  const bool ok = mismatches == 0 && nonzero == 0 && relabeled > 0 && took < 10.0;
  return {ok, "support mismatches " + std::to_string(mismatches) + why.str() + ", relabeled " +
                  std::to_string(relabeled) + " with nonzero reward " + std::to_string(nonzero) + ", " +
                  fmt("%.2f", took) + " s"};
}

// ---------------------------------------------------------------- rewards

Outcome reward_tables() {
  auto around = [](double x) {
    return std::vector<double>{std::nextafter(x, 0.0), x, std::nextafter(x, 1.0), x - 1e-9, x + 1e-9};
  };
  std::vector<double> grid{0.0, 0.02, 0.07, 0.095, 0.2, 0.5, 3.0};
  for (double b : {0.05, 0.09, 0.1}) {
    const auto a = around(b);
    grid.insert(grid.end(), a.begin(), a.end());
  }
  std::size_t cases = 0, wrong = 0;
  // Reach: 0 within the 0.1 threshold (inclusive), -1 outside.
  for (double d : grid) {
    const double expect = d <= 0.1 ? 0.0 : -1.0;
    wrong += env::reward_reach(d, 0.1) != expect;
    ++cases;
  }
  // Obstacle task: 0.5 * (r_goal + r_obst), r_goal from the 0.09 goal
  // threshold, r_obst = -1 when any obstacle is closer than 0.05.
  for (double dg : grid) {
    for (double o1 : grid) {
      for (double o2 : {0.01, 0.05, 0.3}) {
        const double r_goal = dg <= 0.09 ? 0.0 : -1.0;
        const double r_obst = (o1 < 0.05 || o2 < 0.05) ? -1.0 : 0.0;
        const std::vector<double> obs{o1, o2, 0.4};
        wrong += env::reward_obstacle_task(dg, obs, 0.09, 0.05) != 0.5 * (r_goal + r_obst);
        ++cases;
      }
    }
  }
  return {wrong == 0, std::to_string(cases) + " grid points, " + std::to_string(wrong) + " mismatches"};
}

// ---------------------------------------------------------------- TD3

std::vector<double> flat(const nd::ParamList& params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

Outcome td3_mechanics() {
  trainer::TrainConfig c = trainer::build_variant("conther_v1");
  c.context_length = 2;
  c.batch_size = 16;
  c.d_model = 4;
  c.heads = 2;
  c.ff_width = 6;
  c.hidden = 6;
  auto env = trainer::make_env(c);
  const nets::NetConfig nc = trainer::net_config(c, env->observation_dim(), env->goal_dim(), env->action_dim());
  replay::MainBuffer buffer(4);
  {
    trainer::Learner collector(c, nc);
    std::mt19937_64 rng(3);
    for (std::uint64_t e = 0; e < 3; ++e)
      buffer.store_episode(trainer::run_episode(trainer::actor_policy(collector.actor), *env, nc.window, e, 0.5, rng)
                               .steps);
  }
  std::mt19937_64 rng(9);
  const trainer::BatchTensors b = trainer::batch_tensors(trainer::draw_batch(buffer, c, env->task(), rng), nc.window);

  // y = r + gamma * min(Q1', Q2'), against a direct evaluation of the target nets.
  trainer::Learner learner(c, nc);
  const auto y = trainer::critic_targets(learner, b, c, rng);
  const nd::Tensor mu = learner.actor_target.forward(b.next_windows);
  const nets::QPair q = learner.critic_target.forward(b.next_windows, mu);
  double y_err = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    y_err = std::max(y_err, std::abs(y[i] - (b.rewards[i] + c.gamma * std::min(q.q1.data()[i], q.q2.data()[i]))));

  // Actor cadence for w = 2 and w = 3.
  bool cadence_ok = true;
  for (std::size_t w : {2, 3}) {
    trainer::TrainConfig cw = c;
    cw.actor_delay = w;
    trainer::Learner l(cw, nc);
    for (std::size_t t = 1; t <= 12; ++t) {
      const auto before = flat(l.actor.parameters());
      std::mt19937_64 r(t);
      const trainer::UpdateResult u = trainer::update_step(l, b, cw, t, r);
      const bool moved = flat(l.actor.parameters()) != before;
      cadence_ok = cadence_ok && u.actor_loss.has_value() == (t % w == 0) && moved == (t % w == 0);
    }
  }

  // Soft update: tau * theta + (1 - tau) * theta' exactly.
  trainer::Learner s(c, nc);
  std::mt19937_64 r(0);
  trainer::update_step(s, b, c, 2, r);
  const auto src = flat(s.critic.parameters()), dst = flat(s.critic_target.parameters());
  const auto asrc = flat(s.actor.parameters()), adst = flat(s.actor_target.parameters());
  s.soft_update_targets(c.tau);
  const auto now = flat(s.critic_target.parameters()), anow = flat(s.actor_target.parameters());
  bool soft_ok = true;
  for (std::size_t i = 0; i < now.size(); ++i) soft_ok = soft_ok && now[i] == c.tau * src[i] + (1.0 - c.tau) * dst[i];
  for (std::size_t i = 0; i < anow.size(); ++i)
    soft_ok = soft_ok && anow[i] == c.tau * asrc[i] + (1.0 - c.tau) * adst[i];

  return {y_err < 1e-12 && cadence_ok && soft_ok, "max |y - oracle| " + fmt("%.1e", y_err) + ", cadence " +
                                                      (cadence_ok ? "ok" : "wrong") + ", soft update " +
                                                      (soft_ok ? "exact" : "inexact")};
}

// ---------------------------------------------------------------- learning

std::vector<trainer::RunMetrics> train_seeds(const std::string& variant, const std::vector<std::uint64_t>& seeds,
                                             const std::function<void(trainer::TrainConfig&)>& adjust = {}) {
  std::vector<trainer::RunMetrics> out;
  for (std::uint64_t seed : seeds) {
    trainer::TrainConfig c = trainer::build_variant(variant);
    c.seed = seed;
    if (adjust) adjust(c);
    c.validate();
    trainer::TrainOptions o;
    o.on_epoch = [&](const trainer::EpochMetrics& e) {
      std::fprintf(stderr, "  %s seed %llu epoch %zu reward %.3f success %.3f\n", variant.c_str(),
                   static_cast<unsigned long long>(seed), e.epoch, e.mean_reward, e.success_rate);
    };
    out.push_back(trainer::train(c, o));
  }
  return out;
}

double mean_final(const std::vector<trainer::RunMetrics>& runs) {
  double s = 0.0;
  for (const auto& r : runs) s += cli::final_success(r, 5);
  return s / static_cast<double>(runs.size());
}

Outcome desk_learning() {
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto start = Clock::now();
  const auto runs = train_seeds("conther_v1", seeds);
  const double took = seconds_since(start);

  const std::size_t epochs = runs.front().epochs.size();
  double best = 0.0;
  std::size_t best_epoch = 0;
  for (std::size_t e = 0; e < epochs && e < 40; ++e) {
    double avg = 0.0;
    for (const auto& r : runs) avg += r.epochs[e].success_rate;
    avg /= static_cast<double>(runs.size());
    if (avg > best) {
      best = avg;
      best_epoch = e + 1;
    }
  }
  const double ours = mean_final(runs);
  const double baseline = mean_final(train_seeds("td3", seeds));
  const bool ok = best >= 0.8 && took < 15 * 60.0 && ours >= baseline;
  return {ok, "seed-averaged success peaks at " + fmt("%.3f", best) + " (epoch " + std::to_string(best_epoch) +
                  "), conther_v1 wall " + fmt("%.0f", took) + " s, final-5 success conther_v1 " + fmt("%.3f", ours) +
                  " vs td3 " + fmt("%.3f", baseline)};
}

// ---------------------------------------------------------------- trajectories

Outcome trajectory_tasks() {
  std::ostringstream detail;
  bool ok = true;
  for (env::TaskKind kind : {env::TaskKind::TrajSinusoid, env::TaskKind::TrajCircle, env::TaskKind::TrajSpiral}) {
    for (const env::ArmModel& arm : {env::ArmModel::spatial6(), env::ArmModel::spatial3()}) {
      const env::TaskSpec task = env::TaskSpec::trajectory_task(kind);
      env::KinematicEnv e(arm, task);
      const trainer::ValidationResult v = trainer::validate(trainer::scripted_policy(arm, task), e, 7, 20, 77);
      ok = ok && v.success_rate >= 0.7;
      detail << "scripted " << env::to_string(kind) << "/J=" << arm.joint_count() << " "
             << fmt("%.3f", v.success_rate) << ", ";
    }
  }
  // The 3-joint spatial arm: the 6-joint chain learns too slowly for a desk budget.
  const auto runs = train_seeds("conther_v1", {1}, [](trainer::TrainConfig& c) {
    c.arm = "spatial3";
    c.task = "sinusoid";
    c.epochs = 60;
  });
  const auto& epochs = runs.front().epochs;
  const std::size_t q = epochs.size() / 4;
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    first += epochs[i].mean_reward;
    last += epochs[epochs.size() - q + i].mean_reward;
  }
  first /= static_cast<double>(q);
  last /= static_cast<double>(q);
  ok = ok && first < last;
  detail << "sinusoid training reward first quartile " << fmt("%.3f", first) << " -> last quartile "
         << fmt("%.3f", last);
  return {ok, detail.str()};
}

// ---------------------------------------------------------------- transport

Outcome transport() {
  env::ServerOptions options;
  options.bind = "127.0.0.1:0";
  env::EnvServer server(options);
  std::atomic<bool> stop{false};
  std::thread thread([&] { server.run(stop); });
  const std::string address = "127.0.0.1:" + std::to_string(server.port());

  std::size_t steps = 0, differing = 0;
  struct Case {
    env::ArmModel arm;
    env::TaskSpec task;
  };
  const std::vector<Case> cases{{env::ArmModel::planar(2), env::TaskSpec::reach()},
                                {env::ArmModel::spatial6(), env::TaskSpec::trajectory_task(env::TaskKind::TrajSinusoid)},
                                {env::ArmModel::spatial6(), env::TaskSpec::trajectory_task(env::TaskKind::TrajSpiral)}};
  try {
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
      env::RemoteEnv remote(address, cases[ci].arm, cases[ci].task);
      env::KinematicEnv local(cases[ci].arm, cases[ci].task);
      std::mt19937_64 rng(100 + ci);
      std::uniform_real_distribution<double> u(-1.3, 1.3);
      std::uint64_t episode_seed = 1000 * ci;
      env::EnvStep r = remote.reset(episode_seed), l = local.reset(episode_seed);
      auto same = [](const env::EnvStep& a, const env::EnvStep& b) {
        return a.observation == b.observation && a.goal == b.goal && a.achieved_goal == b.achieved_goal &&
               a.reward == b.reward && a.done == b.done && a.clipped == b.clipped;
      };
      differing += !same(r, l);
      std::vector<double> action(cases[ci].arm.joint_count());
      for (int t = 0; t < 1000; ++t) {
        if (l.done) {
          ++episode_seed;
          r = remote.reset(episode_seed);
          l = local.reset(episode_seed);
          differing += !same(r, l);
        }
        for (auto& a : action) a = u(rng);
        r = remote.step(action);
        l = local.step(action);
        differing += !same(r, l);
        ++steps;
      }
    }

    // A short training run over the wire must match the in-process run.
    trainer::TrainConfig c = trainer::build_variant("conther_v1");
    c.epochs = 2;
    c.episodes_per_epoch = 3;
    c.updates_per_epoch = 5;
    c.validation_episodes = 2;
    c.batch_size = 16;
    const auto local_run = trainer::train(c);
    c.remote = address;
    const auto remote_run = trainer::train(c);
    bool metrics_same = local_run.epochs.size() == remote_run.epochs.size() &&
                        local_run.updates.size() == remote_run.updates.size();
    for (std::size_t i = 0; metrics_same && i < local_run.epochs.size(); ++i)
      metrics_same = local_run.epochs[i].mean_reward == remote_run.epochs[i].mean_reward &&
                     local_run.epochs[i].success_rate == remote_run.epochs[i].success_rate;
    for (std::size_t i = 0; metrics_same && i < local_run.updates.size(); ++i)
      metrics_same = local_run.updates[i].critic_loss == remote_run.updates[i].critic_loss;
    differing += !metrics_same;
  } catch (...) {
    stop = true;
    thread.join();
    throw;
  }
  stop = true;
  thread.join();
  return {differing == 0 && steps == 3000, std::to_string(steps) + " remote steps compared plus one training run, " +
                                               std::to_string(differing) + " differences"};
}

// ---------------------------------------------------------------- determinism

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "conther_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream out, err;
  bool ok = true;
  std::ostringstream detail;
  for (const std::string variant : {"conther_v1", "td3_her"}) {
    out.str("");
    const int first = cli::run_cli({"train", "--set", "variant=" + variant, "--set", "run.epochs=3", "--seed", "7",
                                    "--out", root.string()},
                                   out, err);
    if (first != cli::kExitOk) return {false, "train failed: " + err.str()};
    const fs::path dir = out.str().substr(0, out.str().find('\n'));
    out.str("");
    const int second =
        cli::run_cli({"train", "--config", (dir / "manifest.json").string(), "--out", root.string()}, out, err);
    if (second != cli::kExitOk) return {false, "rerun failed: " + err.str()};
    const fs::path again = out.str().substr(0, out.str().find('\n'));
    const std::string a = cli::read_text_file(dir / "metrics.jsonl"), b = cli::read_text_file(again / "metrics.jsonl");
    const bool same = !a.empty() && a == b && dir != again;
    ok = ok && same;
    detail << variant << " " << a.size() << " bytes " << (same ? "identical" : "DIFFER") << "; ";
  }
  fs::remove_all(root);
  return {ok, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient_suite", gradients},         {"her_oracle", her_oracle},
      {"reward_tables", reward_tables},      {"td3_mechanics", td3_mechanics},
      {"desk_scale_learning", desk_learning}, {"trajectory_tasks", trajectory_tasks},
      {"transport_transparency", transport}, {"determinism", determinism}};

  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == w; })) {
      std::cerr << "unknown criterion " << w << "\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failures += !o.pass;
  }
  return failures;
}
