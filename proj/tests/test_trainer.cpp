#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "conther/error.hpp"
#include "conther/ndnum/ops.hpp"
#include "conther/trainer/metrics.hpp"
#include "conther/trainer/trainer.hpp"

using namespace conther;
using namespace conther::trainer;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
  TrainConfig c = build_variant("conther_v1");
  c.context_length = 2;
  c.batch_size = 8;
  c.d_model = 4;
  c.heads = 2;
  c.ff_width = 6;
  c.hidden = 6;
  c.epochs = 1;
  c.episodes_per_epoch = 2;
  c.updates_per_epoch = 2;
  c.validation_episodes = 2;
  return c;
}

struct Fixture {
  TrainConfig config;
  std::unique_ptr<env::Environment> env;
  nets::NetConfig nets;
  replay::MainBuffer buffer{10};

  explicit Fixture(TrainConfig c) : config(std::move(c)), env(make_env(config)) {
    nets = net_config(config, env->observation_dim(), env->goal_dim(), env->action_dim());
    // Collect with a random-ish scripted mix so the buffer has varied steps.
    Learner seed_learner(config, nets);
    std::mt19937_64 rng(1);
    for (std::uint64_t e = 0; e < 3; ++e) {
      buffer.store_episode(run_episode(actor_policy(seed_learner.actor), *env, nets.window, e, 0.5, rng).steps);
    }
  }

  BatchTensors batch(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    return batch_tensors(draw_batch(buffer, config, env->task(), rng), nets.window);
  }
};

std::vector<double> flat(const nd::ParamList& params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void set_const(nets::Linear& l, double bias) {
  for (auto& v : l.weight.mutable_data()) v = 0.0;
  for (auto& v : l.bias.mutable_data()) v = bias;
}

class StaticGoalEnv final : public env::Environment {
 public:
  StaticGoalEnv() : arm_(env::ArmModel::planar(2)), task_(env::TaskSpec::reach()) {}
  env::EnvStep reset(std::uint64_t) override { return make(0.0); }
  env::EnvStep step(std::span<const double>) override { return make(env::kSuccessReward); }
  const env::ArmModel& arm() const override { return arm_; }
  const env::TaskSpec& task() const override { return task_; }

 private:
  env::EnvStep make(double reward) const {
    env::EnvStep s;
    s.observation.assign(observation_dim(), 0.0);
    s.goal = {1, 0, 0};
    s.achieved_goal = {1, 0, 0};
    s.reward = reward;
    return s;
  }
  env::ArmModel arm_;
  env::TaskSpec task_;
};

}  // namespace

TEST_CASE("critic target uses the minimum of the two target heads") {
  Fixture f(tiny_config());
  Learner learner(f.config, f.nets);
  set_const(learner.critic_target.fc1.l3, -5.0);
  set_const(learner.critic_target.fc2.l3, -3.0);
  BatchTensors b = f.batch(2);
  for (auto& r : b.rewards) r = -1.0;
  std::mt19937_64 rng(0);
  for (double y : critic_targets(learner, b, f.config, rng)) CHECK(std::abs(y - (-5.9)) < 1e-12);

  // Random weights: y against a direct evaluation of the target nets.
  Learner fresh(f.config, f.nets);
  const BatchTensors rb = f.batch(3);
  const auto y = critic_targets(fresh, rb, f.config, rng);
  const nd::Tensor mu = fresh.actor_target.forward(rb.next_windows);
  const nets::QPair q = fresh.critic_target.forward(rb.next_windows, mu);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double expect = rb.rewards[i] + 0.98 * std::min(q.q1.data()[i], q.q2.data()[i]);
    CHECK(std::abs(y[i] - expect) < 1e-12);
  }
}

TEST_CASE("actor updates exactly when t mod w == 0; each update leaves the other net untouched") {
  Fixture f(tiny_config());
  const BatchTensors b = f.batch(4);
  Learner odd(f.config, f.nets), even(f.config, f.nets);
  const auto actor_before = flat(odd.actor.parameters());
  const auto critic_before = flat(odd.critic.parameters());
  std::mt19937_64 r1(0), r2(0);
  const UpdateResult u1 = update_step(odd, b, f.config, 1, r1);
  const UpdateResult u2 = update_step(even, b, f.config, 2, r2);
  CHECK_FALSE(u1.actor_loss.has_value());
  CHECK(u2.actor_loss.has_value());
  CHECK(flat(odd.actor.parameters()) == actor_before);
  CHECK(flat(even.actor.parameters()) != actor_before);
  // The actor step must not move the critic: both critics saw the same critic step.
  CHECK(flat(odd.critic.parameters()) == flat(even.critic.parameters()));
  CHECK(flat(odd.critic.parameters()) != critic_before);

  TrainConfig w3 = f.config;
  w3.actor_delay = 3;
  std::size_t actor_updates = 0;
  Learner l(w3, f.nets);
  for (std::size_t t = 1; t <= 9; ++t) {
    std::mt19937_64 r(t);
    const UpdateResult u = update_step(l, b, w3, t, r);
    if (u.actor_loss) {
      ++actor_updates;
      CHECK(t % 3 == 0);
    }
  }
  CHECK(actor_updates == 3);
}

TEST_CASE("soft target update is exact") {
  Fixture f(tiny_config());
  Learner learner(f.config, f.nets);
  const BatchTensors b = f.batch(5);
  std::mt19937_64 rng(0);
  update_step(learner, b, f.config, 2, rng);
  const auto src_a = flat(learner.actor.parameters()), dst_a = flat(learner.actor_target.parameters());
  const auto src_c = flat(learner.critic.parameters()), dst_c = flat(learner.critic_target.parameters());
  const double tau = 0.005;
  learner.soft_update_targets(tau);
  const auto new_a = flat(learner.actor_target.parameters()), new_c = flat(learner.critic_target.parameters());
  for (std::size_t i = 0; i < new_a.size(); ++i) CHECK(new_a[i] == tau * src_a[i] + (1.0 - tau) * dst_a[i]);
  for (std::size_t i = 0; i < new_c.size(); ++i) CHECK(new_c[i] == tau * src_c[i] + (1.0 - tau) * dst_c[i]);
}

TEST_CASE("large action penalty pulls actions toward zero") {
  Fixture f(tiny_config());
  const BatchTensors b = f.batch(6);
  auto mean_norm = [&](double alpha) {
    TrainConfig c = f.config;
    c.action_l2 = alpha;
    c.actor_delay = 1;
    Learner l(c, f.nets);
    for (std::size_t t = 1; t <= 200; ++t) {
      std::mt19937_64 rng(t);
      update_step(l, b, c, t, rng);
    }
    nd::NoGradGuard g;
    const nd::Tensor mu = l.actor.forward(b.windows);
    double s = 0.0;
    for (double v : mu.data()) s += v * v;
    return std::sqrt(s / static_cast<double>(mu.dim(0)));
  };
  CHECK(mean_norm(1e3) < mean_norm(0.0));
}

TEST_CASE("run_episode: zero actor without noise keeps the arm still; exact length") {
  TrainConfig c = tiny_config();
  auto environment = make_env(c);
  const auto nc = net_config(c, environment->observation_dim(), environment->goal_dim(), environment->action_dim());
  nets::ActorNet actor(nc, 3);
  set_const(actor.fc.l3, 0.0);
  std::mt19937_64 rng(1);
  const EpisodeRecord rec = run_episode(actor_policy(actor), *environment, nc.window, 9, 0.0, rng);
  CHECK(rec.rewards.size() == 50);
  CHECK(rec.steps.size() == 51);
  for (const auto& s : rec.steps) {
    for (double a : s.action) CHECK(a == 0.0);
    CHECK(s.achieved_goal == rec.steps.front().achieved_goal);
  }
}

TEST_CASE("stored goals follow the env schedule in moving-goal tasks") {
  TrainConfig c = tiny_config();
  c.arm = "spatial6";
  c.task = "circle";
  c.context_length = 6;
  auto environment = make_env(c);
  env::KinematicEnv oracle(make_arm("spatial6"), environment->task());
  std::mt19937_64 rng(2);
  const Policy still = [](const ContextBuffer&, const env::EnvStep&) { return std::vector<double>(6, 0.0); };
  const EpisodeRecord rec = run_episode(still, *environment, 7, 11, 0.0, rng);
  env::EnvStep s = oracle.reset(11);
  for (std::size_t t = 0; t < 50; ++t) {
    CHECK(rec.steps[t].goal == s.goal);
    if (t > 0) CHECK((rec.steps[t].goal != rec.steps[t - 1].goal) == (t % 3 == 0));
    s = oracle.step(std::vector<double>(6, 0.0));
  }
}

TEST_CASE("validate: examples and contract") {
  StaticGoalEnv on_goal;
  const Policy zero = [](const ContextBuffer&, const env::EnvStep&) { return std::vector<double>(2, 0.0); };
  CHECK(validate(zero, on_goal, 3, 4, 1).success_rate == 1.0);
  CHECK_THROWS_AS(validate(zero, on_goal, 3, 0, 1), ContractError);

  env::KinematicEnv reach(env::ArmModel::planar(2), env::TaskSpec::reach());
  std::mt19937_64 rng(3);
  const Policy random = [&rng](const ContextBuffer&, const env::EnvStep&) {
    std::uniform_real_distribution<double> u(-1, 1);
    return std::vector<double>{u(rng), u(rng)};
  };
  CHECK(validate(random, reach, 3, 10, 1).success_rate < 0.15);
  CHECK(validate(scripted_policy(reach.arm(), reach.task()), reach, 3, 20, 1).success_rate >= 0.9);
}

TEST_CASE("input rows carry the window goal in the observation's goal slot") {
  const std::vector<double> obs{1, 2, 3, 4, 5, 6};
  const std::vector<double> goal{7, 8, 9};
  // Layout for zero joints: goal at 0..2, effector at 3..5.
  const auto row = input_row(obs, goal);
  CHECK(row == std::vector<double>{7, 8, 9, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("build_variant definitions") {
  const TrainConfig td3 = build_variant("td3");
  CHECK(td3.her_fraction == 0.0);
  CHECK(td3.context_length == 0);
  const TrainConfig td3_her = build_variant("td3_her");
  CHECK(td3_her.context_length == 0);
  CHECK(td3_her.her_fraction > 0.0);
  const TrainConfig v1 = build_variant("conther_v1"), ctx = build_variant("td3_context");
  CHECK(v1.context_length == 6);
  CHECK(ctx.context_length == 6);
  CHECK(v1.wiring == nets::Wiring::V1);
  CHECK(ctx.wiring == nets::Wiring::V1);
  CHECK(ctx.her_fraction == 0.0);
  CHECK(v1.her_fraction > 0.0);
  // conther_v1 and td3_context differ only in her_fraction (and the name).
  TrainConfig a = v1, b = ctx;
  a.her_fraction = b.her_fraction = 0.0;
  a.variant = b.variant = "x";
  CHECK(format_config(a) == format_config(b));
  TrainConfig v0 = build_variant("conther_v0");
  CHECK(v0.wiring == nets::Wiring::V0);
  v0.wiring = nets::Wiring::V1;
  v0.variant = "conther_v1";
  CHECK(format_config(v0) == format_config(v1));
  try {
    build_variant("ddpg");
    FAIL("no throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("td3_context") != std::string::npos);
  }
}

TEST_CASE("config keys, validation and text round trip") {
  CHECK_THROWS_AS(config_from_assignments({{"foo", "1"}}), ConfigError);
  CHECK_THROWS_AS(config_from_assignments({{"td3.gamma", "1.0"}}), ConfigError);
  CHECK_THROWS_AS(config_from_assignments({{"td3.tau", "0"}}), ConfigError);
  CHECK_THROWS_AS(config_from_assignments({{"td3.actor_delay", "0"}}), ConfigError);
  CHECK_THROWS_AS(config_from_assignments({{"variant", "td3"}, {"context_length", "3"}}), ConfigError);
  CHECK_THROWS_AS(config_from_assignments({{"batch_size", "abc"}}), ConfigError);

  const TrainConfig c = config_from_assignments({{"variant", "td3_her"}, {"td3.gamma", "0.95"}, {"seed", "7"}});
  CHECK(c.variant == "td3_her");
  CHECK(c.gamma == 0.95);
  CHECK(c.seed == 7);
  CHECK(c.context_length == 0);

  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream in(format_config(c));
  std::string line, section;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    kv.emplace_back(section + "." + line.substr(0, eq), line.substr(eq + 3));
  }
  CHECK(format_config(config_from_assignments(kv)) == format_config(c));
}

TEST_CASE("train bookkeeping, metrics file and determinism") {
  const fs::path dir = fs::temp_directory_path() / "conther_test_train";
  fs::remove_all(dir);
  fs::create_directories(dir);
  TrainConfig c = tiny_config();
  auto run = [&](const std::string& name) {
    MetricsWriter writer(dir / name);
    TrainOptions options;
    options.metrics = &writer;
    options.checkpoint_dir = dir / (name + ".ckpt");
    return train(c, options);
  };
  const RunMetrics m = run("a.jsonl");
  CHECK(m.updates.size() == 2);
  CHECK(m.epochs.size() == 1);
  std::size_t actor_losses = 0;
  for (const auto& u : m.updates) actor_losses += u.actor_loss ? 1 : 0;
  CHECK(actor_losses <= 2);
  CHECK(actor_losses == 1);
  CHECK(fs::exists(dir / "a.jsonl.ckpt" / "actor.ckpt"));
  CHECK(fs::exists(dir / "a.jsonl.ckpt" / "critic.ckpt"));

  std::ifstream in(dir / "a.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"epoch", "update_idx", "actor_loss", "critic_loss", "mean_reward", "success_rate"}) {
      CHECK(j.contains(key));
    }
    ++lines;
  }
  CHECK(lines == 3);

  run("b.jsonl");
  auto slurp = [&](const std::string& name) {
    std::ifstream f(dir / name);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  };
  CHECK(slurp("a.jsonl") == slurp("b.jsonl"));

  const RunMetrics back = read_metrics(dir / "a.jsonl");
  CHECK(back.updates.size() == 2);
  CHECK(back.epochs.size() == 1);
  CHECK(back.epochs[0].success_rate == m.epochs[0].success_rate);
  fs::remove_all(dir);
}

TEST_CASE("per-episode cadence runs S updates after every episode") {
  TrainConfig c = tiny_config();
  c.update_cadence = "episode";
  const RunMetrics m = train(c);
  CHECK(m.updates.size() == c.updates_per_epoch * c.episodes_per_epoch);
}

TEST_CASE("a diverging run aborts with the offending batch written out") {
  const fs::path dir = fs::temp_directory_path() / "conther_test_nan";
  fs::remove_all(dir);
  TrainConfig c = tiny_config();
  c.critic_lr = 1e300;
  c.actor_lr = 1e300;
  c.updates_per_epoch = 20;
  MetricsWriter* none = nullptr;
  TrainOptions options;
  options.metrics = none;
  options.failure_dir = dir;
  CHECK_THROWS_AS(train(c, options), NumericError);
  CHECK(fs::exists(dir / "failed_batch.json"));
  fs::remove_all(dir);
}
