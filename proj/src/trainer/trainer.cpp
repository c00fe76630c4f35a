#include "conther/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "json.hpp"

#include "conther/env/scripted.hpp"
#include "conther/env/task.hpp"
#include "conther/error.hpp"
#include "conther/nets/checkpoint.hpp"
#include "conther/ndnum/ops.hpp"
#include "conther/trainer/metrics.hpp"

namespace conther::trainer {

namespace {

enum Stream : std::uint64_t {
  kActorInit = 1,
  kCriticInit,
  kExplore,
  kSample,
  kTrainEnv,
  kValidationEnv,
  kSmoothing,
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_loss(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " is " + std::to_string(v));
}

void dump_batch(const replay::SampledBatch& batch, const std::filesystem::path& path) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : batch.windows) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : w.steps) {
      steps.push_back({{"obs", s.obs}, {"goal", s.goal}, {"achieved_goal", s.achieved_goal}, {"action", s.action}});
    }
    windows.push_back({{"episode", w.episode},
                       {"anchor", w.anchor},
                       {"relabeled", w.relabeled},
                       {"reward", w.reward},
                       {"steps", steps},
                       {"next_obs", w.next_obs},
                       {"next_goal", w.next_goal},
                       {"next_achieved_goal", w.next_achieved_goal}});
  }
  std::ofstream out(path);
  out << nlohmann::json{{"windows", windows}}.dump() << '\n';
}

// RAII freeze of a parameter list for the actor step.
class Freeze {
 public:
  explicit Freeze(const nd::ParamList& params) : params_(params) { nd::set_requires_grad(params_, false); }
  ~Freeze() { nd::set_requires_grad(params_, true); }
  Freeze(const Freeze&) = delete;
  Freeze& operator=(const Freeze&) = delete;

 private:
  const nd::ParamList& params_;
};

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix(splitmix(splitmix(seed) ^ stream) ^ index);
}

std::vector<double> input_row(std::span<const double> obs, std::span<const double> goal) {
  if (obs.size() < 6 || (obs.size() - 6) % env::ObservationLayout::kPerJoint != 0 || goal.size() < 3) {
    throw DimensionError("input_row: observation of length " + std::to_string(obs.size()) +
                         " or goal of length " + std::to_string(goal.size()) + " does not fit the layout");
  }
  const env::ObservationLayout layout{(obs.size() - 6) / env::ObservationLayout::kPerJoint};
  std::vector<double> row(obs.begin(), obs.end());
  std::copy_n(goal.begin(), 3, row.begin() + static_cast<std::ptrdiff_t>(layout.goal()));
  row.insert(row.end(), goal.begin(), goal.end());
  return row;
}

void ContextBuffer::reset(std::vector<double> row) {
  rows_.assign(window_, std::move(row));
}

void ContextBuffer::push(std::vector<double> row) {
  if (rows_.empty()) throw ContractError("ContextBuffer: push before reset");
  rows_.pop_front();
  rows_.push_back(std::move(row));
}

nd::Tensor ContextBuffer::tensor() const {
  if (rows_.empty()) throw ContractError("ContextBuffer: tensor before reset");
  const std::size_t d = rows_.front().size();
  std::vector<double> data;
  data.reserve(window_ * d);
  for (const auto& r : rows_) data.insert(data.end(), r.begin(), r.end());
  return nd::Tensor::from({window_, d}, std::move(data));
}

Policy actor_policy(const nets::ActorNet& actor) {
  return [&actor](const ContextBuffer& context, const env::EnvStep&) {
    nd::NoGradGuard no_grad;
    const nd::Tensor a = actor.forward(context.tensor());
    return std::vector<double>(a.data().begin(), a.data().end());
  };
}

Policy scripted_policy(const env::ArmModel& arm, const env::TaskSpec& task) {
  return [arm, task](const ContextBuffer&, const env::EnvStep& current) {
    return env::tracking_action(arm, task, current.observation, current.goal);
  };
}

EpisodeRecord run_episode(const Policy& policy, env::Environment& env, std::size_t window, std::uint64_t env_seed,
                          double sigma, std::mt19937_64& rng) {
  const std::size_t joints = env.action_dim();
  const std::size_t horizon = env.task().episode_length;
  EpisodeRecord rec;
  rec.steps.reserve(horizon + 1);
  rec.rewards.reserve(horizon);

  env::EnvStep s = env.reset(env_seed);
  ContextBuffer context(window);
  context.reset(input_row(s.observation, s.goal));
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);

  for (std::size_t t = 0; t < horizon; ++t) {
    std::vector<double> a = policy(context, s);
    if (a.size() != joints) {
      throw DimensionError("policy returned " + std::to_string(a.size()) + " actions for " +
                           std::to_string(joints) + " joints");
    }
    for (double& v : a) {
      if (sigma > 0.0) v += noise(rng);
      v = std::clamp(v, -1.0, 1.0);
    }
    rec.steps.push_back({s.observation, s.goal, s.achieved_goal, a});
    s = env.step(a);
    rec.rewards.push_back(s.reward);
    if (s.reward == env::kSuccessReward) ++rec.successes;
    context.push(input_row(s.observation, s.goal));
  }
  rec.steps.push_back({s.observation, s.goal, s.achieved_goal, std::vector<double>(joints, 0.0)});
  return rec;
}

ValidationResult validate(const Policy& policy, env::Environment& env, std::size_t window, std::size_t episodes,
                          std::uint64_t seed_base) {
  if (episodes == 0) throw ContractError("validate: at least one episode is required");
  std::mt19937_64 unused(0);
  double reward_sum = 0.0;
  std::size_t successes = 0, transitions = 0;
  for (std::size_t i = 0; i < episodes; ++i) {
    const EpisodeRecord rec = run_episode(policy, env, window, derive_seed(seed_base, i), 0.0, unused);
    for (double r : rec.rewards) reward_sum += r;
    successes += rec.successes;
    transitions += rec.rewards.size();
  }
  return {reward_sum / static_cast<double>(transitions),
          static_cast<double>(successes) / static_cast<double>(transitions)};
}

Learner::Learner(const TrainConfig& config, const nets::NetConfig& nets)
    : actor(nets, derive_seed(config.seed, kActorInit)),
      critic(nets, derive_seed(config.seed, kCriticInit)),
      actor_target(actor.clone()),
      critic_target(critic.clone()),
      actor_opt(actor.parameters(), config.actor_lr),
      critic_opt(critic.parameters(), config.critic_lr) {
  nd::set_requires_grad(actor_target.parameters(), false);
  nd::set_requires_grad(critic_target.parameters(), false);
}

void Learner::soft_update_targets(double tau) {
  nets::soft_update(actor_target.parameters(), actor.parameters(), tau);
  nets::soft_update(critic_target.parameters(), critic.parameters(), tau);
}

BatchTensors batch_tensors(const replay::SampledBatch& batch, std::size_t window) {
  if (batch.windows.empty()) throw ContractError("batch_tensors: empty batch");
  const auto& first = batch.windows.front();
  const std::size_t d = first.steps.front().obs.size() + first.steps.front().goal.size();
  const std::size_t joints = first.steps.back().action.size();
  const std::size_t n = batch.windows.size();

  std::vector<double> cur, next, actions;
  cur.reserve(n * window * d);
  next.reserve(n * window * d);
  actions.reserve(n * joints);
  BatchTensors out;
  out.rewards.reserve(n);
  auto append = [](std::vector<double>& dst, const std::vector<double>& row) {
    dst.insert(dst.end(), row.begin(), row.end());
  };
  for (const auto& w : batch.windows) {
    if (w.steps.size() != window) {
      throw DimensionError("batch_tensors: window has " + std::to_string(w.steps.size()) + " steps, expected " +
                           std::to_string(window));
    }
    for (std::size_t j = 0; j < window; ++j) append(cur, input_row(w.steps[j].obs, w.steps[j].goal));
    for (std::size_t j = 1; j < window; ++j) append(next, input_row(w.steps[j].obs, w.steps[j].goal));
    append(next, input_row(w.next_obs, w.next_goal));
    append(actions, w.steps.back().action);
    out.rewards.push_back(w.reward);
  }
  out.windows = nd::Tensor::from({n * window, d}, std::move(cur));
  out.next_windows = nd::Tensor::from({n * window, d}, std::move(next));
  out.actions = nd::Tensor::from({n, joints}, std::move(actions));
  return out;
}

replay::SampledBatch draw_batch(const replay::MainBuffer& buffer, const TrainConfig& config,
                                const env::TaskSpec& task, std::mt19937_64& rng) {
  replay::SampledBatch batch =
      replay::sample_batch(buffer, config.batch_size, config.context_length, config.her_fraction, rng);
  const auto obstacles = task.has_obstacles() ? replay::env_obstacle_generator(task) : replay::ObstacleGenerator{};
  for (auto& w : batch.windows) {
    if (!w.relabeled) continue;
    replay::her_relabel(w);
    if (obstacles) replay::relabel_obstacles(w, obstacles, rng);
  }
  replay::compute_rewards(batch, task);
  return batch;
}

std::vector<double> critic_targets(const Learner& learner, const BatchTensors& batch, const TrainConfig& config,
                                   std::mt19937_64& rng) {
  nd::NoGradGuard no_grad;
  nd::Tensor next_actions = learner.actor_target.forward(batch.next_windows);
  if (config.target_smoothing) {
    std::normal_distribution<double> noise(0.0, config.smoothing_noise > 0.0 ? config.smoothing_noise : 1.0);
    std::vector<double> a(next_actions.data().begin(), next_actions.data().end());
    for (double& v : a) {
      const double e = config.smoothing_noise > 0.0 ? noise(rng) : 0.0;
      v = std::clamp(v + std::clamp(e, -config.smoothing_clip, config.smoothing_clip), -1.0, 1.0);
    }
    next_actions = nd::Tensor::from(next_actions.shape(), std::move(a));
  }
  const nets::QPair q = learner.critic_target.forward(batch.next_windows, next_actions);
  const auto q1 = q.q1.data();
  const auto q2 = q.q2.data();
  std::vector<double> y(batch.rewards.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = batch.rewards[i] + config.gamma * std::min(q1[i], q2[i]);
  return y;
}

UpdateResult update_step(Learner& learner, const BatchTensors& batch, const TrainConfig& config, std::size_t t,
                         std::mt19937_64& rng) {
  UpdateResult result;
  const std::size_t n = batch.rewards.size();
  const nd::Tensor y = nd::Tensor::from({n, 1}, critic_targets(learner, batch, config, rng));

  learner.critic_opt.zero_grad();
  {
    const nets::QPair q = learner.critic.forward(batch.windows, batch.actions);
    const nd::Tensor l1 = nd::mean(nd::square(nd::sub(q.q1, y)));
    const nd::Tensor l2 = nd::mean(nd::square(nd::sub(q.q2, y)));
    result.q1_loss = l1.item();
    result.q2_loss = l2.item();
    check_loss(result.q1_loss, "critic q1 loss");
    check_loss(result.q2_loss, "critic q2 loss");
    nd::add(l1, l2).backward();
  }
  learner.critic_opt.step();

  if (t % config.actor_delay == 0) {
    const nd::ParamList critic_params = learner.critic.parameters();
    Freeze freeze(critic_params);
    learner.actor_opt.zero_grad();
    const nd::Tensor mu = learner.actor.forward(batch.windows);
    const nets::QPair q = learner.critic.forward(batch.windows, mu);
    // mean over the batch of ||mu||^2 == J * mean over all entries
    const double joints = static_cast<double>(mu.dim(1));
    const nd::Tensor penalty = nd::scale(nd::mean(nd::square(mu)), config.action_l2 * joints);
    const nd::Tensor loss = nd::sub(penalty, nd::mean(nd::minimum(q.q1, q.q2)));
    result.actor_loss = loss.item();
    check_loss(*result.actor_loss, "actor loss");
    loss.backward();
    learner.actor_opt.step();
  }
  return result;
}

RunMetrics train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  std::unique_ptr<env::Environment> env = make_env(config);
  const nets::NetConfig nc = net_config(config, env->observation_dim(), env->goal_dim(), env->action_dim());
  const std::size_t window = nc.window;
  Learner learner(config, nc);
  replay::MainBuffer buffer(config.buffer_capacity);

  std::mt19937_64 explore(derive_seed(config.seed, kExplore));
  std::mt19937_64 sampler(derive_seed(config.seed, kSample));
  std::mt19937_64 smoothing(derive_seed(config.seed, kSmoothing));
  const Policy policy = actor_policy(learner.actor);

  RunMetrics metrics;
  std::size_t update_idx = 0;
  std::size_t episode_idx = 0;
  auto run_updates = [&](std::size_t epoch) {
    for (std::size_t t = 1; t <= config.updates_per_epoch; ++t) {
      const replay::SampledBatch batch = draw_batch(buffer, config, env->task(), sampler);
      UpdateResult r;
      try {
        r = update_step(learner, batch_tensors(batch, window), config, t, smoothing);
      } catch (const NumericError&) {
        if (options.failure_dir) {
          std::filesystem::create_directories(*options.failure_dir);
          dump_batch(batch, *options.failure_dir / "failed_batch.json");
        }
        throw;
      }
      UpdateMetrics u{epoch, ++update_idx, r.critic_loss(), r.actor_loss};
      if (options.metrics) options.metrics->write_update(u);
      metrics.updates.push_back(u);
      if (config.target_update_per_step) learner.soft_update_targets(config.tau);
    }
    if (!config.target_update_per_step) learner.soft_update_targets(config.tau);
  };
  const bool per_episode = config.update_cadence == "episode";

  try {
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      const auto start = std::chrono::steady_clock::now();
      double reward_sum = 0.0;
      std::size_t transitions = 0;
      for (std::size_t e = 0; e < config.episodes_per_epoch; ++e) {
        EpisodeRecord rec;
        const std::uint64_t env_seed = derive_seed(config.seed, kTrainEnv, episode_idx++);
        try {
          rec = run_episode(policy, *env, window, env_seed, config.noise, explore);
        } catch (const ProtocolError& err) {
          std::cerr << "epoch " << epoch << " episode " << e << " aborted: " << err.what() << '\n';
          continue;
        }
        for (double r : rec.rewards) reward_sum += r;
        transitions += rec.rewards.size();
        buffer.store_episode(std::move(rec.steps));
        if (per_episode) run_updates(epoch);
      }
      if (transitions == 0) throw std::runtime_error("epoch " + std::to_string(epoch) + " collected no episodes");
      if (!per_episode) run_updates(epoch);

      const ValidationResult val = validate(policy, *env, window, config.validation_episodes,
                                            derive_seed(config.seed, kValidationEnv));
      EpochMetrics em{epoch, reward_sum / static_cast<double>(transitions), val.success_rate,
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
      if (options.metrics) options.metrics->write_epoch(em);
      metrics.epochs.push_back(em);
      if (options.on_epoch) options.on_epoch(em);
    }
  } catch (...) {
    if (options.metrics) options.metrics->flush();
    throw;
  }
  if (options.metrics) options.metrics->flush();
  if (options.checkpoint_dir) {
    std::filesystem::create_directories(*options.checkpoint_dir);
    nets::save_checkpoint(*options.checkpoint_dir / "actor.ckpt", learner.actor.parameters());
    nets::save_checkpoint(*options.checkpoint_dir / "critic.ckpt", learner.critic.parameters());
  }
  return metrics;
}

}  // namespace conther::trainer
