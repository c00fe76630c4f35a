#include "doctest.h"

#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "conther/env/environment.hpp"
#include "conther/env/protocol.hpp"
#include "conther/env/scripted.hpp"
#include "conther/env/server.hpp"
#include "conther/error.hpp"

using namespace conther;
using namespace conther::env;

namespace {

constexpr double kPi = std::numbers::pi;

bool near(const Vec3& a, const Vec3& b, double tol = 1e-12) { return (a - b).norm() < tol; }

std::vector<std::vector<double>> random_actions(std::size_t steps, std::size_t joints, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  std::vector<std::vector<double>> out(steps, std::vector<double>(joints));
  for (auto& a : out)
    for (auto& x : a) x = u(rng);
  return out;
}

}  // namespace

TEST_CASE("forward kinematics of the planar 2-link arm") {
  const ArmModel arm = ArmModel::planar(2);
  const std::vector<double> straight{0, 0}, up{kPi / 2, 0}, elbow{0, kPi / 2};
  CHECK(near(end_effector(arm, straight), Vec3(2, 0, 0)));
  CHECK(near(end_effector(arm, up), Vec3(0, 2, 0)));
  CHECK(near(end_effector(arm, elbow), Vec3(1, 1, 0)));
  const Kinematics k = forward_kinematics(arm, elbow);
  CHECK(k.joint_positions.size() == 2);
  CHECK(near(k.joint_positions[1], Vec3(1, 0, 0)));
}

TEST_CASE("home poses") {
  const ArmModel spatial = ArmModel::spatial6();
  CHECK(near(end_effector(spatial, spatial.home), Vec3(0.5288, 0.0, 0.1642), 1e-3));
  KinematicEnv env(spatial, TaskSpec::reach());
  env.reset(3);
  CHECK(env.state().angles == spatial.home);
  const ArmModel three = ArmModel::spatial3();
  CHECK(near(end_effector(three, three.home), Vec3(0.5178, 0.0, 0.1766), 1e-3));
  CHECK(ArmModel::planar(3).home == std::vector<double>(3, 0.0));
  ArmModel bad = ArmModel::planar(2);
  bad.home[1] = 4.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("reward_reach table") {
  CHECK(reward_reach(0.05, 0.1) == 0.0);
  CHECK(reward_reach(0.1, 0.1) == 0.0);
  CHECK(reward_reach(0.2, 0.1) == -1.0);
}

TEST_CASE("reward_obstacle_task table") {
  const std::vector<double> clear{0.05, 0.2, 0.3}, one_close{0.03, 0.2, 0.3}, very_close{0.01, 0.2, 0.3};
  CHECK(reward_obstacle_task(0.05, clear, 0.09, 0.05) == 0.0);
  CHECK(reward_obstacle_task(0.05, one_close, 0.09, 0.05) == -0.5);
  CHECK(reward_obstacle_task(0.3, very_close, 0.09, 0.05) == -1.0);
  CHECK(reward_obstacle_task(0.3, clear, 0.09, 0.05) == -0.5);
}

TEST_CASE("reward codomains on random inputs") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(0.0, 0.4);
  for (int i = 0; i < 5000; ++i) {
    const double r = reward_reach(d(rng), 0.1);
    CHECK((r == 0.0 || r == -1.0));
    const std::vector<double> obs{d(rng) / 4, d(rng) / 4, d(rng) / 4};
    const double o = reward_obstacle_task(d(rng), obs, 0.09, 0.05);
    CHECK((o == 0.0 || o == -0.5 || o == -1.0));
  }
}

TEST_CASE("reset is deterministic and reach goals lie in the annulus") {
  const ArmModel arm = ArmModel::spatial6();
  KinematicEnv env(arm, TaskSpec::reach());
  const EnvStep a = env.reset(42), b = env.reset(42);
  CHECK(a.goal == b.goal);
  CHECK(a.observation == b.observation);

  const TaskSpec task = TaskSpec::reach();
  const double reach = arm.reach();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 g = sample_reach_goal(arm, task, rng);
    const double r = std::hypot(g.x(), g.y());
    CHECK(r >= task.region.radius_min * reach - 1e-12);
    CHECK(r <= task.region.radius_max * reach + 1e-12);
    CHECK(g.z() >= task.region.height_min * reach - 1e-12);
    CHECK(g.z() <= task.region.height_max * reach + 1e-12);
    CHECK(g.norm() <= reach - task.goal_threshold + 1e-12);
  }
}

TEST_CASE("obstacles sit above the goal") {
  KinematicEnv env(ArmModel::spatial6(), TaskSpec::trajectory_task(TaskKind::TrajCircle));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    env.reset(seed);
    REQUIRE(env.state().obstacles.size() == 3);
    for (const auto& o : env.state().obstacles) CHECK(o.z() > env.state().goal.z());
  }
}

TEST_CASE("step: zero action, gain halving, clipping, episode length") {
  const ArmModel arm = ArmModel::planar(4);
  KinematicEnv env(arm, TaskSpec::reach());
  const EnvStep start = env.reset(1);
  const std::vector<double> zero(4, 0.0);
  const EnvStep s = env.step(zero);
  CHECK(s.achieved_goal == start.achieved_goal);
  CHECK(env.state().angles == env.home_pose());

  const std::vector<double> push{0.5, -0.5, 1.0, 0.25};
  env.reset(1);
  env.step(push);
  const auto full = env.state().angles;
  TaskSpec halved = TaskSpec::reach();
  halved.halve_gains = true;
  KinematicEnv slow(arm, halved);
  slow.reset(1);
  slow.step(push);
  for (std::size_t j = 0; j < 4; ++j) CHECK(slow.state().angles[j] == doctest::Approx(full[j] / 2).epsilon(1e-15));

  env.reset(1);
  const std::vector<double> wild{3.0, -2.0, 0.0, 0.5};
  const EnvStep c = env.step(wild);
  CHECK(c.clipped == 2);

  env.reset(2);
  std::size_t steps = 0;
  bool done = false;
  while (!done) {
    done = env.step(zero).done;
    ++steps;
  }
  CHECK(steps == 50);
  CHECK_THROWS_AS(env.step(zero), ContractError);
}

TEST_CASE("moving goals change only every ceil(K/2) steps") {
  CHECK(update_period_for(6) == 3);
  CHECK(update_period_for(1) == 1);
  KinematicEnv env(ArmModel::spatial6(), TaskSpec::trajectory_task(TaskKind::TrajSinusoid, 6));
  EnvStep prev = env.reset(5);
  const std::vector<double> zero(6, 0.0);
  for (std::size_t t = 1; t <= 50; ++t) {
    const EnvStep s = env.step(zero);
    if (t % 3 == 0) {
      CHECK(s.goal != prev.goal);
    } else {
      CHECK(s.goal == prev.goal);
    }
    prev = s;
  }
}

TEST_CASE("trajectory_position closed forms") {
  TrajectoryParams p;
  TrajectoryState st;
  st.center = Vec3(0.5, 0.1, 0.2);
  st.direction = Vec3(0, 1, 0);
  st.size = 0.1;
  st.obstacle_offsets = {Vec3(0, 0, 0.15)};

  const TrajectoryPoint c0 = trajectory_position(TaskKind::TrajCircle, 0.0, p, st);
  CHECK(near(c0.goal, st.center + Vec3(0.1, 0, 0)));

  const double quarter = p.sine_period / 4;
  const TrajectoryPoint s0 = trajectory_position(TaskKind::TrajSinusoid, 0.0, p, st);
  const TrajectoryPoint sq = trajectory_position(TaskKind::TrajSinusoid, quarter, p, st);
  const Vec3 path = st.center + st.direction * (p.sine_travel_speed * quarter);
  CHECK(std::abs(sq.goal.z() - (path.z() + st.size)) < 1e-12);
  CHECK(std::abs((sq.obstacles[0].z() - s0.obstacles[0].z()) - (-st.size)) < 1e-12);

  const TrajectoryPoint before = trajectory_position(TaskKind::TrajCircle, p.circle_period - 1, p, st);
  const TrajectoryPoint after = trajectory_position(TaskKind::TrajCircle, p.circle_period, p, st);
  const double r_before = (before.goal - st.center).norm(), r_after = (after.goal - st.center).norm();
  CHECK(std::abs(r_after - r_before - p.circle_radius_step) < 1e-9);

  CHECK_THROWS_AS(trajectory_position(TaskKind::Reach, 0.0, p, st), ContractError);
}

TEST_CASE("scripted tracker reaches goals") {
  const ArmModel arm = ArmModel::planar(2);
  KinematicEnv env(arm, TaskSpec::reach());
  std::size_t successes = 0, transitions = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EnvStep s = env.reset(seed);
    for (int t = 0; t < 50; ++t) {
      s = env.step(tracking_action(arm, env.task(), s.observation, s.goal));
      successes += s.reward == kSuccessReward ? 1 : 0;
      ++transitions;
    }
  }
  CHECK(static_cast<double>(successes) / static_cast<double>(transitions) >= 0.9);
}

TEST_CASE("frame encoding and malformed frames") {
  EnvStep s;
  s.observation = {1.5, -2.25, 3e-300};
  s.goal = {0.1, 0.2, 0.3};
  s.achieved_goal = {0.4, 0.5, 0.6};
  s.reward = -1.0;
  s.done = true;
  s.clipped = 2;
  const EnvStep back = decode_step(encode_step(s));
  CHECK(back.observation == s.observation);
  CHECK(back.goal == s.goal);
  CHECK(back.achieved_goal == s.achieved_goal);
  CHECK(back.reward == s.reward);
  CHECK(back.done);
  CHECK(back.clipped == 2);

  std::vector<std::uint8_t> truncated = encode_step(s);
  truncated.resize(truncated.size() / 2);
  CHECK_THROWS_AS(decode_step(truncated), ProtocolError);

  const auto [task, arm] = decode_task(encode_task(TaskSpec::trajectory_task(TaskKind::TrajSpiral), ArmModel::spatial6()));
  CHECK(task.kind == TaskKind::TrajSpiral);
  CHECK(task.obstacle_count == 3);
  CHECK(arm.joint_count() == 6);
  CHECK(arm.home == ArmModel::spatial6().home);

  CHECK(parse_address("127.0.0.1:5555") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 5555});
  CHECK_THROWS(parse_address("nonsense"));
}

TEST_CASE("remote env matches in-process env and rejects oversized frames") {
  ServerOptions options;
  options.bind = "127.0.0.1:0";
  EnvServer server(options);
  std::atomic<bool> stop{false};
  std::thread thread([&] { server.run(stop); });
  const std::string address = "127.0.0.1:" + std::to_string(server.port());

  {
    const ArmModel arm = ArmModel::spatial6();
    const TaskSpec task = TaskSpec::trajectory_task(TaskKind::TrajCircle);
    RemoteEnv remote(address, arm, task);
    KinematicEnv local(arm, task);
    EnvStep r = remote.reset(17), l = local.reset(17);
    CHECK(r.observation == l.observation);
    const auto actions = random_actions(200, 6, 3);
    bool same = true;
    for (const auto& a : actions) {
      if (l.done) {
        r = remote.reset(18);
        l = local.reset(18);
      }
      r = remote.step(a);
      l = local.step(a);
      same = same && r.observation == l.observation && r.goal == l.goal && r.achieved_goal == l.achieved_goal &&
             r.reward == l.reward && r.done == l.done;
    }
    CHECK(same);
  }
  {
    Socket raw = Socket::connect("127.0.0.1", server.port());
    const auto hello = raw.recv_frame();
    REQUIRE(hello.has_value());
    CHECK(hello->type == MessageType::Hello);
    std::vector<std::uint8_t> header{0x00, 0x00, 0x20, 0x00, 0x02};  // 2 MiB declared length
    raw.send_all(header);
    const auto reply = raw.recv_frame();
    REQUIRE(reply.has_value());
    CHECK(reply->type == MessageType::Error);
  }
  stop = true;
  thread.join();
}
