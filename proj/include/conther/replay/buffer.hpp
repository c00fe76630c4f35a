#pragma once

#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

namespace conther::replay {

/// One environment step as stored: the observation and goal the action was
/// chosen from, the achieved goal at that moment, and the action.
struct StepRecord {
  std::vector<double> obs;
  std::vector<double> goal;
  std::vector<double> achieved_goal;
  std::vector<double> action;
};

using Episode = std::vector<StepRecord>;

struct RecordDims {
  std::size_t obs = 0;
  std::size_t goal = 0;
  std::size_t achieved_goal = 0;
  std::size_t action = 0;
  bool operator==(const RecordDims&) const = default;
};

/// Bounded ring of whole episodes, oldest evicted first. Next-step values are
/// not stored; they are read off the following record when sampling.
///
/// store_episode() and reads take an internal lock, so one collector thread
/// and one trainer thread can share a buffer.
class MainBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 1000;

  explicit MainBuffer(std::size_t capacity = kDefaultCapacity);

  /// Throws ContractError on an empty episode, non-uniform dimensions, or
  /// dimensions differing from episodes already stored.
  void store_episode(Episode episode);

  std::size_t capacity() const { return capacity_; }
  std::size_t episode_count() const;
  std::size_t step_count() const;
  /// Number of (episode, t) pairs with t <= T - 2.
  std::size_t anchor_count() const;
  std::optional<RecordDims> dims() const;

  /// Episode by age, 0 = oldest. The reference stays valid until the next store.
  const Episode& episode(std::size_t index) const;
  /// Maps a flat anchor index in [0, anchor_count()) to (episode, t).
  std::pair<std::size_t, std::size_t> anchor_at(std::size_t flat) const;

  /// Recursive, so a holder may still call the locking accessors.
  std::recursive_mutex& mutex() const { return mutex_; }

 private:
  void rebuild_index();

  std::size_t capacity_;
  std::deque<Episode> episodes_;
  std::vector<std::size_t> anchor_prefix_;  // anchor_prefix_[e] = anchors before episode e
  std::size_t steps_ = 0;
  std::optional<RecordDims> dims_;
  mutable std::recursive_mutex mutex_;
};

}  // namespace conther::replay
