#include "conther/replay/buffer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "conther/error.hpp"

namespace conther::replay {

namespace {

RecordDims dims_of(const StepRecord& s) {
  return {s.obs.size(), s.goal.size(), s.achieved_goal.size(), s.action.size()};
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

MainBuffer::MainBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractError("buffer capacity must be positive");
}

void MainBuffer::store_episode(Episode episode) {
  if (episode.empty()) throw ContractError("store_episode: episode has no steps");
  const RecordDims d = dims_of(episode.front());
  if (d.achieved_goal != 3) throw ContractError("store_episode: achieved goal must be a 3-d workspace point");
  for (std::size_t t = 0; t < episode.size(); ++t) {
    const StepRecord& s = episode[t];
    if (!(dims_of(s) == d)) {
      throw ContractError("store_episode: step " + std::to_string(t) + " has different vector sizes than step 0");
    }
    if (!all_finite(s.obs) || !all_finite(s.goal) || !all_finite(s.achieved_goal) || !all_finite(s.action)) {
      throw ContractError("store_episode: non-finite value at step " + std::to_string(t));
    }
  }
  std::lock_guard lock(mutex_);
  if (dims_ && !(*dims_ == d)) {
    throw ContractError("store_episode: dimensions (obs " + std::to_string(d.obs) + ", goal " +
                        std::to_string(d.goal) + ", action " + std::to_string(d.action) +
                        ") differ from the buffer's (obs " + std::to_string(dims_->obs) + ", goal " +
                        std::to_string(dims_->goal) + ", action " + std::to_string(dims_->action) + ")");
  }
  dims_ = d;
  steps_ += episode.size();
  episodes_.push_back(std::move(episode));
  while (episodes_.size() > capacity_) {
    steps_ -= episodes_.front().size();
    episodes_.pop_front();
  }
  rebuild_index();
}

void MainBuffer::rebuild_index() {
  anchor_prefix_.assign(episodes_.size() + 1, 0);
  for (std::size_t e = 0; e < episodes_.size(); ++e) {
    const std::size_t len = episodes_[e].size();
    anchor_prefix_[e + 1] = anchor_prefix_[e] + (len >= 2 ? len - 1 : 0);
  }
}

std::size_t MainBuffer::episode_count() const {
  std::lock_guard lock(mutex_);
  return episodes_.size();
}

std::size_t MainBuffer::step_count() const {
  std::lock_guard lock(mutex_);
  return steps_;
}

std::size_t MainBuffer::anchor_count() const {
  std::lock_guard lock(mutex_);
  return anchor_prefix_.empty() ? 0 : anchor_prefix_.back();
}

std::optional<RecordDims> MainBuffer::dims() const {
  std::lock_guard lock(mutex_);
  return dims_;
}

const Episode& MainBuffer::episode(std::size_t index) const {
  if (index >= episodes_.size()) throw ContractError("episode index out of range");
  return episodes_[index];
}

std::pair<std::size_t, std::size_t> MainBuffer::anchor_at(std::size_t flat) const {
  if (anchor_prefix_.empty() || flat >= anchor_prefix_.back()) throw ContractError("anchor index out of range");
  // first episode whose prefix end exceeds flat
  const auto it = std::upper_bound(anchor_prefix_.begin() + 1, anchor_prefix_.end(), flat);
  const std::size_t e = static_cast<std::size_t>(it - anchor_prefix_.begin()) - 1;
  return {e, flat - anchor_prefix_[e]};
}

}  // namespace conther::replay
