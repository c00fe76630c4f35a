#pragma once

#include <filesystem>
#include <fstream>

#include "conther/trainer/trainer.hpp"

namespace conther::trainer {

// One JSON object per line. Update lines carry epoch, update_idx,
// actor_loss (null off the actor cadence) and critic_loss; epoch lines carry
// epoch, mean_reward and success_rate. Every line has all six fields, with
// null for the ones that do not apply.

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);

  void write_update(const UpdateMetrics& m);
  void write_epoch(const EpochMetrics& m);
  void flush();

 private:
  std::ofstream out_;
};

/// Parses a metrics file written by MetricsWriter. Epoch seconds are 0.
/// Throws FormatError on a malformed line.
RunMetrics read_metrics(const std::filesystem::path& path);

}  // namespace conther::trainer
