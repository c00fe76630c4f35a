#include "conther/trainer/metrics.hpp"

#include <string>

#include "json.hpp"

#include "conther/error.hpp"

namespace conther::trainer {

using nlohmann::json;

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw std::runtime_error("cannot write " + path.string());
}

void MetricsWriter::write_update(const UpdateMetrics& m) {
  json j = {{"epoch", m.epoch},
            {"update_idx", m.update_idx},
            {"actor_loss", m.actor_loss ? json(*m.actor_loss) : json(nullptr)},
            {"critic_loss", m.critic_loss},
            {"mean_reward", nullptr},
            {"success_rate", nullptr}};
  out_ << j.dump() << '\n';
}

void MetricsWriter::write_epoch(const EpochMetrics& m) {
  json j = {{"epoch", m.epoch},
            {"update_idx", nullptr},
            {"actor_loss", nullptr},
            {"critic_loss", nullptr},
            {"mean_reward", m.mean_reward},
            {"success_rate", m.success_rate}};
  out_ << j.dump() << '\n';
}

void MetricsWriter::flush() { out_.flush(); }

RunMetrics read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  RunMetrics m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!j.at("update_idx").is_null()) {
        UpdateMetrics u;
        u.epoch = j.at("epoch").get<std::size_t>();
        u.update_idx = j.at("update_idx").get<std::size_t>();
        u.critic_loss = j.at("critic_loss").get<double>();
        if (!j.at("actor_loss").is_null()) u.actor_loss = j.at("actor_loss").get<double>();
        m.updates.push_back(u);
      } else {
        EpochMetrics e;
        e.epoch = j.at("epoch").get<std::size_t>();
        e.mean_reward = j.at("mean_reward").get<double>();
        e.success_rate = j.at("success_rate").get<double>();
        m.epochs.push_back(e);
      }
    } catch (const json::exception& err) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + err.what());
    }
  }
  return m;
}

}  // namespace conther::trainer
