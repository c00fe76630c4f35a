#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>

#include "conther/env/kinematics.hpp"
#include "conther/env/protocol.hpp"
#include "conther/env/task.hpp"

namespace conther::env {

struct ServerOptions {
  std::string bind = "127.0.0.1:5555";
  /// Used when a Reset carries an empty task vector.
  TaskSpec default_task = TaskSpec::reach();
  ArmModel default_arm = ArmModel::planar(4);
  std::function<void(const std::string&)> log;
};

/// Serves KinematicEnv instances over the wire protocol, one client at a
/// time; later clients wait in the listen backlog. A client disconnect drops
/// its env. Port 0 binds an ephemeral port (see port()).
class EnvServer {
 public:
  /// Binds and listens; throws std::runtime_error if the address is taken.
  explicit EnvServer(ServerOptions options);
  ~EnvServer();
  EnvServer(const EnvServer&) = delete;
  EnvServer& operator=(const EnvServer&) = delete;

  std::uint16_t port() const { return port_; }

  /// Accept loop; returns once `stop` becomes true (checked every ~100 ms).
  void run(const std::atomic<bool>& stop);

 private:
  void serve_client(Socket client, const std::atomic<bool>& stop);
  void log(const std::string& line) const;

  ServerOptions options_;
  Socket listener_;
  std::uint16_t port_ = 0;
};

/// Bind, then serve until `stop`.
void serve_env(const ServerOptions& options, const std::atomic<bool>& stop);

}  // namespace conther::env
