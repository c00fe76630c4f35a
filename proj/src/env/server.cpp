#include "conther/env/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>

#include "conther/error.hpp"

namespace conther::env {

namespace {

// Waits until fd is readable or stop is raised. Returns false on stop.
bool wait_readable(int fd, const std::atomic<bool>& stop) {
  while (!stop.load()) {
    pollfd p{fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, 100);
    if (rc > 0) return true;
    if (rc < 0 && errno != EINTR) throw std::runtime_error(std::string("poll failed: ") + std::strerror(errno));
  }
  return false;
}

void send_error(Socket& client, const std::string& message) {
  ByteWriter w;
  w.text(message);
  try {
    client.send_frame(MessageType::Error, w.take());
  } catch (...) {
    // peer gone; nothing more to report
  }
}

}  // namespace

EnvServer::EnvServer(ServerOptions options) : options_(std::move(options)) {
  options_.default_arm.validate();
  options_.default_task.validate();
  const auto [host, port] = parse_address(options_.bind);

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &result); rc != 0) {
    throw std::runtime_error("cannot resolve " + host + ": " + gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(result, &::freeaddrinfo);
  std::string last_error = "no usable address";
  for (addrinfo* ai = result; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(s.fd(), 8) != 0) {
      last_error = std::strerror(errno);
      continue;
    }
    sockaddr_storage bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port
                                              : reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    listener_ = std::move(s);
    break;
  }
  if (!listener_.valid()) throw std::runtime_error("cannot bind " + options_.bind + ": " + last_error);
  log("listening on " + host + ":" + std::to_string(port_));
}

EnvServer::~EnvServer() = default;

void EnvServer::log(const std::string& line) const {
  if (options_.log) options_.log(line);
}

void EnvServer::run(const std::atomic<bool>& stop) {
  while (wait_readable(listener_.fd(), stop)) {
    sockaddr_storage peer{};
    socklen_t len = sizeof(peer);
    const int fd = ::accept(listener_.fd(), reinterpret_cast<sockaddr*>(&peer), &len);
    if (fd < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw std::runtime_error(std::string("accept failed: ") + std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    log("client connected");
    serve_client(Socket(fd), stop);
    log("client finished");
  }
  log("server stopping");
}

void EnvServer::serve_client(Socket client, const std::atomic<bool>& stop) {
  std::unique_ptr<KinematicEnv> env;
  try {
    ByteWriter hello;
    hello.u8(kProtocolVersion);
    client.send_frame(MessageType::Hello, hello.take());

    while (wait_readable(client.fd(), stop)) {
      std::optional<Frame> frame;
      try {
        frame = client.recv_frame();
      } catch (const ProtocolError& e) {
        log(std::string("protocol error: ") + e.what());
        send_error(client, e.what());
        return;
      }
      if (!frame) {
        log("client disconnected");
        return;
      }
      try {
        switch (frame->type) {
          case MessageType::Reset: {
            ByteReader r(frame->payload);
            const std::uint64_t seed = r.u64();
            const std::vector<double> task_values = r.vec();
            r.expect_end();
            if (task_values.empty()) {
              env = std::make_unique<KinematicEnv>(options_.default_arm, options_.default_task);
            } else {
              auto [task, arm] = decode_task(task_values);
              env = std::make_unique<KinematicEnv>(std::move(arm), std::move(task));
            }
            client.send_frame(MessageType::Observation, encode_step(env->reset(seed)));
            break;
          }
          case MessageType::Step: {
            if (!env) throw ProtocolError("Step before Reset");
            ByteReader r(frame->payload);
            const std::vector<double> action = r.vec();
            r.expect_end();
            client.send_frame(MessageType::Observation, encode_step(env->step(action)));
            break;
          }
          case MessageType::Close:
            client.send_frame(MessageType::Closed, {});
            return;
          default:
            throw ProtocolError("unexpected message type " + std::to_string(static_cast<int>(frame->type)));
        }
      } catch (const std::exception& e) {
        log(std::string("request failed: ") + e.what());
        send_error(client, e.what());
        return;
      }
    }
  } catch (const std::exception& e) {
    log(std::string("connection dropped: ") + e.what());
  }
}

void serve_env(const ServerOptions& options, const std::atomic<bool>& stop) {
  EnvServer server(options);
  server.run(stop);
}

}  // namespace conther::env
