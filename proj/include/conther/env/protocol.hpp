#pragma once

// Env wire protocol.
//
// Every frame is a 4-byte little-endian length L followed by L bytes: a
// 1-byte message type and the payload. L counts the type byte, so L >= 1.
// Frames with L > kMaxFrameBytes are rejected. Scalars are little-endian;
// a vector is a u32 element count followed by that many float64 values.
//
//   Hello        server -> client  u8 version (sent once on accept)
//   Reset        client -> server  u64 seed, vector task (empty = server default)
//   Step         client -> server  vector action
//   Close        client -> server  (empty)
//   Observation  server -> client  vector obs, vector goal, vector achieved,
//                                  f64 reward, u8 done, u32 clipped
//   Closed       server -> client  (empty), reply to Close
//   Error        server -> client  UTF-8 message; the server then drops the client
//
// The task vector is TaskSpec followed by ArmModel, in encode_task() order.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conther/env/environment.hpp"

namespace conther::env {

inline constexpr std::uint8_t kProtocolVersion = 2;
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 20;

enum class MessageType : std::uint8_t {
  Hello = 0x01,
  Reset = 0x02,
  Step = 0x03,
  Close = 0x04,
  Observation = 0x81,
  Closed = 0x82,
  Error = 0xFF,
};

struct Frame {
  MessageType type = MessageType::Error;
  std::vector<std::uint8_t> payload;
};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void vec(std::span<const double> values);
  void text(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Reads a payload front to back; throws ProtocolError on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::vector<double> vec();
  bool done() const { return pos_ == bytes_.size(); }
  /// Throws unless every byte was consumed.
  void expect_end() const;

 private:
  std::span<const std::uint8_t> take(std::size_t n);
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// Arm section: J, dt, J axis flags (0 yaw, 1 pitch), then J values each of
/// link lengths, gains, lower limits, upper limits and home angles.
std::vector<double> encode_task(const TaskSpec& task, const ArmModel& arm);
std::pair<TaskSpec, ArmModel> decode_task(std::span<const double> values);

std::vector<std::uint8_t> encode_step(const EnvStep& step);
EnvStep decode_step(std::span<const std::uint8_t> payload);

/// Frame with length prefix, ready to write.
std::vector<std::uint8_t> encode_frame(MessageType type, std::span<const std::uint8_t> payload);

/// Owning TCP socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  static Socket connect(const std::string& host, std::uint16_t port);

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();

  void send_all(std::span<const std::uint8_t> bytes);
  void send_frame(MessageType type, std::span<const std::uint8_t> payload);
  /// Next frame, or nullopt on a clean EOF before any byte of it. Oversized
  /// length prefixes throw ProtocolError without reading the body.
  std::optional<Frame> recv_frame();

 private:
  bool recv_exact(std::uint8_t* out, std::size_t n);
  int fd_ = -1;
};

/// "host:port" -> (host, port). Throws ConfigError on bad input.
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

/// Environment proxy that runs every call on a remote serve_env instance.
class RemoteEnv final : public Environment {
 public:
  RemoteEnv(const std::string& address, ArmModel arm, TaskSpec task);
  ~RemoteEnv() override;

  EnvStep reset(std::uint64_t seed) override;
  EnvStep step(std::span<const double> action) override;
  const ArmModel& arm() const override { return arm_; }
  const TaskSpec& task() const override { return task_; }

 private:
  EnvStep roundtrip(MessageType type, std::span<const std::uint8_t> payload);

  ArmModel arm_;
  TaskSpec task_;
  Socket socket_;
};

}  // namespace conther::env
