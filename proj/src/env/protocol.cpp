#include "conther/env/protocol.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>

#include "conther/error.hpp"

namespace conther::env {

namespace {

static_assert(std::endian::native == std::endian::little, "wire encoding assumes a little-endian host");

template <class T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

constexpr double TrajectoryParams::*kTrajectoryFields[] = {
    &TrajectoryParams::center_radius_min,   &TrajectoryParams::center_radius_max,
    &TrajectoryParams::center_height_min,   &TrajectoryParams::center_height_max,
    &TrajectoryParams::sine_amplitude_min,  &TrajectoryParams::sine_amplitude_max,
    &TrajectoryParams::sine_period,         &TrajectoryParams::sine_travel_speed,
    &TrajectoryParams::circle_radius_min,   &TrajectoryParams::circle_radius_max,
    &TrajectoryParams::circle_radius_step,  &TrajectoryParams::circle_period,
    &TrajectoryParams::spiral_radius_min,   &TrajectoryParams::spiral_radius_max,
    &TrajectoryParams::spiral_radius_step,  &TrajectoryParams::spiral_period,
    &TrajectoryParams::spiral_height,       &TrajectoryParams::spiral_traversal,
    &TrajectoryParams::obstacle_bob_amplitude, &TrajectoryParams::obstacle_bob_period,
    &TrajectoryParams::obstacle_orbit_radius,  &TrajectoryParams::obstacle_orbit_period,
};

constexpr std::size_t kTaskFields = 7 + 4 + 3 + std::size(kTrajectoryFields);

std::size_t as_count(double v, const char* what) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e9) {
    throw ProtocolError(std::string("task encoding: bad ") + what);
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

void ByteWriter::u32(std::uint32_t v) { append_le(bytes_, v); }
void ByteWriter::u64(std::uint64_t v) { append_le(bytes_, v); }
void ByteWriter::f64(double v) { append_le(bytes_, v); }

void ByteWriter::vec(std::span<const double> values) {
  u32(static_cast<std::uint32_t>(values.size()));
  for (double v : values) f64(v);
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (bytes_.size() - pos_ < n) throw ProtocolError("truncated payload");
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  std::memcpy(&v, take(4).data(), 4);
  return v;
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v;
  std::memcpy(&v, take(8).data(), 8);
  return v;
}

double ByteReader::f64() {
  double v;
  std::memcpy(&v, take(8).data(), 8);
  return v;
}

std::vector<double> ByteReader::vec() {
  const std::uint32_t n = u32();
  if (static_cast<std::size_t>(n) * 8 > bytes_.size() - pos_) throw ProtocolError("vector length exceeds payload");
  std::vector<double> out(n);
  for (auto& v : out) v = f64();
  return out;
}

void ByteReader::expect_end() const {
  if (!done()) throw ProtocolError("trailing bytes in payload");
}

std::vector<double> encode_task(const TaskSpec& task, const ArmModel& arm) {
  std::vector<double> out;
  out.push_back(static_cast<double>(static_cast<int>(task.kind)));
  out.push_back(task.goal_threshold);
  out.push_back(task.obstacle_threshold);
  out.push_back(static_cast<double>(task.obstacle_count));
  out.push_back(static_cast<double>(task.update_period));
  out.push_back(static_cast<double>(task.episode_length));
  out.push_back(task.halve_gains ? 1.0 : 0.0);
  out.insert(out.end(), {task.region.radius_min, task.region.radius_max, task.region.height_min, task.region.height_max});
  out.insert(out.end(), {task.obstacles.height_min, task.obstacles.height_max, task.obstacles.jitter});
  for (auto field : kTrajectoryFields) out.push_back(task.trajectory.*field);

  const std::size_t j = arm.joint_count();
  out.push_back(static_cast<double>(j));
  out.push_back(arm.dt);
  for (auto axis : arm.axes) out.push_back(axis == JointAxis::Yaw ? 0.0 : 1.0);
  for (const auto* list : {&arm.link_lengths, &arm.gains, &arm.lower_limits, &arm.upper_limits, &arm.home}) {
    out.insert(out.end(), list->begin(), list->end());
  }
  return out;
}

std::pair<TaskSpec, ArmModel> decode_task(std::span<const double> v) {
  if (v.size() < kTaskFields + 2) throw ProtocolError("task encoding too short");
  TaskSpec task;
  std::size_t i = 0;
  const std::size_t kind = as_count(v[i++], "task kind");
  if (kind > 3) throw ProtocolError("task encoding: unknown task kind");
  task.kind = static_cast<TaskKind>(kind);
  task.goal_threshold = v[i++];
  task.obstacle_threshold = v[i++];
  task.obstacle_count = as_count(v[i++], "obstacle count");
  task.update_period = as_count(v[i++], "update period");
  task.episode_length = as_count(v[i++], "episode length");
  task.halve_gains = v[i++] != 0.0;
  task.region = {v[i], v[i + 1], v[i + 2], v[i + 3]};
  i += 4;
  task.obstacles = {v[i], v[i + 1], v[i + 2]};
  i += 3;
  for (auto field : kTrajectoryFields) task.trajectory.*field = v[i++];

  ArmModel arm;
  const std::size_t j = as_count(v[i++], "joint count");
  arm.dt = v[i++];
  if (v.size() != i + 6 * j) throw ProtocolError("task encoding: arm section has wrong length");
  for (std::size_t k = 0; k < j; ++k) arm.axes.push_back(v[i++] == 0.0 ? JointAxis::Yaw : JointAxis::Pitch);
  for (auto* list : {&arm.link_lengths, &arm.gains, &arm.lower_limits, &arm.upper_limits, &arm.home}) {
    list->assign(v.begin() + static_cast<std::ptrdiff_t>(i), v.begin() + static_cast<std::ptrdiff_t>(i + j));
    i += j;
  }
  return {task, arm};
}

std::vector<std::uint8_t> encode_step(const EnvStep& step) {
  ByteWriter w;
  w.vec(step.observation);
  w.vec(step.goal);
  w.vec(step.achieved_goal);
  w.f64(step.reward);
  w.u8(step.done ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(step.clipped));
  return w.take();
}

EnvStep decode_step(std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  EnvStep step;
  step.observation = r.vec();
  step.goal = r.vec();
  step.achieved_goal = r.vec();
  step.reward = r.f64();
  step.done = r.u8() != 0;
  step.clipped = r.u32();
  r.expect_end();
  return step;
}

std::vector<std::uint8_t> encode_frame(MessageType type, std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> out;
  out.reserve(5 + payload.size());
  append_le(out, static_cast<std::uint32_t>(payload.size() + 1));
  out.push_back(static_cast<std::uint8_t>(type));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Socket Socket::connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &result); rc != 0) {
    throw std::runtime_error("cannot resolve " + host + ": " + gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = result; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0) throw std::runtime_error("cannot connect to " + host + ":" + service);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return Socket(fd);
}

void Socket::send_all(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

void Socket::send_frame(MessageType type, std::span<const std::uint8_t> payload) {
  send_all(encode_frame(type, payload));
}

bool Socket::recv_exact(std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd_, out + got, n - got, 0);
    if (r == 0) {
      if (got == 0) return false;
      throw ProtocolError("connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("recv failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

std::optional<Frame> Socket::recv_frame() {
  std::uint8_t header[4];
  if (!recv_exact(header, 4)) return std::nullopt;
  std::uint32_t length;
  std::memcpy(&length, header, 4);
  if (length == 0) throw ProtocolError("empty frame");
  if (length > kMaxFrameBytes) {
    throw ProtocolError("frame of " + std::to_string(length) + " bytes exceeds the " +
                        std::to_string(kMaxFrameBytes) + " byte limit");
  }
  std::vector<std::uint8_t> body(length);
  if (!recv_exact(body.data(), length)) throw ProtocolError("connection closed mid-frame");
  Frame frame;
  frame.type = static_cast<MessageType>(body[0]);
  frame.payload.assign(body.begin() + 1, body.end());
  return frame;
}

std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw ConfigError("address '" + address + "' is not host:port");
  }
  std::string host = address.substr(0, colon);
  if (host.empty()) host = "127.0.0.1";
  const std::string port_text = address.substr(colon + 1);
  char* end = nullptr;
  const unsigned long port = std::strtoul(port_text.c_str(), &end, 10);
  if (*end != '\0' || port > 65535) throw ConfigError("bad port in address '" + address + "'");
  return {host, static_cast<std::uint16_t>(port)};
}

RemoteEnv::RemoteEnv(const std::string& address, ArmModel arm, TaskSpec task)
    : arm_(std::move(arm)), task_(std::move(task)) {
  arm_.validate();
  task_.validate();
  const auto [host, port] = parse_address(address);
  socket_ = Socket::connect(host, port);
  auto hello = socket_.recv_frame();
  if (!hello || hello->type != MessageType::Hello) throw ProtocolError("server did not send a hello frame");
  ByteReader r(hello->payload);
  const std::uint8_t version = r.u8();
  if (version != kProtocolVersion) {
    throw ProtocolError("server speaks protocol version " + std::to_string(version) + ", client speaks " +
                        std::to_string(kProtocolVersion));
  }
}

RemoteEnv::~RemoteEnv() {
  if (!socket_.valid()) return;
  try {
    socket_.send_frame(MessageType::Close, {});
    socket_.recv_frame();
  } catch (...) {
    // server already gone
  }
}

EnvStep RemoteEnv::roundtrip(MessageType type, std::span<const std::uint8_t> payload) {
  socket_.send_frame(type, payload);
  auto reply = socket_.recv_frame();
  if (!reply) throw ProtocolError("server closed the connection");
  if (reply->type == MessageType::Error) {
    throw ProtocolError("server error: " + std::string(reply->payload.begin(), reply->payload.end()));
  }
  if (reply->type != MessageType::Observation) throw ProtocolError("unexpected reply type");
  return decode_step(reply->payload);
}

EnvStep RemoteEnv::reset(std::uint64_t seed) {
  ByteWriter w;
  w.u64(seed);
  w.vec(encode_task(task_, arm_));
  return roundtrip(MessageType::Reset, w.take());
}

EnvStep RemoteEnv::step(std::span<const double> action) {
  ByteWriter w;
  w.vec(action);
  return roundtrip(MessageType::Step, w.take());
}

}  // namespace conther::env
