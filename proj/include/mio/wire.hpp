#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mio/csvio.hpp"
#include "mio/errors.hpp"
#include "mio/geometry.hpp"

namespace mio {

// ============================================================================
// Pose wire protocol: 70-byte little-endian frames, magic "MP"
//   magic(2) | seq u32 | timestamp f64 | translation 3xf64 | quat wxyz 4xf64
// ============================================================================

struct PoseMessage {
  std::uint32_t seq = 0;
  double timestamp = 0.0;
  Vec3 translation;
  Quat rotation;
};

inline constexpr std::size_t kPoseFrameSize = 70;

namespace detail {

inline void put_f64(std::uint8_t* dst, double v) { std::memcpy(dst, &v, 8); }
inline double get_f64(const std::uint8_t* src) {
  double v;
  std::memcpy(&v, src, 8);
  return v;
}

}  // namespace detail

inline std::array<std::uint8_t, kPoseFrameSize> encode_pose(const PoseMessage& msg) {
  static_assert(sizeof(double) == 8);
  std::array<std::uint8_t, kPoseFrameSize> buf{};
  buf[0] = 'M';
  buf[1] = 'P';
  std::memcpy(&buf[2], &msg.seq, 4);
  detail::put_f64(&buf[6], msg.timestamp);
  detail::put_f64(&buf[14], msg.translation.x);
  detail::put_f64(&buf[22], msg.translation.y);
  detail::put_f64(&buf[30], msg.translation.z);
  detail::put_f64(&buf[38], msg.rotation.w);
  detail::put_f64(&buf[46], msg.rotation.x);
  detail::put_f64(&buf[54], msg.rotation.y);
  detail::put_f64(&buf[62], msg.rotation.z);
  return buf;
}

inline PoseMessage decode_pose(const std::uint8_t* data, std::size_t len) {
  if (len < kPoseFrameSize) throw TruncatedFrame("pose frame shorter than 70 bytes");
  if (data[0] != 'M' || data[1] != 'P') throw BadMagic("pose frame magic mismatch");
  PoseMessage msg;
  std::memcpy(&msg.seq, &data[2], 4);
  msg.timestamp = detail::get_f64(&data[6]);
  msg.translation = {detail::get_f64(&data[14]), detail::get_f64(&data[22]),
                     detail::get_f64(&data[30])};
  msg.rotation = {detail::get_f64(&data[38]), detail::get_f64(&data[46]),
                  detail::get_f64(&data[54]), detail::get_f64(&data[62])};
  return msg;
}

inline PoseMessage decode_pose(const std::vector<std::uint8_t>& frame) {
  return decode_pose(frame.data(), frame.size());
}

// ============================================================================
// PoseCollector - the uplink sink. Accepts stream connections, appends each
// connection's decoded poses to its own CSV. Decode failures close only the
// offending connection.
// ============================================================================

class PoseCollector {
 public:
  PoseCollector(const std::string& host, std::uint16_t port, std::filesystem::path out_dir)
      : out_dir_(std::move(out_dir)) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir_, ec);

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw BindFailure("socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(listen_fd_);
      throw BindFailure("bad bind address: " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(listen_fd_);
      throw BindFailure("bind failed on " + host + ":" + std::to_string(port));
    }
    if (::listen(listen_fd_, 16) != 0) {
      ::close(listen_fd_);
      throw BindFailure("listen failed");
    }
    socklen_t alen = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
    port_ = ntohs(addr.sin_port);
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  PoseCollector(const PoseCollector&) = delete;
  PoseCollector& operator=(const PoseCollector&) = delete;

  ~PoseCollector() { stop(); }

  std::uint16_t port() const { return port_; }
  std::size_t connections_served() const { return conn_count_.load(); }

  void stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) return;
    // wake the accept loop with a throwaway connection, then tear it down
    const int poke = ::socket(AF_INET, SOCK_STREAM, 0);
    if (poke >= 0) {
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_port = htons(port_);
      ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
      ::connect(poke, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
      ::close(poke);
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (accept_thread_.joinable()) accept_thread_.join();
    ::close(listen_fd_);
    std::vector<std::thread> workers;
    {
      // unblock connection readers; each thread closes its own fd on exit
      std::lock_guard<std::mutex> lock(threads_mutex_);
      for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
      workers.swap(conn_threads_);
    }
    for (auto& t : workers)
      if (t.joinable()) t.join();
  }

 private:
  void accept_loop() {
    while (!stopping_.load()) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (stopping_.load()) return;
        continue;
      }
      if (stopping_.load()) {
        ::close(fd);
        return;
      }
      const std::size_t id = conn_count_.fetch_add(1);
      std::lock_guard<std::mutex> lock(threads_mutex_);
      conn_fds_.push_back(fd);
      conn_threads_.emplace_back([this, fd, id] { serve_connection(fd, id); });
    }
  }

  void forget_fd(int fd) {
    std::lock_guard<std::mutex> lock(threads_mutex_);
    conn_fds_.erase(std::remove(conn_fds_.begin(), conn_fds_.end(), fd), conn_fds_.end());
  }

  void serve_connection(int fd, std::size_t id) {
    char name[32];
    std::snprintf(name, sizeof(name), "conn_%03zu.csv", id);
    std::ofstream csv(out_dir_ / name, std::ios::binary);
    csv << "t,x,y,z,qw,qx,qy,qz\n";

    std::array<std::uint8_t, kPoseFrameSize> frame;
    while (true) {
      std::size_t got = 0;
      while (got < kPoseFrameSize) {
        const ssize_t n = ::recv(fd, frame.data() + got, kPoseFrameSize - got, 0);
        if (n <= 0) {
          forget_fd(fd);
          ::close(fd);
          return;  // disconnect or partial trailing frame
        }
        got += static_cast<std::size_t>(n);
      }
      try {
        const PoseMessage msg = decode_pose(frame.data(), frame.size());
        csv << fmt9(msg.timestamp) << ',' << fmt9(msg.translation.x) << ','
            << fmt9(msg.translation.y) << ',' << fmt9(msg.translation.z) << ','
            << fmt9(msg.rotation.w) << ',' << fmt9(msg.rotation.x) << ','
            << fmt9(msg.rotation.y) << ',' << fmt9(msg.rotation.z) << '\n';
        csv.flush();
      } catch (const Error&) {
        forget_fd(fd);
        ::close(fd);  // malformed input isolates to this connection
        return;
      }
    }
  }

  std::filesystem::path out_dir_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::thread accept_thread_;
  std::mutex threads_mutex_;
  std::vector<std::thread> conn_threads_;
  std::vector<int> conn_fds_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> conn_count_{0};
};

// ============================================================================
// UplinkClient - fire-and-forget pose sender with 1 s reconnect backoff.
// ============================================================================

class UplinkClient {
 public:
  UplinkClient(std::string host, std::uint16_t port) : host_(std::move(host)), port_(port) {}

  UplinkClient(const UplinkClient&) = delete;
  UplinkClient& operator=(const UplinkClient&) = delete;

  ~UplinkClient() {
    if (fd_ >= 0) ::close(fd_);
  }

  // True if the message went out; false means it was dropped (disconnected).
  bool send(const PoseMessage& msg) {
    if (fd_ < 0 && !try_connect()) return false;
    const auto frame = encode_pose(msg);
    std::size_t sent = 0;
    while (sent < frame.size()) {
      const ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) {
        ::close(fd_);
        fd_ = -1;
        return false;
      }
      sent += static_cast<std::size_t>(n);
    }
    ++sent_count_;
    return true;
  }

  std::size_t sent_count() const { return sent_count_; }

 private:
  bool try_connect() {
    const auto now = std::chrono::steady_clock::now();
    if (last_attempt_.time_since_epoch().count() != 0 &&
        now - last_attempt_ < std::chrono::seconds(1))
      return false;  // reconnect at most once per second
    last_attempt_ = now;

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return false;
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port_);
    if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1) {
      // fall back to name resolution
      addrinfo hints{};
      hints.ai_family = AF_INET;
      hints.ai_socktype = SOCK_STREAM;
      addrinfo* res = nullptr;
      if (::getaddrinfo(host_.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
        ::close(fd);
        return false;
      }
      addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
      ::freeaddrinfo(res);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd);
      return false;
    }
    fd_ = fd;
    return true;
  }

  std::string host_;
  std::uint16_t port_;
  int fd_ = -1;
  std::size_t sent_count_ = 0;
  std::chrono::steady_clock::time_point last_attempt_{};
};

// "host:port" -> pair; throws on malformed input. Port 0 is allowed for
// ephemeral binds.
inline std::pair<std::string, std::uint16_t> parse_host_port(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
    throw Error("expected host:port, got '" + s + "'");
  const int port = std::stoi(s.substr(colon + 1));
  if (port < 0 || port > 65535) throw Error("port out of range in '" + s + "'");
  return {s.substr(0, colon), static_cast<std::uint16_t>(port)};
}

}  // namespace mio
