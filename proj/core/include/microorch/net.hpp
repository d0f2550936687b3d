#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace microorch {

/// "host:port" pair for the stream-socket protocols.
struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& text);
  std::string str() const { return host + ":" + std::to_string(port); }

  bool operator==(const Endpoint&) const = default;
};

/// Thin RAII wrapper over a connected stream socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  void close();

  /// Writes the whole buffer; false on any I/O error (peer gone included).
  bool send_all(std::string_view data);

  /// Waits up to poll_ms for data. Returns the bytes read, "" on timeout, or
  /// nullopt when the peer closed / the socket failed.
  std::optional<std::string> recv_some(int poll_ms);

 private:
  int fd_ = -1;
};

/// Listening socket with a poll-based accept so shutdown flags are honored.
class Listener {
 public:
  Listener() = default;
  static Listener bind(const Endpoint& endpoint);  // throws std::system_error

  Listener(Listener&& other) noexcept;
  Listener& operator=(Listener&& other) noexcept;
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;
  ~Listener();

  bool valid() const { return fd_ >= 0; }
  std::uint16_t port() const { return port_; }

  /// Accepts one client, polling in poll_ms slices until `stop` is set.
  std::optional<Socket> accept(const std::atomic<bool>& stop, int poll_ms = 100);
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// One connect attempt; nullopt on failure.
std::optional<Socket> connect_to(const Endpoint& endpoint);

}  // namespace microorch
