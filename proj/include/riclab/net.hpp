#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>

namespace riclab::net {

/// Splits "host:port"; host defaults to 127.0.0.1 when only a port is given.
struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& s);  // throws std::invalid_argument
  std::string str() const;
};

/// RAII TCP socket. Reads and writes may run on different threads;
/// shutdown_both() unblocks a reader stuck in recv without invalidating
/// the descriptor (close only after the reader has exited).
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  bool send_all(std::span<const std::uint8_t> data) noexcept;
  /// >0 bytes read, 0 on orderly EOF, -1 on error/shutdown.
  long recv_some(std::span<std::uint8_t> buf) noexcept;
  /// As recv_some but returns kRecvTimeout when nothing arrives in time.
  static constexpr long kRecvTimeout = -2;
  long recv_some_timeout(std::span<std::uint8_t> buf, int timeout_ms) noexcept;

  void shutdown_both() noexcept;
  void close() noexcept;

 private:
  int fd_ = -1;
};

class Listener {
 public:
  Listener() = default;
  /// Binds and listens; port 0 picks an ephemeral port. Throws
  /// std::system_error on failure (e.g. the port is occupied).
  static Listener bind(const std::string& host, std::uint16_t port);

  std::uint16_t port() const { return port_; }
  bool valid() const { return sock_.valid(); }
  /// Blocks; nullopt once the listener is closed.
  std::optional<Socket> accept() noexcept;
  void close() noexcept;

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

/// Connects with TCP_NODELAY set; nullopt on failure.
std::optional<Socket> connect(const Endpoint& ep, int timeout_ms = 5000) noexcept;

}  // namespace riclab::net
