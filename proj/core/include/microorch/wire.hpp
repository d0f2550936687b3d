#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "microorch/net.hpp"
#include "microorch/telemetry.hpp"

namespace microorch {

enum class WireErrc {
  MalformedJson,
  MissingField,
  NegativeFaces,
  NonMonotoneSeq,
  BadTrace,
  ConnectFailed,
  BindFailed,
};

class WireError : public std::runtime_error {
 public:
  WireError(WireErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  WireErrc code() const { return code_; }

 private:
  WireErrc code_;
};

/// Face-count context event sent by the edge node.
struct EventMsg {
  std::uint64_t seq = 0;  // strictly increasing per connection
  std::uint64_t ts_ms = 0;
  std::int64_t faces = 0;  // >= 0

  bool operator==(const EventMsg&) const = default;
};

/// One line of UTF-8 JSON, `\n`-terminated, fixed key order.
std::string encode_event(const EventMsg& msg);
/// Accepts a line with or without the trailing newline. Throws WireError
/// with a distinct code per defect (malformed JSON, missing field, negative
/// faces). The per-connection seq check lives in EventServer.
EventMsg decode_event(std::string_view line);

/// Telemetry uses the log-line encoding verbatim, newline-terminated.
std::string encode_telemetry(const TelemetrySample& sample);
TelemetrySample decode_telemetry(std::string_view line);

/// Face-count schedule replayed by the edge emulator.
struct TraceEntry {
  std::uint64_t offset_ms = 0;
  std::int64_t faces = 0;

  bool operator==(const TraceEntry&) const = default;
};

struct EventTrace {
  std::vector<TraceEntry> entries;

  /// CSV with the exact header `offset_ms,faces`; offsets must be
  /// non-decreasing and faces >= 0, else WireErrc::BadTrace.
  static EventTrace from_csv_text(const std::string& text);
  static EventTrace from_csv_file(const std::string& path);

  bool operator==(const EventTrace&) const = default;
};

/// Incremental NDJSON framer. Bytes in, complete lines out; `\r` before the
/// newline is stripped. Lines longer than max_line are discarded whole and
/// counted, so one hostile line cannot corrupt later framing.
class LineSplitter {
 public:
  explicit LineSplitter(std::size_t max_line = 64 * 1024) : max_line_(max_line) {}

  std::vector<std::string> feed(std::string_view bytes);
  std::uint64_t oversized() const { return oversized_; }

 private:
  std::size_t max_line_;
  std::string buffer_;
  bool discarding_ = false;
  std::uint64_t oversized_ = 0;
};

struct ServerStats {
  std::uint64_t connections = 0;
  std::uint64_t events_delivered = 0;
  std::uint64_t decode_errors = 0;
  std::uint64_t dropped_nonmonotone = 0;
  std::uint64_t oversized_lines = 0;
};

/// Ingestion side of the event protocol: accepts one client at a time and
/// hands decoded, seq-ordered events to the handler on the server thread.
/// Decode errors and seq violations drop the line, never the connection.
class EventServer {
 public:
  using Handler = std::function<void(const EventMsg&)>;

  EventServer(const Endpoint& endpoint, Handler on_event);
  ~EventServer();

  /// Invoked on the server thread after each client disconnect. Set before
  /// start().
  void set_on_disconnect(std::function<void()> hook) { on_disconnect_ = std::move(hook); }

  void start();  // throws WireErrc::BindFailed
  void stop();

  std::uint16_t port() const { return listener_.port(); }
  ServerStats stats() const;

 private:
  void worker();
  void serve_client(Socket client);

  Endpoint endpoint_;
  Handler on_event_;
  std::function<void()> on_disconnect_;
  Listener listener_;
  std::thread thread_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> connections_{0};
  std::atomic<std::uint64_t> events_delivered_{0};
  std::atomic<std::uint64_t> decode_errors_{0};
  std::atomic<std::uint64_t> dropped_nonmonotone_{0};
  std::atomic<std::uint64_t> oversized_lines_{0};
};

struct ReplayOptions {
  double speed = 1.0;  // time multiplier; infinity sends back-to-back
  int max_attempts = 20;
  int backoff_ms = 100;
};

/// Replays a trace against a running event server: seq auto-assigned from 1,
/// ts_ms taken from the trace offsets. Connection refused/reset is retried
/// with linear backoff up to max_attempts, then WireErrc::ConnectFailed.
void replay(const EventTrace& trace, const Endpoint& endpoint, const ReplayOptions& options = {});

}  // namespace microorch
