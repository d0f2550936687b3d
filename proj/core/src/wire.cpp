#include "microorch/wire.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace microorch {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string_view trim_line(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  return line;
}

void sleep_ms(double ms) {
  if (ms <= 0.0) return;
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

std::optional<Socket> connect_with_backoff(const Endpoint& endpoint, int& attempts_left,
                                           int backoff_ms) {
  int wait = backoff_ms;
  while (attempts_left > 0) {
    attempts_left -= 1;
    if (auto socket = connect_to(endpoint)) return socket;
    if (attempts_left == 0) break;
    sleep_ms(static_cast<double>(wait));
    wait += backoff_ms;
  }
  return std::nullopt;
}

}  // namespace

std::string encode_event(const EventMsg& msg) {
  ordered_json doc;
  doc["seq"] = msg.seq;
  doc["ts_ms"] = msg.ts_ms;
  doc["faces"] = msg.faces;
  return doc.dump() + "\n";
}

EventMsg decode_event(std::string_view line) {
  ordered_json doc = ordered_json::parse(trim_line(line), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw WireError(WireErrc::MalformedJson, "event line is not a JSON object");
  }
  for (const char* key : {"seq", "ts_ms", "faces"}) {
    if (!doc.contains(key) || !doc[key].is_number_integer()) {
      throw WireError(WireErrc::MissingField, std::string("event needs integer field: ") + key);
    }
  }
  if (doc["seq"].is_number_integer() && !doc["seq"].is_number_unsigned()) {
    throw WireError(WireErrc::MissingField, "event seq must be non-negative");
  }
  if (!doc["ts_ms"].is_number_unsigned()) {
    throw WireError(WireErrc::MissingField, "event ts_ms must be non-negative");
  }
  EventMsg msg;
  msg.seq = doc["seq"].get<std::uint64_t>();
  msg.ts_ms = doc["ts_ms"].get<std::uint64_t>();
  msg.faces = doc["faces"].get<std::int64_t>();
  if (msg.faces < 0) {
    throw WireError(WireErrc::NegativeFaces, "event faces must be >= 0");
  }
  return msg;
}

std::string encode_telemetry(const TelemetrySample& sample) {
  return to_json_line(sample) + "\n";
}

TelemetrySample decode_telemetry(std::string_view line) {
  std::string_view body = trim_line(line);
  ordered_json probe = ordered_json::parse(body, nullptr, false);
  if (probe.is_discarded() || !probe.is_object()) {
    throw WireError(WireErrc::MalformedJson, "telemetry line is not a JSON object");
  }
  try {
    return sample_from_json_line(std::string(body));
  } catch (const TelemetryError& err) {
    throw WireError(WireErrc::MissingField, err.what());
  }
}

EventTrace EventTrace::from_csv_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw WireError(WireErrc::BadTrace, "trace is empty (missing header)");
  }
  if (std::string(trim_line(line)) != "offset_ms,faces") {
    throw WireError(WireErrc::BadTrace, "trace header must be exactly 'offset_ms,faces'");
  }
  EventTrace trace;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    line_no += 1;
    std::string row(trim_line(line));
    if (row.empty()) continue;
    std::size_t comma = row.find(',');
    if (comma == std::string::npos) {
      throw WireError(WireErrc::BadTrace, "trace line " + std::to_string(line_no) + ": expected offset_ms,faces");
    }
    TraceEntry entry;
    try {
      std::size_t used = 0;
      entry.offset_ms = std::stoull(row.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("trailing junk");
      std::string faces = row.substr(comma + 1);
      entry.faces = std::stoll(faces, &used);
      if (used != faces.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw WireError(WireErrc::BadTrace, "trace line " + std::to_string(line_no) + ": bad number");
    }
    if (entry.faces < 0) {
      throw WireError(WireErrc::BadTrace, "trace line " + std::to_string(line_no) + ": faces must be >= 0");
    }
    if (!trace.entries.empty() && entry.offset_ms < trace.entries.back().offset_ms) {
      throw WireError(WireErrc::BadTrace, "trace line " + std::to_string(line_no) + ": offsets must be non-decreasing");
    }
    trace.entries.push_back(entry);
  }
  return trace;
}

EventTrace EventTrace::from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WireError(WireErrc::BadTrace, "cannot open trace: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_csv_text(text.str());
}

std::vector<std::string> LineSplitter::feed(std::string_view bytes) {
  std::vector<std::string> lines;
  for (char c : bytes) {
    if (c == '\n') {
      if (discarding_) {
        discarding_ = false;
      } else {
        if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
        lines.push_back(std::move(buffer_));
      }
      buffer_.clear();
      continue;
    }
    if (discarding_) continue;
    buffer_.push_back(c);
    if (buffer_.size() > max_line_) {
      buffer_.clear();
      discarding_ = true;
      oversized_ += 1;
    }
  }
  return lines;
}

EventServer::EventServer(const Endpoint& endpoint, Handler on_event)
    : endpoint_(endpoint), on_event_(std::move(on_event)) {}

EventServer::~EventServer() { stop(); }

void EventServer::start() {
  try {
    listener_ = Listener::bind(endpoint_);
  } catch (const std::system_error& err) {
    throw WireError(WireErrc::BindFailed,
                    "cannot bind event endpoint " + endpoint_.str() + ": " + err.what());
  }
  stop_.store(false);
  thread_ = std::thread([this] { worker(); });
}

void EventServer::stop() {
  stop_.store(true);
  if (thread_.joinable()) thread_.join();
  listener_.close();
}

ServerStats EventServer::stats() const {
  ServerStats stats;
  stats.connections = connections_.load();
  stats.events_delivered = events_delivered_.load();
  stats.decode_errors = decode_errors_.load();
  stats.dropped_nonmonotone = dropped_nonmonotone_.load();
  stats.oversized_lines = oversized_lines_.load();
  return stats;
}

void EventServer::worker() {
  while (!stop_.load()) {
    auto client = listener_.accept(stop_, 50);
    if (!client) continue;
    connections_.fetch_add(1);
    serve_client(std::move(*client));
    if (on_disconnect_) on_disconnect_();
  }
}

void EventServer::serve_client(Socket client) {
  LineSplitter splitter;
  std::uint64_t oversized_seen = 0;
  bool seen_any = false;
  std::uint64_t last_seq = 0;
  while (!stop_.load()) {
    auto chunk = client.recv_some(50);
    if (!chunk) break;  // peer closed
    if (chunk->empty()) continue;
    for (const std::string& line : splitter.feed(*chunk)) {
      EventMsg msg;
      try {
        msg = decode_event(line);
      } catch (const WireError&) {
        decode_errors_.fetch_add(1);
        continue;
      }
      if (seen_any && msg.seq <= last_seq) {
        dropped_nonmonotone_.fetch_add(1);
        continue;
      }
      seen_any = true;
      last_seq = msg.seq;
      events_delivered_.fetch_add(1);
      on_event_(msg);
    }
    oversized_lines_.fetch_add(splitter.oversized() - oversized_seen);
    oversized_seen = splitter.oversized();
  }
  oversized_lines_.fetch_add(splitter.oversized() - oversized_seen);
}

void replay(const EventTrace& trace, const Endpoint& endpoint, const ReplayOptions& options) {
  if (trace.entries.empty()) return;
  int attempts_left = options.max_attempts;
  auto socket = connect_with_backoff(endpoint, attempts_left, options.backoff_ms);
  if (!socket) {
    throw WireError(WireErrc::ConnectFailed, "cannot reach event endpoint " + endpoint.str());
  }
  bool paced = std::isfinite(options.speed) && options.speed > 0.0;
  std::uint64_t prev_offset = trace.entries.front().offset_ms;
  std::uint64_t seq = 0;
  for (const TraceEntry& entry : trace.entries) {
    if (paced) sleep_ms(static_cast<double>(entry.offset_ms - prev_offset) / options.speed);
    prev_offset = entry.offset_ms;
    seq += 1;
    std::string bytes = encode_event({seq, entry.offset_ms, entry.faces});
    while (!socket->send_all(bytes)) {
      socket = connect_with_backoff(endpoint, attempts_left, options.backoff_ms);
      if (!socket) {
        throw WireError(WireErrc::ConnectFailed, "lost event endpoint " + endpoint.str());
      }
    }
  }
}

}  // namespace microorch
