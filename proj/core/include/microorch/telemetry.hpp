#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "microorch/fabric.hpp"
#include "microorch/net.hpp"
#include "microorch/policy.hpp"

namespace microorch {

enum class TelemetryErrc {
  MissingDomain,
  BadConfig,
  Io,
  EmptyLog,
  BadSample,
};

class TelemetryError : public std::runtime_error {
 public:
  TelemetryError(TelemetryErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  TelemetryErrc code() const { return code_; }

 private:
  TelemetryErrc code_;
};

/// Dynamic power of one function variant as a function of transform length:
/// watts = max(0, base_w + slope_w * log2(points)). The log2 term tracks the
/// butterfly stage count.
struct DynamicPowerLaw {
  double base_w = 0.0;
  double slope_w = 0.0;

  double watts(std::uint32_t points) const;

  bool operator==(const DynamicPowerLaw&) const = default;
};

/// Per-variant execution-time model used when running on the simulated
/// clock, where measured wall time would break determinism:
/// exec_ms = ns_per_op * N * log2(N) / 1e6.
struct ExecTimeLaw {
  double ns_per_op = 0.0;

  double exec_ms(std::uint32_t points) const;

  bool operator==(const ExecTimeLaw&) const = default;
};

/// Static rail power per domain plus the dynamic law per variant. All
/// coefficients are configuration values; the bundled defaults are
/// illustrative, not measurements.
class PowerModel {
 public:
  PowerModel() = default;

  static PowerModel from_json(const std::string& text);
  static PowerModel from_file(const std::string& path);
  static std::string default_config();

  /// Fills statics for any fabric domain the config did not name, using the
  /// domain's own static_power_w.
  void cover_fabric(const Fabric& fabric);

  void set_static_w(const std::string& domain_id, double watts);
  void set_dynamic(Variant variant, DynamicPowerLaw law);
  void set_exec(Variant variant, ExecTimeLaw law);

  bool covers(const std::string& domain_id) const;
  double static_w(const std::string& domain_id) const;  // throws MissingDomain
  double dynamic_w(Variant variant, std::uint32_t points) const;
  double exec_time_ms(Variant variant, std::uint32_t points) const;

 private:
  std::map<std::string, double> static_w_;
  DynamicPowerLaw dynamic_[2];
  ExecTimeLaw exec_[2];
};

/// Carry-over metadata from the last control-loop cycle, merged into each
/// sample.
struct RunContext {
  double exec_time_ms = 0.0;
  std::optional<double> mse;  // absent while the float variant runs
  std::int64_t faces = 0;
  TargetConfig config;
  double reconfig_ms = 0.0;
};

/// One telemetry record: per-domain rail watts at a simulated timestamp plus
/// the last run's workload metadata.
struct TelemetrySample {
  double ts_ms = 0.0;
  std::vector<std::pair<std::string, double>> rails;  // domain order, stable
  double total_w = 0.0;
  double exec_time_ms = 0.0;
  std::optional<double> mse;
  std::int64_t faces = 0;
  TargetConfig config;
  double reconfig_ms = 0.0;

  bool operator==(const TelemetrySample&) const = default;
};

/// Reads the rails off the fabric: static watts per domain plus the dynamic
/// draw of every Active instance placed there. Gated and Loading instances
/// contribute nothing. Pure; the fabric is not touched.
TelemetrySample sample(const Fabric& fabric, const PowerModel& model, const RunContext& context);

/// One sample as a single JSON line (no trailing newline). Key order is
/// fixed; this exact encoding is also the wire format.
std::string to_json_line(const TelemetrySample& sample);
TelemetrySample sample_from_json_line(const std::string& line);  // throws BadSample

/// Append-only JSON-lines sink, flushed per record.
class TelemetryLog {
 public:
  explicit TelemetryLog(const std::string& path);
  void record(const TelemetrySample& sample);  // throws TelemetryErrc::Io
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

/// Publishes samples to one attached host over a stream socket. Samples are
/// buffered while no client is connected, up to `capacity`; beyond that the
/// oldest are dropped and counted.
class TelemetryPublisher {
 public:
  explicit TelemetryPublisher(const Endpoint& endpoint, std::size_t capacity = 1024);
  ~TelemetryPublisher();

  void start();  // binds and spawns the worker; throws std::system_error
  void stop();
  void publish(const TelemetrySample& sample);

  std::uint16_t port() const;
  std::uint64_t dropped() const { return dropped_.load(); }
  std::uint64_t sent() const { return sent_.load(); }

 private:
  void worker();

  Endpoint endpoint_;
  std::size_t capacity_;
  Listener listener_;
  std::thread thread_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> dropped_{0};
  std::atomic<std::uint64_t> sent_{0};
};

struct RailStats {
  double min_w = 0.0;
  double mean_w = 0.0;
  double max_w = 0.0;
  double energy_j = 0.0;
};

struct MseStats {
  std::size_t count = 0;
  double min = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

/// Everything telem_report prints: summary statistics plus the sample series
/// the SVG charts are drawn from.
struct Report {
  std::vector<TelemetrySample> samples;
  std::size_t corrupt_lines = 0;
  double t_begin_ms = 0.0;
  double t_end_ms = 0.0;
  double total_energy_j = 0.0;
  std::map<std::string, RailStats> rails;
  MseStats mse;
  std::size_t reconfig_count = 0;
  double reconfig_total_ms = 0.0;
};

/// Parses a telemetry log, skipping (and counting) corrupt lines. Throws
/// TelemetryErrc::EmptyLog when no sample survives.
Report analyze_log(const std::string& path);
Report analyze_samples(std::vector<TelemetrySample> samples, std::size_t corrupt_lines = 0);

std::string report_text(const Report& report);

/// Writes total_w.svg and exec_time_ms.svg step charts into dir.
void write_report_svgs(const Report& report, const std::string& dir);

/// Trapezoidal integral of (ts_ms, watts) pairs, in joules.
double energy_joules(const std::vector<std::pair<double, double>>& series);

}  // namespace microorch
