#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "microorch/fabric.hpp"
#include "microorch/policy.hpp"
#include "microorch/telemetry.hpp"
#include "microorch/wire.hpp"

namespace microorch {

enum class ClockMode { Simulated, Realtime };

/// Daemon configuration. Empty config paths select the built-in defaults.
struct RunConfig {
  std::string fabric_config_path;
  std::string policy_config_path;
  std::string power_config_path;
  ClockMode clock = ClockMode::Simulated;
  Endpoint event_endpoint{"127.0.0.1", 7601};
  std::optional<Endpoint> telemetry_endpoint;  // publisher off when absent
  std::string log_path = "./telemetry.jsonl";
  double sampling_period_ms = 100.0;
  std::uint64_t seed = 42;
  bool oneshot = false;  // exit after the first client disconnects
  std::string fn_id = "fft0";
};

/// The control loop: consumes face-count events, asks the policy for a
/// target, applies the plan to the fabric, runs the managed FFT workload on
/// the active variant, and emits one telemetry sample per cycle.
///
/// On the simulated clock every quantity entering telemetry is modeled, so a
/// fixed trace and seed reproduce the log byte for byte. Realtime mode maps
/// charged latencies onto wall-clock sleeps, measures execution time, and
/// adds a periodic sampler.
class Orchestrator {
 public:
  /// Loads and validates all configs and deploys the managed function on the
  /// first software domain. Throws on any config problem.
  explicit Orchestrator(const RunConfig& config);
  ~Orchestrator();

  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  /// Binds the sockets and runs until request_stop() or, in oneshot mode,
  /// until the client disconnects and the queue is drained. Returns 0 on a
  /// clean exit.
  int run();

  /// Async-signal-safe stop request; the loop notices within one poll slice.
  void request_stop() { stop_.store(true); }

  /// True once run() has bound its sockets; event_port()/telemetry_port()
  /// are stable from then until run() returns.
  bool ready() const { return ready_.load(std::memory_order_acquire); }

  /// One control-loop cycle, callable directly for deterministic tests.
  void process_event(const EventMsg& event);

  const Fabric& fabric() const { return fabric_; }
  const PolicyTable& policy() const { return policy_; }
  const PowerModel& power() const { return power_; }
  const RunConfig& config() const { return config_; }
  const std::string& fn_id() const { return config_.fn_id; }

  ServerStats server_stats() const;
  std::uint64_t superseded_dropped() const { return superseded_dropped_.load(); }
  std::uint16_t event_port() const;
  std::uint16_t telemetry_port() const;

 private:
  void enqueue(const EventMsg& event);
  void emit(const RunContext& context);
  double realtime_elapsed_ms() const;
  void sampler_loop();

  RunConfig config_;
  Fabric fabric_;
  PolicyTable policy_;
  PowerModel power_;
  std::unique_ptr<TelemetryLog> log_;
  std::unique_ptr<TelemetryPublisher> publisher_;
  std::unique_ptr<EventServer> server_;
  ServerStats final_server_stats_{};  // snapshot kept after run() tears the server down

  std::mutex mutex_;  // guards fabric_, last_context_, queue_
  std::condition_variable cv_;
  std::deque<EventMsg> queue_;
  RunContext last_context_;
  TargetConfig applied_target_;
  // -inf so the dwell timer never suppresses the very first transition.
  double last_change_ms_ = -std::numeric_limits<double>::infinity();

  std::atomic<bool> stop_{false};
  std::atomic<bool> ready_{false};
  std::atomic<bool> client_done_{false};
  std::atomic<std::uint64_t> superseded_dropped_{0};
  std::thread sampler_;
  std::chrono::steady_clock::time_point started_;
};

}  // namespace microorch
