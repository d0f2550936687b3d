#include "microorch/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>

#include "microorch/workloads.hpp"

namespace microorch {

namespace {

void sleep_ms(double ms) {
  if (ms <= 0.0) return;
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

}  // namespace

Orchestrator::Orchestrator(const RunConfig& config)
    : config_(config),
      fabric_(config.fabric_config_path.empty()
                  ? Fabric::from_json(Fabric::default_config())
                  : Fabric::from_file(config.fabric_config_path)),
      policy_(config.policy_config_path.empty()
                  ? PolicyTable::from_json(PolicyTable::default_config())
                  : PolicyTable::from_file(config.policy_config_path)),
      power_(config.power_config_path.empty()
                 ? PowerModel::from_json(PowerModel::default_config())
                 : PowerModel::from_file(config.power_config_path)) {
  power_.cover_fabric(fabric_);

  if (!(config_.sampling_period_ms > 0.0)) {
    throw TelemetryError(TelemetryErrc::BadConfig, "sampling period must be > 0");
  }

  const ExecutionDomain* start = nullptr;
  for (const auto& domain : fabric_.domains()) {
    if (domain.kind == DomainKind::SoftwareCore) {
      start = &domain;
      break;
    }
  }
  if (!start) {
    throw FabricError(FabricErrc::BadConfig, "fabric has no software domain to start on");
  }
  fabric_.deploy(config_.fn_id, "fft", start->id, FunctionInstance::kMinPoints);
  applied_target_ = {Variant::SoftwareFloat, FunctionInstance::kMinPoints};
  last_context_.config = applied_target_;

  log_ = std::make_unique<TelemetryLog>(config_.log_path);
}

Orchestrator::~Orchestrator() {
  stop_.store(true);
  cv_.notify_all();
  if (sampler_.joinable()) sampler_.join();
}

double Orchestrator::realtime_elapsed_ms() const {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started_)
      .count();
}

void Orchestrator::enqueue(const EventMsg& event) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(event);
  }
  cv_.notify_all();
}

void Orchestrator::emit(const RunContext& context) {
  TelemetrySample s = sample(fabric_, power_, context);
  log_->record(s);
  if (publisher_) publisher_->publish(s);
}

void Orchestrator::process_event(const EventMsg& event) {
  std::lock_guard lock(mutex_);

  double event_time = config_.clock == ClockMode::Realtime
                          ? realtime_elapsed_ms()
                          : static_cast<double>(event.ts_ms);
  if (event_time > fabric_.sim_time_ms()) fabric_.advance(event_time);

  TargetConfig target = policy_.decide(event.faces);
  double dwell = policy_.min_dwell_ms();
  if (dwell > 0.0 && target != applied_target_ &&
      fabric_.sim_time_ms() - last_change_ms_ < dwell) {
    target = applied_target_;
  }

  ActionPlan actions = plan(fabric_, config_.fn_id, target);
  double reconfig_ms = apply_plan(fabric_, config_.fn_id, actions);
  if (!actions.empty()) {
    applied_target_ = target;
    last_change_ms_ = fabric_.sim_time_ms();
  }
  if (config_.clock == ClockMode::Realtime) sleep_ms(reconfig_ms);

  const FunctionInstance* instance = fabric_.find_instance(config_.fn_id);
  RunContext context;
  context.faces = event.faces;
  context.config = {instance->variant, instance->points};
  context.reconfig_ms = reconfig_ms;

  Signal raw = generate_signal(SignalSpec::seeded_uniform(config_.seed + event.seq),
                               instance->points);
  NormalizedSignal input = normalize_signal(raw);

  auto begun = std::chrono::steady_clock::now();
  if (instance->variant == Variant::AcceleratedFixed) {
    FixedFftResult fixed = fft_fixed(input.signal);
    Spectrum reference = fft_float(input.signal);
    context.mse = mse(fixed.spectrum, reference);
  } else {
    Spectrum spectrum = fft_float(input.signal);
    (void)spectrum;
  }
  if (config_.clock == ClockMode::Realtime) {
    context.exec_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - begun)
            .count();
  } else {
    context.exec_time_ms = power_.exec_time_ms(instance->variant, instance->points);
  }

  last_context_ = context;
  emit(context);
}

void Orchestrator::sampler_loop() {
  while (!stop_.load()) {
    sleep_ms(config_.sampling_period_ms);
    if (stop_.load()) break;
    std::lock_guard lock(mutex_);
    RunContext context = last_context_;
    context.reconfig_ms = 0.0;
    double elapsed = realtime_elapsed_ms();
    if (elapsed > fabric_.sim_time_ms()) fabric_.advance(elapsed);
    try {
      emit(context);
    } catch (const std::exception& err) {
      std::cerr << "telemetry: " << err.what() << "\n";
    }
  }
}

int Orchestrator::run() {
  started_ = std::chrono::steady_clock::now();
  stop_.store(false);
  client_done_.store(false);

  server_ = std::make_unique<EventServer>(config_.event_endpoint,
                                          [this](const EventMsg& event) { enqueue(event); });
  if (config_.oneshot) {
    server_->set_on_disconnect([this] {
      client_done_.store(true);
      cv_.notify_all();
    });
  }
  server_->start();

  if (config_.telemetry_endpoint) {
    publisher_ = std::make_unique<TelemetryPublisher>(*config_.telemetry_endpoint);
    publisher_->start();
  }
  if (config_.clock == ClockMode::Realtime) {
    sampler_ = std::thread([this] { sampler_loop(); });
  }
  ready_.store(true, std::memory_order_release);

  while (true) {
    EventMsg event;
    bool have_event = false;
    {
      std::unique_lock lock(mutex_);
      cv_.wait_for(lock, std::chrono::milliseconds(100), [this] {
        return stop_.load() || !queue_.empty() || client_done_.load();
      });
      if (!queue_.empty()) {
        if (config_.clock == ClockMode::Realtime && queue_.size() > 1) {
          superseded_dropped_.fetch_add(queue_.size() - 1);
          queue_.erase(queue_.begin(), queue_.end() - 1);
        }
        event = queue_.front();
        queue_.pop_front();
        have_event = true;
      } else if (stop_.load() || (config_.oneshot && client_done_.load())) {
        break;
      }
    }
    if (!have_event) continue;
    try {
      process_event(event);
    } catch (const std::exception& err) {
      std::cerr << "orchestrator: event seq " << event.seq << " failed: " << err.what() << "\n";
    }
  }

  ready_.store(false, std::memory_order_release);
  stop_.store(true);
  cv_.notify_all();
  if (sampler_.joinable()) sampler_.join();
  server_->stop();
  if (publisher_) {
    publisher_->stop();
    publisher_.reset();
  }
  final_server_stats_ = server_->stats();
  server_.reset();
  return 0;
}

ServerStats Orchestrator::server_stats() const {
  return server_ ? server_->stats() : final_server_stats_;
}

std::uint16_t Orchestrator::event_port() const { return server_ ? server_->port() : 0; }

std::uint16_t Orchestrator::telemetry_port() const {
  return publisher_ ? publisher_->port() : 0;
}

}  // namespace microorch
