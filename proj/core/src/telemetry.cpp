#include "microorch/telemetry.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace microorch {

namespace {

using ordered_json = nlohmann::ordered_json;

std::size_t variant_index(Variant variant) {
  return variant == Variant::SoftwareFloat ? 0 : 1;
}

double require_number(const ordered_json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw TelemetryError(TelemetryErrc::BadSample, std::string("missing number field: ") + key);
  }
  return obj[key].get<double>();
}

[[noreturn]] void bad_config(const std::string& what) {
  throw TelemetryError(TelemetryErrc::BadConfig, what);
}

}  // namespace

double DynamicPowerLaw::watts(std::uint32_t points) const {
  double w = base_w + slope_w * static_cast<double>(std::countr_zero(points));
  return w < 0.0 ? 0.0 : w;
}

double ExecTimeLaw::exec_ms(std::uint32_t points) const {
  double ops = static_cast<double>(points) * static_cast<double>(std::countr_zero(points));
  return ns_per_op * ops * 1e-6;
}

PowerModel PowerModel::from_json(const std::string& text) {
  ordered_json doc = ordered_json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) bad_config("power config is not a JSON object");

  PowerModel model;
  if (doc.contains("domains")) {
    if (!doc["domains"].is_object()) bad_config("domains must map domain ids to static watts");
    for (auto& [id, value] : doc["domains"].items()) {
      if (!value.is_number()) bad_config("domains." + id + " must be a number");
      double w = value.get<double>();
      if (!(w >= 0.0)) bad_config("domains." + id + " must be >= 0");
      model.static_w_[id] = w;
    }
  }
  if (doc.contains("dynamic")) {
    if (!doc["dynamic"].is_object()) bad_config("dynamic must map variants to laws");
    for (auto& [name, law] : doc["dynamic"].items()) {
      Variant variant = parse_variant(name);
      DynamicPowerLaw parsed;
      parsed.base_w = law.value("base_w", 0.0);
      parsed.slope_w = law.value("slope_w", 0.0);
      model.dynamic_[variant_index(variant)] = parsed;
    }
  }
  if (doc.contains("exec_model")) {
    if (!doc["exec_model"].is_object()) bad_config("exec_model must map variants to laws");
    for (auto& [name, law] : doc["exec_model"].items()) {
      Variant variant = parse_variant(name);
      ExecTimeLaw parsed;
      parsed.ns_per_op = law.value("ns_per_op", 0.0);
      if (!(parsed.ns_per_op >= 0.0)) bad_config("exec_model." + name + ".ns_per_op must be >= 0");
      model.exec_[variant_index(variant)] = parsed;
    }
  }
  return model;
}

PowerModel PowerModel::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TelemetryError(TelemetryErrc::Io, "cannot open power config: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_json(text.str());
}

std::string PowerModel::default_config() {
  return R"({
  "domains": {"apu": 1.0, "pl0": 0.5},
  "dynamic": {
    "software_float": {"base_w": 0.35, "slope_w": 0.08},
    "accelerated_fixed": {"base_w": 0.2, "slope_w": 0.05}
  },
  "exec_model": {
    "software_float": {"ns_per_op": 40.0},
    "accelerated_fixed": {"ns_per_op": 4.0}
  }
})";
}

void PowerModel::cover_fabric(const Fabric& fabric) {
  for (const auto& domain : fabric.domains()) {
    static_w_.try_emplace(domain.id, domain.static_power_w);
  }
}

void PowerModel::set_static_w(const std::string& domain_id, double watts) {
  static_w_[domain_id] = watts;
}

void PowerModel::set_dynamic(Variant variant, DynamicPowerLaw law) {
  dynamic_[variant_index(variant)] = law;
}

void PowerModel::set_exec(Variant variant, ExecTimeLaw law) {
  exec_[variant_index(variant)] = law;
}

bool PowerModel::covers(const std::string& domain_id) const {
  return static_w_.count(domain_id) != 0;
}

double PowerModel::static_w(const std::string& domain_id) const {
  auto it = static_w_.find(domain_id);
  if (it == static_w_.end()) {
    throw TelemetryError(TelemetryErrc::MissingDomain, "no static power for domain: " + domain_id);
  }
  return it->second;
}

double PowerModel::dynamic_w(Variant variant, std::uint32_t points) const {
  return dynamic_[variant_index(variant)].watts(points);
}

double PowerModel::exec_time_ms(Variant variant, std::uint32_t points) const {
  return exec_[variant_index(variant)].exec_ms(points);
}

TelemetrySample sample(const Fabric& fabric, const PowerModel& model, const RunContext& context) {
  TelemetrySample out;
  out.ts_ms = fabric.sim_time_ms();
  out.rails.reserve(fabric.domains().size());
  for (const auto& domain : fabric.domains()) {
    double watts = model.static_w(domain.id);
    for (const auto& instance : fabric.instances()) {
      if (instance.placement == domain.id && instance.lifecycle == Lifecycle::Active) {
        watts += model.dynamic_w(instance.variant, instance.points);
      }
    }
    out.rails.emplace_back(domain.id, watts);
  }
  double total = 0.0;
  for (const auto& [id, watts] : out.rails) total += watts;
  out.total_w = total;
  out.exec_time_ms = context.exec_time_ms;
  out.mse = context.mse;
  out.faces = context.faces;
  out.config = context.config;
  out.reconfig_ms = context.reconfig_ms;
  return out;
}

std::string to_json_line(const TelemetrySample& sample) {
  ordered_json doc;
  doc["ts_ms"] = sample.ts_ms;
  ordered_json rails = ordered_json::object();
  for (const auto& [id, watts] : sample.rails) rails[id] = watts;
  doc["rails"] = std::move(rails);
  doc["total_w"] = sample.total_w;
  doc["exec_time_ms"] = sample.exec_time_ms;
  if (sample.mse) doc["mse"] = *sample.mse;
  doc["faces"] = sample.faces;
  doc["config"] = {{"variant", to_string(sample.config.variant)},
                   {"points", sample.config.points}};
  doc["reconfig_ms"] = sample.reconfig_ms;
  return doc.dump();
}

TelemetrySample sample_from_json_line(const std::string& line) {
  ordered_json doc = ordered_json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw TelemetryError(TelemetryErrc::BadSample, "telemetry line is not a JSON object");
  }
  TelemetrySample out;
  out.ts_ms = require_number(doc, "ts_ms");
  if (!doc.contains("rails") || !doc["rails"].is_object()) {
    throw TelemetryError(TelemetryErrc::BadSample, "missing rails object");
  }
  for (auto& [id, watts] : doc["rails"].items()) {
    if (!watts.is_number()) throw TelemetryError(TelemetryErrc::BadSample, "rail " + id + " is not a number");
    out.rails.emplace_back(id, watts.get<double>());
  }
  out.total_w = require_number(doc, "total_w");
  out.exec_time_ms = require_number(doc, "exec_time_ms");
  if (doc.contains("mse")) {
    if (!doc["mse"].is_number()) throw TelemetryError(TelemetryErrc::BadSample, "mse is not a number");
    out.mse = doc["mse"].get<double>();
  }
  if (!doc.contains("faces") || !doc["faces"].is_number_integer()) {
    throw TelemetryError(TelemetryErrc::BadSample, "missing integer field: faces");
  }
  out.faces = doc["faces"].get<std::int64_t>();
  if (!doc.contains("config") || !doc["config"].is_object()) {
    throw TelemetryError(TelemetryErrc::BadSample, "missing config object");
  }
  const auto& config = doc["config"];
  if (!config.contains("variant") || !config["variant"].is_string() ||
      !config.contains("points") || !config["points"].is_number_unsigned()) {
    throw TelemetryError(TelemetryErrc::BadSample, "config needs variant and points");
  }
  try {
    out.config.variant = parse_variant(config["variant"].get<std::string>());
  } catch (const std::exception&) {
    throw TelemetryError(TelemetryErrc::BadSample, "unknown config.variant");
  }
  out.config.points = config["points"].get<std::uint32_t>();
  out.reconfig_ms = require_number(doc, "reconfig_ms");
  return out;
}

TelemetryLog::TelemetryLog(const std::string& path) : path_(path), out_(path, std::ios::app) {
  if (!out_) throw TelemetryError(TelemetryErrc::Io, "cannot open telemetry log: " + path);
}

void TelemetryLog::record(const TelemetrySample& sample) {
  out_ << to_json_line(sample) << '\n';
  out_.flush();
  if (!out_) throw TelemetryError(TelemetryErrc::Io, "write to telemetry log failed: " + path_);
}

TelemetryPublisher::TelemetryPublisher(const Endpoint& endpoint, std::size_t capacity)
    : endpoint_(endpoint), capacity_(capacity == 0 ? 1 : capacity) {}

TelemetryPublisher::~TelemetryPublisher() { stop(); }

void TelemetryPublisher::start() {
  listener_ = Listener::bind(endpoint_);
  stop_.store(false);
  thread_ = std::thread([this] { worker(); });
}

void TelemetryPublisher::stop() {
  stop_.store(true);
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  listener_.close();
}

void TelemetryPublisher::publish(const TelemetrySample& sample) {
  std::string line = to_json_line(sample) + "\n";
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(line));
    while (queue_.size() > capacity_) {
      queue_.pop_front();
      dropped_.fetch_add(1);
    }
  }
  cv_.notify_all();
}

void TelemetryPublisher::worker() {
  while (!stop_.load()) {
    auto client = listener_.accept(stop_, 50);
    if (!client) continue;
    while (!stop_.load()) {
      std::string line;
      {
        std::unique_lock lock(mutex_);
        cv_.wait_for(lock, std::chrono::milliseconds(100),
                     [this] { return stop_.load() || !queue_.empty(); });
        if (queue_.empty()) continue;
        line = std::move(queue_.front());
        queue_.pop_front();
      }
      if (!client->send_all(line)) break;  // reconnectable: back to accept
      sent_.fetch_add(1);
    }
  }
}

std::uint16_t TelemetryPublisher::port() const { return listener_.port(); }

double energy_joules(const std::vector<std::pair<double, double>>& series) {
  double joules = 0.0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    double dt_s = (series[i].first - series[i - 1].first) * 1e-3;
    joules += 0.5 * (series[i].second + series[i - 1].second) * dt_s;
  }
  return joules;
}

}  // namespace microorch
