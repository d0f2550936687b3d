#include "microorch/fabric.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace microorch {

namespace {

using json = nlohmann::ordered_json;

bool power_of_two_in_range(std::uint32_t points) {
  return points >= FunctionInstance::kMinPoints && points <= FunctionInstance::kMaxPoints &&
         std::has_single_bit(points);
}

void require_points(std::uint32_t points) {
  if (!std::has_single_bit(points)) {
    throw FabricError(FabricErrc::NonPowerOfTwo,
                      "point count must be a power of two, got " + std::to_string(points));
  }
  if (points < FunctionInstance::kMinPoints || points > FunctionInstance::kMaxPoints) {
    throw FabricError(FabricErrc::PointsOutOfRange,
                      "point count out of [8, 65536]: " + std::to_string(points));
  }
}

}  // namespace

std::string to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::SoftwareCore: return "software_core";
    case DomainKind::AcceleratorRegion: return "accelerator_region";
    case DomainKind::RealtimeCore: return "realtime_core";
  }
  return "?";
}

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::SoftwareFloat: return "software_float";
    case Variant::AcceleratedFixed: return "accelerated_fixed";
  }
  return "?";
}

std::string to_string(Lifecycle lifecycle) {
  switch (lifecycle) {
    case Lifecycle::Active: return "active";
    case Lifecycle::Gated: return "gated";
    case Lifecycle::Loading: return "loading";
  }
  return "?";
}

DomainKind parse_domain_kind(const std::string& s) {
  if (s == "software_core") return DomainKind::SoftwareCore;
  if (s == "accelerator_region") return DomainKind::AcceleratorRegion;
  if (s == "realtime_core") return DomainKind::RealtimeCore;
  throw FabricError(FabricErrc::BadConfig, "unknown domain kind: " + s);
}

Variant parse_variant(const std::string& s) {
  if (s == "software_float") return Variant::SoftwareFloat;
  if (s == "accelerated_fixed") return Variant::AcceleratedFixed;
  throw FabricError(FabricErrc::BadConfig, "unknown variant: " + s);
}

bool BitstreamMeta::valid() const {
  return !function_kind.empty() && flash_fraction > 0.0 && flash_fraction <= 1.0 &&
         max_points >= FunctionInstance::kMinPoints && std::has_single_bit(max_points);
}

std::string Fabric::default_config() {
  return R"({
  "domains": [
    {"id": "apu", "kind": "software_core", "static_power_w": 1.0},
    {"id": "pl0", "kind": "accelerator_region", "static_power_w": 0.5}
  ],
  "regions": [
    {"domain_id": "pl0"}
  ],
  "bitstreams": [
    {"function_kind": "fft", "flash_fraction": 0.05, "max_points": 4096}
  ],
  "cost_model": {"ms_per_flash_unit": 200.0}
})";
}

Fabric Fabric::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FabricError(FabricErrc::BadConfig, std::string("fabric config parse error: ") + e.what());
  }

  Fabric fabric;
  try {
    for (const auto& d : doc.at("domains")) {
      ExecutionDomain domain;
      domain.id = d.at("id").get<std::string>();
      domain.kind = parse_domain_kind(d.at("kind").get<std::string>());
      domain.static_power_w = d.value("static_power_w", 0.0);
      if (domain.static_power_w < 0.0) {
        throw FabricError(FabricErrc::BadConfig, "static_power_w must be >= 0");
      }
      fabric.add_domain(std::move(domain));
    }
    for (const auto& r : doc.value("regions", json::array())) {
      fabric.add_region(r.at("domain_id").get<std::string>());
    }
    for (const auto& b : doc.value("bitstreams", json::array())) {
      BitstreamMeta meta;
      meta.function_kind = b.at("function_kind").get<std::string>();
      meta.flash_fraction = b.at("flash_fraction").get<double>();
      meta.max_points = b.at("max_points").get<std::uint32_t>();
      fabric.add_bitstream(std::move(meta));
    }
    if (doc.contains("cost_model")) {
      ReconfigCostModel model;
      model.ms_per_flash_unit = doc["cost_model"].value("ms_per_flash_unit", 200.0);
      if (model.ms_per_flash_unit <= 0.0) {
        throw FabricError(FabricErrc::BadConfig, "ms_per_flash_unit must be positive");
      }
      fabric.set_cost_model(model);
    }
  } catch (const json::exception& e) {
    throw FabricError(FabricErrc::BadConfig, std::string("fabric config: ") + e.what());
  }

  // Every accelerator domain needs its region; migrate relies on it.
  for (const auto& domain : fabric.domains_) {
    if (domain.kind == DomainKind::AcceleratorRegion && !fabric.find_region(domain.id)) {
      throw FabricError(FabricErrc::BadConfig,
                        "accelerator domain without a region: " + domain.id);
    }
  }
  return fabric;
}

Fabric Fabric::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FabricError(FabricErrc::BadConfig, "cannot open fabric config: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

void Fabric::add_domain(ExecutionDomain domain) {
  if (domain.id.empty()) {
    throw FabricError(FabricErrc::BadConfig, "domain id must not be empty");
  }
  if (find_domain(domain.id)) {
    throw FabricError(FabricErrc::DuplicateId, "duplicate domain id: " + domain.id);
  }
  domains_.push_back(std::move(domain));
}

void Fabric::add_region(const std::string& domain_id) {
  const ExecutionDomain* domain = find_domain(domain_id);
  if (!domain) {
    throw FabricError(FabricErrc::UnknownDomain, "region references unknown domain: " + domain_id);
  }
  if (domain->kind != DomainKind::AcceleratorRegion) {
    throw FabricError(FabricErrc::BadConfig,
                      "regions may only back accelerator domains: " + domain_id);
  }
  if (find_region(domain_id)) {
    throw FabricError(FabricErrc::DuplicateId, "duplicate region for domain: " + domain_id);
  }
  ReconfigurableRegion region;
  region.domain_id = domain_id;
  regions_.push_back(std::move(region));
}

void Fabric::add_bitstream(BitstreamMeta bitstream) {
  if (!bitstream.valid()) {
    throw FabricError(FabricErrc::InvalidBitstream,
                      "bitstream metadata invalid for kind '" + bitstream.function_kind + "'");
  }
  bitstreams_.push_back(std::move(bitstream));
}

void Fabric::set_cost_model(ReconfigCostModel model) { cost_model_ = model; }

void Fabric::deploy(const std::string& id, const std::string& kind, const std::string& domain_id,
                    std::uint32_t points) {
  if (find_instance(id)) {
    throw FabricError(FabricErrc::DuplicateId, "duplicate instance id: " + id);
  }
  const ExecutionDomain* domain = find_domain(domain_id);
  if (!domain) {
    throw FabricError(FabricErrc::UnknownDomain, "unknown domain: " + domain_id);
  }
  if (domain->kind == DomainKind::RealtimeCore) {
    throw FabricError(FabricErrc::UnsupportedDomain,
                      "realtime-core domains are reserved and not yet deployable");
  }
  require_points(points);
  if (active_of_kind(kind, id)) {
    throw FabricError(FabricErrc::DuplicateActive,
                      "an active instance of kind '" + kind + "' already exists");
  }

  FunctionInstance inst;
  inst.id = id;
  inst.kind = kind;
  inst.points = points;
  inst.placement = domain_id;
  inst.lifecycle = Lifecycle::Active;
  if (domain->kind == DomainKind::AcceleratorRegion) {
    const ReconfigurableRegion* region = find_region(domain_id);
    if (!region) {
      throw FabricError(FabricErrc::UnknownRegion, "no region backs domain: " + domain_id);
    }
    if (region->state == RegionState::Loading) {
      throw FabricError(FabricErrc::RegionBusy, "region is loading: " + domain_id);
    }
    if (region->state != RegionState::Loaded) {
      throw FabricError(FabricErrc::NoBitstream,
                        "region holds no bitstream for direct deployment: " + domain_id);
    }
    if (!region->loaded_bitstream->suits(kind, points)) {
      throw FabricError(FabricErrc::IncompatibleBitstream,
                        "loaded bitstream does not suit " + kind + "@" + std::to_string(points));
    }
    inst.variant = Variant::AcceleratedFixed;
  } else {
    inst.variant = Variant::SoftwareFloat;
  }
  instances_.push_back(std::move(inst));
}

double Fabric::place(const BitstreamMeta& bitstream, const std::string& region_domain_id) {
  ReconfigurableRegion* region = mutable_region(region_domain_id);
  if (!region) {
    throw FabricError(FabricErrc::UnknownRegion, "unknown region: " + region_domain_id);
  }
  if (region->state == RegionState::Loading) {
    throw FabricError(FabricErrc::RegionBusy, "region is loading: " + region_domain_id);
  }
  if (!bitstream.valid()) {
    throw FabricError(FabricErrc::InvalidBitstream, "bitstream metadata invalid");
  }
  require_region_compatible(*region, bitstream);

  const double latency = cost_model_.latency_ms(bitstream.flash_fraction);
  region->state = RegionState::Loading;
  region->loaded_bitstream = bitstream;
  region->loading_until_ms = sim_time_ms_ + latency;
  // Active residents are suspended while their hardware is rewritten; gated
  // ones stay gated.
  for (auto& inst : instances_) {
    if (inst.placement == region_domain_id && inst.lifecycle == Lifecycle::Active) {
      inst.lifecycle = Lifecycle::Loading;
    }
  }
  return latency;
}

double Fabric::migrate(const std::string& fn_id, const std::string& target_domain) {
  FunctionInstance* inst = mutable_instance(fn_id);
  if (!inst) {
    throw FabricError(FabricErrc::UnknownInstance, "unknown instance: " + fn_id);
  }
  const ExecutionDomain* target = find_domain(target_domain);
  if (!target) {
    throw FabricError(FabricErrc::UnknownDomain, "unknown domain: " + target_domain);
  }
  if (target->kind == DomainKind::RealtimeCore) {
    throw FabricError(FabricErrc::UnsupportedDomain,
                      "realtime-core domains are reserved migration targets");
  }
  if (inst->placement == target_domain) {
    return 0.0;  // already there
  }
  if (inst->lifecycle == Lifecycle::Loading) {
    throw FabricError(FabricErrc::InstanceLoading, "instance is loading: " + fn_id);
  }
  if (active_of_kind(inst->kind, fn_id)) {
    throw FabricError(FabricErrc::DuplicateActive,
                      "another active instance of kind '" + inst->kind + "' exists");
  }

  const ExecutionDomain* source = find_domain(inst->placement);
  double latency = 0.0;
  bool needs_load = false;
  BitstreamMeta load_image;

  ReconfigurableRegion* region = nullptr;
  if (target->kind == DomainKind::AcceleratorRegion) {
    region = mutable_region(target_domain);
    if (!region) {
      throw FabricError(FabricErrc::UnknownRegion, "no region backs domain: " + target_domain);
    }
    if (region->state == RegionState::Loading) {
      throw FabricError(FabricErrc::RegionBusy, "region is loading: " + target_domain);
    }
    if (region->state == RegionState::Loaded &&
        region->loaded_bitstream->suits(inst->kind, inst->points)) {
      latency = 0.0;
    } else {
      const BitstreamMeta* image = pick_bitstream(inst->kind, inst->points);
      if (!image) {
        throw FabricError(FabricErrc::NoBitstream,
                          "no catalog bitstream suits " + inst->kind + "@" +
                              std::to_string(inst->points));
      }
      // Residents other than this function's own shadow must survive the swap.
      const std::string absorbed = shadow_id(fn_id, target_domain);
      for (const auto& other : instances_) {
        if (other.placement == target_domain && other.id != absorbed &&
            !image->suits(other.kind, other.points)) {
          throw FabricError(FabricErrc::IncompatibleBitstream,
                            "bitstream swap would strand instance " + other.id);
        }
      }
      needs_load = true;
      load_image = *image;
      latency = cost_model_.latency_ms(load_image.flash_fraction);
    }
  }

  // -- commit ---------------------------------------------------------------
  // Reactivating on a domain that still holds this function's gated shadow
  // absorbs the shadow.
  const std::string absorbed = shadow_id(fn_id, target_domain);
  std::erase_if(instances_, [&](const FunctionInstance& other) { return other.id == absorbed; });
  inst = mutable_instance(fn_id);  // vector may have shifted

  if (source && source->kind == DomainKind::AcceleratorRegion) {
    // Keep a gated copy behind: the hardware block stays configured and can
    // be reactivated without another load.
    const std::string left_behind = shadow_id(fn_id, inst->placement);
    FunctionInstance* existing = mutable_instance(left_behind);
    if (existing) {
      existing->points = inst->points;
      existing->lifecycle = Lifecycle::Gated;
    } else {
      FunctionInstance shadow;
      shadow.id = left_behind;
      shadow.kind = inst->kind;
      shadow.variant = Variant::AcceleratedFixed;
      shadow.points = inst->points;
      shadow.placement = inst->placement;
      shadow.lifecycle = Lifecycle::Gated;
      instances_.push_back(std::move(shadow));
      inst = mutable_instance(fn_id);
    }
  }

  if (target->kind == DomainKind::AcceleratorRegion) {
    if (needs_load) {
      region->state = RegionState::Loading;
      region->loaded_bitstream = load_image;
      region->loading_until_ms = sim_time_ms_ + latency;
      inst->lifecycle = Lifecycle::Loading;
    } else {
      inst->lifecycle = Lifecycle::Active;
    }
    inst->variant = Variant::AcceleratedFixed;
  } else {
    inst->variant = Variant::SoftwareFloat;
    inst->lifecycle = Lifecycle::Active;
  }
  inst->placement = target_domain;
  return latency;
}

void Fabric::scale(const std::string& fn_id, std::uint32_t new_points) {
  FunctionInstance* inst = mutable_instance(fn_id);
  if (!inst) {
    throw FabricError(FabricErrc::UnknownInstance, "unknown instance: " + fn_id);
  }
  if (inst->lifecycle == Lifecycle::Loading) {
    throw FabricError(FabricErrc::InstanceLoading, "instance is loading: " + fn_id);
  }
  require_points(new_points);
  if (inst->variant == Variant::AcceleratedFixed) {
    const ReconfigurableRegion* region = find_region(inst->placement);
    if (!region || !region->loaded_bitstream ||
        new_points > region->loaded_bitstream->max_points) {
      throw FabricError(FabricErrc::ExceedsMaxPoints,
                        "requested " + std::to_string(new_points) +
                            " points exceeds the loaded bitstream capacity");
    }
  }
  inst->points = new_points;
}

void Fabric::gate(const std::string& fn_id, bool gated) {
  FunctionInstance* inst = mutable_instance(fn_id);
  if (!inst) {
    throw FabricError(FabricErrc::UnknownInstance, "unknown instance: " + fn_id);
  }
  if (inst->lifecycle == Lifecycle::Loading) {
    throw FabricError(FabricErrc::InstanceLoading, "instance is loading: " + fn_id);
  }
  if (!gated && inst->lifecycle == Lifecycle::Gated && active_of_kind(inst->kind, fn_id)) {
    throw FabricError(FabricErrc::DuplicateActive,
                      "another active instance of kind '" + inst->kind + "' exists");
  }
  inst->lifecycle = gated ? Lifecycle::Gated : Lifecycle::Active;
}

void Fabric::advance(double to_ms) {
  if (to_ms < sim_time_ms_) {
    throw FabricError(FabricErrc::TimeBackwards,
                      "clock cannot move backwards: " + std::to_string(to_ms) + " < " +
                          std::to_string(sim_time_ms_));
  }
  sim_time_ms_ = to_ms;
  for (auto& region : regions_) {
    if (region.state == RegionState::Loading && region.loading_until_ms <= to_ms) {
      region.state = RegionState::Loaded;
      for (auto& inst : instances_) {
        if (inst.placement == region.domain_id && inst.lifecycle == Lifecycle::Loading) {
          inst.lifecycle = Lifecycle::Active;
        }
      }
    }
  }
}

const ExecutionDomain* Fabric::find_domain(const std::string& id) const {
  auto it = std::find_if(domains_.begin(), domains_.end(),
                         [&](const ExecutionDomain& d) { return d.id == id; });
  return it == domains_.end() ? nullptr : &*it;
}

const ReconfigurableRegion* Fabric::find_region(const std::string& domain_id) const {
  auto it = std::find_if(regions_.begin(), regions_.end(),
                         [&](const ReconfigurableRegion& r) { return r.domain_id == domain_id; });
  return it == regions_.end() ? nullptr : &*it;
}

const FunctionInstance* Fabric::find_instance(const std::string& id) const {
  auto it = std::find_if(instances_.begin(), instances_.end(),
                         [&](const FunctionInstance& f) { return f.id == id; });
  return it == instances_.end() ? nullptr : &*it;
}

bool Fabric::quiescent() const {
  for (const auto& region : regions_) {
    if (region.state == RegionState::Loading) return false;
  }
  for (const auto& inst : instances_) {
    if (inst.lifecycle == Lifecycle::Loading) return false;
  }
  return true;
}

double Fabric::quiesce_time_ms() const {
  double t = sim_time_ms_;
  for (const auto& region : regions_) {
    if (region.state == RegionState::Loading) {
      t = std::max(t, region.loading_until_ms);
    }
  }
  return t;
}

std::string Fabric::shadow_id(const std::string& fn_id, const std::string& domain_id) {
  return fn_id + "@" + domain_id;
}

void Fabric::check_invariants() const {
  for (std::size_t i = 0; i < domains_.size(); ++i) {
    for (std::size_t j = i + 1; j < domains_.size(); ++j) {
      if (domains_[i].id == domains_[j].id) {
        throw FabricError(FabricErrc::DuplicateId, "duplicate domain id: " + domains_[i].id);
      }
    }
  }
  for (const auto& region : regions_) {
    const ExecutionDomain* domain = find_domain(region.domain_id);
    if (!domain || domain->kind != DomainKind::AcceleratorRegion) {
      throw FabricError(FabricErrc::BadConfig, "region not backed by an accelerator domain");
    }
    if (region.state == RegionState::Loading) {
      if (!region.loaded_bitstream) {
        throw FabricError(FabricErrc::BadConfig, "loading region without a bitstream");
      }
      if (region.loading_until_ms <= sim_time_ms_) {
        throw FabricError(FabricErrc::BadConfig, "loading region past its deadline");
      }
    }
    if (region.state == RegionState::Loaded && !region.loaded_bitstream) {
      throw FabricError(FabricErrc::BadConfig, "loaded region without a bitstream");
    }
    if (region.loaded_bitstream && !region.loaded_bitstream->valid()) {
      throw FabricError(FabricErrc::InvalidBitstream, "region holds invalid bitstream metadata");
    }
  }
  for (const auto& inst : instances_) {
    const ExecutionDomain* domain = find_domain(inst.placement);
    if (!domain) {
      throw FabricError(FabricErrc::UnknownDomain,
                        "instance placed on missing domain: " + inst.id);
    }
    const bool accel = inst.variant == Variant::AcceleratedFixed;
    if (accel != (domain->kind == DomainKind::AcceleratorRegion)) {
      throw FabricError(FabricErrc::BadConfig,
                        "variant/domain-kind mismatch for instance: " + inst.id);
    }
    if (!power_of_two_in_range(inst.points)) {
      throw FabricError(FabricErrc::PointsOutOfRange, "instance points invalid: " + inst.id);
    }
    if (accel) {
      const ReconfigurableRegion* region = find_region(inst.placement);
      if (!region || !region->loaded_bitstream) {
        throw FabricError(FabricErrc::NoBitstream,
                          "accelerated instance without a backing bitstream: " + inst.id);
      }
      if (!region->loaded_bitstream->suits(inst.kind, inst.points)) {
        throw FabricError(FabricErrc::IncompatibleBitstream,
                          "accelerated instance exceeds its bitstream: " + inst.id);
      }
      if (inst.lifecycle == Lifecycle::Loading && region->state != RegionState::Loading) {
        throw FabricError(FabricErrc::BadConfig,
                          "loading instance on a settled region: " + inst.id);
      }
    } else if (inst.lifecycle == Lifecycle::Loading) {
      throw FabricError(FabricErrc::BadConfig, "software instance cannot be loading: " + inst.id);
    }
  }
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    for (std::size_t j = i + 1; j < instances_.size(); ++j) {
      if (instances_[i].id == instances_[j].id) {
        throw FabricError(FabricErrc::DuplicateId, "duplicate instance id: " + instances_[i].id);
      }
      if (instances_[i].kind == instances_[j].kind &&
          instances_[i].lifecycle == Lifecycle::Active &&
          instances_[j].lifecycle == Lifecycle::Active) {
        throw FabricError(FabricErrc::DuplicateActive,
                          "two active instances of kind: " + instances_[i].kind);
      }
    }
  }
}

ExecutionDomain* Fabric::mutable_domain(const std::string& id) {
  return const_cast<ExecutionDomain*>(find_domain(id));
}

ReconfigurableRegion* Fabric::mutable_region(const std::string& domain_id) {
  return const_cast<ReconfigurableRegion*>(find_region(domain_id));
}

FunctionInstance* Fabric::mutable_instance(const std::string& id) {
  return const_cast<FunctionInstance*>(find_instance(id));
}

const FunctionInstance* Fabric::active_of_kind(const std::string& kind,
                                               const std::string& skip_id) const {
  for (const auto& inst : instances_) {
    if (inst.id != skip_id && inst.kind == kind && inst.lifecycle == Lifecycle::Active) {
      return &inst;
    }
  }
  return nullptr;
}

const BitstreamMeta* Fabric::pick_bitstream(const std::string& kind, std::uint32_t points) const {
  const BitstreamMeta* best = nullptr;
  for (const auto& bitstream : bitstreams_) {
    if (!bitstream.suits(kind, points)) continue;
    if (!best || bitstream.flash_fraction < best->flash_fraction ||
        (bitstream.flash_fraction == best->flash_fraction &&
         bitstream.max_points < best->max_points)) {
      best = &bitstream;  // cheapest load first, tightest capacity on ties
    }
  }
  return best;
}

void Fabric::require_region_compatible(const ReconfigurableRegion& region,
                                       const BitstreamMeta& bitstream) const {
  for (const auto& inst : instances_) {
    if (inst.placement == region.domain_id && !bitstream.suits(inst.kind, inst.points)) {
      throw FabricError(FabricErrc::IncompatibleBitstream,
                        "bitstream swap would strand instance " + inst.id);
    }
  }
}

}  // namespace microorch
