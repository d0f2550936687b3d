#include "microorch/policy.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace microorch {

namespace {

using json = nlohmann::ordered_json;

bool points_ok(std::uint32_t points) {
  return points >= FunctionInstance::kMinPoints && points <= FunctionInstance::kMaxPoints &&
         std::has_single_bit(points);
}

const ExecutionDomain* first_domain_of_kind(const Fabric& fabric, DomainKind kind) {
  for (const auto& domain : fabric.domains()) {
    if (domain.kind == kind) return &domain;
  }
  return nullptr;
}

// Prefers an accelerator whose region already holds a suitable image so the
// plan stays place-free whenever possible.
const ExecutionDomain* choose_accel_domain(const Fabric& fabric, const std::string& kind,
                                           std::uint32_t points) {
  const ExecutionDomain* fallback = nullptr;
  for (const auto& domain : fabric.domains()) {
    if (domain.kind != DomainKind::AcceleratorRegion) continue;
    if (!fallback) fallback = &domain;
    const ReconfigurableRegion* region = fabric.find_region(domain.id);
    if (region && region->state == RegionState::Loaded &&
        region->loaded_bitstream->suits(kind, points)) {
      return &domain;
    }
  }
  return fallback;
}

const BitstreamMeta* catalog_pick(const Fabric& fabric, const std::string& kind,
                                  std::uint32_t points) {
  const BitstreamMeta* best = nullptr;
  for (const auto& bitstream : fabric.bitstreams()) {
    if (!bitstream.suits(kind, points)) continue;
    if (!best || bitstream.flash_fraction < best->flash_fraction ||
        (bitstream.flash_fraction == best->flash_fraction &&
         bitstream.max_points < best->max_points)) {
      best = &bitstream;
    }
  }
  return best;
}

}  // namespace

std::string PolicyTable::default_config() {
  return R"({
  "rules": [
    {"faces_min": 0, "faces_max": 0, "variant": "software_float", "points": 8},
    {"faces_min": 1, "faces_max": 1, "variant": "software_float", "points": 1024},
    {"faces_min": 2, "faces_max": 2, "variant": "accelerated_fixed", "points": 2048},
    {"faces_min": 3, "faces_max": "inf", "variant": "accelerated_fixed", "points": 4096}
  ],
  "min_dwell_ms": 0
})";
}

PolicyTable PolicyTable::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw PolicyError(PolicyErrc::Parse, std::string("policy config parse error: ") + e.what());
  }

  PolicyTable table;
  try {
    if (!doc.contains("rules") || !doc["rules"].is_array() || doc["rules"].empty()) {
      throw PolicyError(PolicyErrc::Parse, "policy config needs a non-empty 'rules' array");
    }
    for (const auto& r : doc["rules"]) {
      PolicyRule rule;
      rule.faces_min = r.at("faces_min").get<std::int64_t>();
      const auto& max = r.at("faces_max");
      if (max.is_string()) {
        if (max.get<std::string>() != "inf") {
          throw PolicyError(PolicyErrc::Parse, "faces_max must be a number or \"inf\"");
        }
        rule.faces_max = kFacesInf;
      } else {
        rule.faces_max = max.get<std::int64_t>();
      }
      try {
        rule.target.variant = parse_variant(r.at("variant").get<std::string>());
      } catch (const FabricError& e) {
        throw PolicyError(PolicyErrc::Parse, e.what());
      }
      rule.target.points = r.at("points").get<std::uint32_t>();
      table.rules_.push_back(rule);
    }
    table.min_dwell_ms_ = doc.value("min_dwell_ms", 0.0);
    if (table.min_dwell_ms_ < 0.0) {
      throw PolicyError(PolicyErrc::Parse, "min_dwell_ms must be >= 0");
    }
  } catch (const json::exception& e) {
    throw PolicyError(PolicyErrc::Parse, std::string("policy config: ") + e.what());
  }

  for (const auto& rule : table.rules_) {
    if (rule.faces_min < 0 || rule.faces_min > rule.faces_max) {
      throw PolicyError(PolicyErrc::BadRange,
                        "rule range invalid: [" + std::to_string(rule.faces_min) + ", " +
                            std::to_string(rule.faces_max) + "]");
    }
    if (!points_ok(rule.target.points)) {
      throw PolicyError(PolicyErrc::BadPoints,
                        "rule points must be a power of two in [8, 65536], got " +
                            std::to_string(rule.target.points));
    }
  }

  std::sort(table.rules_.begin(), table.rules_.end(),
            [](const PolicyRule& a, const PolicyRule& b) { return a.faces_min < b.faces_min; });

  // Disjoint + full coverage of [0, inf) means the sorted ranges are exactly
  // consecutive.
  std::int64_t expected_min = 0;
  for (const auto& rule : table.rules_) {
    if (rule.faces_min > expected_min) {
      throw PolicyError(PolicyErrc::Gap,
                        "table leaves faces=" + std::to_string(expected_min) + " uncovered");
    }
    if (rule.faces_min < expected_min) {
      throw PolicyError(PolicyErrc::Overlap,
                        "rules overlap at faces=" + std::to_string(rule.faces_min));
    }
    if (rule.faces_max == kFacesInf) {
      expected_min = kFacesInf;
    } else {
      expected_min = rule.faces_max + 1;
    }
  }
  if (expected_min != kFacesInf) {
    throw PolicyError(PolicyErrc::Gap, "table leaves faces >= " + std::to_string(expected_min) +
                                           " uncovered");
  }
  return table;
}

PolicyTable PolicyTable::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw PolicyError(PolicyErrc::Parse, "cannot open policy config: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

TargetConfig PolicyTable::decide(std::int64_t faces) const {
  if (faces < 0) {
    throw PolicyError(PolicyErrc::BadRange, "face count must be >= 0");
  }
  for (const auto& rule : rules_) {
    if (faces >= rule.faces_min && faces <= rule.faces_max) {
      return rule.target;
    }
  }
  // Unreachable for a table that passed validation.
  throw PolicyError(PolicyErrc::Gap, "no rule matches faces=" + std::to_string(faces));
}

ActionPlan plan(const Fabric& fabric, const std::string& fn_id, const TargetConfig& target) {
  const FunctionInstance* inst = fabric.find_instance(fn_id);
  if (!inst) {
    throw PolicyError(PolicyErrc::UnknownInstance, "unknown instance: " + fn_id);
  }
  const TargetConfig current{inst->variant, inst->points};
  if (current == target) {
    return {};
  }

  ActionPlan actions;
  bool scaled_early = false;

  if (inst->variant != target.variant) {
    if (target.variant == Variant::AcceleratedFixed) {
      const ExecutionDomain* domain = choose_accel_domain(fabric, inst->kind, target.points);
      if (!domain) {
        throw PolicyError(PolicyErrc::NoDomain, "fabric has no accelerator domain");
      }
      const ReconfigurableRegion* region = fabric.find_region(domain->id);
      const bool region_ready = region && region->state == RegionState::Loaded &&
                                region->loaded_bitstream->suits(inst->kind, target.points);
      if (region_ready) {
        if (!region->loaded_bitstream->suits(inst->kind, inst->points)) {
          // The resident image covers the target length but not the current
          // one; shrink first so the move itself stays load-free.
          actions.push_back(ScaleAction{target.points});
          scaled_early = true;
        }
        actions.push_back(MigrateAction{domain->id});
      } else {
        const std::uint32_t span = std::max(target.points, inst->points);
        const BitstreamMeta* image = catalog_pick(fabric, inst->kind, span);
        if (!image) {
          image = catalog_pick(fabric, inst->kind, target.points);
          if (!image) {
            throw PolicyError(PolicyErrc::NoBitstream,
                              "no catalog bitstream suits " + inst->kind + "@" +
                                  std::to_string(target.points));
          }
          // No image spans the current length, so scale down before moving.
          actions.push_back(ScaleAction{target.points});
          scaled_early = true;
        }
        actions.push_back(PlaceAction{*image, domain->id});
        actions.push_back(MigrateAction{domain->id});
      }
    } else {
      const ExecutionDomain* domain = first_domain_of_kind(fabric, DomainKind::SoftwareCore);
      if (!domain) {
        throw PolicyError(PolicyErrc::NoDomain, "fabric has no software domain");
      }
      actions.push_back(MigrateAction{domain->id});
      const ExecutionDomain* source = fabric.find_domain(inst->placement);
      if (source && source->kind == DomainKind::AcceleratorRegion) {
        // Park the abandoned accelerated copy.
        actions.push_back(GateAction{Fabric::shadow_id(fn_id, inst->placement), true});
      }
    }
  } else if (target.variant == Variant::AcceleratedFixed) {
    // Same variant, new length: check that the resident image can host it.
    const ReconfigurableRegion* region = fabric.find_region(inst->placement);
    if (!region || !region->loaded_bitstream ||
        !region->loaded_bitstream->suits(inst->kind, target.points)) {
      const BitstreamMeta* image = catalog_pick(fabric, inst->kind, target.points);
      if (!image) {
        throw PolicyError(PolicyErrc::NoBitstream,
                          "no catalog bitstream suits " + inst->kind + "@" +
                              std::to_string(target.points));
      }
      actions.push_back(PlaceAction{*image, inst->placement});
    }
  }

  if (!scaled_early && inst->points != target.points) {
    actions.push_back(ScaleAction{target.points});
  }
  return actions;
}

double apply_plan(Fabric& fabric, const std::string& fn_id, const ActionPlan& plan) {
  double total_latency = 0.0;
  for (const Action& action : plan) {
    double latency = 0.0;
    if (const auto* place = std::get_if<PlaceAction>(&action)) {
      latency = fabric.place(place->bitstream, place->region_domain_id);
    } else if (const auto* migrate = std::get_if<MigrateAction>(&action)) {
      latency = fabric.migrate(fn_id, migrate->target_domain);
    } else if (const auto* gate = std::get_if<GateAction>(&action)) {
      fabric.gate(gate->fn_id, gate->gated);
    } else if (const auto* scale = std::get_if<ScaleAction>(&action)) {
      fabric.scale(fn_id, scale->points);
    }
    if (latency > 0.0) {
      fabric.advance(fabric.sim_time_ms() + latency);
    }
    total_latency += latency;
  }
  return total_latency;
}

std::string describe(const Action& action) {
  if (const auto* place = std::get_if<PlaceAction>(&action)) {
    return "place(" + place->bitstream.function_kind + "/" +
           std::to_string(place->bitstream.max_points) + " -> " + place->region_domain_id + ")";
  }
  if (const auto* migrate = std::get_if<MigrateAction>(&action)) {
    return "migrate(" + migrate->target_domain + ")";
  }
  if (const auto* gate = std::get_if<GateAction>(&action)) {
    return std::string(gate->gated ? "gate(" : "ungate(") + gate->fn_id + ")";
  }
  if (const auto* scale = std::get_if<ScaleAction>(&action)) {
    return "scale(" + std::to_string(scale->points) + ")";
  }
  return "?";
}

std::string describe(const ActionPlan& plan) {
  if (plan.empty()) return "[]";
  std::string out = "[";
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (i) out += ", ";
    out += describe(plan[i]);
  }
  out += "]";
  return out;
}

}  // namespace microorch
