#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "microorch/fabric.hpp"

namespace microorch {

/// Where the managed function should run and at which transform length.
struct TargetConfig {
  Variant variant = Variant::SoftwareFloat;
  std::uint32_t points = 8;

  bool operator==(const TargetConfig&) const = default;
};

inline constexpr std::int64_t kFacesInf = INT64_MAX;

/// One row of the context-event table: an inclusive face-count range mapped
/// to a target configuration.
struct PolicyRule {
  std::int64_t faces_min = 0;
  std::int64_t faces_max = kFacesInf;
  TargetConfig target;

  bool operator==(const PolicyRule&) const = default;
};

enum class PolicyErrc {
  Parse,
  Gap,
  Overlap,
  BadPoints,
  BadRange,
  UnknownInstance,
  NoDomain,
  NoBitstream,
};

class PolicyError : public std::runtime_error {
 public:
  PolicyError(PolicyErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  PolicyErrc code() const { return code_; }

 private:
  PolicyErrc code_;
};

/// Validated, immutable rule table. Rules are checked at load time to be
/// disjoint and to jointly cover every face count from 0 upward, so decide()
/// is total.
class PolicyTable {
 public:
  /// Parses and validates a policy config document. Gaps, overlaps, bad
  /// point counts and parse problems each raise their own PolicyErrc.
  static PolicyTable from_json(const std::string& text);
  static PolicyTable from_file(const std::string& path);
  /// Built-in default table:
  ///   0 faces  -> software float FFT,    8 points
  ///   1 face   -> software float FFT, 1024 points
  ///   2 faces  -> accelerated fixed FFT, 2048 points
  ///   3+ faces -> accelerated fixed FFT, 4096 points
  static std::string default_config();

  TargetConfig decide(std::int64_t faces) const;
  const std::vector<PolicyRule>& rules() const { return rules_; }
  double min_dwell_ms() const { return min_dwell_ms_; }

 private:
  PolicyTable() = default;
  std::vector<PolicyRule> rules_;  // sorted by faces_min
  double min_dwell_ms_ = 0.0;
};

struct PlaceAction {
  BitstreamMeta bitstream;
  std::string region_domain_id;
  bool operator==(const PlaceAction&) const = default;
};
struct MigrateAction {
  std::string target_domain;
  bool operator==(const MigrateAction&) const = default;
};
struct GateAction {
  std::string fn_id;
  bool gated = true;
  bool operator==(const GateAction&) const = default;
};
struct ScaleAction {
  std::uint32_t points = 8;
  bool operator==(const ScaleAction&) const = default;
};

using Action = std::variant<PlaceAction, MigrateAction, GateAction, ScaleAction>;
using ActionPlan = std::vector<Action>;

/// Diffs the instance's current configuration against the target and emits
/// the minimal action list to get there: empty when already satisfied,
/// Migrate before Scale when both are needed, a Gate for the accelerated
/// copy abandoned by an accelerated-to-software move, and a Place only when
/// the chosen region lacks a suitable bitstream.
ActionPlan plan(const Fabric& fabric, const std::string& fn_id, const TargetConfig& target);

/// Applies a plan action by action, advancing the simulated clock past each
/// charged load so the sequence always lands in a quiescent state. Returns
/// the total latency charged.
double apply_plan(Fabric& fabric, const std::string& fn_id, const ActionPlan& plan);

std::string describe(const Action& action);
std::string describe(const ActionPlan& plan);

}  // namespace microorch
