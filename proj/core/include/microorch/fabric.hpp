#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace microorch {

enum class DomainKind { SoftwareCore, AcceleratorRegion, RealtimeCore };
enum class Variant { SoftwareFloat, AcceleratedFixed };
enum class Lifecycle { Active, Gated, Loading };
enum class RegionState { Empty, Loading, Loaded };

std::string to_string(DomainKind kind);
std::string to_string(Variant variant);
std::string to_string(Lifecycle lifecycle);
DomainKind parse_domain_kind(const std::string& s);
Variant parse_variant(const std::string& s);

/// One execution domain of the SoC. Static power is a fixed property of the
/// silicon and is never affected by clock gating.
struct ExecutionDomain {
  std::string id;
  DomainKind kind = DomainKind::SoftwareCore;
  double static_power_w = 0.0;

  bool operator==(const ExecutionDomain&) const = default;
};

/// Descriptor for a partial bitstream in the catalog. flash_fraction is the
/// share of configuration flash the image occupies and drives load latency.
struct BitstreamMeta {
  std::string function_kind;
  double flash_fraction = 0.0;   // in (0, 1]
  std::uint32_t max_points = 0;  // power of two >= 8

  bool valid() const;
  /// True when this image can host `kind` at `points`.
  bool suits(const std::string& kind, std::uint32_t points) const {
    return function_kind == kind && points <= max_points;
  }

  bool operator==(const BitstreamMeta&) const = default;
};

/// A reconfigurable slot inside an accelerator domain. Identified by the
/// domain it backs (one region per accelerator domain).
struct ReconfigurableRegion {
  std::string domain_id;
  RegionState state = RegionState::Empty;
  std::optional<BitstreamMeta> loaded_bitstream;
  double loading_until_ms = 0.0;  // meaningful while state == Loading

  bool operator==(const ReconfigurableRegion&) const = default;
};

/// One deployable function. Instances on accelerator domains always carry
/// the fixed-point variant; software placements carry the float variant.
struct FunctionInstance {
  std::string id;
  std::string kind;  // e.g. "fft"
  Variant variant = Variant::SoftwareFloat;
  std::uint32_t points = kMinPoints;
  std::string placement;  // domain id
  Lifecycle lifecycle = Lifecycle::Active;

  static constexpr std::uint32_t kMinPoints = 8;
  static constexpr std::uint32_t kMaxPoints = 65536;

  bool operator==(const FunctionInstance&) const = default;
};

/// Linear partial-reconfiguration latency: latency(f) = f * ms_per_flash_unit.
/// The default charges 10 ms for an image occupying 5% of the flash.
struct ReconfigCostModel {
  double ms_per_flash_unit = 200.0;

  double latency_ms(double flash_fraction) const { return flash_fraction * ms_per_flash_unit; }

  bool operator==(const ReconfigCostModel&) const = default;
};

enum class FabricErrc {
  UnknownDomain,
  UnknownRegion,
  UnknownInstance,
  DuplicateId,
  DuplicateActive,
  RegionBusy,
  InstanceLoading,
  UnsupportedDomain,
  NonPowerOfTwo,
  PointsOutOfRange,
  ExceedsMaxPoints,
  NoBitstream,
  IncompatibleBitstream,
  InvalidBitstream,
  TimeBackwards,
  BadConfig,
};

class FabricError : public std::runtime_error {
 public:
  FabricError(FabricErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  FabricErrc code() const { return code_; }

 private:
  FabricErrc code_;
};

/// The simulated SoC compute fabric: execution domains, reconfigurable
/// regions, placed function instances, a bitstream catalog, and the
/// simulated clock. All lifecycle operations either commit fully or throw
/// without touching state.
class Fabric {
 public:
  Fabric() = default;

  /// Parses a fabric config document (domains, regions, bitstream catalog,
  /// optional cost-model override). Throws FabricError{BadConfig} on any
  /// structural problem.
  static Fabric from_json(const std::string& text);
  static Fabric from_file(const std::string& path);
  /// Built-in default: one software core "apu", one accelerator region
  /// "pl0", and an fft bitstream at 5% flash / 4096 points.
  static std::string default_config();

  // -- topology construction ------------------------------------------------
  void add_domain(ExecutionDomain domain);
  void add_region(const std::string& domain_id);
  void add_bitstream(BitstreamMeta bitstream);
  void set_cost_model(ReconfigCostModel model);

  /// Creates an Active instance on a domain. Accelerator placements require
  /// the backing region to already hold a suitable bitstream.
  void deploy(const std::string& id, const std::string& kind, const std::string& domain_id,
              std::uint32_t points);

  // -- lifecycle operations -------------------------------------------------

  /// Starts loading a bitstream into a region. Returns the charged latency;
  /// the region stays Loading until the clock advances past it.
  double place(const BitstreamMeta& bitstream, const std::string& region_domain_id);

  /// Moves an instance to another domain, switching its variant to match.
  /// Returns the charged latency: 0 for software targets and for accelerator
  /// targets whose region already holds a suitable bitstream, otherwise the
  /// place latency of the catalog image it loads. Leaving an accelerator
  /// region keeps a gated instance behind for cheap reactivation.
  double migrate(const std::string& fn_id, const std::string& target_domain);

  /// Changes the transform length. Latency-free; accelerated instances are
  /// bounded by their region's bitstream capacity.
  void scale(const std::string& fn_id, std::uint32_t new_points);

  /// Clock-gates (true) or reactivates (false) an instance. Gated instances
  /// contribute zero dynamic power.
  void gate(const std::string& fn_id, bool gated);

  /// Moves the simulated clock forward, completing any loads whose deadline
  /// has passed.
  void advance(double to_ms);

  // -- queries ----------------------------------------------------------------
  double sim_time_ms() const { return sim_time_ms_; }
  const std::vector<ExecutionDomain>& domains() const { return domains_; }
  const std::vector<ReconfigurableRegion>& regions() const { return regions_; }
  const std::vector<FunctionInstance>& instances() const { return instances_; }
  const std::vector<BitstreamMeta>& bitstreams() const { return bitstreams_; }
  const ReconfigCostModel& cost_model() const { return cost_model_; }

  const ExecutionDomain* find_domain(const std::string& id) const;
  const ReconfigurableRegion* find_region(const std::string& domain_id) const;
  const FunctionInstance* find_instance(const std::string& id) const;

  /// No region or instance is mid-load.
  bool quiescent() const;
  /// Earliest time at which all in-flight loads have completed.
  double quiesce_time_ms() const;

  /// Id of the gated instance migrate leaves on an abandoned accelerator.
  static std::string shadow_id(const std::string& fn_id, const std::string& domain_id);

  /// Checks every structural invariant; throws FabricError on violation.
  /// Used by the randomized state-machine tests.
  void check_invariants() const;

  bool operator==(const Fabric&) const = default;

 private:
  ExecutionDomain* mutable_domain(const std::string& id);
  ReconfigurableRegion* mutable_region(const std::string& domain_id);
  FunctionInstance* mutable_instance(const std::string& id);
  const FunctionInstance* active_of_kind(const std::string& kind, const std::string& skip_id) const;
  const BitstreamMeta* pick_bitstream(const std::string& kind, std::uint32_t points) const;
  void require_region_compatible(const ReconfigurableRegion& region,
                                 const BitstreamMeta& bitstream) const;

  std::vector<ExecutionDomain> domains_;
  std::vector<ReconfigurableRegion> regions_;
  std::vector<FunctionInstance> instances_;
  std::vector<BitstreamMeta> bitstreams_;
  ReconfigCostModel cost_model_;
  double sim_time_ms_ = 0.0;
};

}  // namespace microorch
