#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace microorch {

using Complex = std::complex<double>;
using Signal = std::vector<Complex>;
using Spectrum = std::vector<Complex>;

inline constexpr std::uint32_t kMinFftPoints = 8;
inline constexpr std::uint32_t kMaxFftPoints = 65536;

/// True when n is a power of two in [kMinFftPoints, kMaxFftPoints].
bool valid_fft_length(std::size_t n);

enum class WorkloadErrc {
  InvalidLength,
  LengthMismatch,
  BadFormat,
  EmptySignal,
  BadParam,
};

class WorkloadError : public std::runtime_error {
 public:
  WorkloadError(WorkloadErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  WorkloadErrc code() const { return code_; }

 private:
  WorkloadErrc code_;
};

enum class Rounding { HalfToEven };
enum class Overflow { Saturate };
enum class StageScaling { HalfEachStage };

/// Complex fixed-point format for the accelerated FFT path. Defaults to
/// Q1.15 with scale-by-1/2 at every butterfly stage, the usual scaled
/// configuration of streaming hardware FFT cores.
struct FixedPointFormat {
  int word_bits = 16;
  int frac_bits = 15;
  Rounding rounding = Rounding::HalfToEven;
  Overflow overflow = Overflow::Saturate;
  StageScaling stage_scaling = StageScaling::HalfEachStage;

  bool valid() const { return frac_bits > 0 && frac_bits < word_bits && word_bits <= 32; }
  std::string name() const;  // "q1.15" style tag

  static FixedPointFormat q(int word_bits, int frac_bits);
  /// Parses tags of the form "q1.15"; integer bits + frac bits give the word width.
  static FixedPointFormat parse(const std::string& tag);
};

/// Unnormalized forward DFT via iterative radix-2 decimation in time:
/// X[k] = sum_n x[n] * exp(-2*pi*i*n*k/N).
Spectrum fft_float(const Signal& signal);

/// Direct O(N^2) evaluation of the same sum. Verification oracle; accepts
/// any length >= 1.
Spectrum dft_naive(const Signal& signal);

struct FixedFftResult {
  Spectrum spectrum;
  /// Values clipped by saturating arithmetic (input quantization plus
  /// butterfly stages). Structural twiddle clipping is not counted.
  std::uint64_t saturation_count = 0;
};

/// Bit-accurate fixed-point FFT. Input is quantized to fmt (callers
/// normalize into [-1, 1); anything outside saturates and is counted),
/// butterflies run in integer arithmetic with scale-by-1/2 per stage, and
/// the output is converted back to float and multiplied by N so spectra are
/// directly comparable with fft_float.
FixedFftResult fft_fixed(const Signal& signal, const FixedPointFormat& fmt = {});

/// Mean squared error (1/N) * sum_k |a[k] - b[k]|^2.
double mse(const Spectrum& a, const Spectrum& b);

enum class SignalKind { Impulse, Dc, Tone, SeededUniform };

struct SignalSpec {
  SignalKind kind = SignalKind::Impulse;
  std::uint32_t tone_bin = 0;   // Tone only
  std::uint64_t seed = 0;       // SeededUniform only

  static SignalSpec impulse() { return {SignalKind::Impulse, 0, 0}; }
  static SignalSpec dc() { return {SignalKind::Dc, 0, 0}; }
  static SignalSpec tone(std::uint32_t bin) { return {SignalKind::Tone, bin, 0}; }
  static SignalSpec seeded_uniform(std::uint64_t seed) { return {SignalKind::SeededUniform, 0, seed}; }
};

/// Deterministic test-signal source. SeededUniform draws re and im
/// independently from [-0.5, 0.5) using a fixed generator so sequences are
/// identical across runs and platforms.
Signal generate_signal(const SignalSpec& spec, std::size_t n);

struct NormalizedSignal {
  Signal signal;
  double scale = 1.0;  // multiply spectra by this to undo the normalization
};

/// Scales a signal so every component sits in [-0.5, 0.5], leaving headroom
/// for the fixed-point pipeline. Zero signals pass through with scale 1.
NormalizedSignal normalize_signal(const Signal& signal);

}  // namespace microorch
