#include "microorch/workloads.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>

namespace microorch {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_fft_length(std::size_t n) {
  if (!valid_fft_length(n)) {
    throw WorkloadError(WorkloadErrc::InvalidLength,
                        "FFT length must be a power of two in [8, 65536], got " + std::to_string(n));
  }
}

std::size_t bit_reverse(std::size_t x, int bits) {
  std::size_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | ((x >> i) & 1u);
  }
  return r;
}

// Rounds to nearest, ties to even. Independent of the FPU rounding mode.
double round_half_even(double x) {
  double fl = std::floor(x);
  double fr = x - fl;
  if (fr > 0.5) return fl + 1.0;
  if (fr < 0.5) return fl;
  return (std::fmod(fl, 2.0) == 0.0) ? fl : fl + 1.0;
}

// Arithmetic shift right by s with round-half-to-even on the dropped bits.
std::int64_t rshift_rne(std::int64_t v, int s) {
  if (s <= 0) return v;
  std::int64_t q = v >> s;
  std::int64_t r = v - (q << s);
  std::int64_t half = std::int64_t{1} << (s - 1);
  if (r > half) return q + 1;
  if (r == half) return (q & 1) ? q + 1 : q;
  return q;
}

struct FxComplex {
  std::int64_t re = 0;
  std::int64_t im = 0;
};

class FixedEngine {
 public:
  FixedEngine(const FixedPointFormat& fmt)
      : frac_(fmt.frac_bits),
        max_raw_((std::int64_t{1} << (fmt.word_bits - 1)) - 1),
        min_raw_(-(std::int64_t{1} << (fmt.word_bits - 1))) {}

  std::int64_t saturate(std::int64_t v, std::uint64_t* count) {
    if (v > max_raw_) {
      if (count) ++*count;
      return max_raw_;
    }
    if (v < min_raw_) {
      if (count) ++*count;
      return min_raw_;
    }
    return v;
  }

  std::int64_t quantize(double x, std::uint64_t* count) {
    double scaled = round_half_even(std::ldexp(x, frac_));
    // Clamp through integer saturation; doubles this large are exact.
    if (scaled > static_cast<double>(max_raw_)) {
      if (count) ++*count;
      return max_raw_;
    }
    if (scaled < static_cast<double>(min_raw_)) {
      if (count) ++*count;
      return min_raw_;
    }
    return static_cast<std::int64_t>(scaled);
  }

  // (br + i*bi) * (wr + i*wi), products rescaled from 2f back to f bits.
  FxComplex cmul(const FxComplex& b, const FxComplex& w, std::uint64_t* count) {
    __int128 re_wide = static_cast<__int128>(b.re) * w.re - static_cast<__int128>(b.im) * w.im;
    __int128 im_wide = static_cast<__int128>(b.re) * w.im + static_cast<__int128>(b.im) * w.re;
    FxComplex out;
    out.re = saturate(rshift_rne(static_cast<std::int64_t>(re_wide), frac_), count);
    out.im = saturate(rshift_rne(static_cast<std::int64_t>(im_wide), frac_), count);
    return out;
  }

  // Butterfly output (a +/- t) / 2: the per-stage scaling keeps word growth at zero.
  std::int64_t add_scaled(std::int64_t a, std::int64_t t, std::uint64_t* count) {
    return saturate(rshift_rne(a + t, 1), count);
  }

  double to_double(std::int64_t raw) const { return std::ldexp(static_cast<double>(raw), -frac_); }

 private:
  int frac_;
  std::int64_t max_raw_;
  std::int64_t min_raw_;
};

}  // namespace

bool valid_fft_length(std::size_t n) {
  return n >= kMinFftPoints && n <= kMaxFftPoints && std::has_single_bit(n);
}

std::string FixedPointFormat::name() const {
  return "q" + std::to_string(word_bits - frac_bits) + "." + std::to_string(frac_bits);
}

FixedPointFormat FixedPointFormat::q(int word_bits, int frac_bits) {
  FixedPointFormat fmt;
  fmt.word_bits = word_bits;
  fmt.frac_bits = frac_bits;
  if (!fmt.valid()) {
    throw WorkloadError(WorkloadErrc::BadFormat,
                        "invalid fixed-point format q" + std::to_string(word_bits - frac_bits) +
                            "." + std::to_string(frac_bits));
  }
  return fmt;
}

FixedPointFormat FixedPointFormat::parse(const std::string& tag) {
  if (tag.size() < 4 || (tag[0] != 'q' && tag[0] != 'Q')) {
    throw WorkloadError(WorkloadErrc::BadFormat, "unrecognized fixed-point tag: " + tag);
  }
  auto dot = tag.find('.');
  if (dot == std::string::npos) {
    throw WorkloadError(WorkloadErrc::BadFormat, "unrecognized fixed-point tag: " + tag);
  }
  int int_bits = 0;
  int frac_bits = 0;
  try {
    int_bits = std::stoi(tag.substr(1, dot - 1));
    frac_bits = std::stoi(tag.substr(dot + 1));
  } catch (const std::exception&) {
    throw WorkloadError(WorkloadErrc::BadFormat, "unrecognized fixed-point tag: " + tag);
  }
  return q(int_bits + frac_bits, frac_bits);
}

Spectrum fft_float(const Signal& signal) {
  require_fft_length(signal.size());
  const std::size_t n = signal.size();
  const int stages = std::countr_zero(n);

  Spectrum x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[bit_reverse(i, stages)] = signal[i];
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const double step = -kTwoPi / static_cast<double>(len);
    for (std::size_t base = 0; base < n; base += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const Complex w = std::polar(1.0, step * static_cast<double>(j));
        const Complex t = w * x[base + j + half];
        const Complex a = x[base + j];
        x[base + j] = a + t;
        x[base + j + half] = a - t;
      }
    }
  }
  return x;
}

Spectrum dft_naive(const Signal& signal) {
  if (signal.empty()) {
    throw WorkloadError(WorkloadErrc::EmptySignal, "cannot transform an empty signal");
  }
  const std::size_t n = signal.size();
  Spectrum out(n);
  for (std::size_t k = 0; k < n; ++k) {
    long double acc_re = 0.0L;
    long double acc_im = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      const double angle = -kTwoPi * static_cast<double>(k) * static_cast<double>(i) /
                           static_cast<double>(n);
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      acc_re += signal[i].real() * c - signal[i].imag() * s;
      acc_im += signal[i].real() * s + signal[i].imag() * c;
    }
    out[k] = Complex(static_cast<double>(acc_re), static_cast<double>(acc_im));
  }
  return out;
}

FixedFftResult fft_fixed(const Signal& signal, const FixedPointFormat& fmt) {
  require_fft_length(signal.size());
  if (!fmt.valid()) {
    throw WorkloadError(WorkloadErrc::BadFormat, "invalid fixed-point format");
  }

  const std::size_t n = signal.size();
  const int stages = std::countr_zero(n);
  FixedEngine eng(fmt);
  FixedFftResult result;

  std::vector<FxComplex> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    FxComplex q;
    q.re = eng.quantize(signal[i].real(), &result.saturation_count);
    q.im = eng.quantize(signal[i].imag(), &result.saturation_count);
    x[bit_reverse(i, stages)] = q;
  }

  // Twiddles quantized to the working format; clipping of cos(0)=1 to the
  // largest representable value is structural and not counted.
  std::vector<FxComplex> twiddle(n / 2);
  for (std::size_t j = 0; j < n / 2; ++j) {
    const double angle = -kTwoPi * static_cast<double>(j) / static_cast<double>(n);
    twiddle[j].re = eng.quantize(std::cos(angle), nullptr);
    twiddle[j].im = eng.quantize(std::sin(angle), nullptr);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t base = 0; base < n; base += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const FxComplex w = twiddle[j * stride];
        const FxComplex t = eng.cmul(x[base + j + half], w, &result.saturation_count);
        const FxComplex a = x[base + j];
        x[base + j].re = eng.add_scaled(a.re, t.re, &result.saturation_count);
        x[base + j].im = eng.add_scaled(a.im, t.im, &result.saturation_count);
        x[base + j + half].re = eng.add_scaled(a.re, -t.re, &result.saturation_count);
        x[base + j + half].im = eng.add_scaled(a.im, -t.im, &result.saturation_count);
      }
    }
  }

  // The per-stage halving leaves the core output scaled by 1/N; multiply the
  // float conversion by N so it lines up with fft_float.
  result.spectrum.resize(n);
  const double rescale = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.spectrum[i] = Complex(eng.to_double(x[i].re) * rescale, eng.to_double(x[i].im) * rescale);
  }
  return result;
}

double mse(const Spectrum& a, const Spectrum& b) {
  if (a.size() != b.size()) {
    throw WorkloadError(WorkloadErrc::LengthMismatch,
                        "spectrum lengths differ: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  if (a.empty()) {
    throw WorkloadError(WorkloadErrc::EmptySignal, "cannot compare empty spectra");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += std::norm(a[i] - b[i]);
  }
  return acc / static_cast<double>(a.size());
}

Signal generate_signal(const SignalSpec& spec, std::size_t n) {
  if (n == 0) {
    throw WorkloadError(WorkloadErrc::InvalidLength, "signal length must be positive");
  }
  Signal out(n, Complex(0.0, 0.0));
  switch (spec.kind) {
    case SignalKind::Impulse:
      out[0] = Complex(1.0, 0.0);
      break;
    case SignalKind::Dc:
      std::fill(out.begin(), out.end(), Complex(1.0, 0.0));
      break;
    case SignalKind::Tone: {
      if (spec.tone_bin >= n) {
        throw WorkloadError(WorkloadErrc::BadParam, "tone bin out of range");
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double angle = kTwoPi * static_cast<double>(spec.tone_bin) *
                             static_cast<double>(i) / static_cast<double>(n);
        out[i] = Complex(std::cos(angle), std::sin(angle));
      }
      break;
    }
    case SignalKind::SeededUniform: {
      // Map raw mt19937_64 draws to [0,1) by hand; the distribution adapters
      // in <random> are not pinned down by the standard.
      std::mt19937_64 rng(spec.seed);
      auto u01 = [&rng]() {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
      };
      for (std::size_t i = 0; i < n; ++i) {
        const double re = u01() - 0.5;
        const double im = u01() - 0.5;
        out[i] = Complex(re, im);
      }
      break;
    }
  }
  return out;
}

NormalizedSignal normalize_signal(const Signal& signal) {
  double max_abs = 0.0;
  for (const Complex& c : signal) {
    max_abs = std::max({max_abs, std::abs(c.real()), std::abs(c.imag())});
  }
  NormalizedSignal out;
  if (max_abs == 0.0) {
    out.signal = signal;
    out.scale = 1.0;
    return out;
  }
  out.scale = 2.0 * max_abs;
  out.signal.reserve(signal.size());
  for (const Complex& c : signal) {
    out.signal.emplace_back(c.real() / out.scale, c.imag() / out.scale);
  }
  return out;
}

}  // namespace microorch
