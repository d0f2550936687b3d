#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "microorch/workloads.hpp"

using namespace microorch;

namespace {

double max_abs_delta(const Spectrum& a, const Spectrum& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Signal seeded_input(std::uint64_t seed, std::size_t n) {
  return generate_signal(SignalSpec::seeded_uniform(seed), n);
}

}  // namespace

TEST_CASE("fft_float: impulse transforms to a flat unit spectrum") {
  Spectrum spectrum = fft_float(generate_signal(SignalSpec::impulse(), 8));
  REQUIRE(spectrum.size() == 8);
  for (const Complex& bin : spectrum) {
    CHECK(bin.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bin.imag() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("fft_float: DC signal concentrates in bin 0") {
  Spectrum spectrum = fft_float(generate_signal(SignalSpec::dc(), 8));
  CHECK(spectrum[0].real() == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(spectrum[0].imag() == doctest::Approx(0.0).epsilon(1e-12));
  for (std::size_t k = 1; k < 8; ++k) CHECK(std::abs(spectrum[k]) < 1e-12);
}

TEST_CASE("fft_float: complex tone lands in its own bin") {
  Spectrum spectrum = fft_float(generate_signal(SignalSpec::tone(3), 8));
  CHECK(spectrum[3].real() == doctest::Approx(8.0).epsilon(1e-9));
  CHECK(std::abs(spectrum[3].imag()) < 1e-9);
  for (std::size_t k = 0; k < 8; ++k) {
    if (k != 3) CHECK(std::abs(spectrum[k]) < 1e-9);
  }
}

TEST_CASE("fft_float: rejects invalid lengths") {
  for (std::size_t n : {std::size_t{0}, std::size_t{4}, std::size_t{1000}, std::size_t{131072}}) {
    Signal signal(n, Complex{0.0, 0.0});
    CHECK_THROWS_AS(fft_float(signal), WorkloadError);
  }
}

TEST_CASE("dft_naive: works on arbitrary lengths, rejects empty input") {
  Signal three{{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
  Spectrum spectrum = dft_naive(three);
  CHECK(spectrum[0].real() == doctest::Approx(6.0).epsilon(1e-12));
  CHECK_THROWS_AS(dft_naive(Signal{}), WorkloadError);
}

TEST_CASE("fft_float matches the brute-force DFT oracle") {
  SUBCASE("seeded uniform, N=1024, spec tolerance") {
    Signal signal = seeded_input(42, 1024);
    CHECK(max_abs_delta(fft_float(signal), dft_naive(signal)) < 1e-9);
  }
  SUBCASE("length sweep") {
    for (std::size_t n = 8; n <= 512; n *= 2) {
      for (std::uint64_t seed : {1ull, 2ull}) {
        Signal signal = seeded_input(seed, n);
        CHECK(max_abs_delta(fft_float(signal), dft_naive(signal)) <
              1e-9 * static_cast<double>(n));
      }
    }
  }
}

TEST_CASE("fft_float: Parseval's identity holds to 1e-9 relative") {
  for (std::size_t n : {std::size_t{8}, std::size_t{256}, std::size_t{2048}}) {
    Signal signal = seeded_input(7 + n, n);
    Spectrum spectrum = fft_float(signal);
    double time_energy = 0.0;
    for (const Complex& x : signal) time_energy += std::norm(x);
    double freq_energy = 0.0;
    for (const Complex& bin : spectrum) freq_energy += std::norm(bin);
    freq_energy /= static_cast<double>(n);
    CHECK(std::abs(time_energy - freq_energy) <= 1e-9 * time_energy);
  }
}

TEST_CASE("fft_float is linear") {
  const std::size_t n = 256;
  Signal x = seeded_input(11, n);
  Signal y = seeded_input(12, n);
  Complex alpha{0.75, -0.25};
  Complex beta{-1.5, 2.0};
  Signal combined(n);
  for (std::size_t i = 0; i < n; ++i) combined[i] = alpha * x[i] + beta * y[i];
  Spectrum lhs = fft_float(combined);
  Spectrum fx = fft_float(x);
  Spectrum fy = fft_float(y);
  for (std::size_t k = 0; k < n; ++k) {
    CHECK(std::abs(lhs[k] - (alpha * fx[k] + beta * fy[k])) < 1e-9 * static_cast<double>(n));
  }
}

TEST_CASE("fft_fixed: near-unit impulse gives a uniform spectrum at full scale") {
  Signal impulse(8, Complex{0.0, 0.0});
  impulse[0] = Complex{1.0 - std::ldexp(1.0, -15), 0.0};
  FixedFftResult result = fft_fixed(impulse);
  REQUIRE(result.spectrum.size() == 8);
  CHECK(result.saturation_count == 0);
  // Raw path per bin: 32767 halves to 16384 (tie to even), 8192, 4096; the
  // final x8 rescale lands every bin on exactly 1.0.
  for (const Complex& bin : result.spectrum) {
    CHECK(bin.real() == 1.0);
    CHECK(bin.imag() == 0.0);
    CHECK(bin.real() == doctest::Approx(0.99997).epsilon(1e-4));
  }
}

TEST_CASE("fft_fixed: zero signal stays exactly zero") {
  Signal zeros(1024, Complex{0.0, 0.0});
  FixedFftResult result = fft_fixed(zeros);
  for (const Complex& bin : result.spectrum) {
    CHECK(bin.real() == 0.0);
    CHECK(bin.imag() == 0.0);
  }
  CHECK(mse(result.spectrum, fft_float(zeros)) == 0.0);
}

TEST_CASE("fft_fixed: out-of-range input saturates and is counted") {
  Signal hot(8, Complex{0.0, 0.0});
  hot[0] = Complex{3.5, -2.0};
  FixedFftResult result = fft_fixed(hot);
  CHECK(result.saturation_count >= 2);  // both components clip at quantization
  for (const Complex& bin : result.spectrum) {
    CHECK(std::isfinite(bin.real()));
    CHECK(std::isfinite(bin.imag()));
  }
}

TEST_CASE("fft_fixed: Q1.15 error against float stays under the frozen bound") {
  // Calibrated on seeded uniform inputs: observed mse/(2^-30 N^2) lands near
  // 0.6 across N; c = 1.0 frozen as the regression ceiling.
  for (std::size_t n : {std::size_t{8}, std::size_t{1024}, std::size_t{2048}}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Signal input = normalize_signal(seeded_input(seed * 31 + n, n)).signal;
      FixedFftResult fixed = fft_fixed(input);
      double err = mse(fixed.spectrum, fft_float(input));
      double bound = std::ldexp(static_cast<double>(n) * static_cast<double>(n), -30);
      CHECK(err <= bound);
    }
  }
}

TEST_CASE("fft_fixed: bit-exact across repeated runs") {
  Signal input = normalize_signal(seeded_input(99, 512)).signal;
  FixedFftResult first = fft_fixed(input);
  FixedFftResult second = fft_fixed(input);
  REQUIRE(first.spectrum.size() == second.spectrum.size());
  for (std::size_t k = 0; k < first.spectrum.size(); ++k) {
    CHECK(first.spectrum[k].real() == second.spectrum[k].real());
    CHECK(first.spectrum[k].imag() == second.spectrum[k].imag());
  }
  CHECK(first.saturation_count == second.saturation_count);
}

TEST_CASE("fft_fixed: median MSE falls as frac_bits grows from 7 to 15") {
  const std::size_t n = 256;
  std::vector<double> medians;
  for (int frac = 7; frac <= 15; ++frac) {
    FixedPointFormat fmt = FixedPointFormat::q(frac + 1, frac);
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Signal input = normalize_signal(seeded_input(seed * 131, n)).signal;
      errs.push_back(mse(fft_fixed(input, fmt).spectrum, fft_float(input)));
    }
    medians.push_back(median(errs));
  }
  for (std::size_t i = 1; i < medians.size(); ++i) CHECK(medians[i] < medians[i - 1]);
}

TEST_CASE("mse: identity, constant offset, length mismatch") {
  Spectrum a(16, Complex{1.0, 0.0});
  CHECK(mse(a, a) == 0.0);
  Spectrum b = a;
  for (Complex& v : b) v += Complex{1.0, 0.0};
  CHECK(mse(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  Spectrum shorter(8, Complex{0.0, 0.0});
  CHECK_THROWS_AS(mse(a, shorter), WorkloadError);
}

TEST_CASE("mse: float FFT vs oracle is tiny at N=64") {
  Signal signal = seeded_input(5, 64);
  CHECK(mse(fft_float(signal), dft_naive(signal)) < 1e-18);
}

TEST_CASE("generate_signal: shapes and determinism") {
  Signal impulse = generate_signal(SignalSpec::impulse(), 8);
  CHECK(impulse[0] == Complex{1.0, 0.0});
  for (std::size_t i = 1; i < 8; ++i) CHECK(impulse[i] == Complex{0.0, 0.0});

  Signal first = generate_signal(SignalSpec::seeded_uniform(42), 16);
  Signal second = generate_signal(SignalSpec::seeded_uniform(42), 16);
  CHECK(first == second);
  for (const Complex& x : first) {
    CHECK(x.real() >= -0.5);
    CHECK(x.real() < 0.5);
    CHECK(x.imag() >= -0.5);
    CHECK(x.imag() < 0.5);
  }
  Signal other = generate_signal(SignalSpec::seeded_uniform(43), 16);
  CHECK(first != other);

  // Arbitrary lengths are fine for signals; only the FFTs demand powers of two.
  CHECK(generate_signal(SignalSpec::seeded_uniform(1), 12).size() == 12);
  CHECK_THROWS_AS(generate_signal(SignalSpec::seeded_uniform(1), 0), WorkloadError);
  CHECK_THROWS_AS(fft_float(generate_signal(SignalSpec::seeded_uniform(1), 12)), WorkloadError);
}

TEST_CASE("normalize_signal: rescales into [-0.5, 0.5] and reports the scale") {
  Signal wild{{4.0, 0.0}, {-2.0, 1.0}, {0.5, -0.5}, {0.0, 0.0},
              {1.0, 1.0}, {0.0, 3.0},  {2.5, 0.0},  {-1.0, -1.0}};
  NormalizedSignal normalized = normalize_signal(wild);
  double peak = 0.0;
  for (std::size_t i = 0; i < wild.size(); ++i) {
    CHECK(std::abs(normalized.signal[i].real()) <= 0.5);
    CHECK(std::abs(normalized.signal[i].imag()) <= 0.5);
    CHECK(normalized.signal[i].real() * normalized.scale ==
          doctest::Approx(wild[i].real()).epsilon(1e-12));
    peak = std::max({peak, std::abs(normalized.signal[i].real()),
                     std::abs(normalized.signal[i].imag())});
  }
  CHECK(peak == doctest::Approx(0.5).epsilon(1e-12));

  NormalizedSignal zero = normalize_signal(Signal(8, Complex{0.0, 0.0}));
  CHECK(zero.scale == 1.0);
}

TEST_CASE("FixedPointFormat: tag parsing and validation") {
  FixedPointFormat q115 = FixedPointFormat::parse("q1.15");
  CHECK(q115.word_bits == 16);
  CHECK(q115.frac_bits == 15);
  CHECK(q115.name() == "q1.15");

  FixedPointFormat q17 = FixedPointFormat::parse("q1.7");
  CHECK(q17.word_bits == 8);
  CHECK(q17.frac_bits == 7);

  CHECK_THROWS_AS(FixedPointFormat::parse("f32"), WorkloadError);
  CHECK_THROWS_AS(FixedPointFormat::parse("q1.40"), WorkloadError);
  CHECK_THROWS_AS((void)fft_fixed(Signal(8), FixedPointFormat::q(8, 9)), WorkloadError);
}
