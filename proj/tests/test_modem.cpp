#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include "rfseq/channel.hpp"
#include "rfseq/modem.hpp"

using namespace rfseq;

namespace {

Bits random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bits b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng() & 1u);
  return b;
}

// Per-bit QPSK error rate when noise is referenced to unit mean sample power.
double analytic_ber(double snr_db, int sps) {
  const double snr = std::pow(10.0, snr_db / 10.0);
  return 0.5 * std::erfc(std::sqrt(sps * snr) / std::numbers::sqrt2);
}

std::size_t bit_errors(const Bits& a, const Bits& b) {
  std::size_t e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) e += a[i] != b[i];
  return e;
}

}  // namespace

TEST(Qpsk, GrayMap) {
  const double a = 1.0 / std::sqrt(2.0);
  const auto s = map_qpsk(Bits{0, 0, 1, 1, 0, 1, 1, 0});
  ASSERT_EQ(s.symbols.size(), 4u);
  EXPECT_NEAR(s.symbols[0].real(), a, 1e-15);
  EXPECT_NEAR(s.symbols[0].imag(), a, 1e-15);
  EXPECT_NEAR(s.symbols[1].real(), -a, 1e-15);
  EXPECT_NEAR(s.symbols[1].imag(), -a, 1e-15);
  EXPECT_LT(s.symbols[2].real(), 0);
  EXPECT_GT(s.symbols[2].imag(), 0);
  EXPECT_GT(s.symbols[3].real(), 0);
  EXPECT_LT(s.symbols[3].imag(), 0);
  EXPECT_FALSE(s.padded);
  for (const auto& z : s.symbols) EXPECT_NEAR(std::abs(z), 1.0, 1e-15);
}

TEST(Qpsk, NeighborsDifferByOneBit) {
  // Angular order of the four points and their bit pairs.
  std::vector<std::pair<double, int>> pts;
  for (int v = 0; v < 4; ++v) pts.push_back({std::arg(qpsk_point(v & 1, (v >> 1) & 1)), v});
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 0; i < 4; ++i) {
    const int x = pts[i].second ^ pts[(i + 1) % 4].second;
    EXPECT_EQ(__builtin_popcount(x), 1);
  }
}

TEST(Qpsk, OddLengthPadded) {
  const auto s = map_qpsk(Bits{1, 0, 1});
  EXPECT_TRUE(s.padded);
  ASSERT_EQ(s.symbols.size(), 2u);
  EXPECT_EQ(s.symbols[1], qpsk_point(1, 0));
}

TEST(Rrc, SymmetryEnergyAndLength) {
  for (int sps : {2, 4, 8}) {
    for (int span : {11, 23}) {
      ModemConfig c{sps, 0.35, span};
      const auto h = rrc_taps(c);
      ASSERT_EQ(h.size(), static_cast<std::size_t>(span * sps + 1));
      double e = 0.0;
      for (double v : h) e += v * v;
      EXPECT_NEAR(e, 1.0, 1e-12);
      for (std::size_t k = 0; k < h.size(); ++k) EXPECT_EQ(h[k], h[h.size() - 1 - k]);
    }
  }
  ModemConfig short_span{2, 0.35, 11};
  EXPECT_EQ(rrc_taps(short_span).size(), 23u);
}

// Center tap from the t -> 0 limit, normalized by an energy sum evaluated with
// a separate closed form (pi*t*(1-(4bt)^2) form, perturbed off singularities).
TEST(Rrc, CenterTapAnalyticLimit) {
  const double beta = 0.35;
  const int sps = 2, span = 11;
  const double pi = std::numbers::pi;
  auto raw = [&](double t) {
    if (t == 0.0) return 1.0 - beta + 4.0 * beta / pi;
    const double x = 4.0 * beta * t;
    if (std::abs(std::abs(x) - 1.0) < 1e-9) t += 1e-7;
    const double xx = 4.0 * beta * t;
    return (std::sin(pi * t * (1 - beta)) + xx * std::cos(pi * t * (1 + beta))) / (pi * t * (1 - xx * xx));
  };
  double energy = 0.0;
  for (int k = -span * sps / 2; k <= span * sps / 2; ++k) energy += raw(k / double(sps)) * raw(k / double(sps));
  const auto h = rrc_taps({sps, beta, span});
  EXPECT_NEAR(h[h.size() / 2], (1 + beta * (4 / pi - 1)) / std::sqrt(energy), 1e-12);
}

TEST(Rrc, NyquistResidualDefaultSpan) {
  for (int sps : {2, 4, 8}) {
    ModemConfig c{sps, 0.35, 23};
    const auto h = rrc_taps(c);
    std::vector<double> rc(2 * h.size() - 1, 0.0);
    for (std::size_t i = 0; i < h.size(); ++i)
      for (std::size_t j = 0; j < h.size(); ++j) rc[i + j] += h[i] * h[j];
    const std::size_t mid = h.size() - 1;
    EXPECT_NEAR(rc[mid], 1.0, 1e-12);
    double worst = 0.0;
    for (std::size_t k = sps; k <= mid; k += sps) worst = std::max({worst, std::abs(rc[mid + k]), std::abs(rc[mid - k])});
    EXPECT_LT(worst, 1e-3) << "sps " << sps;
  }
}

TEST(PulseShape, ImpulseResponseAndLength) {
  ModemConfig c;
  const std::vector<Complex> one{{1.0, 0.0}};
  const auto y = pulse_shape(one, c);
  const auto h = rrc_taps(c);
  // One symbol occupies sps samples before filtering.
  ASSERT_EQ(y.size(), h.size() + 1);
  EXPECT_EQ(y.samples.back(), Complex{});
  const double scale = y.samples[h.size() / 2].real() / h[h.size() / 2];
  for (std::size_t k = 0; k < h.size(); ++k) EXPECT_NEAR(y.samples[k].real(), scale * h[k], 1e-12);

  std::vector<Complex> syms(1000, {1.0, 0.0});
  EXPECT_EQ(pulse_shape(syms, c).size(), 1000u * 2 + static_cast<std::size_t>(c.rrc_span_symbols * 2));
}

TEST(PulseShape, UnitPower) {
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const auto s = map_qpsk(random_bits(2 * n, n));
    const auto y = pulse_shape(s.symbols, ModemConfig{});
    EXPECT_NEAR(mean_power(y.samples), 1.0, 1e-9);
    EXPECT_TRUE(y.all_finite());
  }
}

TEST(PulseShape, SpectralContainment) {
  ModemConfig c;
  const auto s = map_qpsk(random_bits(1 << 15, 5));
  const auto y = pulse_shape(s.symbols, c);
  // Averaged periodogram with 256-point segments, plain DFT.
  const std::size_t nfft = 256;
  std::vector<double> psd(nfft, 0.0);
  for (std::size_t seg = 0; seg + nfft <= y.size(); seg += nfft) {
    for (std::size_t k = 0; k < nfft; ++k) {
      Complex acc{};
      for (std::size_t n = 0; n < nfft; ++n)
        acc += y.samples[seg + n] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * n) / double(nfft));
      psd[k] += std::norm(acc);
    }
  }
  const double edge = (1.0 + c.rrc_rolloff) / (2.0 * c.samples_per_symbol);
  double inside = 0.0, total = 0.0;
  for (std::size_t k = 0; k < nfft; ++k) {
    const double f = k < nfft / 2 ? double(k) / nfft : double(k) / nfft - 1.0;
    total += psd[k];
    if (std::abs(f) <= edge + 1.0 / nfft) inside += psd[k];
  }
  EXPECT_GE(inside / total, 0.99 - 0.01);
}

TEST(Loopback, NoiselessExactAllSps) {
  for (int sps : {2, 4, 8}) {
    for (std::size_t n : {1u, 2u, 7u, 100u, 10000u}) {
      ModemConfig c{sps, 0.35, 23};
      const Bits x = random_bits(n, n + sps);
      const auto y = modulate(x, c, 1'000'000);
      Bits r = loopback_demod(y.samples, c);
      ASSERT_GE(r.size(), x.size());
      r.resize(x.size());
      EXPECT_EQ(r, x) << "sps " << sps << " n " << n;
    }
  }
}

TEST(Loopback, BerAtZeroDb) {
  ModemConfig c;
  const Bits x = random_bits(100000, 9);
  const auto y = modulate(x, c, 1'000'000);
  const auto noisy = awgn(y, 0.0, 10);
  Bits r = loopback_demod(noisy.samples, c);
  r.resize(x.size());
  const double ber = double(bit_errors(r, x)) / double(x.size());
  const double ref = analytic_ber(0.0, c.samples_per_symbol);
  EXPECT_NEAR(ref, 0.0786, 1e-3);
  EXPECT_LT(ber, 2.0 * ref);
  EXPECT_GT(ber, ref / 2.0);
}

TEST(Loopback, BerAtTwentyDb) {
  ModemConfig c;
  const Bits x = random_bits(100000, 11);
  const auto noisy = awgn(modulate(x, c, 1'000'000), 20.0, 12);
  Bits r = loopback_demod(noisy.samples, c);
  r.resize(x.size());
  EXPECT_LT(double(bit_errors(r, x)) / double(x.size()), 1e-4);
}

TEST(IqFile, RoundTripAndCorruptLength) {
  std::vector<Complex> s{{1.5, -2.25}, {0.0, 3.0}};
  const auto bytes = encode_iq(s);
  ASSERT_EQ(bytes.size(), 16u);
  EXPECT_EQ(decode_iq(bytes), s);
  const auto path = std::filesystem::temp_directory_path() / "rfseq_modem_iq_test.cf32";
  write_iq(path, s);
  EXPECT_EQ(read_iq(path), s);
  io::Bytes cut(bytes.begin(), bytes.end() - 3);
  try {
    decode_iq(cut);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorruptLength);
  }
  std::filesystem::remove(path);
}
