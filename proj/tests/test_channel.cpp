#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rfseq/channel.hpp"

using namespace rfseq;

namespace {

IqSignal random_qpsk_like(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  IqSignal s;
  s.sample_rate = 2e6;
  s.samples.resize(n);
  for (auto& z : s.samples) z = {g(rng), g(rng)};
  return s;
}

IqSignal tone(std::size_t n, double f) {
  IqSignal s;
  s.sample_rate = 1.0;
  for (std::size_t k = 0; k < n; ++k) s.samples.push_back(std::polar(1.0, 2.0 * std::numbers::pi * f * double(k)));
  return s;
}

std::size_t dft_peak(std::span<const Complex> x) {
  const std::size_t n = x.size();
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{};
    for (std::size_t m = 0; m < n; ++m) acc += x[m] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * m % n) / double(n));
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  return best;
}

double noise_power(const IqSignal& noisy, const IqSignal& clean) {
  double acc = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) acc += std::norm(noisy.samples[i] - clean.samples[i]);
  return acc / double(clean.size());
}

}  // namespace

TEST(Awgn, CleanSentinelIsIdentity) {
  const auto s = random_qpsk_like(1000, 1);
  EXPECT_EQ(awgn(s, kCleanSnr, 5).samples, s.samples);
}

TEST(Awgn, NoisePowerBandAt20dB) {
  auto s = random_qpsk_like(1'000'000, 2);
  const double p = mean_power(s.samples);
  for (auto& z : s.samples) z /= std::sqrt(p);
  const auto y = awgn(s, 20.0, 3);
  const double pn = noise_power(y, s);
  EXPECT_GE(pn, 0.0095);
  EXPECT_LE(pn, 0.0105);
  const double measured_db = 10.0 * std::log10((mean_power(y.samples) - pn) / pn);
  EXPECT_NEAR(measured_db, 20.0, 0.2);
}

TEST(Awgn, DeterministicAndUncorrelated) {
  const auto s = random_qpsk_like(200'000, 4);
  const auto a = awgn(s, 10.0, 7);
  EXPECT_EQ(a.samples, awgn(s, 10.0, 7).samples);
  EXPECT_NE(a.samples, awgn(s, 10.0, 8).samples);
  Complex xc{};
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Complex n = a.samples[i] - s.samples[i];
    xc += s.samples[i] * std::conj(n);
    ps += std::norm(s.samples[i]);
    pn += std::norm(n);
  }
  EXPECT_LT(std::abs(xc) / std::sqrt(ps * pn), 3.0 / std::sqrt(double(s.size())));
}

TEST(FreqOffset, IdentityAndQuarterRate) {
  const auto s = random_qpsk_like(100, 5);
  EXPECT_EQ(freq_offset(s, 0.0, 0.0).samples, s.samples);
  IqSignal ones;
  ones.samples.assign(8, {1.0, 0.0});
  const auto r = freq_offset(ones, 0.25, 0.0);
  const Complex expect[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_NEAR(r.samples[k].real(), expect[k % 4].real(), 1e-12);
    EXPECT_NEAR(r.samples[k].imag(), expect[k % 4].imag(), 1e-12);
  }
}

TEST(FreqOffset, MagnitudePreservedAndPhaseAdditive) {
  const auto s = random_qpsk_like(100'000, 6);
  const auto a = freq_offset(s, 3.7e-3, 0.4);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(std::abs(a.samples[k]), std::abs(s.samples[k]), 1e-12);
  const auto ab = freq_offset(freq_offset(s, 1.3e-4, 0.0), -2.9e-2, 0.0);
  const auto direct = freq_offset(s, 1.3e-4 - 2.9e-2, 0.0);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_LT(std::abs(ab.samples[k] - direct.samples[k]), 1e-10);
}

TEST(Timing, IdentityUpToTrim) {
  const auto s = random_qpsk_like(500, 7);
  const auto r = timing_offset(s, 1.0, 0.0);
  ASSERT_EQ(r.size(), s.size() - kInterpTaps);
  for (std::size_t n = 0; n < r.size(); ++n) EXPECT_NEAR(std::abs(r.samples[n] - s.samples[n + kInterpLead]), 0.0, 1e-12);
}

TEST(Timing, RampMidpoint) {
  IqSignal ramp;
  for (int k = 0; k < 200; ++k) ramp.samples.push_back({double(k), -0.5 * k});
  const auto r = timing_offset(ramp, 1.0, 0.5);
  for (std::size_t n = 10; n + 10 < r.size(); ++n) {
    const double pos = double(n + kInterpLead) + 0.5;
    EXPECT_LT(std::abs(r.samples[n] - Complex{pos, -0.5 * pos}), 1e-3);
  }
}

TEST(Timing, ToneMovesByExpectedBin) {
  const std::size_t n = 1024;
  const double f = 100.0 / 1024.0;
  const double ratio = 1.008;
  const auto s = tone(n + 64, f);
  const auto r = timing_offset(s, ratio, 0.0);
  std::vector<Complex> win(r.samples.begin(), r.samples.begin() + n);
  const double expect_bin = f * ratio * double(n);
  EXPECT_LE(std::abs(double(dft_peak(win)) - expect_bin), 1.0);
  EXPECT_EQ(dft_peak(std::span(s.samples).first(n)), 100u);
}

TEST(Timing, Errors) {
  const auto s = random_qpsk_like(8, 8);
  try {
    timing_offset(s, 1.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SignalTooShort);
  }
  EXPECT_THROW(timing_offset(random_qpsk_like(100, 1), 1.5, 0.0), Error);
}

TEST(Channel, CleanRegimeIsIdentityMinusTrim) {
  const auto s = random_qpsk_like(1000, 9);
  const auto out = apply_channel(s, ChannelConfig::clean(3));
  ASSERT_EQ(out.signal.size(), s.size() - kInterpTaps);
  for (std::size_t n = 0; n < out.signal.size(); ++n)
    EXPECT_LT(std::abs(out.signal.samples[n] - s.samples[n + kInterpLead]), 1e-12);
  EXPECT_TRUE(ChannelConfig::clean().is_clean());
}

TEST(Channel, DeterministicPerSeed) {
  const auto s = random_qpsk_like(5000, 10);
  ChannelConfig c;
  c.seed = 42;
  const auto a = apply_channel(s, c);
  const auto b = apply_channel(s, c);
  EXPECT_EQ(a.signal.samples, b.signal.samples);
  c.seed = 43;
  EXPECT_NE(apply_channel(s, c).signal.samples, a.signal.samples);
  EXPECT_GE(a.draw.resample_ratio, 1.0 - c.max_timing_offset);
  EXPECT_LE(a.draw.resample_ratio, 1.0 + c.max_timing_offset);
  EXPECT_LE(std::abs(a.draw.freq_offset), c.max_freq_offset);
  EXPECT_GE(a.draw.frac_delay, 0.0);
  EXPECT_LT(a.draw.frac_delay, 1.0);
}

TEST(Channel, DefaultConfigSnrByReferenceSubtraction) {
  auto s = random_qpsk_like(400'000, 11);
  const double p = mean_power(s.samples);
  for (auto& z : s.samples) z /= std::sqrt(p);
  ChannelConfig c;
  c.seed = 5;
  const auto out = apply_channel(s, c);
  ChannelDraw noiseless = out.draw;
  noiseless.snr_db = kCleanSnr;
  const auto ref = apply_draw(s, noiseless);
  const double pn = noise_power(out.signal, ref);
  EXPECT_NEAR(10.0 * std::log10(mean_power(ref.samples) / pn), 20.0, 0.5);
}

TEST(Channel, DrawJsonRoundTrip) {
  ChannelConfig c;
  c.seed = 77;
  const auto d = draw_channel(c);
  const nlohmann::json j = d;
  const auto back = j.get<ChannelDraw>();
  EXPECT_EQ(back.seed, d.seed);
  EXPECT_EQ(back.freq_offset, d.freq_offset);
  EXPECT_EQ(back.resample_ratio, d.resample_ratio);
  EXPECT_EQ(back.frac_delay, d.frac_delay);
  EXPECT_EQ(back.phase, d.phase);
  const nlohmann::json clean = draw_channel(ChannelConfig::clean());
  EXPECT_EQ(clean.at("snr_db"), "inf");
  EXPECT_TRUE(std::isinf(clean.get<ChannelDraw>().snr_db));
}
