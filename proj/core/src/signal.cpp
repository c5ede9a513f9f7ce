#include "softorgan/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "softorgan/error.hpp"

namespace softorgan {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinFrequency = 1e-3;
constexpr double kMinFrequencyGap = 1e-6;
}  // namespace

double ActuationSignal::value(double t) const {
  double m = 0.0;
  for (const auto& h : harmonics) m += h.amplitude * std::sin(kTwoPi * h.frequency * t + h.phase);
  return m;
}

double ActuationSignal::derivative(double t) const {
  double d = 0.0;
  for (const auto& h : harmonics) {
    d += h.amplitude * kTwoPi * h.frequency * std::cos(kTwoPi * h.frequency * t + h.phase);
  }
  return d;
}

double ActuationSignal::amplitude_sum() const {
  double s = 0.0;
  for (const auto& h : harmonics) s += std::abs(h.amplitude);
  return s;
}

bool ActuationSignal::is_valid() const {
  if (harmonics.size() > kMaxHarmonics) return false;
  // Tiny slack so a sum scaled down to exactly 0.9 is not rejected by rounding.
  if (amplitude_sum() > kMaxAmplitudeSum * (1.0 + 1e-12)) return false;
  for (std::size_t k = 0; k < harmonics.size(); ++k) {
    const auto& h = harmonics[k];
    if (!std::isfinite(h.amplitude) || !std::isfinite(h.frequency) || !std::isfinite(h.phase)) {
      return false;
    }
    if (!(h.frequency > 0.0)) return false;
    if (k > 0 && !(h.frequency > harmonics[k - 1].frequency)) return false;
  }
  return true;
}

void ActuationSignal::validate() const {
  if (harmonics.size() > kMaxHarmonics) {
    throw ValidationError("at most " + std::to_string(kMaxHarmonics) + " harmonics allowed");
  }
  if (amplitude_sum() > kMaxAmplitudeSum * (1.0 + 1e-12)) {
    throw ValidationError("sum of |amplitude| exceeds 0.9");
  }
  if (!is_valid()) {
    throw ValidationError("harmonic frequencies must be positive and strictly increasing");
  }
}

double wrap_phase(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

void enforce_signal_invariants(ActuationSignal& signal) {
  auto& hs = signal.harmonics;
  if (hs.size() > kMaxHarmonics) hs.resize(kMaxHarmonics);
  for (auto& h : hs) {
    if (!std::isfinite(h.amplitude)) h.amplitude = 0.0;
    if (!std::isfinite(h.frequency)) h.frequency = kMinFrequency;
    if (!std::isfinite(h.phase)) h.phase = 0.0;
    h.frequency = std::max(h.frequency, kMinFrequency);
    h.phase = wrap_phase(h.phase);
  }
  std::stable_sort(hs.begin(), hs.end(),
                   [](const Harmonic& a, const Harmonic& b) { return a.frequency < b.frequency; });
  for (std::size_t k = 1; k < hs.size(); ++k) {
    if (!(hs[k].frequency > hs[k - 1].frequency)) {
      hs[k].frequency = hs[k - 1].frequency + kMinFrequencyGap;
    }
  }
  const double sum = signal.amplitude_sum();
  if (sum > kMaxAmplitudeSum) {
    const double scale = kMaxAmplitudeSum / sum;
    for (auto& h : hs) h.amplitude *= scale;
  }
}

double rest_factor(const ActuationSignal& signal, double amplitude_scale, double t,
                   double epsilon) {
  return std::clamp(1.0 + amplitude_scale * signal.value(t), epsilon, 2.0 - epsilon);
}

}  // namespace softorgan
