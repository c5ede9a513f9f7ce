#pragma once

#include <cstddef>
#include <vector>

namespace softorgan {

inline constexpr std::size_t kMaxHarmonics = 4;
inline constexpr double kMaxAmplitudeSum = 0.9;

struct Harmonic {
  double amplitude = 0.0;  // dimensionless
  double frequency = 1.0;  // Hz
  double phase = 0.0;      // radians

  bool operator==(const Harmonic&) const = default;
};

// Periodic rest-length modulation: m(t) = sum_k a_k sin(2 pi f_k t + phi_k).
struct ActuationSignal {
  std::vector<Harmonic> harmonics;

  double value(double t) const;
  double derivative(double t) const;
  double amplitude_sum() const;

  // At most kMaxHarmonics, positive strictly increasing frequencies and
  // sum |a_k| <= kMaxAmplitudeSum.
  bool is_valid() const;
  void validate() const;  // throws ValidationError

  bool operator==(const ActuationSignal&) const = default;
};

// Repairs a signal in place so is_valid() holds: sorts by frequency, lifts
// frequencies to a positive strictly increasing sequence, wraps phases to
// [0, 2 pi) and scales amplitudes down when their absolute sum is too big.
void enforce_signal_invariants(ActuationSignal& signal);

double wrap_phase(double phi);

// Clamped rest-length factor 1 + scale * m(t), limited to [eps, 2 - eps].
double rest_factor(const ActuationSignal& signal, double amplitude_scale, double t,
                   double epsilon);

}  // namespace softorgan
