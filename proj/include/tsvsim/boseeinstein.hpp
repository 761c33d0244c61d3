#pragma once

// Two-pion Bose-Einstein correlations from a chaotic source: symmetrized
// emission probabilities, Q_inv histograms against an event-mixing reference,
// and the two-halves absorber gedanken experiment.

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tsvsim/random.hpp"

namespace tsvsim {

inline constexpr double kHbarC = 0.1973;      // GeV fm
inline constexpr double kPionMass = 0.13957;  // GeV

struct FourMomentum {
  double e = 0, px = 0, py = 0, pz = 0;

  static FourMomentum on_shell(const Eigen::Vector3d& p, double mass = kPionMass);
  Eigen::Vector3d p() const { return {px, py, pz}; }
  double mass_sq() const { return e * e - px * px - py * py - pz * pz; }
};

/// Lorentz boost of `p` into the frame moving with velocity `beta` (|beta| < 1).
FourMomentum boost(const FourMomentum& p, const Eigen::Vector3d& beta);

/// sqrt(|p1 - p2|^2 - (E1 - E2)^2).
double q_inv(const FourMomentum& p1, const FourMomentum& p2);

/// k1 - k2 in the pair rest frame; its length equals q_inv for equal masses.
Eigen::Vector3d relative_momentum_prf(const FourMomentum& p1, const FourMomentum& p2);

/// (1/2)|a12 + a21|^2.
double emission_probability(std::complex<double> a12, std::complex<double> a21);

/// Emission probability when the two assignments leave a witness in states
/// whose overlap is `witness_overlap`: (1/2)(|a12|^2 + |a21|^2 + 2 Re(conj(a12) a21 w)).
double emission_probability(std::complex<double> a12, std::complex<double> a21, std::complex<double> witness_overlap);

struct GaussianSource {
  double radius;  // per-axis RMS of the emission points, fm
};

struct TwoHalvesSource {
  double separation;  // distance between the spot centres along y, fm
  double spot;        // per-axis RMS of each spot, fm
};

struct SourceModel {
  std::variant<GaussianSource, TwoHalvesSource> geometry;
  double momentum_scale = 0.1;  // per-component momentum spread, GeV

  static SourceModel gaussian(double radius, double momentum_scale = 0.1);
  static SourceModel two_halves(double separation, double spot, double momentum_scale = 0.1);
  bool is_two_halves() const { return std::holds_alternative<TwoHalvesSource>(geometry); }
  void validate() const;
};

enum class Origin { upper, lower };

struct Particle {
  FourMomentum p;
  Eigen::Vector3d x;  // emission point, fm
  Origin origin;
};

struct PairEvent {
  FourMomentum p1, p2;
  Eigen::Vector3d x1, x2;
  std::array<Origin, 2> origin;
};

Particle sample_particle(const SourceModel& src, RandomStream& rng);

/// n independent pairs; pair k draws from stream (seed, "be_pair", k).
std::vector<PairEvent> sample_pairs(const SourceModel& src, std::size_t n, std::uint64_t seed);

/// Plane-wave amplitudes for the two particle-to-point assignments,
/// exp(i k1.x1 + i k2.x2) and exp(i k1.x2 + i k2.x1), with k the pair rest
/// frame momenta in fm^-1. Emission points are read as pair rest frame
/// coordinates at a common emission time.
std::array<std::complex<double>, 2> pair_amplitudes(const FourMomentum& p1, const FourMomentum& p2,
                                                    const Eigen::Vector3d& x1, const Eigen::Vector3d& x2);

struct CorrelationConfig {
  std::size_t bins = 40;
  double q_max = 0.4;  // GeV
  std::size_t multiplicity = 10;
  std::size_t mix_partners = 10;
  unsigned workers = 1;
};

struct CorrelationBin {
  double q_lo, q_hi;
  double same;     // sum of same-event pair weights
  double same_sq;  // sum of squared weights
  double mixed;    // mixed-event pair count
  double c;
  double c_err;
  bool valid;      // false when the reference bin is empty
};

struct CorrelationHistogram {
  std::vector<CorrelationBin> bins;
  double same_pairs = 0;   // same-event pairs entering the normalization
  double mixed_pairs = 0;

  /// Columns q_lo, q_hi, same, mixed, C, C_err; invalid bins leave C and C_err empty.
  void write_csv(std::ostream& os) const;
};

struct GaussianFit {
  double lambda;
  double radius;     // fm
  double intercept;  // 1 + lambda
  double chi2;
  std::size_t ndf;
};

/// Weighted fit of 1 + lambda exp(-Q^2 R^2 / (hbar c)^2) over valid bins with q_hi <= q_fit_max.
GaussianFit fit_gaussian(const CorrelationHistogram& h, double q_fit_max = std::numeric_limits<double>::infinity());

/// C(0) from a weighted fit of a + b Q^2 over valid bins with q_hi <= q_fit_max.
double quadratic_intercept(const CorrelationHistogram& h, double q_fit_max);

/// Same-event pairs weighted by the symmetrized emission probability, divided
/// by the mixed-event reference, both normalized by their pair counts.
CorrelationHistogram correlation(const SourceModel& src, std::size_t n_events, std::uint64_t seed,
                                 const CorrelationConfig& cfg = {});

enum class AbsorberMode {
  off,                  // both assignments interfere
  on,                   // absorber records which particle came from the lower half
  selection_from_birth  // particles treated as distinguishable by origin from emission on
};

/// Histogram of upper-lower origin pairs of a two-halves source.
CorrelationHistogram absorber_histogram(const SourceModel& src, AbsorberMode mode, std::size_t n_events,
                                        std::uint64_t seed, const CorrelationConfig& cfg = {});

struct AbsorberReport {
  CorrelationHistogram off, on, from_birth;
  double c0_off, c0_on, c0_from_birth;
  double max_on_birth_difference;  // max |C_on - C_birth| over valid bins
};

AbsorberReport absorber_gedanken(const SourceModel& src, std::size_t n_events, std::uint64_t seed,
                                 const CorrelationConfig& cfg = {}, double intercept_q_max = 0.1);

}  // namespace tsvsim
