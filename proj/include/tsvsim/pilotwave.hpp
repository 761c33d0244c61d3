#pragma once

// Planar guiding-field trajectories (de Broglie-Bohm) for superpositions of
// cylindrical and plane waves, and the two-hot-spot intensity-interferometry
// comparison between guided trajectories and standard flux predictions.
//
// Units: lengths in wavelengths of the chosen field, c = 1. Velocities are the
// current Im(psi* grad psi) divided by k |psi|^2, so a single plane wave or a
// single cylindrical wave moves at exactly c.

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tsvsim/tolerances.hpp"

namespace tsvsim {

using Point2 = Eigen::Vector2d;

/// strength * exp(i k r) / sqrt(r), r = |x - position|.
struct PointSource {
  Point2 position;
  std::complex<double> strength;
};

/// strength * exp(i k direction . x).
struct PlaneWave {
  Point2 direction;  // unit vector
  std::complex<double> strength;
};

class GuidingField {
 public:
  GuidingField(double wavenumber, std::vector<PointSource> points, std::vector<PlaneWave> planes = {},
               double node_floor = kDefaultTolerances.node_floor);

  /// Two unit cylindrical sources at (+d/2, 0) ("upper") and (-d/2, 0)
  /// ("lower"); the lower one carries the phase exp(2 pi i delta), delta being
  /// the path difference in wavelengths.
  static GuidingField two_hot_spots(double separation, double wavelength, double delta);

  double wavenumber() const { return k_; }
  double node_floor() const { return node_floor_; }
  const std::vector<PointSource>& points() const { return points_; }
  const std::vector<PlaneWave>& planes() const { return planes_; }
  /// Set only for two_hot_spots fields.
  const std::optional<double>& delta() const { return delta_; }
  GuidingField with_delta(double delta) const;
  /// Field of a single point source of this field.
  GuidingField only_point(std::size_t index) const;

  std::complex<double> psi(const Point2& x) const;
  Eigen::Vector2cd gradient(const Point2& x) const;
  double density(const Point2& x) const { return std::norm(psi(x)); }
  /// Sum of the component densities, the scale for node detection.
  double incoherent_density(const Point2& x) const;
  /// Im(psi* grad psi) / k.
  Point2 current(const Point2& x) const;

 private:
  double k_;
  std::vector<PointSource> points_;
  std::vector<PlaneWave> planes_;
  double node_floor_;
  std::optional<double> delta_;
  double separation_ = 0;
};

/// current / density; throws NodeError where the density falls below
/// node_floor times the incoherent density.
Point2 velocity(const GuidingField& field, const Point2& x);

enum class SpotOrigin { upper_spot, lower_spot };

struct Trajectory {
  std::vector<double> times;
  std::vector<Point2> positions;
  SpotOrigin origin = SpotOrigin::upper_spot;
  bool node_trapped = false;
  bool reached_stop = false;

  /// Columns t, x, y, origin.
  void write_csv(std::ostream& os, bool header = true) const;
};

struct IntegrateOptions {
  double dt = 0.1;
  double t_end = 10;
  std::optional<double> stop_radius;  // stop once |x| >= stop_radius
  int max_halvings = 8;
};

/// Fixed-step RK4. A step that meets a node is split in halves recursively
/// down to dt / 2^max_halvings; beyond that the trajectory ends, flagged
/// node_trapped.
Trajectory integrate(const GuidingField& field, const Point2& start, const IntegrateOptions& opt);
Trajectory integrate(const GuidingField& field, const Point2& start, double dt, double t_end);

// --- intensity interferometry --------------------------------------------------

enum class Arrangement { baseline, moved_back_twice };

std::string to_string(Arrangement a);

/// Second telescope, looking along +y from the midpoint of the spots.
struct DetectorGeometry {
  double distance = 20;
  double aperture = 0.02;  // half-angle, rad
  Arrangement arrangement = Arrangement::baseline;

  double effective_distance() const { return arrangement == Arrangement::baseline ? distance : 2 * distance; }
  double effective_aperture() const { return arrangement == Arrangement::baseline ? aperture : aperture / 2; }
};

struct HbtOptions {
  double start_line = 5;  // y of the emission line the trajectories start from
  double dt = 0.1;
  unsigned workers = 1;
};

struct RateRecord {
  std::string model;  // "qm", "dbb" or "normal"
  std::string arrangement;
  double delta;
  double rate;
  double error;
};

struct HbtComparison {
  RateRecord qm, dbb, normal;
  double ratio;  // dbb / qm
  double ratio_error;
  double window_lo, window_hi;  // start-line interval sampled by the trajectories
  std::size_t hits;
  std::size_t trapped;
};

/// QM: flux of the two-spot field through the telescope; with the moved
/// telescope only the upper spot's own flux. dBB: trajectories started on the
/// emission line with flux-weighted density and a classical 50/50 origin tag;
/// the moved telescope accepts only upper-tagged photons. "normal" is the
/// unsymmetrized (incoherent) flux for the same telescope.
HbtComparison hbt_compare(const GuidingField& field, const DetectorGeometry& detector, std::size_t n,
                          std::uint64_t seed, const HbtOptions& opt = {});

struct CorrespondenceReport {
  std::vector<double> deltas;
  std::vector<HbtComparison> points;
  double mean_qm, mean_dbb, mean_dbb_error, normal;
  double deviation_qm;   // mean_qm / normal - 1
  double deviation_dbb;  // mean_dbb / normal - 1
  double deviation_dbb_error;
  bool full_period;
};

/// Midpoint-rule average of the rates over delta in [delta_lo, delta_hi] with
/// `steps` points (one point at delta_lo when the range is empty). `n`
/// trajectories are split evenly over the points.
CorrespondenceReport correspondence_average(const GuidingField& field, const DetectorGeometry& detector,
                                            double delta_lo, double delta_hi, std::size_t steps, std::size_t n,
                                            std::uint64_t seed, const HbtOptions& opt = {});

}  // namespace tsvsim
