#include "tsvsim/pilotwave.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "tsvsim/errors.hpp"
#include "tsvsim/parallel.hpp"
#include "tsvsim/random.hpp"

namespace tsvsim {

using std::numbers::pi;

// --- field -----------------------------------------------------------------------

GuidingField::GuidingField(double wavenumber, std::vector<PointSource> points, std::vector<PlaneWave> planes,
                           double node_floor)
    : k_(wavenumber), points_(std::move(points)), planes_(std::move(planes)), node_floor_(node_floor) {
  if (!(k_ > 0)) throw ContractViolation("guiding field: wavenumber must be positive");
  if (points_.empty() && planes_.empty()) throw ContractViolation("guiding field: no sources");
  for (auto& p : planes_) {
    const double n = p.direction.norm();
    if (!(n > 0)) throw ContractViolation("guiding field: plane wave without direction");
    p.direction /= n;
  }
}

GuidingField GuidingField::two_hot_spots(double separation, double wavelength, double delta) {
  if (!(separation > 0) || !(wavelength > 0)) throw ContractViolation("two_hot_spots: separation and wavelength must be positive");
  GuidingField f(2 * pi / wavelength,
                 {{Point2(separation / 2, 0), 1.0}, {Point2(-separation / 2, 0), std::polar(1.0, 2 * pi * delta)}});
  f.delta_ = delta;
  f.separation_ = separation;
  return f;
}

GuidingField GuidingField::with_delta(double delta) const {
  if (!delta_) throw ContractViolation("with_delta: field is not a two-hot-spot field");
  GuidingField f = *this;
  f.points_[1].strength = std::polar(1.0, 2 * pi * delta);
  f.delta_ = delta;
  return f;
}

GuidingField GuidingField::only_point(std::size_t index) const {
  if (index >= points_.size()) throw RangeError("only_point: no such source");
  return GuidingField(k_, {points_[index]}, {}, node_floor_);
}

std::complex<double> GuidingField::psi(const Point2& x) const {
  std::complex<double> sum = 0;
  for (const auto& s : points_) {
    const double r = (x - s.position).norm();
    sum += s.strength * std::polar(1 / std::sqrt(r), k_ * r);
  }
  for (const auto& w : planes_) sum += w.strength * std::polar(1.0, k_ * w.direction.dot(x));
  return sum;
}

Eigen::Vector2cd GuidingField::gradient(const Point2& x) const {
  Eigen::Vector2cd g = Eigen::Vector2cd::Zero();
  const std::complex<double> ik(0, k_);
  for (const auto& s : points_) {
    const Point2 d = x - s.position;
    const double r = d.norm();
    const std::complex<double> v = s.strength * std::polar(1 / std::sqrt(r), k_ * r);
    g += (v * (ik - 1 / (2 * r)) / r) * d.cast<std::complex<double>>();
  }
  for (const auto& w : planes_)
    g += (w.strength * std::polar(1.0, k_ * w.direction.dot(x)) * ik) * w.direction.cast<std::complex<double>>();
  return g;
}

double GuidingField::incoherent_density(const Point2& x) const {
  double sum = 0;
  for (const auto& s : points_) sum += std::norm(s.strength) / (x - s.position).norm();
  for (const auto& w : planes_) sum += std::norm(w.strength);
  return sum;
}

Point2 GuidingField::current(const Point2& x) const {
  const std::complex<double> p = psi(x);
  const Eigen::Vector2cd g = gradient(x);
  return Point2((std::conj(p) * g(0)).imag(), (std::conj(p) * g(1)).imag()) / k_;
}

Point2 velocity(const GuidingField& field, const Point2& x) {
  const std::complex<double> p = field.psi(x);
  const double rho = std::norm(p);
  if (!(rho >= field.node_floor() * field.incoherent_density(x)) || !std::isfinite(rho))
    throw NodeError("velocity: too close to a node of the guiding field");
  const Eigen::Vector2cd g = field.gradient(x);
  return Point2((std::conj(p) * g(0)).imag(), (std::conj(p) * g(1)).imag()) / (field.wavenumber() * rho);
}

// --- trajectories ------------------------------------------------------------------

void Trajectory::write_csv(std::ostream& os, bool header) const {
  if (header) os << "t,x,y,origin\n";
  const char* tag = origin == SpotOrigin::upper_spot ? "upper" : "lower";
  const auto old = os.precision(12);
  for (std::size_t i = 0; i < times.size(); ++i)
    os << times[i] << ',' << positions[i].x() << ',' << positions[i].y() << ',' << tag << '\n';
  os.precision(old);
}

namespace {

Point2 rk4(const GuidingField& f, const Point2& x, double h) {
  const Point2 k1 = velocity(f, x);
  const Point2 k2 = velocity(f, x + 0.5 * h * k1);
  const Point2 k3 = velocity(f, x + 0.5 * h * k2);
  const Point2 k4 = velocity(f, x + h * k3);
  return x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

bool advance(const GuidingField& f, Point2& x, double h, int halvings_left) {
  try {
    x = rk4(f, x, h);
    return true;
  } catch (const NodeError&) {
    if (halvings_left == 0) return false;
    Point2 y = x;
    if (!advance(f, y, h / 2, halvings_left - 1) || !advance(f, y, h / 2, halvings_left - 1)) return false;
    x = y;
    return true;
  }
}

}  // namespace

Trajectory integrate(const GuidingField& field, const Point2& start, const IntegrateOptions& opt) {
  if (!(opt.dt > 0) || !(opt.t_end >= 0)) throw RangeError("integrate: dt must be positive and t_end non-negative");
  velocity(field, start);  // the start must be off nodes
  Trajectory tr;
  tr.times.push_back(0);
  tr.positions.push_back(start);
  const auto steps = static_cast<std::size_t>(std::ceil(opt.t_end / opt.dt - 1e-9));
  Point2 x = start;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double t_prev = tr.times.back();
    const double t = std::min(opt.t_end, static_cast<double>(s) * opt.dt);
    if (!advance(field, x, t - t_prev, opt.max_halvings)) {
      tr.node_trapped = true;
      break;
    }
    tr.times.push_back(t);
    tr.positions.push_back(x);
    if (opt.stop_radius && x.norm() >= *opt.stop_radius) {
      tr.reached_stop = true;
      break;
    }
  }
  return tr;
}

Trajectory integrate(const GuidingField& field, const Point2& start, double dt, double t_end) {
  return integrate(field, start, IntegrateOptions{dt, t_end, std::nullopt, 8});
}

// --- intensity interferometry --------------------------------------------------

std::string to_string(Arrangement a) { return a == Arrangement::baseline ? "baseline" : "moved_back_twice"; }

namespace {

// Flux through the arc |x| = radius, |angle from +y| <= half_angle (Simpson).
double arc_flux(const GuidingField& f, double radius, double half_angle) {
  constexpr int intervals = 400;
  const double h = 2 * half_angle / intervals;
  double sum = 0;
  for (int i = 0; i <= intervals; ++i) {
    const double th = -half_angle + i * h;
    const Point2 n(std::sin(th), std::cos(th));
    const double w = (i == 0 || i == intervals) ? 1 : (i % 2 ? 4 : 2);
    sum += w * f.current(radius * n).dot(n);
  }
  return sum * h / 3 * radius;
}

// Landing angle on the detector circle, or nullopt if the trajectory did not get there.
std::optional<double> landing_angle(const GuidingField& f, double x0, double y0, double radius, double dt) {
  Trajectory tr;
  try {
    tr = integrate(f, Point2(x0, y0), IntegrateOptions{dt, 4 * radius, radius, 8});
  } catch (const NodeError&) {
    return std::nullopt;
  }
  if (!tr.reached_stop) return std::nullopt;
  const Point2& b = tr.positions.back();
  const Point2& a = tr.positions[tr.positions.size() - 2];
  const double s = (radius - a.norm()) / (b.norm() - a.norm());
  const Point2 p = a + s * (b - a);
  return std::atan2(p.x(), p.y());
}

// Start x whose trajectory lands at `target` (landing angle grows with x0).
double solve_start(const GuidingField& f, double target, double lo, double hi, double y0, double radius, double dt) {
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto a = landing_angle(f, mid, y0, radius, dt);
    // a start on a node: nudge towards the upper end
    if (!a) a = landing_angle(f, mid + 1e-3 * (hi - lo), y0, radius, dt);
    if (!a) throw ContractViolation("hbt_compare: trajectory failed to reach the detector during window search");
    (*a < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct StartSampler {
  std::vector<double> x, cdf;
  double flux;

  double operator()(double u) const {
    const double target = u * flux;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    const std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), 1, cdf.size() - 1);
    const double span = cdf[i] - cdf[i - 1];
    const double s = span > 0 ? (target - cdf[i - 1]) / span : 0.5;
    return x[i - 1] + s * (x[i] - x[i - 1]);
  }
};

StartSampler flux_sampler(const GuidingField& f, double lo, double hi, double y0) {
  constexpr std::size_t grid = 4097;
  StartSampler s;
  s.x.resize(grid);
  s.cdf.resize(grid);
  double prev = 0;
  for (std::size_t i = 0; i < grid; ++i) {
    s.x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid - 1);
    const double jy = f.current(Point2(s.x[i], y0)).y();
    if (jy < 0) throw ContractViolation("hbt_compare: backward flux on the emission line");
    s.cdf[i] = i == 0 ? 0 : s.cdf[i - 1] + 0.5 * (prev + jy) * (s.x[i] - s.x[i - 1]);
    prev = jy;
  }
  s.flux = s.cdf.back();
  return s;
}

struct HitCount {
  std::size_t hits = 0, trapped = 0;
};

}  // namespace

HbtComparison hbt_compare(const GuidingField& field, const DetectorGeometry& detector, std::size_t n,
                          std::uint64_t seed, const HbtOptions& opt) {
  if (!field.delta() || field.points().size() != 2 || !field.planes().empty())
    throw ContractViolation("hbt_compare: needs a two-hot-spot field");
  if (n == 0) throw RangeError("hbt_compare: n must be positive");
  if (!(detector.distance > 2 * opt.start_line) || !(detector.aperture > 0) || !(detector.aperture < pi / 4))
    throw ContractViolation("hbt_compare: detector must be far beyond the emission line with a small aperture");
  const double radius = detector.effective_distance();
  const double half = detector.effective_aperture();
  const bool moved = detector.arrangement == Arrangement::moved_back_twice;
  const double y0 = opt.start_line;
  const double delta = *field.delta();
  const std::string arr = to_string(detector.arrangement);

  // Bracket and bisect the start interval feeding the telescope.
  double b = std::max(0.05, 2 * y0 * std::tan(half));
  for (int it = 0;; ++it) {
    const auto lo = landing_angle(field, -b, y0, radius, opt.dt);
    const auto hi = landing_angle(field, b, y0, radius, opt.dt);
    if (lo && hi && *lo < -half && *hi > half) break;
    if (it == 20) throw ContractViolation("hbt_compare: could not bracket the telescope window");
    b *= 2;
  }
  const double xa = solve_start(field, -half, -b, b, y0, radius, opt.dt);
  const double xb = solve_start(field, half, -b, b, y0, radius, opt.dt);
  const double margin = 0.25 * (xb - xa) + 1e-6;
  const double wlo = xa - margin, whi = xb + margin;
  const auto edge_lo = landing_angle(field, wlo, y0, radius, opt.dt);
  const auto edge_hi = landing_angle(field, whi, y0, radius, opt.dt);
  if (!edge_lo || !edge_hi || !(*edge_lo < -half) || !(*edge_hi > half))
    throw ContractViolation("hbt_compare: window edges reach the telescope");
  const StartSampler sampler = flux_sampler(field, wlo, whi, y0);

  constexpr std::size_t chunk = 1024;
  const auto parts = map_chunks<HitCount>(chunk_count(n, chunk), opt.workers, [&](std::size_t c) {
    HitCount hc;
    for (std::size_t k = c * chunk; k < std::min(n, (c + 1) * chunk); ++k) {
      RandomStream rng(seed, "hbt_start", k);
      const double x0 = sampler(rng.uniform());
      const bool upper = rng.coin();
      Trajectory tr;
      try {
        tr = integrate(field, Point2(x0, y0), IntegrateOptions{opt.dt, 4 * radius, radius, 8});
      } catch (const NodeError&) {
        tr.node_trapped = true;
      }
      if (tr.node_trapped) {
        ++hc.trapped;
        continue;
      }
      if (!tr.reached_stop) continue;
      const Point2& pb = tr.positions.back();
      const Point2& pa = tr.positions[tr.positions.size() - 2];
      const double s = (radius - pa.norm()) / (pb.norm() - pa.norm());
      const Point2 p = pa + s * (pb - pa);
      if (std::abs(std::atan2(p.x(), p.y())) <= half && (!moved || upper)) ++hc.hits;
    }
    return hc;
  });
  HitCount total;
  for (const auto& p : parts) {
    total.hits += p.hits;
    total.trapped += p.trapped;
  }

  const double frac = static_cast<double>(total.hits) / static_cast<double>(n);
  const double dbb = sampler.flux * frac;
  const double dbb_err = sampler.flux * std::sqrt(frac * (1 - frac) / static_cast<double>(n));
  const double qm = moved ? arc_flux(field.only_point(0), radius, half) : arc_flux(field, radius, half);
  const double normal = arc_flux(field.only_point(0), radius, half) + arc_flux(field.only_point(1), radius, half);

  HbtComparison out;
  out.qm = {"qm", arr, delta, qm, 0};
  out.dbb = {"dbb", arr, delta, dbb, dbb_err};
  out.normal = {"normal", arr, delta, normal, 0};
  out.ratio = dbb / qm;
  out.ratio_error = dbb_err / qm;
  out.window_lo = wlo;
  out.window_hi = whi;
  out.hits = total.hits;
  out.trapped = total.trapped;
  return out;
}

CorrespondenceReport correspondence_average(const GuidingField& field, const DetectorGeometry& detector,
                                            double delta_lo, double delta_hi, std::size_t steps, std::size_t n,
                                            std::uint64_t seed, const HbtOptions& opt) {
  if (delta_hi < delta_lo) throw RangeError("correspondence_average: empty delta range");
  if (steps == 0) throw RangeError("correspondence_average: need at least one step");
  const bool point = delta_hi == delta_lo;
  const std::size_t m = point ? 1 : steps;
  const std::size_t per_point = std::max<std::size_t>(1, n / m);

  CorrespondenceReport r{};
  r.full_period = delta_hi - delta_lo >= 1 - 1e-12;
  double var = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = point ? delta_lo : delta_lo + (static_cast<double>(i) + 0.5) * (delta_hi - delta_lo) / static_cast<double>(m);
    r.deltas.push_back(d);
    r.points.push_back(hbt_compare(field.with_delta(d), detector, per_point, splitmix64(seed + i), opt));
    const auto& p = r.points.back();
    r.mean_qm += p.qm.rate / static_cast<double>(m);
    r.mean_dbb += p.dbb.rate / static_cast<double>(m);
    var += p.dbb.error * p.dbb.error;
  }
  // The unsymmetrized rate does not depend on delta.
  r.normal = r.points.front().normal.rate;
  r.mean_dbb_error = std::sqrt(var) / static_cast<double>(m);
  r.deviation_qm = r.mean_qm / r.normal - 1;
  r.deviation_dbb = r.mean_dbb / r.normal - 1;
  r.deviation_dbb_error = r.mean_dbb_error / r.normal;
  return r;
}

}  // namespace tsvsim
