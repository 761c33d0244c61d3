#include "tsvsim/boseeinstein.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "tsvsim/errors.hpp"
#include "tsvsim/parallel.hpp"

namespace tsvsim {

// --- kinematics ----------------------------------------------------------------

FourMomentum FourMomentum::on_shell(const Eigen::Vector3d& p, double mass) {
  return {std::sqrt(mass * mass + p.squaredNorm()), p.x(), p.y(), p.z()};
}

FourMomentum boost(const FourMomentum& p, const Eigen::Vector3d& beta) {
  const double b2 = beta.squaredNorm();
  if (!(b2 < 1)) throw ContractViolation("boost: |beta| must be below 1");
  if (b2 == 0) return p;
  const double gamma = 1 / std::sqrt(1 - b2);
  const Eigen::Vector3d v = p.p();
  const double bp = beta.dot(v);
  const Eigen::Vector3d out = v + ((gamma - 1) * bp / b2 - gamma * p.e) * beta;
  return {gamma * (p.e - bp), out.x(), out.y(), out.z()};
}

double q_inv(const FourMomentum& p1, const FourMomentum& p2) {
  const double de = p1.e - p2.e;
  const double r = (p1.p() - p2.p()).squaredNorm() - de * de;
  if (r < -1e-12) throw ContractViolation("q_inv: negative radicand, inputs are off shell");
  return r > 0 ? std::sqrt(r) : 0.0;
}

Eigen::Vector3d relative_momentum_prf(const FourMomentum& p1, const FourMomentum& p2) {
  const double e = p1.e + p2.e;
  const Eigen::Vector3d beta = (p1.p() + p2.p()) / e;
  return boost(p1, beta).p() - boost(p2, beta).p();
}

double emission_probability(std::complex<double> a12, std::complex<double> a21) { return 0.5 * std::norm(a12 + a21); }

double emission_probability(std::complex<double> a12, std::complex<double> a21, std::complex<double> witness_overlap) {
  return 0.5 * (std::norm(a12) + std::norm(a21) + 2 * (std::conj(a12) * a21 * witness_overlap).real());
}

// --- sources -------------------------------------------------------------------

SourceModel SourceModel::gaussian(double radius, double momentum_scale) {
  SourceModel s{GaussianSource{radius}, momentum_scale};
  s.validate();
  return s;
}

SourceModel SourceModel::two_halves(double separation, double spot, double momentum_scale) {
  SourceModel s{TwoHalvesSource{separation, spot}, momentum_scale};
  s.validate();
  return s;
}

void SourceModel::validate() const {
  if (!(momentum_scale > 0)) throw ContractViolation("source: momentum scale must be positive");
  if (const auto* g = std::get_if<GaussianSource>(&geometry)) {
    if (!(g->radius > 0)) throw ContractViolation("source: radius must be positive");
  } else {
    const auto& t = std::get<TwoHalvesSource>(geometry);
    if (!(t.separation > 0) || !(t.spot > 0))
      throw ContractViolation("source: separation and spot size must be positive");
  }
}

Particle sample_particle(const SourceModel& src, RandomStream& rng) {
  Particle out;
  if (const auto* g = std::get_if<GaussianSource>(&src.geometry)) {
    out.x = {rng.normal(0, g->radius), rng.normal(0, g->radius), rng.normal(0, g->radius)};
    out.origin = out.x.y() >= 0 ? Origin::upper : Origin::lower;
  } else {
    const auto& t = std::get<TwoHalvesSource>(src.geometry);
    out.origin = rng.coin() ? Origin::upper : Origin::lower;
    const double cy = out.origin == Origin::upper ? t.separation / 2 : -t.separation / 2;
    out.x = {rng.normal(0, t.spot), rng.normal(cy, t.spot), rng.normal(0, t.spot)};
  }
  const double s = src.momentum_scale;
  out.p = FourMomentum::on_shell({rng.normal(0, s), rng.normal(0, s), rng.normal(0, s)});
  return out;
}

std::vector<PairEvent> sample_pairs(const SourceModel& src, std::size_t n, std::uint64_t seed) {
  src.validate();
  if (n == 0) throw RangeError("sample_pairs: n must be at least 1");
  std::vector<PairEvent> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    RandomStream rng(seed, "be_pair", k);
    const Particle a = sample_particle(src, rng);
    const Particle b = sample_particle(src, rng);
    out.push_back({a.p, b.p, a.x, b.x, {a.origin, b.origin}});
  }
  return out;
}

std::array<std::complex<double>, 2> pair_amplitudes(const FourMomentum& p1, const FourMomentum& p2,
                                                    const Eigen::Vector3d& x1, const Eigen::Vector3d& x2) {
  const double e = p1.e + p2.e;
  const Eigen::Vector3d beta = (p1.p() + p2.p()) / e;
  const Eigen::Vector3d k1 = boost(p1, beta).p() / kHbarC;
  const Eigen::Vector3d k2 = boost(p2, beta).p() / kHbarC;
  return {std::polar(1.0, k1.dot(x1) + k2.dot(x2)), std::polar(1.0, k1.dot(x2) + k2.dot(x1))};
}

// --- histograms ----------------------------------------------------------------

namespace {

using Event = std::vector<Particle>;

struct Accumulator {
  std::vector<double> same, same_sq, mixed;
  double same_pairs = 0, mixed_pairs = 0;

  explicit Accumulator(std::size_t bins = 0) : same(bins, 0), same_sq(bins, 0), mixed(bins, 0) {}

  void merge(const Accumulator& o) {
    for (std::size_t b = 0; b < same.size(); ++b) {
      same[b] += o.same[b];
      same_sq[b] += o.same_sq[b];
      mixed[b] += o.mixed[b];
    }
    same_pairs += o.same_pairs;
    mixed_pairs += o.mixed_pairs;
  }
};

constexpr std::size_t kEventChunk = 512;

std::vector<Event> generate_events(const SourceModel& src, std::size_t n_events, std::uint64_t seed,
                                   const CorrelationConfig& cfg) {
  const auto parts = map_chunks<std::vector<Event>>(chunk_count(n_events, kEventChunk), cfg.workers, [&](std::size_t c) {
    std::vector<Event> v;
    for (std::size_t e = c * kEventChunk; e < std::min(n_events, (c + 1) * kEventChunk); ++e) {
      RandomStream rng(seed, "be_event", e);
      Event ev;
      ev.reserve(cfg.multiplicity);
      for (std::size_t k = 0; k < cfg.multiplicity; ++k) ev.push_back(sample_particle(src, rng));
      v.push_back(std::move(ev));
    }
    return v;
  });
  std::vector<Event> events;
  events.reserve(n_events);
  for (const auto& p : parts) events.insert(events.end(), p.begin(), p.end());
  return events;
}

// Pair selection plus same-event weight; returns false for pairs outside the sample.
using SameWeight = bool (*)(const Particle&, const Particle&, double& weight);
using MixedSelect = bool (*)(const Particle&, const Particle&);

bool all_pairs(const Particle&, const Particle&) { return true; }
bool cross_origin(const Particle& a, const Particle& b) { return a.origin != b.origin; }

bool coherent_weight(const Particle& a, const Particle& b, double& w) {
  const auto amp = pair_amplitudes(a.p, b.p, a.x, b.x);
  w = emission_probability(amp[0], amp[1]);
  return true;
}

bool cross_coherent_weight(const Particle& a, const Particle& b, double& w) {
  return cross_origin(a, b) && coherent_weight(a, b, w);
}

// The absorber leaves orthogonal records for "particle 1 from below" and
// "particle 2 from below", so the two assignments no longer interfere.
bool absorbed_weight(const Particle& a, const Particle& b, double& w) {
  if (!cross_origin(a, b)) return false;
  const auto amp = pair_amplitudes(a.p, b.p, a.x, b.x);
  w = emission_probability(amp[0], amp[1], 0.0);
  return true;
}

CorrelationHistogram finish(const Accumulator& acc, const CorrelationConfig& cfg) {
  CorrelationHistogram h;
  h.same_pairs = acc.same_pairs;
  h.mixed_pairs = acc.mixed_pairs;
  const double width = cfg.q_max / static_cast<double>(cfg.bins);
  for (std::size_t b = 0; b < cfg.bins; ++b) {
    CorrelationBin bin{width * static_cast<double>(b), width * static_cast<double>(b + 1), acc.same[b],
                       acc.same_sq[b], acc.mixed[b], 0, 0, acc.mixed[b] > 0 && acc.same_pairs > 0};
    if (bin.valid) {
      bin.c = (bin.same / acc.same_pairs) / (bin.mixed / acc.mixed_pairs);
      const double rel = bin.same > 0 ? bin.same_sq / (bin.same * bin.same) : 0.0;
      bin.c_err = bin.same > 0 ? bin.c * std::sqrt(rel + 1 / bin.mixed)
                               : (1 / acc.same_pairs) / (bin.mixed / acc.mixed_pairs);
    }
    h.bins.push_back(bin);
  }
  return h;
}

void check_config(std::size_t n_events, const CorrelationConfig& cfg) {
  if (n_events < 100) throw RangeError("correlation: at least 100 events are required");
  if (cfg.bins == 0 || !(cfg.q_max > 0)) throw RangeError("correlation: empty binning");
  if (cfg.multiplicity < 2) throw RangeError("correlation: events need at least two particles");
  if (cfg.mix_partners == 0 || cfg.mix_partners >= n_events)
    throw RangeError("correlation: mixing partners must be in [1, n_events)");
}

CorrelationHistogram fill(const std::vector<Event>& events, const CorrelationConfig& cfg, SameWeight same_weight,
                          MixedSelect mixed_select) {
  const std::size_t n = events.size();
  const double inv_width = static_cast<double>(cfg.bins) / cfg.q_max;
  auto bin_of = [&](double q) -> std::ptrdiff_t {
    const double b = q * inv_width;
    return b < static_cast<double>(cfg.bins) ? static_cast<std::ptrdiff_t>(b) : -1;
  };
  const auto parts = map_chunks<Accumulator>(chunk_count(n, kEventChunk), cfg.workers, [&](std::size_t c) {
    Accumulator acc(cfg.bins);
    for (std::size_t e = c * kEventChunk; e < std::min(n, (c + 1) * kEventChunk); ++e) {
      const Event& ev = events[e];
      for (std::size_t i = 0; i < ev.size(); ++i)
        for (std::size_t j = i + 1; j < ev.size(); ++j) {
          double w = 0;
          if (!same_weight(ev[i], ev[j], w)) continue;
          acc.same_pairs += 1;
          if (const auto b = bin_of(q_inv(ev[i].p, ev[j].p)); b >= 0) {
            acc.same[static_cast<std::size_t>(b)] += w;
            acc.same_sq[static_cast<std::size_t>(b)] += w * w;
          }
        }
      for (std::size_t k = 1; k <= cfg.mix_partners; ++k) {
        const Event& partner = events[(e + k) % n];
        for (std::size_t i = 0; i < ev.size(); ++i)
          for (std::size_t j = i + 1; j < partner.size(); ++j) {
            if (!mixed_select(ev[i], partner[j])) continue;
            acc.mixed_pairs += 1;
            if (const auto b = bin_of(q_inv(ev[i].p, partner[j].p)); b >= 0) acc.mixed[static_cast<std::size_t>(b)] += 1;
          }
      }
    }
    return acc;
  });
  Accumulator total(cfg.bins);
  for (const auto& p : parts) total.merge(p);
  return finish(total, cfg);
}

}  // namespace

void CorrelationHistogram::write_csv(std::ostream& os) const {
  os << "q_lo,q_hi,same,mixed,C,C_err\n";
  const auto old = os.precision(12);
  for (const auto& b : bins) {
    os << b.q_lo << ',' << b.q_hi << ',' << b.same << ',' << b.mixed << ',';
    if (b.valid) os << b.c << ',' << b.c_err;
    else os << ',';
    os << '\n';
  }
  os.precision(old);
}

CorrelationHistogram correlation(const SourceModel& src, std::size_t n_events, std::uint64_t seed,
                                 const CorrelationConfig& cfg) {
  src.validate();
  check_config(n_events, cfg);
  return fill(generate_events(src, n_events, seed, cfg), cfg, coherent_weight, all_pairs);
}

CorrelationHistogram absorber_histogram(const SourceModel& src, AbsorberMode mode, std::size_t n_events,
                                        std::uint64_t seed, const CorrelationConfig& cfg) {
  src.validate();
  if (!src.is_two_halves()) throw ContractViolation("absorber: the source must be two_halves");
  check_config(n_events, cfg);
  auto events = generate_events(src, n_events, seed, cfg);
  switch (mode) {
    case AbsorberMode::off:
      return fill(events, cfg, cross_coherent_weight, cross_origin);
    case AbsorberMode::on:
      return fill(events, cfg, absorbed_weight, cross_origin);
    case AbsorberMode::selection_from_birth:
      break;
  }
  // Tag each particle by origin when it is emitted and pair only upper with
  // lower; distinguishable particles add probabilities, not amplitudes.
  const double inv_width = static_cast<double>(cfg.bins) / cfg.q_max;
  const auto parts = map_chunks<Accumulator>(chunk_count(events.size(), kEventChunk), cfg.workers, [&](std::size_t c) {
    Accumulator acc(cfg.bins);
    for (std::size_t e = c * kEventChunk; e < std::min(events.size(), (c + 1) * kEventChunk); ++e) {
      const Event& ev = events[e];
      for (std::size_t i = 0; i < ev.size(); ++i)
        for (std::size_t j = i + 1; j < ev.size(); ++j) {
          if (ev[i].origin == ev[j].origin) continue;
          const auto amp = pair_amplitudes(ev[i].p, ev[j].p, ev[i].x, ev[j].x);
          const double w = 0.5 * (std::norm(amp[0]) + std::norm(amp[1]));
          acc.same_pairs += 1;
          const double b = q_inv(ev[i].p, ev[j].p) * inv_width;
          if (b < static_cast<double>(cfg.bins)) {
            acc.same[static_cast<std::size_t>(b)] += w;
            acc.same_sq[static_cast<std::size_t>(b)] += w * w;
          }
        }
      for (std::size_t k = 1; k <= cfg.mix_partners; ++k) {
        const Event& partner = events[(e + k) % events.size()];
        for (std::size_t i = 0; i < ev.size(); ++i)
          for (std::size_t j = i + 1; j < partner.size(); ++j) {
            if (ev[i].origin == partner[j].origin) continue;
            acc.mixed_pairs += 1;
            const double b = q_inv(ev[i].p, partner[j].p) * inv_width;
            if (b < static_cast<double>(cfg.bins)) acc.mixed[static_cast<std::size_t>(b)] += 1;
          }
      }
    }
    return acc;
  });
  Accumulator total(cfg.bins);
  for (const auto& p : parts) total.merge(p);
  return finish(total, cfg);
}

AbsorberReport absorber_gedanken(const SourceModel& src, std::size_t n_events, std::uint64_t seed,
                                 const CorrelationConfig& cfg, double intercept_q_max) {
  AbsorberReport r{absorber_histogram(src, AbsorberMode::off, n_events, seed, cfg),
                   absorber_histogram(src, AbsorberMode::on, n_events, seed, cfg),
                   absorber_histogram(src, AbsorberMode::selection_from_birth, n_events, seed, cfg),
                   0, 0, 0, 0};
  r.c0_off = quadratic_intercept(r.off, intercept_q_max);
  r.c0_on = quadratic_intercept(r.on, intercept_q_max);
  r.c0_from_birth = quadratic_intercept(r.from_birth, intercept_q_max);
  for (std::size_t b = 0; b < r.on.bins.size(); ++b)
    if (r.on.bins[b].valid && r.from_birth.bins[b].valid)
      r.max_on_birth_difference = std::max(r.max_on_birth_difference, std::abs(r.on.bins[b].c - r.from_birth.bins[b].c));
  return r;
}

// --- fits ----------------------------------------------------------------------

namespace {

struct Point {
  double q, c, sigma;
};

std::vector<Point> fit_points(const CorrelationHistogram& h, double q_fit_max) {
  std::vector<Point> pts;
  for (const auto& b : h.bins)
    if (b.valid && b.c_err > 0 && b.q_hi <= q_fit_max + 1e-12) pts.push_back({0.5 * (b.q_lo + b.q_hi), b.c, b.c_err});
  return pts;
}

double gaussian_chi2(const std::vector<Point>& pts, double lambda, double radius) {
  double chi2 = 0;
  for (const auto& p : pts) {
    const double x = p.q * radius / kHbarC;
    const double r = (p.c - 1 - lambda * std::exp(-x * x)) / p.sigma;
    chi2 += r * r;
  }
  return chi2;
}

// Best lambda for fixed radius (linear weighted least squares).
double best_lambda(const std::vector<Point>& pts, double radius) {
  double num = 0, den = 0;
  for (const auto& p : pts) {
    const double x = p.q * radius / kHbarC;
    const double g = std::exp(-x * x);
    num += g * (p.c - 1) / (p.sigma * p.sigma);
    den += g * g / (p.sigma * p.sigma);
  }
  return den > 0 ? num / den : 0.0;
}

}  // namespace

GaussianFit fit_gaussian(const CorrelationHistogram& h, double q_fit_max) {
  const auto pts = fit_points(h, q_fit_max);
  if (pts.size() < 3) throw RangeError("fit_gaussian: fewer than three usable bins");

  // Coarse log-grid in R with lambda profiled out, then Levenberg-Marquardt.
  double radius = 0.1, lambda = 0, best = std::numeric_limits<double>::infinity();
  for (double r = 0.05; r < 50; r *= 1.05) {
    const double l = best_lambda(pts, r);
    const double chi2 = gaussian_chi2(pts, l, r);
    if (chi2 < best) best = chi2, radius = r, lambda = l;
  }
  double mu = 1e-3;
  for (int it = 0; it < 200; ++it) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (const auto& p : pts) {
      const double x = p.q * radius / kHbarC;
      const double g = std::exp(-x * x);
      const Eigen::Vector2d j(g / p.sigma, lambda * g * (-2 * x * p.q / kHbarC) / p.sigma);
      const double r = (p.c - 1 - lambda * g) / p.sigma;
      jtj += j * j.transpose();
      jtr += j * r;
    }
    Eigen::Matrix2d a = jtj;
    a.diagonal() *= 1 + mu;
    const Eigen::Vector2d step = a.ldlt().solve(jtr);
    const double chi2 = gaussian_chi2(pts, lambda + step(0), radius + step(1));
    if (chi2 < best && radius + step(1) > 0) {
      lambda += step(0);
      radius += step(1);
      const bool done = best - chi2 < 1e-12 * std::max(1.0, best);
      best = chi2;
      mu = std::max(mu / 10, 1e-12);
      if (done) break;
    } else {
      mu *= 10;
      if (mu > 1e12) break;
    }
  }
  return {lambda, std::abs(radius), 1 + lambda, best, pts.size() - 2};
}

double quadratic_intercept(const CorrelationHistogram& h, double q_fit_max) {
  const auto pts = fit_points(h, q_fit_max);
  if (pts.size() < 2) throw RangeError("quadratic_intercept: fewer than two usable bins");
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector2d row(1, p.q * p.q);
    const double w = 1 / (p.sigma * p.sigma);
    a += w * row * row.transpose();
    rhs += w * row * p.c;
  }
  return a.ldlt().solve(rhs)(0);
}

}  // namespace tsvsim
