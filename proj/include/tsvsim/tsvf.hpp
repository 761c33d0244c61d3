#pragma once

// Two-state-vector measurement calculus.
//
// Conventions: a BoundaryPair evaluates
//
//   P(M') = Tr(rho_i F M' rho_f M' B) / Tr(rho_i F rho_f B)
//
// literally. For a Schroedinger propagator V (|psi(t_f)> = V |psi(t_i)>) the
// bra-side operator is F = V^dagger and B = V, which is what from_propagator()
// sets up; the ratio then reads |<f|M' V|i>|^2 / |<f|V|i>|^2.
//
// The effective final density matrix is stored with unit trace plus a separate
// log2 scale, so chains of thousands of updates do not underflow.

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tsvsim/hilbert.hpp"
#include "tsvsim/parallel.hpp"
#include "tsvsim/random.hpp"

namespace tsvsim {

// --- Haar sampling -----------------------------------------------------------

/// Haar-random unitary: QR of a complex Ginibre matrix with the diagonal of R
/// made real positive.
template <typename Real = double>
Operator<Real> haar_unitary(const BasisLabel& basis, RandomStream& rng) {
  const auto n = static_cast<Eigen::Index>(basis.dimension());
  MatrixX<Real> g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = Complex<Real>(rng.complex_normal());
  Eigen::HouseholderQR<MatrixX<Real>> qr(g);
  MatrixX<Real> q = qr.householderQ();
  const MatrixX<Real> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Complex<Real> d = r(j, j);
    if (std::abs(d) > Real(0)) q.col(j) *= d / std::abs(d);
  }
  return Operator<Real>::unitary(basis, std::move(q), Real(1e-9));
}

/// Haar-random pure state (normalized complex Gaussian vector; distributed as
/// any column of a Haar unitary).
template <typename Real = double>
StateVector<Real> haar_state(const BasisLabel& basis, RandomStream& rng) {
  const auto n = static_cast<Eigen::Index>(basis.dimension());
  VectorX<Real> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex<Real>(rng.complex_normal());
  return StateVector<Real>(basis, v / v.norm());
}

// --- measurement families ----------------------------------------------------

template <typename Real = double>
class MeasurementContext {
 public:
  MeasurementContext(std::vector<Operator<Real>> projectors, std::string insertion_label = {},
                     const Tolerances& tol = kDefaultTolerances)
      : projectors_(std::move(projectors)), label_(std::move(insertion_label)) {
    if (projectors_.empty()) throw ContractViolation("measurement: empty projector family");
    const BasisLabel& basis = projectors_.front().basis();
    const auto n = static_cast<Eigen::Index>(basis.dimension());
    MatrixX<Real> sum = MatrixX<Real>::Zero(n, n);
    for (std::size_t k = 0; k < projectors_.size(); ++k) {
      if (!(projectors_[k].basis() == basis)) throw BasisError("measurement: projectors live on different bases");
      if (!projectors_[k].is_projector()) throw ContractViolation("measurement: family member is not a projector");
      sum += projectors_[k].matrix();
      for (std::size_t j = 0; j < k; ++j)
        if (detail::max_abs<Real>(projectors_[k].matrix() * projectors_[j].matrix()) > Real(tol.completeness))
          throw ContractViolation("measurement: projectors are not mutually orthogonal");
    }
    if (detail::max_abs<Real>(sum - MatrixX<Real>::Identity(n, n)) > Real(tol.completeness))
      throw ContractViolation("measurement: projectors do not sum to the identity");
  }

  /// Rank-1 projectors onto the basis states of one register.
  static MeasurementContext register_basis(const BasisLabel& basis, const std::string& reg,
                                           std::string label = {}) {
    const std::size_t d = basis.register_dim(reg);
    std::vector<Operator<Real>> family;
    for (std::size_t k = 0; k < d; ++k) {
      MatrixX<Real> local = MatrixX<Real>::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      local(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = Complex<Real>(1);
      family.push_back(Operator<Real>::projector(basis, embed_matrix<Real>(basis, {reg}, local)));
    }
    return MeasurementContext(std::move(family), std::move(label));
  }

  /// {P, I - P}.
  static MeasurementContext binary(const Operator<Real>& p, std::string label = {}) {
    const auto n = static_cast<Eigen::Index>(p.dimension());
    auto complement = Operator<Real>::projector(p.basis(), MatrixX<Real>::Identity(n, n) - p.matrix());
    return MeasurementContext({p, std::move(complement)}, std::move(label));
  }

  const std::vector<Operator<Real>>& projectors() const { return projectors_; }
  const Operator<Real>& operator[](std::size_t k) const { return projectors_[k]; }
  std::size_t size() const { return projectors_.size(); }
  const BasisLabel& basis() const { return projectors_.front().basis(); }
  const std::string& insertion_label() const { return label_; }

 private:
  std::vector<Operator<Real>> projectors_;
  std::string label_;
};

/// Moves each projector of the family from the intermediate time to the final
/// time: M'_k = U M_k U^dagger, so that U M_k = M'_k U.
template <typename Real>
std::vector<Operator<Real>> postpone(const MeasurementContext<Real>& m, const Operator<Real>& u_after,
                                     const Tolerances& tol = kDefaultTolerances) {
  detail::require_same_basis(m.basis(), u_after.basis(), "postpone");
  if (!u_after.is_unitary()) throw ContractViolation("postpone: evolution is not marked unitary");
  std::vector<Operator<Real>> out;
  out.reserve(m.size());
  for (const auto& p : m.projectors())
    out.push_back(Operator<Real>::projector(p.basis(), u_after.matrix() * p.matrix() * u_after.matrix().adjoint(),
                                            Real(tol.postponed)));
  return out;
}

// --- boundary density matrices -----------------------------------------------

template <typename Real = double>
class BoundaryPair {
 public:
  BoundaryPair(DensityMatrix<Real> initial, const DensityMatrix<Real>& final, Operator<Real> forward,
               Operator<Real> backward, const Tolerances& tol = kDefaultTolerances)
      : initial_(std::move(initial)),
        final_(final),
        forward_(std::move(forward)),
        backward_(std::move(backward)),
        floor_(Real(tol.boundary_floor)) {
    for (const BasisLabel* b : {&final_.basis(), &forward_.basis(), &backward_.basis()})
      detail::require_same_basis(initial_.basis(), *b, "boundary pair");
    const Real t = final_.trace();
    if (!(t > floor_)) throw IncompatibleBoundaryError("boundary pair: final density matrix has vanishing trace");
    final_ = DensityMatrix<Real>(final_.basis(), final_.matrix() / t, false, tol);
    log2_scale_ = std::log2(t);
  }

  /// Boundary pair for a ket propagator V: F = V^dagger, B = V.
  static BoundaryPair from_propagator(DensityMatrix<Real> initial, const DensityMatrix<Real>& final,
                                      const Operator<Real>& propagator, const Tolerances& tol = kDefaultTolerances) {
    return BoundaryPair(std::move(initial), final, propagator.adjoint(), propagator, tol);
  }

  const DensityMatrix<Real>& initial() const { return initial_; }
  const Operator<Real>& forward() const { return forward_; }
  const Operator<Real>& backward() const { return backward_; }
  const BasisLabel& basis() const { return initial_.basis(); }

  /// Unit-trace shape of the effective final density matrix.
  const DensityMatrix<Real>& final_shape() const { return final_; }
  Real final_log2_scale() const { return log2_scale_; }
  Real final_trace_log2() const { return log2_scale_ + std::log2(final_.trace()); }
  Real final_trace() const { return std::exp2(final_trace_log2()); }

  /// The effective final density matrix itself (may underflow for long chains).
  MatrixX<Real> final_matrix() const { return final_.matrix() * std::exp2(log2_scale_); }

  /// Tr(rho_i F rho_f B) evaluated with the unit-trace final shape.
  Complex<Real> shape_denominator() const {
    return (initial_.matrix() * forward_.matrix() * final_.matrix() * backward_.matrix()).trace();
  }

  bool incompatible() const { return !(std::abs(shape_denominator()) > floor_); }
  Real floor() const { return floor_; }

  BoundaryPair with_final(DensityMatrix<Real> shape, Real log2_scale) const {
    BoundaryPair out = *this;
    out.final_ = std::move(shape);
    out.log2_scale_ = log2_scale;
    return out;
  }

 private:
  DensityMatrix<Real> initial_;
  DensityMatrix<Real> final_;
  Operator<Real> forward_;
  Operator<Real> backward_;
  Real floor_;
  Real log2_scale_ = 0;
};

namespace detail {

template <typename Real>
Complex<Real> boundary_numerator(const BoundaryPair<Real>& b, const Operator<Real>& m) {
  return (b.initial().matrix() * b.forward().matrix() * m.matrix() * b.final_shape().matrix() * m.matrix() *
          b.backward().matrix())
      .trace();
}

template <typename Real>
void require_projector(const BoundaryPair<Real>& b, const Operator<Real>& m, const char* what) {
  require_same_basis(b.basis(), m.basis(), what);
  if (!m.is_projector()) throw ContractViolation(std::string(what) + ": operator is not a projector");
}

}  // namespace detail

/// Tr(rho_i F M' rho_f M' B) / Tr(rho_i F rho_f B). The ratio is returned as is;
/// it lies in [0, 1] whenever the family members are mutually decohered.
template <typename Real>
Real probability_m(const BoundaryPair<Real>& b, const Operator<Real>& m_evolved) {
  detail::require_projector(b, m_evolved, "probability_m");
  const Complex<Real> den = b.shape_denominator();
  if (!(std::abs(den) > b.floor()))
    throw IncompatibleBoundaryError("probability_m: pre- and post-selection do not overlap");
  const Real p = (detail::boundary_numerator(b, m_evolved) / den).real();
  return p < Real(0) && p > -Real(1e-12) ? Real(0) : p;
}

/// Numerators of probability_m normalized over the family instead of by the
/// unconditioned overlap.
template <typename Real>
std::vector<Real> probability_family(const BoundaryPair<Real>& b, const std::vector<Operator<Real>>& family) {
  std::vector<Real> out;
  Real total = 0;
  for (const auto& m : family) {
    detail::require_projector(b, m, "probability_family");
    out.push_back(std::max(Real(0), detail::boundary_numerator(b, m).real()));
    total += out.back();
  }
  if (!(total > b.floor())) throw IncompatibleBoundaryError("probability_family: every outcome is annihilated");
  for (auto& p : out) p /= total;
  return out;
}

/// rho_f <- M' rho_f M' without renormalization. The retained fraction of the
/// trace in this single step must stay above the boundary floor.
template <typename Real>
BoundaryPair<Real> update_final(const BoundaryPair<Real>& b, const Operator<Real>& m_evolved) {
  detail::require_projector(b, m_evolved, "update_final");
  const MatrixX<Real> next = m_evolved.matrix() * b.final_shape().matrix() * m_evolved.matrix();
  const Real retained = next.trace().real();
  if (!(retained > b.floor()))
    throw IncompatibleBoundaryError("update_final: projection annihilates the final density matrix");
  MatrixX<Real> shape = next / retained;
  shape = (shape + shape.adjoint()).eval() / Real(2);
  return b.with_final(DensityMatrix<Real>(b.basis(), std::move(shape), false),
                      b.final_log2_scale() + std::log2(retained));
}

// --- dominant state vector -----------------------------------------------------

template <typename Real = double>
struct DominantComponent {
  Real eigenvalue;
  StateVector<Real> vector;
  Real dominance_ratio;  // lambda_1 / lambda_2, +inf for rank one

  bool admissible(Real threshold = Real(kDefaultTolerances.dominance_threshold)) const {
    return dominance_ratio >= threshold;
  }
};

template <typename Real>
DominantComponent<Real> dominant_of(std::vector<SpectralComponent<Real>> spectrum) {
  const Real l1 = spectrum.front().value;
  const Real l2 = spectrum.size() > 1 ? spectrum[1].value : Real(0);
  const Real ratio =
      l2 <= Real(1e-12) * std::abs(l1) ? std::numeric_limits<Real>::infinity() : l1 / l2;
  return {l1, std::move(spectrum.front().vector), ratio};
}

template <typename Real>
DominantComponent<Real> dominant_vector(const DensityMatrix<Real>& d, const Tolerances& tol = kDefaultTolerances) {
  if (!(d.trace() > Real(tol.boundary_floor)))
    throw IncompatibleBoundaryError("dominant_vector: density matrix has vanishing trace");
  return dominant_of(spectral(d, tol));
}

// --- ABL rule ------------------------------------------------------------------

template <typename Real = double>
struct AblResult {
  std::vector<Real> distribution;  // normalized over the outcome family
  std::vector<Real> overlap_form;  // |<i|U M_k U|f>|^2 / |<i|U U|f>|^2; empty if that overlap vanishes
  Real unconditioned_overlap;      // |<i|U_before U_after|f>|^2
};

/// Outcome probabilities of an intermediate measurement between pre-selection
/// |i> and post-selection |f>, with amplitudes <i| U_before M_k U_after |f>.
template <typename Real>
AblResult<Real> abl_probability(const StateVector<Real>& i, const StateVector<Real>& f,
                                const Operator<Real>& u_before, const Operator<Real>& u_after,
                                const MeasurementContext<Real>& family, const Tolerances& tol = kDefaultTolerances) {
  for (const BasisLabel* b : {&f.basis(), &u_before.basis(), &u_after.basis(), &family.basis()})
    detail::require_same_basis(i.basis(), *b, "abl_probability");
  if (!u_before.is_unitary() || !u_after.is_unitary())
    throw ContractViolation("abl_probability: evolutions must be unitary");
  const VectorX<Real> bra = (i.amplitudes().adjoint() * u_before.matrix()).transpose();  // row as column
  const VectorX<Real> ket = u_after.matrix() * f.amplitudes();

  AblResult<Real> out;
  Real total = 0;
  for (const auto& p : family.projectors()) {
    const Complex<Real> amp = (bra.transpose() * p.matrix() * ket)(0, 0);
    out.distribution.push_back(std::norm(amp));
    total += out.distribution.back();
  }
  out.unconditioned_overlap = std::norm((bra.transpose() * ket)(0, 0));
  if (!(total > Real(tol.boundary_floor)))
    throw IncompatibleBoundaryError("abl_probability: every outcome amplitude vanishes");
  if (out.unconditioned_overlap > Real(tol.boundary_floor))
    for (Real p : out.distribution) out.overlap_form.push_back(p / out.unconditioned_overlap);
  for (auto& p : out.distribution) p /= total;
  return out;
}

/// ABL with a final density matrix: p_k ~ <i|U_b M_k U_a rho_f U_a^dagger M_k U_b^dagger|i>.
template <typename Real>
std::vector<Real> abl_probability_mixed(const StateVector<Real>& i, const DensityMatrix<Real>& final,
                                        const Operator<Real>& u_before, const Operator<Real>& u_after,
                                        const MeasurementContext<Real>& family,
                                        const Tolerances& tol = kDefaultTolerances) {
  detail::require_same_basis(i.basis(), final.basis(), "abl_probability_mixed");
  detail::require_same_basis(i.basis(), family.basis(), "abl_probability_mixed");
  const MatrixX<Real> evolved_final = u_after.matrix() * final.matrix() * u_after.matrix().adjoint();
  const VectorX<Real> ket = u_before.matrix().adjoint() * i.amplitudes();
  std::vector<Real> out;
  Real total = 0;
  for (const auto& p : family.projectors()) {
    const VectorX<Real> v = p.matrix() * ket;
    out.push_back(std::max(Real(0), v.dot(evolved_final * v).real()));
    total += out.back();
  }
  if (!(total > Real(tol.boundary_floor)))
    throw IncompatibleBoundaryError("abl_probability_mixed: every outcome is annihilated");
  for (auto& p : out) p /= total;
  return out;
}

/// <i|M_k|i>.
template <typename Real>
std::vector<Real> born_probabilities(const StateVector<Real>& i, const MeasurementContext<Real>& family) {
  detail::require_same_basis(i.basis(), family.basis(), "born_probabilities");
  const StateVector<Real> s = i.normalized();
  std::vector<Real> out;
  for (const auto& p : family.projectors()) out.push_back(s.amplitudes().dot(p.matrix() * s.amplitudes()).real());
  return out;
}

template <typename Real = double>
struct BornReport {
  std::vector<Real> born;               // <i|P_k|i>
  std::vector<Real> mixed_final;        // ABL with rho_f = I / dim
  Real max_mixed_deviation = 0;         // max_k |mixed_final - born|
  std::vector<Real> selected_frequency; // how often outcome k had the largest ABL weight
  std::vector<Real> mean_abl;           // ABL distribution averaged over Haar finals
  std::size_t trials = 0;
};

/// Compares Born probabilities with (a) ABL under a completely mixed final
/// boundary and (b) the outcome selected by Haar-random pure post-selections.
template <typename Real>
BornReport<Real> born_limit_check(const StateVector<Real>& i, const MeasurementContext<Real>& family,
                                  std::size_t trials, std::uint64_t seed, unsigned workers = 1) {
  if (trials < 1) throw RangeError("born_limit_check: trials must be >= 1");
  const BasisLabel& basis = i.basis();
  const auto id = Operator<Real>::identity(basis);
  BornReport<Real> r;
  r.trials = trials;
  r.born = born_probabilities(i, family);
  r.mixed_final = abl_probability_mixed(i, DensityMatrix<Real>::maximally_mixed(basis), id, id, family);
  for (std::size_t k = 0; k < r.born.size(); ++k)
    r.max_mixed_deviation = std::max(r.max_mixed_deviation, std::abs(r.mixed_final[k] - r.born[k]));

  const std::size_t n_out = family.size();
  struct Tally {
    std::vector<Real> selected, abl;
  };
  constexpr std::size_t chunk = 256;
  auto tallies = map_chunks<Tally>(chunk_count(trials, chunk), workers, [&](std::size_t c) {
    Tally t{std::vector<Real>(n_out, 0), std::vector<Real>(n_out, 0)};
    for (std::size_t trial = c * chunk; trial < std::min(trials, (c + 1) * chunk); ++trial) {
      RandomStream rng(seed, "born_limit_check", trial);
      const auto f = haar_state<Real>(basis, rng);
      const auto abl = abl_probability(i, f, id, id, family).distribution;
      std::size_t best = 0;
      for (std::size_t k = 1; k < n_out; ++k)
        if (abl[k] > abl[best]) best = k;
      t.selected[best] += 1;
      for (std::size_t k = 0; k < n_out; ++k) t.abl[k] += abl[k];
    }
    return t;
  });
  r.selected_frequency.assign(n_out, 0);
  r.mean_abl.assign(n_out, 0);
  for (const auto& t : tallies)
    for (std::size_t k = 0; k < n_out; ++k) {
      r.selected_frequency[k] += t.selected[k];
      r.mean_abl[k] += t.abl[k];
    }
  for (std::size_t k = 0; k < n_out; ++k) {
    r.selected_frequency[k] /= Real(trials);
    r.mean_abl[k] /= Real(trials);
  }
  return r;
}

}  // namespace tsvsim
