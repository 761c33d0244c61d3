#pragma once

// Dense finite-dimensional Hilbert-space primitives.
//
// A BasisLabel names an ordered list of tensor factors ("registers"). The
// first register is the most significant digit of a flat basis index, so
// tensor() is the ordinary Kronecker product. States, operators and density
// matrices are immutable values carrying their BasisLabel; all operations are
// free functions returning new values.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsvsim/errors.hpp"
#include "tsvsim/tolerances.hpp"

namespace tsvsim {

template <typename Real>
using Complex = std::complex<Real>;
template <typename Real>
using VectorX = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using MatrixX = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

class BasisLabel {
 public:
  BasisLabel() = default;

  BasisLabel(std::vector<std::string> names, std::vector<std::size_t> dims,
             std::size_t cap = kDefaultTolerances.dimension_cap)
      : names_(std::move(names)), dims_(std::move(dims)) {
    if (names_.size() != dims_.size())
      throw BasisError("basis: register name and dimension lists differ in length");
    if (names_.empty()) throw BasisError("basis: at least one register is required");
    dimension_ = 1;
    for (std::size_t r = 0; r < names_.size(); ++r) {
      if (dims_[r] < 2) throw BasisError("basis: register '" + names_[r] + "' has dimension < 2");
      for (std::size_t s = 0; s < r; ++s)
        if (names_[s] == names_[r]) throw BasisError("basis: duplicate register '" + names_[r] + "'");
      if (dimension_ > cap / dims_[r])
        throw CapacityError("basis: total dimension exceeds cap " + std::to_string(cap));
      dimension_ *= dims_[r];
    }
  }

  static BasisLabel single(std::string name, std::size_t dim,
                           std::size_t cap = kDefaultTolerances.dimension_cap) {
    return BasisLabel({std::move(name)}, {dim}, cap);
  }

  static BasisLabel qubits(std::vector<std::string> names,
                           std::size_t cap = kDefaultTolerances.dimension_cap) {
    std::vector<std::size_t> dims(names.size(), 2);
    return BasisLabel(std::move(names), std::move(dims), cap);
  }

  std::size_t dimension() const { return dimension_; }
  std::size_t register_count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::size_t>& dims() const { return dims_; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t r = 0; r < names_.size(); ++r)
      if (names_[r] == name) return r;
    return std::nullopt;
  }

  std::size_t position(const std::string& name) const {
    if (auto r = find(name)) return *r;
    throw BasisError("basis: unknown register '" + name + "'");
  }

  std::size_t register_dim(const std::string& name) const { return dims_[position(name)]; }

  /// Flat-index stride of register r.
  std::size_t stride(std::size_t r) const {
    std::size_t s = 1;
    for (std::size_t q = r + 1; q < dims_.size(); ++q) s *= dims_[q];
    return s;
  }

  std::size_t digit(std::size_t index, std::size_t r) const { return (index / stride(r)) % dims_[r]; }

  std::size_t index_of(std::span<const std::size_t> digits) const {
    if (digits.size() != dims_.size()) throw BasisError("basis: digit count mismatch");
    std::size_t index = 0;
    for (std::size_t r = 0; r < dims_.size(); ++r) {
      if (digits[r] >= dims_[r]) throw RangeError("basis: digit out of range");
      index = index * dims_[r] + digits[r];
    }
    return index;
  }

  BasisLabel concat(const BasisLabel& other, std::size_t cap = kDefaultTolerances.dimension_cap) const {
    for (const auto& n : other.names_)
      if (find(n)) throw BasisError("tensor: register '" + n + "' appears on both sides");
    auto names = names_;
    auto dims = dims_;
    names.insert(names.end(), other.names_.begin(), other.names_.end());
    dims.insert(dims.end(), other.dims_.begin(), other.dims_.end());
    return BasisLabel(std::move(names), std::move(dims), cap);
  }

  friend bool operator==(const BasisLabel& a, const BasisLabel& b) {
    return a.names_ == b.names_ && a.dims_ == b.dims_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::size_t> dims_;
  std::size_t dimension_ = 0;
};

namespace detail {

template <typename Real>
Real max_abs(const MatrixX<Real>& m) {
  return m.size() == 0 ? Real(0) : m.cwiseAbs().maxCoeff();
}

template <typename Real>
Real hermitian_defect(const MatrixX<Real>& m) {
  return max_abs<Real>(m - m.adjoint());
}

inline void require_same_basis(const BasisLabel& a, const BasisLabel& b, const char* what) {
  if (!(a == b)) throw BasisError(std::string(what) + ": basis mismatch");
}

}  // namespace detail

template <typename Real = double>
class StateVector {
 public:
  StateVector(BasisLabel basis, VectorX<Real> amplitudes)
      : basis_(std::move(basis)), amplitudes_(std::move(amplitudes)) {
    if (static_cast<std::size_t>(amplitudes_.size()) != basis_.dimension())
      throw BasisError("state: amplitude count does not match basis dimension");
  }

  static StateVector basis_state(BasisLabel basis, std::size_t index) {
    if (index >= basis.dimension()) throw RangeError("state: basis index out of range");
    VectorX<Real> v = VectorX<Real>::Zero(static_cast<Eigen::Index>(basis.dimension()));
    v(static_cast<Eigen::Index>(index)) = Complex<Real>(1);
    return StateVector(std::move(basis), std::move(v));
  }

  const BasisLabel& basis() const { return basis_; }
  const VectorX<Real>& amplitudes() const { return amplitudes_; }
  std::size_t dimension() const { return basis_.dimension(); }
  Complex<Real> operator[](std::size_t i) const { return amplitudes_(static_cast<Eigen::Index>(i)); }

  Real norm() const { return amplitudes_.norm(); }

  StateVector normalized() const {
    const Real n = norm();
    if (!(n > Real(0))) throw ContractViolation("state: cannot normalize the zero vector");
    return StateVector(basis_, amplitudes_ / n);
  }

  /// Same state with the first non-negligible amplitude made real positive.
  StateVector phase_fixed() const {
    for (Eigen::Index i = 0; i < amplitudes_.size(); ++i) {
      if (std::abs(amplitudes_(i)) > Real(1e-12)) {
        const Complex<Real> phase = std::conj(amplitudes_(i)) / std::abs(amplitudes_(i));
        return StateVector(basis_, amplitudes_ * phase);
      }
    }
    return *this;
  }

 private:
  BasisLabel basis_;
  VectorX<Real> amplitudes_;
};

enum class OperatorKind { general, unitary, projector };

template <typename Real = double>
class Operator {
 public:
  static Operator general(BasisLabel basis, MatrixX<Real> m) {
    return Operator(std::move(basis), std::move(m), OperatorKind::general);
  }

  static Operator unitary(BasisLabel basis, MatrixX<Real> m, Real tol = Real(kDefaultTolerances.unitary)) {
    Operator op(std::move(basis), std::move(m), OperatorKind::unitary);
    const auto n = op.matrix_.rows();
    const Real defect = detail::max_abs<Real>(op.matrix_.adjoint() * op.matrix_ - MatrixX<Real>::Identity(n, n));
    if (defect > tol)
      throw ContractViolation("operator marked unitary violates U^dagger U = I by " + std::to_string(double(defect)));
    return op;
  }

  static Operator projector(BasisLabel basis, MatrixX<Real> m, Real tol = Real(kDefaultTolerances.projector)) {
    Operator op(std::move(basis), std::move(m), OperatorKind::projector);
    const Real idem = detail::max_abs<Real>(op.matrix_ * op.matrix_ - op.matrix_);
    const Real herm = detail::hermitian_defect<Real>(op.matrix_);
    if (idem > tol || herm > tol)
      throw ContractViolation("operator marked projector violates P^2 = P = P^dagger by " +
                              std::to_string(double(std::max(idem, herm))));
    return op;
  }

  static Operator identity(BasisLabel basis) {
    const auto n = static_cast<Eigen::Index>(basis.dimension());
    return Operator(std::move(basis), MatrixX<Real>::Identity(n, n), OperatorKind::unitary);
  }

  /// Projector onto a (not necessarily normalized) state.
  static Operator projector_onto(const StateVector<Real>& s) {
    const auto v = s.normalized().amplitudes();
    return Operator(s.basis(), v * v.adjoint(), OperatorKind::projector);
  }

  const BasisLabel& basis() const { return basis_; }
  const MatrixX<Real>& matrix() const { return matrix_; }
  OperatorKind kind() const { return kind_; }
  bool is_unitary() const { return kind_ == OperatorKind::unitary; }
  bool is_projector() const { return kind_ == OperatorKind::projector; }
  std::size_t dimension() const { return basis_.dimension(); }

  Operator adjoint() const { return Operator(basis_, matrix_.adjoint(), kind_); }
  Operator conjugate() const { return Operator(basis_, matrix_.conjugate(), kind_); }

 private:
  Operator(BasisLabel basis, MatrixX<Real> m, OperatorKind kind)
      : basis_(std::move(basis)), matrix_(std::move(m)), kind_(kind) {
    const auto n = static_cast<Eigen::Index>(basis_.dimension());
    if (matrix_.rows() != n || matrix_.cols() != n)
      throw BasisError("operator: matrix shape does not match basis dimension");
  }

  template <typename R>
  friend Operator<R> compose(const Operator<R>&, const Operator<R>&);
  template <typename R>
  friend Operator<R> tensor(const Operator<R>&, const Operator<R>&);

  BasisLabel basis_;
  MatrixX<Real> matrix_;
  OperatorKind kind_;
};

template <typename Real = double>
class DensityMatrix {
 public:
  DensityMatrix(BasisLabel basis, MatrixX<Real> m, bool normalized,
                const Tolerances& tol = kDefaultTolerances)
      : basis_(std::move(basis)), matrix_(std::move(m)), normalized_(normalized) {
    const auto n = static_cast<Eigen::Index>(basis_.dimension());
    if (matrix_.rows() != n || matrix_.cols() != n)
      throw BasisError("density matrix: shape does not match basis dimension");
    if (detail::hermitian_defect<Real>(matrix_) > Real(tol.hermitian))
      throw ContractViolation("density matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<MatrixX<Real>> es(matrix_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -Real(tol.psd))
      throw ContractViolation("density matrix has a negative eigenvalue");
    if (normalized_ && std::abs(trace() - Real(1)) > Real(tol.trace))
      throw ContractViolation("normalized density matrix has trace != 1");
  }

  static DensityMatrix pure(const StateVector<Real>& s) {
    const auto v = s.normalized().amplitudes();
    return DensityMatrix(s.basis(), v * v.adjoint(), true);
  }

  static DensityMatrix maximally_mixed(const BasisLabel& basis) {
    const auto n = static_cast<Eigen::Index>(basis.dimension());
    return DensityMatrix(basis, MatrixX<Real>::Identity(n, n) / Real(n), true);
  }

  const BasisLabel& basis() const { return basis_; }
  const MatrixX<Real>& matrix() const { return matrix_; }
  bool normalized() const { return normalized_; }
  Real trace() const { return matrix_.trace().real(); }
  std::size_t dimension() const { return basis_.dimension(); }

 private:
  BasisLabel basis_;
  MatrixX<Real> matrix_;
  bool normalized_;
};

// --- tensor products -------------------------------------------------------

template <typename Real>
MatrixX<Real> kronecker(const MatrixX<Real>& a, const MatrixX<Real>& b) {
  MatrixX<Real> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

template <typename Real>
StateVector<Real> tensor(const StateVector<Real>& a, const StateVector<Real>& b) {
  BasisLabel basis = a.basis().concat(b.basis());
  return StateVector<Real>(std::move(basis), kronecker<Real>(a.amplitudes(), b.amplitudes()));
}

template <typename Real>
Operator<Real> tensor(const Operator<Real>& a, const Operator<Real>& b) {
  BasisLabel basis = a.basis().concat(b.basis());
  OperatorKind kind = OperatorKind::general;
  if (a.kind() == b.kind()) kind = a.kind();
  return Operator<Real>(std::move(basis), kronecker<Real>(a.matrix(), b.matrix()), kind);
}

template <typename Real>
DensityMatrix<Real> tensor(const DensityMatrix<Real>& a, const DensityMatrix<Real>& b) {
  return DensityMatrix<Real>(a.basis().concat(b.basis()), kronecker<Real>(a.matrix(), b.matrix()),
                             a.normalized() && b.normalized());
}

/// Matrix product a*b. Unitaries compose to a unitary; anything else is general.
template <typename Real>
Operator<Real> compose(const Operator<Real>& a, const Operator<Real>& b) {
  detail::require_same_basis(a.basis(), b.basis(), "compose");
  const OperatorKind kind =
      a.is_unitary() && b.is_unitary() ? OperatorKind::unitary : OperatorKind::general;
  return Operator<Real>(a.basis(), a.matrix() * b.matrix(), kind);
}

// --- local operators -------------------------------------------------------

/// Lifts an operator acting on `registers` (in the given order) to the full
/// basis, acting as the identity elsewhere.
template <typename Real>
MatrixX<Real> embed_matrix(const BasisLabel& basis, const std::vector<std::string>& registers,
                           const MatrixX<Real>& local) {
  std::vector<std::size_t> pos;
  std::size_t local_dim = 1;
  for (const auto& r : registers) {
    pos.push_back(basis.position(r));
    local_dim *= basis.dims()[pos.back()];
  }
  if (static_cast<std::size_t>(local.rows()) != local_dim || local.rows() != local.cols())
    throw BasisError("embed: local operator shape does not match register dimensions");
  const std::size_t n = basis.dimension();
  std::vector<std::size_t> strides(pos.size());
  for (std::size_t k = 0; k < pos.size(); ++k) strides[k] = basis.stride(pos[k]);

  MatrixX<Real> out = MatrixX<Real>::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t local_col = 0;
    std::size_t base = col;
    for (std::size_t k = 0; k < pos.size(); ++k) {
      const std::size_t d = basis.digit(col, pos[k]);
      local_col = local_col * basis.dims()[pos[k]] + d;
      base -= d * strides[k];
    }
    for (std::size_t local_row = 0; local_row < local_dim; ++local_row) {
      const auto value = local(static_cast<Eigen::Index>(local_row), static_cast<Eigen::Index>(local_col));
      if (value == Complex<Real>(0)) continue;
      std::size_t row = base;
      std::size_t rem = local_row;
      for (std::size_t k = pos.size(); k-- > 0;) {
        const std::size_t d = basis.dims()[pos[k]];
        row += (rem % d) * strides[k];
        rem /= d;
      }
      out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = value;
    }
  }
  return out;
}

template <typename Real>
Operator<Real> embed(const BasisLabel& basis, const std::vector<std::string>& registers,
                     const Operator<Real>& local) {
  MatrixX<Real> m = embed_matrix<Real>(basis, registers, local.matrix());
  switch (local.kind()) {
    case OperatorKind::unitary:
      return Operator<Real>::unitary(basis, std::move(m));
    case OperatorKind::projector:
      return Operator<Real>::projector(basis, std::move(m));
    default:
      return Operator<Real>::general(basis, std::move(m));
  }
}

/// Applies a single-register operator without forming the full matrix.
template <typename Real>
StateVector<Real> apply_local(const StateVector<Real>& s, const std::string& reg, const MatrixX<Real>& local) {
  const BasisLabel& basis = s.basis();
  const std::size_t r = basis.position(reg);
  const std::size_t d = basis.dims()[r];
  if (static_cast<std::size_t>(local.rows()) != d || local.rows() != local.cols())
    throw BasisError("apply_local: operator shape does not match register dimension");
  const std::size_t stride = basis.stride(r);
  const std::size_t block = stride * d;
  const auto& in = s.amplitudes();
  VectorX<Real> out = VectorX<Real>::Zero(in.size());
  for (std::size_t hi = 0; hi < basis.dimension(); hi += block) {
    for (std::size_t lo = 0; lo < stride; ++lo) {
      for (std::size_t i = 0; i < d; ++i) {
        Complex<Real> acc(0);
        for (std::size_t j = 0; j < d; ++j)
          acc += local(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                 in(static_cast<Eigen::Index>(hi + j * stride + lo));
        out(static_cast<Eigen::Index>(hi + i * stride + lo)) = acc;
      }
    }
  }
  return StateVector<Real>(basis, std::move(out));
}

/// Applies an operator on several registers (in the given order) without
/// forming the full matrix.
template <typename Real>
StateVector<Real> apply_local(const StateVector<Real>& s, const std::vector<std::string>& registers,
                              const MatrixX<Real>& local) {
  if (registers.size() == 1) return apply_local(s, registers.front(), local);
  const BasisLabel& basis = s.basis();
  std::vector<std::size_t> pos;
  std::size_t local_dim = 1;
  for (const auto& r : registers) {
    pos.push_back(basis.position(r));
    local_dim *= basis.dims()[pos.back()];
  }
  if (static_cast<std::size_t>(local.rows()) != local_dim || local.rows() != local.cols())
    throw BasisError("apply_local: operator shape does not match register dimensions");
  std::vector<std::size_t> offset(local_dim, 0);
  for (std::size_t l = 0; l < local_dim; ++l) {
    std::size_t rem = l;
    for (std::size_t k = pos.size(); k-- > 0;) {
      const std::size_t d = basis.dims()[pos[k]];
      offset[l] += (rem % d) * basis.stride(pos[k]);
      rem /= d;
    }
  }
  const auto& in = s.amplitudes();
  VectorX<Real> out = VectorX<Real>::Zero(in.size());
  VectorX<Real> gathered(static_cast<Eigen::Index>(local_dim));
  for (std::size_t base = 0; base < basis.dimension(); ++base) {
    bool is_base = true;
    for (std::size_t p : pos)
      if (basis.digit(base, p) != 0) {
        is_base = false;
        break;
      }
    if (!is_base) continue;
    for (std::size_t l = 0; l < local_dim; ++l)
      gathered(static_cast<Eigen::Index>(l)) = in(static_cast<Eigen::Index>(base + offset[l]));
    const VectorX<Real> mapped = local * gathered;
    for (std::size_t l = 0; l < local_dim; ++l)
      out(static_cast<Eigen::Index>(base + offset[l])) = mapped(static_cast<Eigen::Index>(l));
  }
  return StateVector<Real>(basis, std::move(out));
}

// --- dynamics and overlaps -------------------------------------------------

template <typename Real>
StateVector<Real> evolve(const StateVector<Real>& s, const Operator<Real>& u) {
  detail::require_same_basis(s.basis(), u.basis(), "evolve");
  if (!u.is_unitary()) throw ContractViolation("evolve: operator is not marked unitary");
  return StateVector<Real>(s.basis(), u.matrix() * s.amplitudes());
}

/// Applies any operator (projectors, agent insertions, ...) without renormalizing.
template <typename Real>
StateVector<Real> apply(const Operator<Real>& op, const StateVector<Real>& s) {
  detail::require_same_basis(s.basis(), op.basis(), "apply");
  return StateVector<Real>(s.basis(), op.matrix() * s.amplitudes());
}

/// <a|b>, conjugate-linear in a.
template <typename Real>
Complex<Real> inner(const StateVector<Real>& a, const StateVector<Real>& b) {
  detail::require_same_basis(a.basis(), b.basis(), "inner");
  return a.amplitudes().dot(b.amplitudes());
}

// --- spectral decomposition ------------------------------------------------

template <typename Real>
struct SpectralComponent {
  Real value;
  StateVector<Real> vector;
};

namespace detail {

template <typename Real>
bool lexicographically_before(const VectorX<Real>& a, const VectorX<Real>& b) {
  constexpr Real eps = Real(1e-12);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::abs(a(i).real() - b(i).real()) > eps) return a(i).real() > b(i).real();
    if (std::abs(a(i).imag() - b(i).imag()) > eps) return a(i).imag() > b(i).imag();
  }
  return false;
}

template <typename Real>
VectorX<Real> fix_phase(VectorX<Real> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > Real(1e-10)) {
      v *= std::conj(v(i)) / std::abs(v(i));
      break;
    }
  }
  return v;
}

}  // namespace detail

/// Eigen-decomposition of a Hermitian matrix, sorted by descending eigenvalue.
/// Degenerate eigenspaces are given a canonical basis (Gram-Schmidt of the
/// eigenspace projector applied to e_0, e_1, ...), every vector is phase-fixed
/// and vectors within a degenerate group are ordered lexicographically.
template <typename Real>
std::vector<SpectralComponent<Real>> hermitian_spectrum(const BasisLabel& basis, const MatrixX<Real>& m,
                                                        const Tolerances& tol = kDefaultTolerances) {
  if (detail::hermitian_defect<Real>(m) > Real(tol.hermitian))
    throw ContractViolation("spectral: matrix is not Hermitian within tolerance");
  const MatrixX<Real> h = (m + m.adjoint()) / Real(2);
  Eigen::SelfAdjointEigenSolver<MatrixX<Real>> es(h);
  if (es.info() != Eigen::Success) throw ContractViolation("spectral: eigensolver failed");
  const auto n = h.rows();
  const Real scale = std::max(Real(1), es.eigenvalues().cwiseAbs().maxCoeff());
  const Real tie = Real(1e-10) * scale;

  std::vector<SpectralComponent<Real>> out;
  out.reserve(static_cast<std::size_t>(n));
  // Eigen returns ascending eigenvalues; walk groups from the top.
  Eigen::Index hi = n - 1;
  while (hi >= 0) {
    Eigen::Index lo = hi;
    while (lo > 0 && es.eigenvalues()(hi) - es.eigenvalues()(lo - 1) <= tie) --lo;
    const Eigen::Index size = hi - lo + 1;
    const Real value = es.eigenvalues().segment(lo, size).mean();
    std::vector<VectorX<Real>> group;
    if (size == 1) {
      group.push_back(detail::fix_phase<Real>(es.eigenvectors().col(hi)));
    } else {
      const MatrixX<Real> vs = es.eigenvectors().middleCols(lo, size);
      const MatrixX<Real> proj = vs * vs.adjoint();
      for (Eigen::Index j = 0; j < n && static_cast<Eigen::Index>(group.size()) < size; ++j) {
        VectorX<Real> v = proj.col(j);
        for (const auto& g : group) v -= g * g.dot(v);
        const Real norm = v.norm();
        if (norm > Real(1e-6)) group.push_back(detail::fix_phase<Real>(v / norm));
      }
      std::stable_sort(group.begin(), group.end(), [](const VectorX<Real>& a, const VectorX<Real>& b) {
        return detail::lexicographically_before<Real>(a, b);
      });
    }
    for (auto& v : group) out.push_back({size == 1 ? es.eigenvalues()(hi) : value, StateVector<Real>(basis, v)});
    hi = lo - 1;
  }
  return out;
}

template <typename Real>
std::vector<SpectralComponent<Real>> spectral(const DensityMatrix<Real>& d,
                                              const Tolerances& tol = kDefaultTolerances) {
  return hermitian_spectrum<Real>(d.basis(), d.matrix(), tol);
}

// --- partial trace ---------------------------------------------------------

/// Traces out every register not named in `keep`. Kept registers retain their
/// order in the input basis.
template <typename Real>
DensityMatrix<Real> partial_trace(const DensityMatrix<Real>& d, const std::vector<std::string>& keep) {
  const BasisLabel& basis = d.basis();
  std::vector<bool> kept(basis.register_count(), false);
  for (const auto& name : keep) kept[basis.position(name)] = true;
  if (std::all_of(kept.begin(), kept.end(), [](bool k) { return k; })) return d;
  if (std::none_of(kept.begin(), kept.end(), [](bool k) { return k; }))
    throw BasisError("partial_trace: at least one register must be kept");

  std::vector<std::string> names;
  std::vector<std::size_t> dims;
  std::size_t traced_dim = 1;
  for (std::size_t r = 0; r < kept.size(); ++r) {
    if (kept[r]) {
      names.push_back(basis.names()[r]);
      dims.push_back(basis.dims()[r]);
    } else {
      traced_dim *= basis.dims()[r];
    }
  }
  BasisLabel reduced(std::move(names), std::move(dims));
  const std::size_t kd = reduced.dimension();

  // full index of (kept index, traced index)
  std::vector<std::size_t> full(kd * traced_dim);
  for (std::size_t i = 0; i < basis.dimension(); ++i) {
    std::size_t k = 0, t = 0;
    for (std::size_t r = 0; r < kept.size(); ++r) {
      const std::size_t dig = basis.digit(i, r);
      if (kept[r])
        k = k * basis.dims()[r] + dig;
      else
        t = t * basis.dims()[r] + dig;
    }
    full[k * traced_dim + t] = i;
  }
  MatrixX<Real> out = MatrixX<Real>::Zero(static_cast<Eigen::Index>(kd), static_cast<Eigen::Index>(kd));
  const auto& m = d.matrix();
  for (std::size_t a = 0; a < kd; ++a)
    for (std::size_t b = 0; b < kd; ++b) {
      Complex<Real> acc(0);
      for (std::size_t t = 0; t < traced_dim; ++t)
        acc += m(static_cast<Eigen::Index>(full[a * traced_dim + t]),
                 static_cast<Eigen::Index>(full[b * traced_dim + t]));
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = acc;
    }
  return DensityMatrix<Real>(std::move(reduced), std::move(out), d.normalized());
}

// --- common single-register objects -----------------------------------------

template <typename Real = double>
MatrixX<Real> pauli_x() {
  MatrixX<Real> m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

template <typename Real = double>
MatrixX<Real> hadamard() {
  MatrixX<Real> m(2, 2);
  const Real s = Real(1) / std::sqrt(Real(2));
  m << s, s, s, -s;
  return m;
}

/// Rotation exp(-i theta Y / 2).
template <typename Real = double>
MatrixX<Real> rotation_y(Real theta) {
  MatrixX<Real> m(2, 2);
  const Real c = std::cos(theta / 2), s = std::sin(theta / 2);
  m << c, -s, s, c;
  return m;
}

template <typename Real = double>
StateVector<Real> x_plus(const BasisLabel& qubit) {
  VectorX<Real> v(2);
  v << Real(1) / std::sqrt(Real(2)), Real(1) / std::sqrt(Real(2));
  return StateVector<Real>(qubit, v);
}

template <typename Real = double>
StateVector<Real> x_minus(const BasisLabel& qubit) {
  VectorX<Real> v(2);
  v << Real(1) / std::sqrt(Real(2)), -Real(1) / std::sqrt(Real(2));
  return StateVector<Real>(qubit, v);
}

}  // namespace tsvsim
