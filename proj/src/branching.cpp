#include "tsvsim/branching.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include "tsvsim/parallel.hpp"
#include "tsvsim/random.hpp"

namespace tsvsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieRelative = 1e-12;

double safe_log2(double w) { return w > 0 ? std::log2(w) : -kInf; }

bool is_unitary_matrix(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return detail::max_abs<double>(m * m.adjoint() - Matrix::Identity(m.rows(), m.cols())) <= tol;
}

bool is_projector_matrix(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return detail::hermitian_defect<double>(m) <= tol && detail::max_abs<double>(m * m - m) <= tol;
}

// Transposition |0> <-> |r| on a d-level witness (identity for r = 0).
Matrix record_shift(std::size_t d, std::size_t r) {
  const auto n = static_cast<Eigen::Index>(d);
  Matrix s = Matrix::Identity(n, n);
  if (r != 0) s.col(0).swap(s.col(static_cast<Eigen::Index>(r)));
  return s;
}

}  // namespace

// --- macroscopic states --------------------------------------------------------

void validate_partition(const MacroPartition& partition, std::size_t dim) {
  std::vector<int> seen(dim, 0);
  std::set<std::string> ids;
  for (const auto& cls : partition) {
    if (!ids.insert(cls.class_id).second)
      throw ContractViolation("partition: duplicate class id '" + cls.class_id + "'");
    for (std::size_t m : cls.members) {
      if (m >= dim) throw ContractViolation("partition: member index out of range in class '" + cls.class_id + "'");
      if (seen[m]++) throw ContractViolation("partition: basis index " + std::to_string(m) + " is in two classes");
    }
  }
  for (std::size_t i = 0; i < dim; ++i)
    if (!seen[i]) throw ContractViolation("partition: basis index " + std::to_string(i) + " is in no class");
}

MultiplicityReport pathway_multiplicity(const MacroPartition& initial, const MacroPartition& final, const Op& u,
                                        double threshold) {
  const std::size_t dim = u.dimension();
  validate_partition(initial, dim);
  validate_partition(final, dim);
  const Eigen::MatrixXd p = u.matrix().cwiseAbs2();
  MultiplicityReport out;
  out.threshold = threshold;
  out.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(initial.size()), static_cast<Eigen::Index>(final.size()));
  for (std::size_t a = 0; a < initial.size(); ++a) {
    const auto& from = initial[a].members;
    if (from.empty()) continue;
    for (std::size_t b = 0; b < final.size(); ++b) {
      double w = 0;
      for (std::size_t i : from)
        for (std::size_t j : final[b].members) w += p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      w /= static_cast<double>(from.size());
      out.weights(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = w;
      if (w > threshold) ++out.count;
    }
  }
  return out;
}

// --- decision trees ------------------------------------------------------------

DecisionTree::DecisionTree(BasisLabel basis, std::vector<DecisionNode> levels)
    : basis_(std::move(basis)), levels_(std::move(levels)) {
  const auto& tol = kDefaultTolerances;
  std::set<std::string> ids, witnesses;
  for (const auto& node : levels_) {
    if (!ids.insert(node.decision_id).second)
      throw ContractViolation("decision tree: duplicate decision id '" + node.decision_id + "'");
    const std::size_t d = basis_.register_dim(node.register_name);
    const auto n = static_cast<Eigen::Index>(d);
    if (node.preparation.rows() != n || !is_unitary_matrix(node.preparation, tol.unitary))
      throw ContractViolation("decision tree: preparation of '" + node.decision_id + "' is not a local unitary");
    for (const auto& p : node.projectors)
      if (p.rows() != n || !is_projector_matrix(p, tol.projector))
        throw ContractViolation("decision tree: branch of '" + node.decision_id + "' is not a local projector");
    if (detail::max_abs<double>(node.projectors[0] * node.projectors[1]) > tol.completeness ||
        detail::max_abs<double>(node.projectors[0] + node.projectors[1] - Matrix::Identity(n, n)) > tol.completeness)
      throw ContractViolation("decision tree: branches of '" + node.decision_id + "' are not orthogonal and complete");

    const WitnessBinding& w = node.witness;
    if (w.decision_id != node.decision_id)
      throw ContractViolation("decision tree: witness bound to '" + w.decision_id + "' attached to '" +
                              node.decision_id + "'");
    const std::size_t wd = basis_.register_dim(w.register_name);
    if (w.record_map[0] == w.record_map[1] || w.record_map[0] >= wd || w.record_map[1] >= wd)
      throw ContractViolation("decision tree: witness records of '" + node.decision_id + "' are not orthogonal");
    if (w.register_name == node.register_name) {
      recordings_.emplace_back(std::nullopt);
      continue;
    }
    if (!witnesses.insert(w.register_name).second)
      throw ContractViolation("decision tree: witness register '" + w.register_name + "' recorded twice");
    Matrix r = Matrix::Zero(n * static_cast<Eigen::Index>(wd), n * static_cast<Eigen::Index>(wd));
    for (std::size_t b = 0; b < 2; ++b) r += kronecker<double>(node.projectors[b], record_shift(wd, w.record_map[b]));
    recordings_.emplace_back(std::move(r));
  }
}

DecisionTree DecisionTree::unbiased_qubits(const BasisLabel& basis, const std::vector<std::string>& registers) {
  std::vector<DecisionNode> levels;
  for (const auto& reg : registers) {
    if (basis.register_dim(reg) != 2) throw BasisError("unbiased_qubits: register '" + reg + "' is not a qubit");
    Matrix p0 = Matrix::Zero(2, 2), p1 = Matrix::Zero(2, 2);
    p0(0, 0) = 1;
    p1(1, 1) = 1;
    levels.push_back({reg, reg, hadamard<double>(), {p0, p1}, {reg, reg, {0, 1}}});
  }
  return DecisionTree(basis, std::move(levels));
}

namespace {

using Weigh = std::function<double(const State&)>;

State decide(const DecisionTree& tree, std::size_t level, const State& s, std::optional<std::size_t> branch) {
  const DecisionNode& node = tree.levels()[level];
  State out = apply_local(s, node.register_name, node.preparation);
  if (branch) out = apply_local(out, node.register_name, node.projectors[*branch]);
  if (const auto& r = tree.recording(level))
    out = apply_local(out, std::vector<std::string>{node.register_name, node.witness.register_name}, *r);
  return out;
}

void descend(const DecisionTree& tree, std::size_t level, const State& s, const Weigh& weigh,
             std::vector<double>& leaves) {
  if (level == tree.depth()) {
    leaves.push_back(weigh(s));
    return;
  }
  for (std::size_t b = 0; b < 2; ++b) descend(tree, level + 1, decide(tree, level, s, b), weigh, leaves);
}

PathwayReport summarize(const DecisionTree& tree, std::vector<double> weights, double coherent) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > kDefaultTolerances.boundary_floor))
    throw IncompatibleBoundaryError("run_tree: the final boundary annihilates every witnessed pathway");
  const std::size_t n = tree.depth();
  auto path_of = [n](std::size_t leaf) {
    std::string p(n, '0');
    for (std::size_t k = 0; k < n; ++k)
      if ((leaf >> (n - 1 - k)) & 1u) p[k] = '1';
    return p;
  };

  PathwayReport out;
  out.leaf_weight_sum = sum;
  out.coherent_overlap = coherent;
  out.interference = coherent - sum;
  for (std::size_t l = 0; l < weights.size(); ++l)
    out.leaves.push_back({path_of(l), weights[l], safe_log2(weights[l]), weights[l] / sum});

  // Leaves are in path order, so the first maximum is the lexicographic winner.
  std::size_t best = 0;
  for (std::size_t l = 1; l < weights.size(); ++l)
    if (weights[l] > weights[best]) best = l;
  double second = -1;
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (l != best) second = std::max(second, weights[l]);
  out.selected = best;
  out.selected_path = out.leaves[best].path;
  if (second >= 0) {
    out.tie = weights[best] - second <= kTieRelative * weights[best];
    out.gap_log2 = safe_log2(weights[best]) - safe_log2(second);
  }

  // Conditional branch weights from subtree sums.
  for (std::size_t depth = 0; depth < n; ++depth) {
    const std::size_t span = std::size_t{1} << (n - depth);
    for (std::size_t first = 0; first < weights.size(); first += span) {
      const double total = std::accumulate(weights.begin() + first, weights.begin() + first + span, 0.0);
      const double left = std::accumulate(weights.begin() + first, weights.begin() + first + span / 2, 0.0);
      BranchRecord br{path_of(first).substr(0, depth), {-kInf, -kInf}};
      if (total > 0) br.log2_weight = {safe_log2(left / total), safe_log2((total - left) / total)};
      out.branches.push_back(std::move(br));
    }
  }
  return out;
}

PathwayReport run_tree_with(const State& initial, const DecisionTree& tree, const Weigh& weigh) {
  detail::require_same_basis(initial.basis(), tree.basis(), "run_tree");
  if (tree.depth() == 0) throw ContractViolation("run_tree: tree has no decisions");
  std::vector<double> leaves;
  leaves.reserve(tree.leaf_count());
  descend(tree, 0, initial, weigh, leaves);
  State coherent = initial;
  for (std::size_t level = 0; level < tree.depth(); ++level) coherent = decide(tree, level, coherent, std::nullopt);
  return summarize(tree, std::move(leaves), weigh(coherent));
}

}  // namespace

PathwayReport run_tree(const State& initial, const DecisionTree& tree, const State& final) {
  detail::require_same_basis(final.basis(), tree.basis(), "run_tree");
  return run_tree_with(initial, tree, [&final](const State& s) { return std::norm(inner(final, s)); });
}

PathwayReport run_tree(const State& initial, const DecisionTree& tree, const Density& final) {
  detail::require_same_basis(final.basis(), tree.basis(), "run_tree");
  return run_tree_with(initial, tree, [&final](const State& s) {
    return s.amplitudes().dot(final.matrix() * s.amplitudes()).real();
  });
}

// --- bidirectional scenario ----------------------------------------------------

void BidirectionalScenario::validate() const {
  detail::require_same_basis(bang.basis(), crunch.basis(), "bidirectional scenario");
  for (const auto* steps : {&forward_steps, &backward_steps})
    for (const auto& op : *steps) {
      detail::require_same_basis(bang.basis(), op.basis(), "bidirectional scenario");
      if (!op.is_unitary() && !op.is_projector())
        throw ContractViolation("bidirectional scenario: steps must be unitaries or projectors");
    }
}

std::vector<State> BidirectionalScenario::forward_history() const {
  validate();
  std::vector<State> out{bang};
  for (const auto& op : forward_steps) out.push_back(apply(op, out.back()));
  return out;
}

State BidirectionalScenario::evolved_bang() const { return forward_history().back(); }

State BidirectionalScenario::revolved_crunch() const {
  validate();
  State s = crunch;
  for (const auto& op : backward_steps) s = apply(op, s);
  return s;
}

namespace {

struct SpanBorder {
  State vector;
  double ratio;
};

// Dominant eigenvector of the Hermitian operator (alpha |x><y| + conj(alpha) |y><x|)
// for unit vectors x, y, computed inside their span.
SpanBorder span_border(const Vector& x, const Vector& y, std::complex<double> alpha, const BasisLabel& basis) {
  Vector e1 = x;
  Vector e2 = y - x * x.dot(y);
  const double n2 = e2.norm();
  if (n2 <= 1e-12) return {State(basis, detail::fix_phase<double>(x)), kInf};
  e2 /= n2;
  // Coordinates of y in (e1, e2): x = (1, 0), y = (c, n2).
  const std::complex<double> c = x.dot(y);
  Eigen::Vector2cd xc(1, 0), yc(c, n2);
  Eigen::Matrix2cd h = alpha * xc * yc.adjoint();
  h = (h + h.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h);
  const Eigen::Vector2d ev = es.eigenvalues();
  const int top = std::abs(ev(1)) >= std::abs(ev(0)) ? 1 : 0;
  const double l1 = std::abs(ev(top)), l2 = std::abs(ev(1 - top));
  const Eigen::Vector2cd v = es.eigenvectors().col(top);
  Vector full = e1 * v(0) + e2 * v(1);
  full.normalize();
  const double ratio = l2 <= 1e-12 * l1 ? kInf : l1 / l2;
  return {State(basis, detail::fix_phase<double>(full)), ratio};
}

}  // namespace

BorderMatch match_border(const BidirectionalScenario& s, const Tolerances& tol) {
  const State a = s.evolved_bang();
  const State b = s.revolved_crunch();
  const std::complex<double> overlap = inner(a, b);
  if (!(std::norm(overlap) > tol.boundary_floor))
    throw IncompatibleBoundaryError("match_border: evolved bang and revolved crunch do not overlap");
  const Vector ah = a.amplitudes() / a.norm();
  const Vector bh = b.amplitudes() / b.norm();
  const std::complex<double> c = ah.dot(bh);

  // Variant A: Hermitian part of |a><b~| with b~ rephased so <a|b~> is real positive.
  const Vector bt = bh * (std::conj(c) / std::abs(c));
  const SpanBorder va = span_border(ah, bt, 1.0, a.basis());
  // Variant B: Hermitian part of P_a P_b = c |a><b|.
  const SpanBorder vb = span_border(ah, bh, c, a.basis());

  BorderMatch out{overlap, va.vector, va.ratio, {}, vb.vector, vb.ratio, false};
  out.factorized = inner(a, va.vector) * inner(va.vector, b);
  out.variants_agree = std::abs(inner(va.vector, vb.vector)) >= 1 - 1e-8;
  return out;
}

BidirectionalScenario agent_insert(const BidirectionalScenario& s, std::size_t at_step, const Op& op) {
  s.validate();
  detail::require_same_basis(s.bang.basis(), op.basis(), "agent_insert");
  if (!op.is_unitary() && !op.is_projector())
    throw ContractViolation("agent_insert: operator must be a unitary or a projector");
  if (at_step > s.forward_steps.size() || at_step > s.backward_steps.size())
    throw RangeError("agent_insert: step " + std::to_string(at_step) + " is outside the evolution");
  BidirectionalScenario out = s;
  out.forward_steps.insert(out.forward_steps.begin() + static_cast<std::ptrdiff_t>(at_step), op);
  out.backward_steps.insert(out.backward_steps.begin() + static_cast<std::ptrdiff_t>(at_step), op.conjugate());
  return out;
}

std::vector<double> branch_weights(const BidirectionalScenario& s, const MeasurementContext<double>& family) {
  detail::require_same_basis(s.bang.basis(), family.basis(), "branch_weights");
  const State a = s.evolved_bang();
  const State b = s.revolved_crunch();
  std::vector<double> out;
  for (const auto& p : family.projectors()) out.push_back(std::norm(inner(b, apply(p, a))));
  return out;
}

OverlapScaling overlap_scaling(const std::vector<std::size_t>& log2_dims, std::size_t seeds, std::uint64_t seed,
                               unsigned workers) {
  if (log2_dims.size() < 2 || seeds == 0) throw RangeError("overlap_scaling: need two dimensions and one seed");
  constexpr std::size_t chunk = 16;
  OverlapScaling out;
  for (std::size_t n : log2_dims) {
    const BasisLabel basis = BasisLabel::single("u", std::size_t{1} << n);
    const auto sums = map_chunks<double>(chunk_count(seeds, chunk), workers, [&](std::size_t c) {
      double acc = 0;
      for (std::size_t k = c * chunk; k < std::min(seeds, (c + 1) * chunk); ++k) {
        RandomStream rng(seed, "overlap_scaling/" + std::to_string(n), k);
        const State bang = haar_state<double>(basis, rng);
        const State crunch = haar_state<double>(basis, rng);
        acc += std::log2(std::norm(inner(bang, crunch)));
      }
      return acc;
    });
    out.points.push_back({n, std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(seeds)});
  }
  double mx = 0, my = 0;
  for (const auto& p : out.points) {
    mx += static_cast<double>(p.log2_dim);
    my += p.mean_log2_overlap_sq;
  }
  mx /= static_cast<double>(out.points.size());
  my /= static_cast<double>(out.points.size());
  double sxy = 0, sxx = 0;
  for (const auto& p : out.points) {
    const double dx = static_cast<double>(p.log2_dim) - mx;
    sxy += dx * (p.mean_log2_overlap_sq - my);
    sxx += dx * dx;
  }
  out.slope = sxy / sxx;
  return out;
}

// --- Stern-Gerlach -------------------------------------------------------------

namespace {

BasisLabel spin_witness_basis(std::size_t witness_count) {
  std::vector<std::string> names{"spin"};
  for (std::size_t k = 0; k < witness_count; ++k) names.push_back("w" + std::to_string(k));
  return BasisLabel::qubits(std::move(names));
}

Eigen::Vector2cd effective_spin(const State& preparation, const std::optional<Matrix>& agent) {
  if (preparation.dimension() != 2) throw BasisError("stern_gerlach: preparation must be a qubit state");
  Eigen::Vector2cd v = preparation.normalized().amplitudes();
  if (agent) {
    if (agent->rows() != 2 || !is_unitary_matrix(*agent, kDefaultTolerances.unitary))
      throw ContractViolation("stern_gerlach: agent must be a 2x2 unitary");
    v = (*agent * v).eval();
  }
  return v;
}

Matrix cnot() {
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1;
  return m;
}

SternGerlachOutcome decide_spin(double log2_up, double log2_down) {
  if (log2_up == -kInf && log2_down == -kInf)
    throw IncompatibleBoundaryError("stern_gerlach: final state annihilates both branches");
  SternGerlachOutcome out{};
  out.log2_weight_up = log2_up;
  out.log2_weight_down = log2_down;
  out.gap_log2 = std::abs(log2_up - log2_down);
  out.tie = out.gap_log2 <= kTieRelative / std::log(2.0);
  out.up_selected = log2_up >= log2_down;
  return out;
}

SternGerlachOutcome stern_gerlach_run(std::uint64_t seed, std::size_t index, std::size_t witness_count,
                                      const State& preparation, FinalStateModel model,
                                      const std::optional<Matrix>& agent) {
  if (witness_count == 0) throw ContractViolation("stern_gerlach: at least one witness is required");
  const Eigen::Vector2cd spin = effective_spin(preparation, agent);
  RandomStream rng(seed, "stern_gerlach", index);

  if (model == FinalStateModel::product_haar) {
    const BasisLabel qubit = BasisLabel::single("q", 2);
    double up = safe_log2(std::norm(spin(0))), down = safe_log2(std::norm(spin(1)));
    for (std::size_t r = 0; r <= witness_count; ++r) {
      const State f = haar_state<double>(qubit, rng);
      up += safe_log2(std::norm(f[0]));
      down += safe_log2(std::norm(f[1]));
    }
    return decide_spin(up, down);
  }

  if (witness_count > 12) throw CapacityError("stern_gerlach: joint final state limited to 12 witnesses");
  const BasisLabel basis = spin_witness_basis(witness_count);
  Vector amps = Vector::Zero(static_cast<Eigen::Index>(basis.dimension()));
  amps(0) = spin(0);
  amps(static_cast<Eigen::Index>(basis.stride(0))) = spin(1);
  State s(basis, std::move(amps));
  const Matrix cx = cnot();
  for (std::size_t k = 0; k < witness_count; ++k)
    s = apply_local(s, std::vector<std::string>{"spin", "w" + std::to_string(k)}, cx);
  const State f = haar_state<double>(basis, rng);
  Matrix p0 = Matrix::Zero(2, 2), p1 = Matrix::Zero(2, 2);
  p0(0, 0) = 1;
  p1(1, 1) = 1;
  const double up = std::norm(inner(f, apply_local(s, "spin", p0)));
  const double down = std::norm(inner(f, apply_local(s, "spin", p1)));
  return decide_spin(safe_log2(up), safe_log2(down));
}

}  // namespace

SternGerlachOutcome stern_gerlach_scenario(std::uint64_t seed, std::size_t witness_count, const State& preparation,
                                           FinalStateModel model, const std::optional<Matrix>& agent) {
  return stern_gerlach_run(seed, 0, witness_count, preparation, model, agent);
}

SternGerlachSummary stern_gerlach_ensemble(std::size_t runs, std::uint64_t seed, std::size_t witness_count,
                                           const State& preparation, FinalStateModel model,
                                           const std::optional<Matrix>& agent, unsigned workers) {
  if (runs == 0) throw RangeError("stern_gerlach: runs must be positive");
  constexpr std::size_t chunk = 256;
  const auto parts = map_chunks<std::vector<SternGerlachOutcome>>(
      chunk_count(runs, chunk), workers, [&](std::size_t c) {
        std::vector<SternGerlachOutcome> v;
        for (std::size_t k = c * chunk; k < std::min(runs, (c + 1) * chunk); ++k)
          v.push_back(stern_gerlach_run(seed, k, witness_count, preparation, model, agent));
        return v;
      });
  SternGerlachSummary out{};
  out.runs = runs;
  for (const auto& p : parts) out.outcomes.insert(out.outcomes.end(), p.begin(), p.end());
  std::size_t up = 0;
  std::vector<double> gaps;
  for (const auto& o : out.outcomes) {
    up += o.up_selected ? 1 : 0;
    gaps.push_back(o.gap_log2);
  }
  out.up_fraction = static_cast<double>(up) / static_cast<double>(runs);
  out.born_up = std::norm(effective_spin(preparation, agent)(0));
  out.binomial_sigma = std::sqrt(out.born_up * (1 - out.born_up) / static_cast<double>(runs));
  std::sort(gaps.begin(), gaps.end());
  out.median_gap_log2 = runs % 2 ? gaps[runs / 2] : 0.5 * (gaps[runs / 2 - 1] + gaps[runs / 2]);
  return out;
}

BidirectionalScenario stern_gerlach_bidirectional(std::uint64_t seed, std::size_t witness_count,
                                                  const State& preparation) {
  if (witness_count == 0) throw ContractViolation("stern_gerlach: at least one witness is required");
  if (witness_count > 9) throw CapacityError("stern_gerlach: dense bidirectional form limited to 9 witnesses");
  const BasisLabel basis = spin_witness_basis(witness_count);
  const Eigen::Vector2cd spin = effective_spin(preparation, std::nullopt);
  Vector amps = Vector::Zero(static_cast<Eigen::Index>(basis.dimension()));
  amps(0) = spin(0);
  amps(static_cast<Eigen::Index>(basis.stride(0))) = spin(1);

  Op fan_out = Op::identity(basis);
  const Matrix cx = cnot();
  for (std::size_t k = 0; k < witness_count; ++k)
    fan_out = compose(embed<double>(basis, {"spin", "w" + std::to_string(k)}, Operator<double>::unitary(
                                                                                 BasisLabel::qubits({"a", "b"}), cx)),
                      fan_out);
  RandomStream rng(seed, "stern_gerlach", 0);
  BidirectionalScenario s{State(basis, std::move(amps)), haar_state<double>(basis, rng),
                          {Op::identity(basis), fan_out}, {Op::identity(basis)}, 1};
  s.validate();
  return s;
}

// --- two-path interferometer ---------------------------------------------------

CoexistingPathsReport coexisting_paths_check(std::optional<double> witness_overlap, std::size_t phase_points) {
  if (witness_overlap && !(*witness_overlap >= 0 && *witness_overlap <= 1))
    throw RangeError("coexisting_paths: witness overlap must lie in [0, 1]");
  if (phase_points < 2 || phase_points % 2)
    throw RangeError("coexisting_paths: phase grid needs an even number of points");
  const BasisLabel basis = witness_overlap ? BasisLabel::qubits({"path", "witness"}) : BasisLabel::qubits({"path"});
  Matrix detect = Matrix::Zero(2, 2);
  detect(0, 0) = 1;
  Matrix record = Matrix::Identity(4, 4);
  if (witness_overlap) {
    // Controlled on the lower path: |0>_w -> s|0> + sqrt(1-s^2)|1>.
    const double s = *witness_overlap, r = std::sqrt(std::max(0.0, 1 - s * s));
    record.block(2, 2, 2, 2) << s, -r, r, s;
  }

  CoexistingPathsReport out{witness_overlap, {}, {}, 0, 0};
  for (std::size_t k = 0; k < phase_points; ++k) {
    const double phi = 2 * M_PI * static_cast<double>(k) / static_cast<double>(phase_points);
    Matrix phase = Matrix::Identity(2, 2);
    phase(1, 1) = std::polar(1.0, phi);
    State s = State::basis_state(basis, 0);
    s = apply_local(s, "path", hadamard<double>());
    s = apply_local(s, "path", phase);
    if (witness_overlap) s = apply_local(s, std::vector<std::string>{"path", "witness"}, record);
    s = apply_local(s, "path", hadamard<double>());
    out.phases.push_back(phi);
    const double amp = apply_local(s, "path", detect).norm();
    out.detection_probability.push_back(amp * amp);
  }
  const auto [lo, hi] = std::minmax_element(out.detection_probability.begin(), out.detection_probability.end());
  out.visibility = (*hi - *lo) / (*hi + *lo);
  const double mean = std::accumulate(out.detection_probability.begin(), out.detection_probability.end(), 0.0) /
                      static_cast<double>(phase_points);
  for (double p : out.detection_probability)
    out.max_interference_term = std::max(out.max_interference_term, std::abs(p - mean));
  return out;
}

}  // namespace tsvsim
