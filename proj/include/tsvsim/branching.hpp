#pragma once

// Macroscopic branching: witnessed decision trees, macroscopic pathway
// counting, bidirectional (bang/crunch) border matching, agent insertions and
// the Stern-Gerlach and two-path interferometer scenarios.

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsvsim/hilbert.hpp"
#include "tsvsim/tsvf.hpp"

namespace tsvsim {

using State = StateVector<double>;
using Op = Operator<double>;
using Density = DensityMatrix<double>;
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

// --- macroscopic states --------------------------------------------------------

enum class PhasePolicy { sum_all_phases };

/// Equivalence class of basis states that are macroscopically indistinguishable.
/// Membership is declared by the scenario, never inferred.
struct MacroState {
  std::string class_id;
  std::vector<std::size_t> members;
  PhasePolicy phase_policy = PhasePolicy::sum_all_phases;
};

using MacroPartition = std::vector<MacroState>;

/// Throws ContractViolation unless every index in [0, dim) is in exactly one class.
void validate_partition(const MacroPartition& partition, std::size_t dim);

struct MultiplicityReport {
  std::size_t count = 0;
  double threshold = 0;
  Eigen::MatrixXd weights;  // weights(a, b): mean transition probability from initial class a into final class b
};

/// Counts (initial class, final class) pairs whose class-averaged transition
/// probability under `u` exceeds `threshold`.
MultiplicityReport pathway_multiplicity(const MacroPartition& initial, const MacroPartition& final, const Op& u,
                                        double threshold);

// --- decision trees ------------------------------------------------------------

struct WitnessBinding {
  std::string decision_id;
  std::string register_name;
  std::array<std::size_t, 2> record_map{0, 1};  // outcome -> witness basis state
};

/// One binary decision: a local preparation on the decision register, the two
/// complementary local projectors, and the witness that records the outcome.
/// A witness bound to the decision register itself means the register is its
/// own persistent record.
struct DecisionNode {
  std::string decision_id;
  std::string register_name;
  Matrix preparation;
  std::array<Matrix, 2> projectors;
  WitnessBinding witness;
};

/// Complete binary tree in which every node at depth d makes decision levels[d].
class DecisionTree {
 public:
  DecisionTree(BasisLabel basis, std::vector<DecisionNode> levels);

  /// Hadamard-prepared, self-witnessing qubit decisions, one per register.
  static DecisionTree unbiased_qubits(const BasisLabel& basis, const std::vector<std::string>& registers);

  const BasisLabel& basis() const { return basis_; }
  const std::vector<DecisionNode>& levels() const { return levels_; }
  std::size_t depth() const { return levels_.size(); }
  std::size_t leaf_count() const { return std::size_t{1} << levels_.size(); }

  /// Local recording unitary on (decision register, witness register); empty
  /// when the decision register is its own witness.
  const std::optional<Matrix>& recording(std::size_t level) const { return recordings_[level]; }

 private:
  BasisLabel basis_;
  std::vector<DecisionNode> levels_;
  std::vector<std::optional<Matrix>> recordings_;
};

struct LeafRecord {
  std::string path;      // "0"/"1" per level, root first
  double weight;         // raw two-state weight of the pathway
  double log2_weight;
  double probability;    // weight normalized over all leaves
};

struct BranchRecord {
  std::string prefix;
  std::array<double, 2> log2_weight;  // log2 of the conditional branch probability
};

struct PathwayReport {
  std::vector<LeafRecord> leaves;  // ordered by path
  std::vector<BranchRecord> branches;
  std::size_t selected = 0;
  std::string selected_path;
  bool tie = false;
  double gap_log2 = 0;          // |log2 w1 - log2 w2| of the two heaviest leaves
  double leaf_weight_sum = 0;
  double coherent_overlap = 0;  // weight of the unprojected evolution
  double interference = 0;      // coherent_overlap - leaf_weight_sum
};

/// Two-state weights of every macroscopic pathway of `tree` between a pure
/// pre-selection and a pure post-selection.
PathwayReport run_tree(const State& initial, const DecisionTree& tree, const State& final);

/// Same with a final boundary density matrix (e.g. dephased in the witness basis).
PathwayReport run_tree(const State& initial, const DecisionTree& tree, const Density& final);

// --- bidirectional scenario ----------------------------------------------------

/// bang evolves forward through forward_steps; crunch is revolved towards the
/// border through backward_steps. Steps are unitaries or (agent) projectors.
struct BidirectionalScenario {
  State bang;
  State crunch;
  std::vector<Op> forward_steps;
  std::vector<Op> backward_steps;
  std::size_t n_decisions = 0;

  void validate() const;
  /// States after each forward step; element 0 is bang itself.
  std::vector<State> forward_history() const;
  State evolved_bang() const;
  State revolved_crunch() const;
};

struct BorderMatch {
  std::complex<double> overlap;     // <evolved bang | revolved crunch>
  State border;                     // dominant component of the border density
  double dominance_ratio;           // |lambda_1 / lambda_2|
  std::complex<double> factorized;  // <evolved bang|border><border|revolved crunch>
  State border_projector_variant;   // same from the symmetrized projector product
  double variant_dominance_ratio;
  bool variants_agree;
};

/// Builds the border density from the evolved bang and the revolved crunch and
/// returns its dominant component. Two constructions are computed: the
/// Hermitian part of |a><b| after aligning the global phase of b to make <a|b>
/// real positive, and the Hermitian part of the projector product P_a P_b.
BorderMatch match_border(const BidirectionalScenario& s, const Tolerances& tol = kDefaultTolerances);

/// Splices `op` after `at_step` forward steps and its complex conjugate after
/// `at_step` backward steps.
BidirectionalScenario agent_insert(const BidirectionalScenario& s, std::size_t at_step, const Op& op);

/// |<revolved crunch| P_k |evolved bang>|^2 for each member of the family,
/// i.e. the weights of alternative macroscopic branches at the border.
std::vector<double> branch_weights(const BidirectionalScenario& s, const MeasurementContext<double>& family);

struct OverlapScalingPoint {
  std::size_t log2_dim;
  double mean_log2_overlap_sq;
};

struct OverlapScaling {
  std::vector<OverlapScalingPoint> points;
  double slope;  // least-squares slope of mean log2 |<bang|crunch>|^2 against log2(dim)
};

/// Independent Haar bang and crunch states in dimension 2^n for each n.
OverlapScaling overlap_scaling(const std::vector<std::size_t>& log2_dims, std::size_t seeds, std::uint64_t seed,
                               unsigned workers = 1);

// --- Stern-Gerlach -------------------------------------------------------------

enum class FinalStateModel {
  joint_haar,   // one Haar state on spin + witnesses (dense; witness_count <= 12)
  product_haar  // independent Haar state per register (factorized; any witness_count)
};

struct SternGerlachOutcome {
  bool up_selected;
  bool tie;
  double log2_weight_up;
  double log2_weight_down;
  double gap_log2;
};

struct SternGerlachSummary {
  std::size_t runs;
  double up_fraction;
  double binomial_sigma;  // sqrt(p(1-p)/runs) at the Born weight of the preparation
  double born_up;
  double median_gap_log2;
  std::vector<SternGerlachOutcome> outcomes;
};

/// Spin prepared in `preparation` (a qubit state), split and amplified by a
/// CNOT fan-out into `witness_count` witness qubits, post-selected by a
/// seed-determined random final state. An optional agent unitary acts on the
/// spin before the split.
SternGerlachOutcome stern_gerlach_scenario(std::uint64_t seed, std::size_t witness_count, const State& preparation,
                                           FinalStateModel model = FinalStateModel::joint_haar,
                                           const std::optional<Matrix>& agent = std::nullopt);

SternGerlachSummary stern_gerlach_ensemble(std::size_t runs, std::uint64_t seed, std::size_t witness_count,
                                           const State& preparation, FinalStateModel model,
                                           const std::optional<Matrix>& agent = std::nullopt, unsigned workers = 1);

/// Bidirectional form of the Stern-Gerlach setup (joint model): bang is the
/// prepared spin with blank witnesses, the single forward step is the fan-out,
/// crunch is a Haar state and the backward evolution is trivial. Step 0 is
/// reserved for agent insertions (identity).
BidirectionalScenario stern_gerlach_bidirectional(std::uint64_t seed, std::size_t witness_count,
                                                  const State& preparation);

// --- two-path interferometer ---------------------------------------------------

struct CoexistingPathsReport {
  std::optional<double> witness_overlap;  // nullopt: no witness register
  std::vector<double> phases;
  std::vector<double> detection_probability;  // P(e_up) at each phase
  double visibility;
  double max_interference_term;  // max_phase |P - incoherent part|
};

/// Balanced two-path interferometer with a relative phase on the lower path.
/// When a witness is present, the lower path rotates it from |0> to
/// overlap|0> + sqrt(1-overlap^2)|1>.
CoexistingPathsReport coexisting_paths_check(std::optional<double> witness_overlap, std::size_t phase_points = 64);

}  // namespace tsvsim
