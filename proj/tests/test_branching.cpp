#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsvsim/branching.hpp"
#include "tsvsim/random.hpp"

using namespace tsvsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

MacroPartition pairs_partition(std::size_t dim) {
  MacroPartition p;
  for (std::size_t k = 0; k < dim; k += 2) p.push_back({"c" + std::to_string(k / 2), {k, k + 1}});
  return p;
}

// Layer of 2x2 rotations on neighbouring basis pairs; odd layers pair (1,2), (3,4), ...
Matrix decision_layer(std::size_t dim, std::size_t layer, RandomStream& rng) {
  const auto n = static_cast<Eigen::Index>(dim);
  Matrix m = Matrix::Identity(n, n);
  for (Eigen::Index i = static_cast<Eigen::Index>(layer % 2); i + 1 < n; i += 2) {
    const double t = rng.uniform(0.2, 1.3);
    m(i, i) = std::cos(t);
    m(i, i + 1) = -std::sin(t);
    m(i + 1, i) = std::sin(t);
    m(i + 1, i + 1) = std::cos(t);
  }
  return m;
}

/// Three Haar-prepared decisions, each recorded in its own witness qubit.
DecisionTree witnessed_tree(const BasisLabel& basis, RandomStream& rng) {
  std::vector<DecisionNode> levels;
  const BasisLabel q = BasisLabel::single("q", 2);
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string d = "d" + std::to_string(k), w = "w" + std::to_string(k);
    levels.push_back({d, d, haar_unitary<double>(q, rng).matrix(), {diag2(1, 0), diag2(0, 1)}, {d, w, {0, 1}}});
  }
  return DecisionTree(basis, std::move(levels));
}

const BasisLabel kWitnessed = BasisLabel::qubits({"d0", "d1", "d2", "w0", "w1", "w2"});

/// Dense projector chain for one leaf of witnessed_tree, built independently of run_tree.
Matrix leaf_chain(const DecisionTree& tree, std::size_t leaf) {
  const BasisLabel& basis = tree.basis();
  const auto n = static_cast<Eigen::Index>(basis.dimension());
  Matrix chain = Matrix::Identity(n, n);
  for (std::size_t k = 0; k < tree.depth(); ++k) {
    const auto& node = tree.levels()[k];
    const std::size_t b = (leaf >> (tree.depth() - 1 - k)) & 1u;
    const Matrix prep = embed_matrix<double>(basis, {node.register_name}, node.preparation);
    const Matrix proj = embed_matrix<double>(basis, {node.register_name}, node.projectors[b]);
    Matrix flip = Matrix::Identity(n, n);
    if (b == 1) flip = embed_matrix<double>(basis, {node.witness.register_name}, pauli_x<double>());
    chain = (flip * proj * prep * chain).eval();
  }
  return chain;
}

}  // namespace

TEST_CASE("partitions must be disjoint and covering", "[branching]") {
  CHECK_NOTHROW(validate_partition(pairs_partition(4), 4));
  CHECK_THROWS_AS(validate_partition({{"a", {0, 1}}, {"b", {1, 2, 3}}}, 4), ContractViolation);
  CHECK_THROWS_AS(validate_partition({{"a", {0, 1}}, {"b", {2}}}, 4), ContractViolation);
  CHECK_THROWS_AS(validate_partition({{"a", {0, 1, 2, 3, 4}}}, 4), ContractViolation);
}

TEST_CASE("pathway multiplicity", "[branching]") {
  const BasisLabel basis = BasisLabel::qubits({"a", "b", "c"});
  const auto part = pairs_partition(8);

  SECTION("no evolution counts the occupied classes") {
    CHECK(pathway_multiplicity(part, part, Op::identity(basis), 1e-12).count == 4);
  }
  SECTION("one decision at most doubles the count") {
    const auto u = embed<double>(basis, {"b"}, Op::unitary(BasisLabel::single("q", 2), hadamard<double>()));
    const auto r = pathway_multiplicity(part, part, u, 1e-12);
    CHECK(r.count <= 8);
    CHECK(r.count == 8);
  }
  SECTION("deep alternating circuit against layer-by-layer enumeration") {
    RandomStream rng(11, "deep_circuit");
    std::vector<Matrix> layers;
    for (std::size_t k = 0; k < 32; ++k) layers.push_back(decision_layer(8, k, rng));
    std::size_t previous = 0;
    for (std::size_t depth : {1, 2, 3, 4, 8, 32}) {
      Matrix u = Matrix::Identity(8, 8);
      for (std::size_t k = 0; k < depth; ++k) u = (layers[k] * u).eval();
      const auto r = pathway_multiplicity(part, part, Op::unitary(basis, u), 1e-12);

      // Oracle: push every member basis state through the layers one at a time.
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 4);
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t i : part[a].members) {
          Vector v = Vector::Zero(8);
          v(static_cast<Eigen::Index>(i)) = 1;
          for (std::size_t k = 0; k < depth; ++k) v = (layers[k] * v).eval();
          for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t j : part[b].members) w(a, b) += std::norm(v(static_cast<Eigen::Index>(j))) / 2;
        }
      std::size_t count = 0;
      for (Eigen::Index a = 0; a < 4; ++a)
        for (Eigen::Index b = 0; b < 4; ++b) count += w(a, b) > 1e-12 ? 1 : 0;
      CHECK((r.weights - w).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(r.count == count);
      CHECK(r.count >= previous);
      previous = r.count;
    }
    CHECK(previous == 16);
  }
}

TEST_CASE("decision tree validation", "[branching]") {
  const BasisLabel basis = BasisLabel::qubits({"s", "w"});
  const DecisionNode good{"d", "s", Matrix::Identity(2, 2), {diag2(1, 0), diag2(0, 1)}, {"d", "w", {0, 1}}};
  CHECK_NOTHROW(DecisionTree(basis, {good}));
  auto bad = good;
  bad.projectors[1] = diag2(1, 0);
  CHECK_THROWS_AS(DecisionTree(basis, {bad}), ContractViolation);
  bad = good;
  bad.witness.record_map = {1, 1};
  CHECK_THROWS_AS(DecisionTree(basis, {bad}), ContractViolation);
  bad = good;
  bad.witness.register_name = "missing";
  CHECK_THROWS_AS(DecisionTree(basis, {bad}), BasisError);
  bad = good;
  bad.preparation = diag2(1, 2);
  CHECK_THROWS_AS(DecisionTree(basis, {bad}), ContractViolation);
  auto second = good;
  second.decision_id = "e";
  second.witness.decision_id = "e";
  CHECK_THROWS_AS(DecisionTree(basis, {good, second}), ContractViolation);  // witness reused
}

TEST_CASE("run_tree single witnessed decision", "[branching]") {
  const BasisLabel basis = BasisLabel::qubits({"s", "w"});
  const DecisionTree tree(basis, {{"d", "s", Matrix::Identity(2, 2), {diag2(1, 0), diag2(0, 1)}, {"d", "w", {0, 1}}}});
  const State initial = tensor(x_plus<double>(BasisLabel::single("s", 2)), State::basis_state(BasisLabel::single("w", 2), 0));

  SECTION("fully witnessing final state forces the branch") {
    const auto r = run_tree(initial, tree, State::basis_state(basis, 0));
    CHECK(r.selected_path == "0");
    CHECK_THAT(r.leaves[0].probability, WithinAbs(1.0, 1e-15));
    CHECK(r.leaves[1].weight == 0.0);
    CHECK_FALSE(r.tie);
  }
  SECTION("final state orthogonal to both records") {
    CHECK_THROWS_AS(run_tree(initial, tree, State::basis_state(basis, 1)), IncompatibleBoundaryError);
  }
  SECTION("symmetric final state is a flagged tie resolved to the left leaf") {
    const Vector f = (Vector(4) << 1, 0, 0, 1).finished() / std::sqrt(2.0);
    const auto r = run_tree(initial, tree, State(basis, f));
    CHECK(r.tie);
    CHECK(r.selected_path == "0");
    CHECK_THAT(r.gap_log2, WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("run_tree over ten unbiased decisions", "[branching]") {
  std::vector<std::string> names;
  for (int k = 0; k < 10; ++k) names.push_back("q" + std::to_string(k));
  const BasisLabel basis = BasisLabel::qubits(names);
  const auto tree = DecisionTree::unbiased_qubits(basis, names);
  RandomStream rng(7, "haar_final");
  const State f = haar_state<double>(basis, rng);
  const State initial = State::basis_state(basis, 0);
  const auto r = run_tree(initial, tree, f);

  // Brute force: leaf path p is the computational basis state |p> with amplitude 2^-5.
  REQUIRE(r.leaves.size() == 1024);
  double sum = 0, best = -1;
  std::size_t arg = 0;
  for (std::size_t l = 0; l < 1024; ++l) {
    const double w = std::norm(f[l]) / 1024.0;
    CHECK_THAT(r.leaves[l].weight, WithinRel(w, 1e-10));
    sum += w;
    if (w > best) best = w, arg = l;
  }
  CHECK_THAT(r.leaf_weight_sum, WithinRel(sum, 1e-12));
  CHECK(r.selected == arg);
  CHECK_FALSE(r.tie);
  std::size_t at_max = 0;
  for (const auto& leaf : r.leaves) at_max += leaf.weight == r.leaves[r.selected].weight ? 1 : 0;
  CHECK(at_max == 1);

  // The coherent overlap of a pure post-selection keeps the cross-record terms.
  Vector h = Vector::Constant(1024, 1.0 / 32.0);
  CHECK_THAT(r.coherent_overlap, WithinRel(std::norm(f.amplitudes().dot(h)), 1e-10));
  CHECK_THAT(r.interference, WithinAbs(r.coherent_overlap - r.leaf_weight_sum, 1e-15));
}

TEST_CASE("witnessed leaves against the dense projector chain", "[branching]") {
  RandomStream rng(21, "witnessed_tree");
  const auto tree = witnessed_tree(kWitnessed, rng);
  const State initial = State::basis_state(kWitnessed, 0);
  const State f = haar_state<double>(kWitnessed, rng);
  const auto r = run_tree(initial, tree, f);
  for (std::size_t l = 0; l < 8; ++l) {
    const double w = std::norm(f.amplitudes().dot(leaf_chain(tree, l) * initial.amplitudes()));
    CHECK_THAT(r.leaves[l].weight, WithinRel(w, 1e-10));
  }

  SECTION("leaf log weight is the sum of branch log weights plus the root total") {
    for (std::size_t l = 0; l < 8; ++l) {
      double acc = std::log2(r.leaf_weight_sum);
      std::string prefix;
      for (char c : r.leaves[l].path) {
        const auto it = std::find_if(r.branches.begin(), r.branches.end(),
                                     [&](const BranchRecord& b) { return b.prefix == prefix; });
        REQUIRE(it != r.branches.end());
        acc += it->log2_weight[c == '1' ? 1 : 0];
        prefix += c;
      }
      CHECK_THAT(acc, WithinAbs(r.leaves[l].log2_weight, 1e-9));
    }
  }
  SECTION("one-level leaves equal the postponed two-state probability") {
    const BasisLabel small = BasisLabel::qubits({"d0", "w0"});
    const auto& node = tree.levels()[0];
    const DecisionTree one(small, {node});
    const State i1 = State::basis_state(small, 0);
    const State f1 = haar_state<double>(small, rng);
    const auto r1 = run_tree(i1, one, f1);
    const auto v = compose(Op::unitary(small, *one.recording(0)),
                           embed<double>(small, {"d0"}, Op::unitary(BasisLabel::single("q", 2), node.preparation)));
    const auto family = MeasurementContext<double>(
        {Op::projector(small, embed_matrix<double>(small, {"d0"}, node.projectors[0])),
         Op::projector(small, embed_matrix<double>(small, {"d0"}, node.projectors[1]))});
    const auto moved = postpone(family, Op::unitary(small, *one.recording(0)));
    const auto b = BoundaryPair<double>::from_propagator(Density::pure(i1), Density::pure(f1), v);
    for (std::size_t k = 0; k < 2; ++k)
      CHECK_THAT(probability_m(b, moved[k]), WithinRel(r1.leaves[k].weight / r1.coherent_overlap, 1e-9));
  }
}

TEST_CASE("witness-decohered final boundary makes leaf weights additive", "[branching]") {
  RandomStream rng(5, "decohered_tree");
  for (int trial = 0; trial < 10; ++trial) {
    const auto tree = witnessed_tree(kWitnessed, rng);
    // Witnesses start blank; the decision registers are arbitrary.
    const State initial = tensor(haar_state<double>(BasisLabel::qubits({"d0", "d1", "d2"}), rng),
                                 State::basis_state(BasisLabel::qubits({"w0", "w1", "w2"}), 0));
    const Matrix rho = Density::pure(haar_state<double>(kWitnessed, rng)).matrix();
    // Dephase in the witness-record basis.
    Matrix dephased = Matrix::Zero(64, 64);
    for (std::size_t rec = 0; rec < 8; ++rec) {
      Matrix p = Matrix::Zero(64, 64);
      for (std::size_t i = 0; i < 64; ++i)
        if ((i & 7u) == rec) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1;
      dephased += p * rho * p;
    }
    const auto r = run_tree(initial, tree, Density(kWitnessed, dephased, false));
    CHECK(std::abs(r.interference) < 1e-9);
    CHECK(std::abs(run_tree(initial, tree, Density(kWitnessed, rho, false)).interference) > 1e-9);
  }
}

TEST_CASE("selected pathway is invariant under uniform rescaling", "[branching]") {
  RandomStream rng(3, "rescale");
  const auto tree = witnessed_tree(kWitnessed, rng);
  const State initial = State::basis_state(kWitnessed, 0);
  const State f = haar_state<double>(kWitnessed, rng);
  const auto r = run_tree(initial, tree, f);
  for (double scale : {1e-6, 0.3, 17.0}) {
    const auto s = run_tree(initial, tree, State(kWitnessed, f.amplitudes() * scale));
    CHECK(s.selected == r.selected);
    CHECK_THAT(s.leaves[s.selected].log2_weight - r.leaves[r.selected].log2_weight,
               WithinAbs(2 * std::log2(scale), 1e-9));
  }
}

TEST_CASE("border matching", "[branching]") {
  const BasisLabel basis = BasisLabel::single("u", 8);
  RandomStream rng(9, "border");

  SECTION("self match") {
    const State bang = haar_state<double>(basis, rng);
    const auto u = haar_unitary<double>(basis, rng);
    const BidirectionalScenario s{bang, evolve(bang, u), {u}, {}, 1};
    const auto m = match_border(s);
    CHECK_THAT(std::abs(m.overlap), WithinAbs(1.0, 1e-12));
    CHECK_THAT(std::abs(inner(m.border, s.evolved_bang())), WithinAbs(1.0, 1e-12));
    CHECK(std::isinf(m.dominance_ratio));
  }
  SECTION("orthogonal boundaries") {
    const BidirectionalScenario s{State::basis_state(basis, 0), State::basis_state(basis, 1), {}, {}, 0};
    CHECK_THROWS_AS(match_border(s), IncompatibleBoundaryError);
  }
  SECTION("dense diagonalization oracle") {
    for (int trial = 0; trial < 20; ++trial) {
      const BidirectionalScenario s{haar_state<double>(basis, rng), haar_state<double>(basis, rng),
                                    {haar_unitary<double>(basis, rng)}, {haar_unitary<double>(basis, rng)}, 1};
      const auto m = match_border(s);
      const Vector a = s.evolved_bang().amplitudes(), b = s.revolved_crunch().amplitudes();
      CHECK_THAT(std::abs(m.overlap - a.dot(b)), WithinAbs(0.0, 1e-12));
      const std::complex<double> c = a.dot(b);
      const Vector bt = b * (std::conj(c) / std::abs(c));
      Matrix h = a * bt.adjoint();
      h = (h + h.adjoint()).eval() / 2.0;
      Eigen::SelfAdjointEigenSolver<Matrix> es(h);
      Eigen::Index top = 0;
      es.eigenvalues().cwiseAbs().maxCoeff(&top);
      std::vector<double> mags(8);
      for (Eigen::Index k = 0; k < 8; ++k) mags[static_cast<std::size_t>(k)] = std::abs(es.eigenvalues()(k));
      std::sort(mags.rbegin(), mags.rend());
      CHECK_THAT(std::abs(es.eigenvectors().col(top).dot(m.border.amplitudes())), WithinAbs(1.0, 1e-9));
      CHECK_THAT(m.dominance_ratio, WithinRel(mags[0] / mags[1], 1e-8));
      CHECK(m.dominance_ratio >= 1.0);
      CHECK(m.variants_agree);
      CHECK_THAT(m.variant_dominance_ratio, WithinRel(m.dominance_ratio, 1e-8));
      const std::complex<double> fac = a.dot(m.border.amplitudes()) * m.border.amplitudes().dot(b);
      CHECK(std::abs(m.factorized - fac) < 1e-12);
    }
  }
}

TEST_CASE("Haar overlap scaling", "[branching]") {
  const auto r = overlap_scaling({4, 5, 6, 7, 8, 9, 10}, 100, 2024);
  CHECK_THAT(r.slope, WithinAbs(-1.0, 0.1));
  // |<a|b>|^2 ~ Beta(1, D-1): E ln = psi(1) - psi(D), sd of one sample ~ pi/sqrt(6) nats.
  const double euler = 0.5772156649015329;
  for (const auto& p : r.points) {
    const double d = std::exp2(static_cast<double>(p.log2_dim));
    const double psi_d = std::log(d) - 1 / (2 * d) - 1 / (12 * d * d);
    const double expected = (-euler - psi_d) / std::log(2.0);
    const double se = M_PI / std::sqrt(6.0) / std::log(2.0) / 10.0;
    CHECK(std::abs(p.mean_log2_overlap_sq - expected) < 4 * se);
  }
  CHECK(overlap_scaling({4, 6}, 40, 1, 3).slope == overlap_scaling({4, 6}, 40, 1, 1).slope);
}

TEST_CASE("agent insertion", "[branching]") {
  const BasisLabel basis = BasisLabel::qubits({"a", "b", "c"});
  RandomStream rng(4, "agent");
  BidirectionalScenario s{haar_state<double>(basis, rng), haar_state<double>(basis, rng), {}, {}, 3};
  for (int k = 0; k < 4; ++k) {
    s.forward_steps.push_back(haar_unitary<double>(basis, rng));
    s.backward_steps.push_back(haar_unitary<double>(basis, rng));
  }

  SECTION("identity leaves the border unchanged") {
    const auto before = match_border(s);
    const auto after = match_border(agent_insert(s, 2, Op::identity(basis)));
    CHECK(std::abs(after.overlap - before.overlap) < 1e-10);
    CHECK((after.border.amplitudes() - before.border.amplitudes()).cwiseAbs().maxCoeff() < 1e-10);
  }
  SECTION("splice is local in time") {
    const auto flip = embed<double>(basis, {"b"}, Op::unitary(BasisLabel::single("q", 2), pauli_x<double>()));
    const auto inserted = agent_insert(s, 2, flip);
    const auto h0 = s.forward_history(), h1 = inserted.forward_history();
    for (std::size_t k = 0; k <= 2; ++k) CHECK(h0[k].amplitudes() == h1[k].amplitudes());
    CHECK(inserted.backward_steps[2].matrix() == flip.matrix().conjugate());
    CHECK(std::abs(match_border(inserted).overlap - match_border(s).overlap) > 1e-6);
  }
  SECTION("errors") {
    CHECK_THROWS_AS(agent_insert(s, 5, Op::identity(basis)), RangeError);
    CHECK_THROWS_AS(agent_insert(s, 1, Op::general(basis, Matrix::Identity(8, 8) * 2.0)), ContractViolation);
  }
}

TEST_CASE("Stern-Gerlach selection statistics", "[branching]") {
  const BasisLabel qubit = BasisLabel::single("spin", 2);
  const State up = State::basis_state(qubit, 0);

  CHECK_THROWS_AS(stern_gerlach_scenario(1, 0, up), ContractViolation);

  SECTION("pure up is always selected") {
    const auto r = stern_gerlach_ensemble(500, 3, 4, up, FinalStateModel::joint_haar);
    CHECK(r.up_fraction == 1.0);
  }
  SECTION("symmetric preparation selects up half the time") {
    const auto r = stern_gerlach_ensemble(10000, 42, 4, x_plus<double>(qubit), FinalStateModel::joint_haar, {}, 2);
    CHECK(std::abs(r.up_fraction - 0.5) <= 3 * r.binomial_sigma);
  }
  SECTION("joint model matches the bidirectional form") {
    const Op p0 = Op::projector(BasisLabel::qubits({"spin", "w0", "w1", "w2"}),
                                embed_matrix<double>(BasisLabel::qubits({"spin", "w0", "w1", "w2"}), {"spin"}, diag2(1, 0)));
    const auto family = MeasurementContext<double>::binary(p0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto o = stern_gerlach_scenario(seed, 3, x_plus<double>(qubit));
      const auto w = branch_weights(stern_gerlach_bidirectional(seed, 3, x_plus<double>(qubit)), family);
      CHECK_THAT(o.log2_weight_up, WithinAbs(std::log2(w[0]), 1e-9));
      CHECK_THAT(o.log2_weight_down, WithinAbs(std::log2(w[1]), 1e-9));
    }
  }
  SECTION("agent rotation flips the selection at the Born rate of the rotated preparation") {
    const double theta = 2 * M_PI / 3;  // cos^2(theta/2) = 1/4
    const auto rot = rotation_y<double>(theta);
    const auto direct = stern_gerlach_ensemble(4000, 8, 4, up, FinalStateModel::joint_haar, rot);
    CHECK_THAT(direct.born_up, WithinAbs(0.25, 1e-12));
    CHECK(std::abs(direct.up_fraction - 0.25) <= 3 * direct.binomial_sigma);

    const BasisLabel basis = BasisLabel::qubits({"spin", "w0", "w1", "w2", "w3"});
    const auto agent = embed<double>(basis, {"spin"}, Op::unitary(BasisLabel::single("q", 2), rot));
    const auto family = MeasurementContext<double>::binary(
        Op::projector(basis, embed_matrix<double>(basis, {"spin"}, diag2(1, 0))));
    const std::size_t runs = 2000;
    std::size_t ups = 0, unmodified_ups = 0;
    for (std::uint64_t seed = 0; seed < runs; ++seed) {
      const auto s = stern_gerlach_bidirectional(seed, 4, up);
      const auto w0 = branch_weights(s, family);
      const auto w1 = branch_weights(agent_insert(s, 0, agent), family);
      unmodified_ups += w0[0] >= w0[1] ? 1 : 0;
      ups += w1[0] >= w1[1] ? 1 : 0;
    }
    CHECK(unmodified_ups == runs);
    const double frac = static_cast<double>(ups) / runs;
    CHECK(std::abs(frac - 0.25) <= 3 * std::sqrt(0.25 * 0.75 / runs));
  }
  SECTION("product final state matches a dense evaluation") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto o = stern_gerlach_scenario(seed, 5, x_plus<double>(qubit), FinalStateModel::product_haar);
      RandomStream rng(seed, "stern_gerlach", 0);
      State f = haar_state<double>(BasisLabel::single("spin", 2), rng);
      for (int k = 0; k < 5; ++k) f = tensor(f, haar_state<double>(BasisLabel::single("w" + std::to_string(k), 2), rng));
      Vector a = Vector::Zero(64), b = Vector::Zero(64);
      a(0) = b(63) = 1 / std::sqrt(2.0);
      CHECK_THAT(o.log2_weight_up, WithinAbs(std::log2(std::norm(f.amplitudes().dot(a))), 1e-9));
      CHECK_THAT(o.log2_weight_down, WithinAbs(std::log2(std::norm(f.amplitudes().dot(b))), 1e-9));
    }
  }
  SECTION("gap median grows like the square root of the decision count") {
    std::vector<double> scaled;
    for (std::size_t n : {16, 64, 256}) {
      const auto r = stern_gerlach_ensemble(100, 77, n, x_plus<double>(qubit), FinalStateModel::product_haar);
      scaled.push_back(r.median_gap_log2 / std::sqrt(static_cast<double>(n)));
    }
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    CHECK(*hi / *lo <= 2.0);
  }
}

TEST_CASE("two-path interferometer visibility", "[branching]") {
  const auto bare = coexisting_paths_check(std::nullopt);
  CHECK_THAT(bare.visibility, WithinAbs(1.0, 1e-10));
  for (double s : {0.0, 0.25, 0.5, 1.0}) {
    const auto r = coexisting_paths_check(s);
    CHECK_THAT(r.visibility, WithinAbs(s, 1e-10));
    for (std::size_t k = 0; k < r.phases.size(); ++k)
      CHECK_THAT(r.detection_probability[k], WithinAbs(0.5 * (1 + s * std::cos(r.phases[k])), 1e-12));
  }
  CHECK(coexisting_paths_check(0.0).max_interference_term < 1e-10);
  CHECK_THROWS_AS(coexisting_paths_check(1.5), RangeError);
}
