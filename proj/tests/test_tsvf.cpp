#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsvsim/tsvf.hpp"

using namespace tsvsim;
using Catch::Matchers::WithinAbs;

namespace {

const BasisLabel kQubit = BasisLabel::single("s", 2);

Operator<double> proj(std::size_t k) {
  return Operator<double>::projector_onto(StateVector<double>::basis_state(kQubit, k));
}

DensityMatrix<double> pure(const StateVector<double>& s) { return DensityMatrix<double>::pure(s); }

StateVector<double> ket(std::size_t k) { return StateVector<double>::basis_state(kQubit, k); }

/// Random projector of rank dim/2 (Haar-rotated half of the computational basis).
Operator<double> random_half_projector(const BasisLabel& basis, RandomStream& rng) {
  const auto u = haar_unitary<double>(basis, rng);
  const auto n = static_cast<Eigen::Index>(basis.dimension());
  MatrixX<double> d = MatrixX<double>::Zero(n, n);
  for (Eigen::Index i = 0; i < n / 2; ++i) d(i, i) = 1.0;
  return Operator<double>::projector(basis, u.matrix() * d * u.matrix().adjoint(), 1e-9);
}

}  // namespace

TEST_CASE("measurement context validation", "[tsvf]") {
  CHECK_NOTHROW(MeasurementContext<double>({proj(0), proj(1)}));
  CHECK_THROWS_AS(MeasurementContext<double>({proj(0)}), ContractViolation);
  CHECK_THROWS_AS(MeasurementContext<double>({proj(0), proj(0)}), ContractViolation);
  const auto fam = MeasurementContext<double>::register_basis(BasisLabel({"a", "b"}, {2, 3}), "b");
  CHECK(fam.size() == 3);
}

TEST_CASE("postpone", "[tsvf]") {
  const MeasurementContext<double> fam({proj(0), proj(1)}, "t");
  const auto same = postpone(fam, Operator<double>::identity(kQubit));
  CHECK(detail::max_abs<double>(same[0].matrix() - proj(0).matrix()) == 0.0);

  const auto x = Operator<double>::unitary(kQubit, pauli_x<double>());
  const auto flipped = postpone(fam, x);
  CHECK(detail::max_abs<double>(flipped[0].matrix() - proj(1).matrix()) < 1e-15);
  CHECK(flipped[0].is_projector());

  CHECK_THROWS_AS(postpone(fam, Operator<double>::general(kQubit, pauli_x<double>())), ContractViolation);

  RandomStream rng(1, "postpone");
  const auto basis = BasisLabel::qubits({"a", "b", "c"});
  const auto fam3 = MeasurementContext<double>::register_basis(basis, "b");
  const auto u = haar_unitary<double>(basis, rng);
  const auto moved = postpone(fam3, u);
  MatrixX<double> sum = MatrixX<double>::Zero(8, 8);
  for (const auto& p : moved) sum += p.matrix();
  CHECK(detail::max_abs<double>(sum - MatrixX<double>::Identity(8, 8)) < 1e-9);
}

TEST_CASE("postponement identity U M = M' U", "[tsvf][property]") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    RandomStream rng(seed, "postpone_identity");
    const auto basis = BasisLabel({"s", "w"}, {2, 2 + seed % 7});
    const auto fam = MeasurementContext<double>::register_basis(basis, "s");
    const auto u = haar_unitary<double>(basis, rng);
    const auto moved = postpone(fam, u);
    for (std::size_t k = 0; k < fam.size(); ++k)
      CHECK(detail::max_abs<double>(u.matrix() * fam[k].matrix() - moved[k].matrix() * u.matrix()) < 1e-9);
  }
}

TEST_CASE("probability_m hand cases", "[tsvf]") {
  const auto id = Operator<double>::identity(kQubit);
  {
    const auto b = BoundaryPair<double>::from_propagator(pure(ket(0)), pure(ket(0)), id);
    CHECK_THAT(probability_m(b, proj(0)), WithinAbs(1.0, 1e-15));
  }
  {
    // numerator for P_1 contains <1|0> = 0; P_0 gives (1/2)/(1/2)
    const auto b = BoundaryPair<double>::from_propagator(pure(x_plus<double>(kQubit)), pure(ket(0)), id);
    CHECK_THAT(probability_m(b, proj(0)), WithinAbs(1.0, 1e-15));
    CHECK_THAT(probability_m(b, proj(1)), WithinAbs(0.0, 1e-15));
  }
  {
    // both numerators are 1/4 while Tr(rho_i rho_f) = 0: only the family-normalized form is defined
    const auto b =
        BoundaryPair<double>::from_propagator(pure(x_plus<double>(kQubit)), pure(x_minus<double>(kQubit)), id);
    CHECK(b.incompatible());
    CHECK_THROWS_AS(probability_m(b, proj(0)), IncompatibleBoundaryError);
    const auto fam = probability_family(b, {proj(0), proj(1)});
    CHECK_THAT(fam[0], WithinAbs(0.5, 1e-15));
    CHECK_THAT(fam[1], WithinAbs(0.5, 1e-15));
  }
  {
    const auto b = BoundaryPair<double>::from_propagator(pure(ket(0)), pure(ket(0)), id);
    CHECK_THROWS_AS(probability_m(b, id), ContractViolation);  // identity is not marked projector
  }
}

TEST_CASE("probability_m sums to one over a decohered family", "[tsvf][property]") {
  // system qubit recorded by a CNOT into a witness qutrit: cross terms vanish
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    RandomStream rng(seed, "decohered_family");
    const auto basis = BasisLabel({"s", "w"}, {2, 3});
    MatrixX<double> record = MatrixX<double>::Zero(6, 6);
    for (int s = 0; s < 2; ++s)
      for (int w = 0; w < 3; ++w) record(s * 3 + (w + s) % 3, s * 3 + w) = 1.0;
    const auto local = haar_unitary<double>(BasisLabel::single("s", 2), rng);
    const auto prep = embed(basis, {"s"}, local);
    const auto v = compose(Operator<double>::unitary(basis, record), prep);
    const auto fam = postpone(MeasurementContext<double>::register_basis(basis, "s"), Operator<double>::unitary(basis, record));
    const auto i = StateVector<double>::basis_state(basis, 0);
    // final boundary post-selects the system only; the witness is left open
    const auto fs = pure(haar_state<double>(BasisLabel::single("s", 2), rng));
    const auto final = tensor(fs, DensityMatrix<double>::maximally_mixed(BasisLabel::single("w", 3)));
    const auto b = BoundaryPair<double>::from_propagator(pure(i), final, v);
    double total = 0;
    for (const auto& m : fam) total += probability_m(b, m);
    CHECK_THAT(total, WithinAbs(1.0, 1e-8));
  }
}

TEST_CASE("update_final", "[tsvf]") {
  const auto id = Operator<double>::identity(kQubit);
  const auto b = BoundaryPair<double>::from_propagator(pure(ket(0)), pure(x_plus<double>(kQubit)), id);
  const auto u = update_final(b, proj(0));
  MatrixX<double> expected = MatrixX<double>::Zero(2, 2);
  expected(0, 0) = 0.5;
  CHECK(detail::max_abs<double>(u.final_matrix() - expected) < 1e-15);
  CHECK_THAT(u.final_trace(), WithinAbs(0.5, 1e-15));
  CHECK_FALSE(u.final_shape().normalized());

  const auto unchanged = update_final(b, Operator<double>::projector(kQubit, MatrixX<double>::Identity(2, 2)));
  CHECK(detail::max_abs<double>(unchanged.final_matrix() - b.final_matrix()) < 1e-15);

  CHECK_THROWS_AS(update_final(update_final(b, proj(0)), proj(1)), IncompatibleBoundaryError);
}

TEST_CASE("update_final trace concentrates near 2^-n", "[tsvf][property]") {
  const auto basis = BasisLabel::qubits({"a", "b", "c", "d"});
  constexpr int n = 16;
  double sum = 0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    RandomStream rng(run, "trace_chain");
    auto b = BoundaryPair<double>::from_propagator(DensityMatrix<double>::maximally_mixed(basis),
                                                   DensityMatrix<double>::maximally_mixed(basis),
                                                   Operator<double>::identity(basis));
    for (int k = 0; k < n; ++k) b = update_final(b, random_half_projector(basis, rng));
    sum += b.final_trace_log2() / n;
  }
  const double mean = sum / 100.0;
  CHECK(mean >= -1.2);
  CHECK(mean <= -0.8);
}

TEST_CASE("long update chains stay in the log domain", "[tsvf]") {
  const auto id = Operator<double>::identity(kQubit);
  auto b = BoundaryPair<double>::from_propagator(pure(ket(0)), DensityMatrix<double>::maximally_mixed(kQubit), id);
  const auto half = Operator<double>::projector_onto(x_plus<double>(kQubit));
  const auto zero = proj(0);
  for (int k = 0; k < 1200; ++k) b = update_final(b, k % 2 ? half : zero);
  CHECK(std::isfinite(b.final_trace_log2()));
  CHECK(b.final_trace_log2() < -1000.0);
  // probability ratios are unaffected by the scale
  CHECK(std::isfinite(probability_m(b, zero)));
}

TEST_CASE("dominant_vector", "[tsvf]") {
  const auto rank1 = dominant_vector(pure(x_plus<double>(kQubit)));
  CHECK(std::isinf(rank1.dominance_ratio));
  CHECK(rank1.admissible());
  CHECK((rank1.vector.amplitudes() - x_plus<double>(kQubit).amplitudes()).norm() < 1e-12);

  MatrixX<double> diag = MatrixX<double>::Zero(2, 2);
  diag(0, 0) = 0.9;
  diag(1, 1) = 0.1;
  const auto d = dominant_vector(DensityMatrix<double>(kQubit, diag, true));
  CHECK_THAT(d.eigenvalue, WithinAbs(0.9, 1e-14));
  CHECK_THAT(d.dominance_ratio, WithinAbs(9.0, 1e-12));
  CHECK_FALSE(d.admissible());
  CHECK(d.admissible(5.0));
}

TEST_CASE("dominant_vector after random projector chains matches a general eigensolver", "[tsvf]") {
  const auto basis = BasisLabel::qubits({"a", "b", "c", "d"});
  std::vector<double> ratios;
  for (std::uint64_t run = 0; run < 20; ++run) {
    RandomStream rng(run, "dominance_chain");
    auto b = BoundaryPair<double>::from_propagator(DensityMatrix<double>::maximally_mixed(basis),
                                                   DensityMatrix<double>::maximally_mixed(basis),
                                                   Operator<double>::identity(basis));
    for (int k = 0; k < 20; ++k) b = update_final(b, random_half_projector(basis, rng));
    const auto dom = dominant_vector(b.final_shape());

    // oracle: non-Hermitian eigen path, eigenvalues sorted by real part
    Eigen::ComplexEigenSolver<MatrixX<double>> ces(b.final_shape().matrix());
    std::vector<double> ev;
    for (Eigen::Index k = 0; k < ces.eigenvalues().size(); ++k) ev.push_back(ces.eigenvalues()(k).real());
    std::sort(ev.rbegin(), ev.rend());
    CHECK_THAT(dom.eigenvalue, WithinAbs(ev[0], 1e-9));
    if (ev[1] > 1e-9) CHECK(std::abs(dom.dominance_ratio / (ev[0] / ev[1]) - 1.0) < 1e-6);

    // rank-1 reconstruction error bounded by lambda_2 in operator norm
    const auto v = dom.vector.amplitudes();
    const MatrixX<double> residual = b.final_shape().matrix() - dom.eigenvalue * v * v.adjoint();
    Eigen::SelfAdjointEigenSolver<MatrixX<double>> es(residual, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().cwiseAbs().maxCoeff() <= ev[1] + 1e-9);
    ratios.push_back(dom.dominance_ratio);
  }
  // repeated projections drive the final boundary towards a single component
  std::sort(ratios.begin(), ratios.end());
  CHECK(ratios[ratios.size() / 2] > 1.0);
}

TEST_CASE("abl hand cases", "[tsvf]") {
  const auto id = Operator<double>::identity(kQubit);
  const MeasurementContext<double> fam({proj(0), proj(1)});
  auto check = [&](const StateVector<double>& i, const StateVector<double>& f, double p0, double p1) {
    const auto r = abl_probability(i, f, id, id, fam);
    CHECK_THAT(r.distribution[0], WithinAbs(p0, 1e-12));
    CHECK_THAT(r.distribution[1], WithinAbs(p1, 1e-12));
  };
  check(ket(0), ket(0), 1.0, 0.0);
  check(x_plus<double>(kQubit), ket(0), 1.0, 0.0);
  check(x_plus<double>(kQubit), x_minus<double>(kQubit), 0.5, 0.5);

  // the overlap-normalized form is undefined when <i|f> = 0 and equals 1 for (x+, 0)
  CHECK(abl_probability(x_plus<double>(kQubit), x_minus<double>(kQubit), id, id, fam).overlap_form.empty());
  const auto r = abl_probability(x_plus<double>(kQubit), ket(0), id, id, fam);
  CHECK_THAT(r.overlap_form[0], WithinAbs(1.0, 1e-12));

  // all numerators zero: <0|P_k|1> = 0 for both k
  CHECK_THROWS_AS(abl_probability(ket(0), ket(1), id, id, fam), IncompatibleBoundaryError);
}

TEST_CASE("abl with completely mixed final boundary reproduces Born", "[tsvf][property]") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RandomStream rng(seed, "abl_born");
    const auto basis = BasisLabel({"s", "t"}, {2, 2 + seed % 7});
    const auto i = haar_state<double>(basis, rng);
    const auto ub = haar_unitary<double>(basis, rng);
    const auto ua = haar_unitary<double>(basis, rng);
    const auto fam = MeasurementContext<double>::register_basis(basis, "t");
    const auto mixed = abl_probability_mixed(i, DensityMatrix<double>::maximally_mixed(basis), ub, ua, fam);
    const auto rotated = StateVector<double>(basis, ub.matrix().adjoint() * i.amplitudes());
    const auto born = born_probabilities(rotated, fam);
    for (std::size_t k = 0; k < born.size(); ++k) CHECK_THAT(mixed[k], WithinAbs(born[k], 1e-10));
  }
}

TEST_CASE("born_limit_check", "[tsvf]") {
  const MeasurementContext<double> fam({proj(0), proj(1)});
  const auto eigen = born_limit_check(ket(0), fam, 10, 1);
  CHECK_THAT(eigen.born[0], WithinAbs(1.0, 1e-15));
  CHECK_THAT(eigen.mixed_final[0], WithinAbs(1.0, 1e-10));
  CHECK(eigen.selected_frequency[0] == 1.0);

  const std::size_t trials = 10000;
  const auto r = born_limit_check(x_plus<double>(kQubit), fam, trials, 42);
  CHECK(r.max_mixed_deviation < 1e-10);
  const double sigma = std::sqrt(0.25 / trials);
  CHECK(std::abs(r.selected_frequency[0] - 0.5) < 3 * sigma);

  // two-outcome selection follows the Born weight for biased preparations too
  VectorX<double> v(2);
  v << std::sqrt(0.8), std::sqrt(0.2);
  const auto biased = born_limit_check(StateVector<double>(kQubit, v), fam, trials, 43);
  CHECK(std::abs(biased.selected_frequency[0] - 0.8) < 3 * std::sqrt(0.16 / trials));

  // worker count does not change the statistics
  const auto r4 = born_limit_check(x_plus<double>(kQubit), fam, trials, 42, 4);
  CHECK(r4.selected_frequency == r.selected_frequency);
  CHECK(r4.mean_abl == r.mean_abl);
  CHECK_THROWS_AS(born_limit_check(ket(0), fam, 0, 1), RangeError);
}
