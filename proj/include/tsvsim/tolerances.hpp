#pragma once

#include <cstddef>

namespace tsvsim {

/// Every numerical threshold used by the library lives here.
struct Tolerances {
  double unitary = 1e-10;       // max-abs of U^dagger U - I
  double projector = 1e-10;     // max-abs of P^2 - P and P^dagger - P
  double hermitian = 1e-10;     // max-abs of A - A^dagger
  double psd = 1e-10;           // smallest allowed eigenvalue is -psd
  double trace = 1e-10;         // |Tr rho - 1| for normalized density matrices
  double completeness = 1e-8;   // max-abs of sum_k P_k - I
  double postponed = 1e-9;      // projector check after conjugation
  double boundary_floor = 1e-30;
  double dominance_threshold = 10.0;
  double node_floor = 1e-12;    // relative to the local incoherent density
  std::size_t dimension_cap = std::size_t{1} << 14;
};

inline constexpr Tolerances kDefaultTolerances{};

}  // namespace tsvsim
