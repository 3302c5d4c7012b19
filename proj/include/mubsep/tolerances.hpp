#pragma once

namespace mubsep {

// Every numerical threshold used by validators and verdicts lives here.
struct Tolerances {
  double hermiticity = 1e-10;       // max |A - A^dagger| entry
  double trace = 1e-10;             // |Tr(rho) - 1|
  double eigenvalue_floor = -1e-10; // smallest admissible eigenvalue of a state
  double family_residual = 1e-10;   // measurement-family defining equalities
  double verdict_margin = 1e-9;     // margin above which a criterion reports ENTANGLED
};

inline constexpr Tolerances kDefaultTolerances{};

}  // namespace mubsep
