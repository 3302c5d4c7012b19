#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "mubsep/tensor.hpp"

namespace mubsep {

/// (1/sqrt d) sum_j |j...j>, as a pure state on n parties of dimension d.
DensityMatrix ghz(int n, int d);
/// Equal superposition of the n single-excitation qubit states.
DensityMatrix w_state(int n);
/// |Phi+> on (d,d); the qubit Bell state by default.
DensityMatrix bell(int d = 2);
/// p |Phi+><Phi+| + (1-p) I/d^2.
DensityMatrix isotropic(int d, double p);
/// p rho + (1-p) I/D.
DensityMatrix add_white_noise(const DensityMatrix& rho, double p);

/// Seeded generator; uses only raw 64-bit engine output so draws are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();   // [0,1)
  double gaussian();  // standard normal, Box-Muller
  CVector haar_vector(int d);
  std::vector<double> simplex(int n);  // uniform on the probability simplex

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Fully separable mixture sum_k w_k (x)_i factors[k][i].
struct SeparableEnsemble {
  std::vector<double> weights;
  std::vector<std::vector<CMatrix>> factors;  // [term][party], pure states

  DensityMatrix assemble(const Shape& shape) const;
};

std::pair<DensityMatrix, SeparableEnsemble> random_separable(const Shape& shape, int terms, std::uint64_t seed);
/// Partial trace of a Haar-random pure state on C^D (x) C^rank.
DensityMatrix random_mixed(const Shape& shape, int rank, std::uint64_t seed);
DensityMatrix random_pure(const Shape& shape, std::uint64_t seed);

/// Transposes the indices of subsystem `block` only.
CMatrix partial_transpose(const CMatrix& mat, const Shape& shape, int block);
/// Minimum eigenvalue of the partial transpose; throws unless the shape is bipartite.
double ppt_min_eigenvalue(const DensityMatrix& rho, int block = 1);

}  // namespace mubsep
