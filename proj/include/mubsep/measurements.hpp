#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mubsep/tensor.hpp"

namespace mubsep {

/// Orthonormal (Hilbert-Schmidt) basis of traceless Hermitian operators on C^d.
struct OperatorBasis {
  int dim = 0;
  std::vector<CMatrix> ops;  // d*d - 1 entries
};

/// Generalized Gell-Mann basis in canonical order: symmetric pair operators
/// (j<k lexicographic), then antisymmetric pair operators, then the d-1
/// diagonal operators, all normalized to Tr(F^2) = 1.
OperatorBasis gell_mann_basis(int d);

/// Max |Tr(F_i F_j) - delta_ij| over the basis.
double orthonormality_residual(const OperatorBasis& basis);

struct MubSet {
  int dim = 0;
  std::vector<std::vector<CVector>> bases;  // bases[k][n] is the n-th vector of basis k

  int count() const { return static_cast<int>(bases.size()); }
};

struct MumSet {
  int dim = 0;
  double kappa = 0.0;
  std::vector<std::vector<CMatrix>> groups;  // groups[b][n] = P_n^(b)
  std::optional<double> t;                   // simplex scale, when built here

  int count() const { return static_cast<int>(groups.size()); }
};

struct GsicSet {
  int dim = 0;
  double a = 0.0;
  std::vector<CMatrix> ops;  // d*d operators
  std::optional<double> t;
};

using MeasurementFamily = std::variant<MubSet, MumSet, GsicSet>;

bool is_prime(int n);

/// Complete set of d+1 MUBs for d = 2 or an odd prime. Throws
/// std::invalid_argument for any other d (prime powers included).
MubSet build_mub_prime(int d);

/// Which root of the simplex quadratic fixes the block coefficients.
/// Plus: F_n = F - sqrt(d)(sqrt(d)+1) F_{n,b}, F_d = (sqrt(d)+1) F.
/// Minus: F_n = F - sqrt(d)(sqrt(d)-1) F_{n,b}, F_d = (1-sqrt(d)) F.
enum class SimplexRoot { Plus, Minus };

/// Traceless operators F_n^(b) of block b, n = 0..d-1 (they sum to zero).
std::vector<CMatrix> mum_block_operators(const OperatorBasis& basis, int block, SimplexRoot root = SimplexRoot::Plus);

/// kappa = 1/d + t^2 (1 +- sqrt(d))^2 (d-1).
double mum_kappa(int d, double t, SimplexRoot root = SimplexRoot::Plus);

/// Smallest eigenvalue over all d(d+1) operators I/d + t F_n^(b).
double mum_min_eigenvalue(double t, const OperatorBasis& basis, SimplexRoot root = SimplexRoot::Plus);

/// Largest t > 0 keeping every MUM operator PSD (bisection on the min eigenvalue).
double max_t(int d, const OperatorBasis& basis, SimplexRoot root = SimplexRoot::Plus);

/// First `count` groups of the simplex MUM construction at scale t.
MumSet build_mum(int d, int count, double t, const OperatorBasis& basis, SimplexRoot root = SimplexRoot::Plus,
                 const Tolerances& tol = kDefaultTolerances);

/// G_alpha = F - d(d+1) F_alpha (alpha < d^2-1), G_last = (d+1) F, F = sum_k F_k.
std::vector<CMatrix> gsic_simplex_operators(const OperatorBasis& basis);

/// a = 1/d^3 + t^2 (d+1)^2 (d^2-1).
double gsic_parameter(int d, double t);

double gsic_min_eigenvalue(double t, const OperatorBasis& basis);

/// Largest t > 0 keeping every GSIC operator PSD.
double gsic_max_t(int d, const OperatorBasis& basis);

GsicSet build_gsic(int d, double t, const OperatorBasis& basis, const Tolerances& tol = kDefaultTolerances);

/// Rank-one projector groups |e_n^(b)><e_n^(b)| with kappa = 1.
MumSet mub_as_mum(const MubSet& mub);

struct Residual {
  std::string condition;
  double value = 0.0;
};

/// Maximum absolute residual of each defining condition of a family.
struct FamilyReport {
  std::string family;
  std::vector<Residual> residuals;

  double max_residual() const;
  double residual(const std::string& condition) const;  // NaN when absent
  bool passes(double tol = kDefaultTolerances.family_residual) const;
};

FamilyReport validate_family(const MubSet& mub);
FamilyReport validate_family(const MumSet& mum);
FamilyReport validate_family(const GsicSet& gsic);
FamilyReport validate_family(const MeasurementFamily& family);

}  // namespace mubsep
