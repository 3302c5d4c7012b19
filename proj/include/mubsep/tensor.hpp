#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mubsep/tolerances.hpp"

namespace mubsep {

using Complex = std::complex<double>;
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CVector = Eigen::VectorXcd;

/// Ordered list of subsystem dimensions. Subsystem indices are 0-based in the
/// library API; the CLI translates to and from 1-based labels.
class Shape {
 public:
  Shape() = default;
  explicit Shape(std::vector<int> dims);
  Shape(std::initializer_list<int> dims) : Shape(std::vector<int>(dims)) {}

  const std::vector<int>& dims() const { return dims_; }
  int parties() const { return static_cast<int>(dims_.size()); }
  int dim(int party) const { return dims_.at(static_cast<std::size_t>(party)); }
  int total() const { return total_; }
  int min_dim() const;

  bool operator==(const Shape&) const = default;

 private:
  std::vector<int> dims_;
  int total_ = 1;
};

std::string to_string(const Shape& shape);

/// Hermitian, unit-trace, positive semidefinite matrix tied to a Shape.
class DensityMatrix {
 public:
  /// Validates against `tol`; throws std::invalid_argument naming every failed invariant.
  DensityMatrix(CMatrix mat, Shape shape, const Tolerances& tol = kDefaultTolerances);

  /// Skips validation. For results of operations that preserve the invariants
  /// (partial traces, permutations, convex mixtures of valid states).
  static DensityMatrix assume_valid(CMatrix mat, Shape shape);

  const CMatrix& matrix() const { return mat_; }
  const Shape& shape() const { return shape_; }
  int dim() const { return static_cast<int>(mat_.rows()); }

 private:
  DensityMatrix() = default;
  CMatrix mat_;
  Shape shape_;
};

CMatrix kron(const CMatrix& a, const CMatrix& b);
CVector kron(const CVector& a, const CVector& b);

/// Reduced operator on the `keep` subsystems, kept in their original relative
/// order. Works on any operator (not only states) laid out according to `shape`.
CMatrix partial_trace(const CMatrix& mat, const Shape& shape, std::span<const int> keep);
DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep);
DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<int> keep);

/// New subsystem i is old subsystem perm[i]; the returned shape has dims[perm[i]].
CMatrix permute_subsystems(const CMatrix& mat, const Shape& shape, std::span<const int> perm);
Shape permute_shape(const Shape& shape, std::span<const int> perm);
DensityMatrix permute_subsystems(const DensityMatrix& rho, std::span<const int> perm);
DensityMatrix permute_subsystems(const DensityMatrix& rho, std::initializer_list<int> perm);
std::vector<int> inverse_permutation(std::span<const int> perm);

/// Max |a(i,j) - conj(a(j,i))|; +inf for non-square input.
double hermiticity_residual(const CMatrix& a);

/// Ascending eigenvalues; throws std::invalid_argument when `a` is not
/// Hermitian within `hermiticity_tol`.
std::vector<double> hermitian_eigenvalues(const CMatrix& a, double hermiticity_tol = 1e-10);

struct HermitianEigen {
  std::vector<double> values;  // ascending
  CMatrix vectors;             // column k pairs with values[k]
};
HermitianEigen hermitian_eigen(const CMatrix& a, double hermiticity_tol = 1e-10);

double min_eigenvalue(const CMatrix& a, double hermiticity_tol = 1e-10);

enum class DensityIssueKind { Shape, Hermiticity, Trace, Positivity };

struct DensityIssue {
  DensityIssueKind kind;
  double residual;
  std::string message;
};

struct DensityValidation {
  double hermiticity_residual = 0.0;
  double trace_residual = 0.0;
  double min_eigenvalue = 0.0;
  std::vector<DensityIssue> issues;
  std::optional<DensityMatrix> state;

  bool ok() const { return issues.empty(); }
  bool has(DensityIssueKind kind) const;
  std::string summary() const;
};

DensityValidation validate_density(const CMatrix& mat, const Shape& shape,
                                   const Tolerances& tol = kDefaultTolerances);

CMatrix identity(int dim);
CMatrix projector(const CVector& v);
double trace_real(const CMatrix& a);
/// Re Tr(a b) without forming the product.
double trace_product_real(const CMatrix& a, const CMatrix& b);
double max_abs_entry(const CMatrix& a);

}  // namespace mubsep
