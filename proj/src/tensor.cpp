#include "mubsep/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mubsep {

Shape::Shape(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw std::invalid_argument("Shape: at least one subsystem is required");
  total_ = 1;
  for (int d : dims_) {
    if (d < 2) throw std::invalid_argument("Shape: subsystem dimensions must be >= 2");
    total_ *= d;
  }
}

int Shape::min_dim() const { return *std::min_element(dims_.begin(), dims_.end()); }

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < shape.parties(); ++i) os << (i ? "," : "") << shape.dim(i);
  os << ')';
  return os.str();
}

DensityMatrix::DensityMatrix(CMatrix mat, Shape shape, const Tolerances& tol) {
  DensityValidation v = validate_density(mat, shape, tol);
  if (!v.ok()) throw std::invalid_argument("invalid density matrix: " + v.summary());
  mat_ = std::move(mat);
  shape_ = std::move(shape);
}

DensityMatrix DensityMatrix::assume_valid(CMatrix mat, Shape shape) {
  DensityMatrix rho;
  rho.mat_ = std::move(mat);
  rho.shape_ = std::move(shape);
  return rho;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

namespace {

std::vector<int> strides_of(const std::vector<int>& dims) {
  std::vector<int> strides(dims.size());
  int s = 1;
  for (std::size_t i = dims.size(); i-- > 0;) {
    strides[i] = s;
    s *= dims[i];
  }
  return strides;
}

// Flat offsets contributed by the listed subsystems, enumerated in row-major
// order over those subsystems' digits.
std::vector<int> offsets_for(const std::vector<int>& dims, const std::vector<int>& strides,
                             const std::vector<int>& subsystems) {
  std::vector<int> offsets{0};
  for (int party : subsystems) {
    std::vector<int> next;
    next.reserve(offsets.size() * static_cast<std::size_t>(dims[party]));
    for (int base : offsets)
      for (int digit = 0; digit < dims[party]; ++digit) next.push_back(base + digit * strides[party]);
    offsets = std::move(next);
  }
  return offsets;
}

void check_square(const CMatrix& mat, const Shape& shape, const char* who) {
  if (mat.rows() != mat.cols() || mat.rows() != shape.total())
    throw std::invalid_argument(std::string(who) + ": matrix size does not match shape " + to_string(shape));
}

}  // namespace

CMatrix partial_trace(const CMatrix& mat, const Shape& shape, std::span<const int> keep) {
  check_square(mat, shape, "partial_trace");
  if (keep.empty()) throw std::invalid_argument("partial_trace: keep set is empty");
  std::vector<int> kept(keep.begin(), keep.end());
  std::sort(kept.begin(), kept.end());
  if (std::adjacent_find(kept.begin(), kept.end()) != kept.end())
    throw std::invalid_argument("partial_trace: duplicate subsystem index");
  if (kept.front() < 0 || kept.back() >= shape.parties())
    throw std::invalid_argument("partial_trace: subsystem index out of range");

  std::vector<int> traced;
  for (int p = 0; p < shape.parties(); ++p)
    if (!std::binary_search(kept.begin(), kept.end(), p)) traced.push_back(p);

  const auto& dims = shape.dims();
  const auto strides = strides_of(dims);
  const auto keep_off = offsets_for(dims, strides, kept);
  const auto trace_off = offsets_for(dims, strides, traced);

  const auto n = static_cast<Eigen::Index>(keep_off.size());
  CMatrix out = CMatrix::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      Complex acc{0.0, 0.0};
      for (int t : trace_off) acc += mat(keep_off[r] + t, keep_off[c] + t);
      out(r, c) = acc;
    }
  return out;
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep) {
  CMatrix reduced = partial_trace(rho.matrix(), rho.shape(), keep);
  std::vector<int> kept(keep.begin(), keep.end());
  std::sort(kept.begin(), kept.end());
  std::vector<int> dims;
  for (int p : kept) dims.push_back(rho.shape().dim(p));
  return DensityMatrix::assume_valid(std::move(reduced), Shape(std::move(dims)));
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<int> keep) {
  return partial_trace(rho, std::span<const int>(keep.begin(), keep.size()));
}

namespace {

void check_permutation(std::span<const int> perm, int parties) {
  if (static_cast<int>(perm.size()) != parties)
    throw std::invalid_argument("permutation length does not match the number of subsystems");
  std::vector<int> sorted(perm.begin(), perm.end());
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < parties; ++i)
    if (sorted[static_cast<std::size_t>(i)] != i) throw std::invalid_argument("not a permutation");
}

}  // namespace

Shape permute_shape(const Shape& shape, std::span<const int> perm) {
  check_permutation(perm, shape.parties());
  std::vector<int> dims;
  for (int p : perm) dims.push_back(shape.dim(p));
  return Shape(std::move(dims));
}

CMatrix permute_subsystems(const CMatrix& mat, const Shape& shape, std::span<const int> perm) {
  check_square(mat, shape, "permute_subsystems");
  check_permutation(perm, shape.parties());
  const auto old_strides = strides_of(shape.dims());
  std::vector<int> reordered(perm.begin(), perm.end());
  // Enumerating the old offsets in the new digit order yields new-flat -> old-flat.
  const auto map = offsets_for(shape.dims(), old_strides, reordered);
  const auto n = static_cast<Eigen::Index>(map.size());
  CMatrix out(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) out(r, c) = mat(map[r], map[c]);
  return out;
}

DensityMatrix permute_subsystems(const DensityMatrix& rho, std::span<const int> perm) {
  Shape shape = permute_shape(rho.shape(), perm);
  return DensityMatrix::assume_valid(permute_subsystems(rho.matrix(), rho.shape(), perm), std::move(shape));
}

DensityMatrix permute_subsystems(const DensityMatrix& rho, std::initializer_list<int> perm) {
  return permute_subsystems(rho, std::span<const int>(perm.begin(), perm.size()));
}

std::vector<int> inverse_permutation(std::span<const int> perm) {
  check_permutation(perm, static_cast<int>(perm.size()));
  std::vector<int> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
  return inv;
}

double hermiticity_residual(const CMatrix& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - std::conj(a(j, i))));
  return worst;
}

HermitianEigen hermitian_eigen(const CMatrix& a, double hermiticity_tol) {
  const double herm = hermiticity_residual(a);
  if (!(herm <= hermiticity_tol))
    throw std::invalid_argument("hermitian_eigen: matrix is not Hermitian (residual " + std::to_string(herm) + ")");
  Eigen::MatrixXcd sym = Eigen::MatrixXcd(a);
  sym = 0.5 * (sym + sym.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sym);
  if (solver.info() != Eigen::Success) throw std::runtime_error("hermitian_eigen: eigensolver did not converge");
  HermitianEigen out;
  out.values.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size());
  out.vectors = solver.eigenvectors();
  return out;
}

std::vector<double> hermitian_eigenvalues(const CMatrix& a, double hermiticity_tol) {
  const double herm = hermiticity_residual(a);
  if (!(herm <= hermiticity_tol))
    throw std::invalid_argument("hermitian_eigenvalues: matrix is not Hermitian (residual " + std::to_string(herm) + ")");
  Eigen::MatrixXcd sym = Eigen::MatrixXcd(a);
  sym = 0.5 * (sym + sym.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("hermitian_eigenvalues: eigensolver did not converge");
  return {solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size()};
}

double min_eigenvalue(const CMatrix& a, double hermiticity_tol) {
  return hermitian_eigenvalues(a, hermiticity_tol).front();
}

bool DensityValidation::has(DensityIssueKind kind) const {
  return std::any_of(issues.begin(), issues.end(), [kind](const DensityIssue& i) { return i.kind == kind; });
}

std::string DensityValidation::summary() const {
  if (issues.empty()) return "ok";
  std::string out;
  for (const auto& issue : issues) {
    if (!out.empty()) out += "; ";
    out += issue.message;
  }
  return out;
}

DensityValidation validate_density(const CMatrix& mat, const Shape& shape, const Tolerances& tol) {
  DensityValidation v;
  auto add = [&v](DensityIssueKind kind, double residual, const std::string& what) {
    std::ostringstream os;
    os.precision(3);
    os << what << " (residual " << residual << ")";
    v.issues.push_back({kind, residual, os.str()});
  };

  if (mat.rows() != mat.cols()) {
    add(DensityIssueKind::Shape, static_cast<double>(std::abs(mat.rows() - mat.cols())), "matrix is not square");
    return v;
  }
  if (mat.rows() != shape.total())
    add(DensityIssueKind::Shape, static_cast<double>(std::abs(mat.rows() - shape.total())),
        "matrix dimension " + std::to_string(mat.rows()) + " does not match shape " + to_string(shape));

  v.hermiticity_residual = hermiticity_residual(mat);
  if (!(v.hermiticity_residual <= tol.hermiticity)) add(DensityIssueKind::Hermiticity, v.hermiticity_residual, "not Hermitian");

  v.trace_residual = std::abs(mat.trace() - Complex{1.0, 0.0});
  if (!(v.trace_residual <= tol.trace)) add(DensityIssueKind::Trace, v.trace_residual, "trace differs from 1");

  // Positivity is judged on the Hermitian part so a tiny asymmetry still yields a spectrum.
  Eigen::MatrixXcd sym = Eigen::MatrixXcd(mat);
  sym = 0.5 * (sym + sym.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sym, Eigen::EigenvaluesOnly);
  v.min_eigenvalue = solver.eigenvalues()(0);
  if (!(v.min_eigenvalue >= tol.eigenvalue_floor))
    add(DensityIssueKind::Positivity, -v.min_eigenvalue, "negative eigenvalue");

  if (v.ok()) v.state = DensityMatrix::assume_valid(mat, shape);
  return v;
}

CMatrix identity(int dim) { return CMatrix::Identity(dim, dim); }

CMatrix projector(const CVector& v) { return v * v.adjoint(); }

double trace_real(const CMatrix& a) { return a.trace().real(); }

double trace_product_real(const CMatrix& a, const CMatrix& b) {
  // Tr(ab) = sum_ij a(i,j) b(j,i)
  Complex acc{0.0, 0.0};
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) acc += a(i, j) * b(j, i);
  return acc.real();
}

double max_abs_entry(const CMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace mubsep
