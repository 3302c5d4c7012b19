#include "mubsep/measurements.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mubsep {

OperatorBasis gell_mann_basis(int d) {
  if (d < 2) throw std::invalid_argument("gell_mann_basis: dimension must be >= 2");
  OperatorBasis basis;
  basis.dim = d;
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k < d; ++k) {
      CMatrix op = CMatrix::Zero(d, d);
      op(j, k) = inv_sqrt2;
      op(k, j) = inv_sqrt2;
      basis.ops.push_back(std::move(op));
    }
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k < d; ++k) {
      CMatrix op = CMatrix::Zero(d, d);
      op(j, k) = Complex{0.0, -inv_sqrt2};
      op(k, j) = Complex{0.0, inv_sqrt2};
      basis.ops.push_back(std::move(op));
    }
  for (int l = 1; l < d; ++l) {
    CMatrix op = CMatrix::Zero(d, d);
    const double norm = 1.0 / std::sqrt(static_cast<double>(l) * (l + 1));
    for (int j = 0; j < l; ++j) op(j, j) = norm;
    op(l, l) = -l * norm;
    basis.ops.push_back(std::move(op));
  }
  return basis;
}

double orthonormality_residual(const OperatorBasis& basis) {
  double worst = 0.0;
  for (std::size_t i = 0; i < basis.ops.size(); ++i)
    for (std::size_t j = 0; j < basis.ops.size(); ++j) {
      const Complex ip = (basis.ops[i] * basis.ops[j]).trace();
      worst = std::max(worst, std::abs(ip - Complex{i == j ? 1.0 : 0.0, 0.0}));
    }
  return worst;
}

bool is_prime(int n) {
  if (n < 2) return false;
  for (int p = 2; p * p <= n; ++p)
    if (n % p == 0) return false;
  return true;
}

MubSet build_mub_prime(int d) {
  if (!is_prime(d))
    throw std::invalid_argument("build_mub_prime: d = " + std::to_string(d) +
                                " is not supported (prime dimensions only; import a file)");
  MubSet set;
  set.dim = d;
  std::vector<CVector> computational;
  for (int m = 0; m < d; ++m) computational.push_back(CVector::Unit(d, m));
  set.bases.push_back(std::move(computational));

  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  if (d == 2) {
    const Complex i{0.0, 1.0};
    set.bases.push_back({(CVector(2) << s, s).finished(), (CVector(2) << s, -s).finished()});
    set.bases.push_back({(CVector(2) << s, i * s).finished(), (CVector(2) << s, -i * s).finished()});
    return set;
  }
  const double two_pi = 2.0 * std::numbers::pi;
  for (int k = 0; k < d; ++k) {
    std::vector<CVector> basis;
    for (int m = 0; m < d; ++m) {
      CVector v(d);
      for (int j = 0; j < d; ++j) {
        // keep the phase exponent reduced mod d for accuracy
        const long long e = (static_cast<long long>(k) * j * j + static_cast<long long>(m) * j) % d;
        v(j) = s * std::polar(1.0, two_pi * static_cast<double>(e) / d);
      }
      basis.push_back(std::move(v));
    }
    set.bases.push_back(std::move(basis));
  }
  return set;
}

namespace {

void require_basis(int d, const OperatorBasis& basis) {
  if (basis.dim != d || static_cast<int>(basis.ops.size()) != d * d - 1)
    throw std::invalid_argument("operator basis does not match dimension " + std::to_string(d));
  for (const auto& op : basis.ops)
    if (op.rows() != d || op.cols() != d) throw std::invalid_argument("operator basis entry has the wrong size");
}

struct Extremes {
  double lo;
  double hi;
};

std::vector<Extremes> spectra_extremes(const std::vector<CMatrix>& traceless) {
  std::vector<Extremes> out;
  for (const auto& f : traceless) {
    const auto ev = hermitian_eigenvalues(f, 1e-9);
    out.push_back({ev.front(), ev.back()});
  }
  return out;
}

// Eigenvalues of offset*I + t*F are offset + t*lambda(F).
double min_eigenvalue_over(const std::vector<Extremes>& spectra, double offset, double t) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& e : spectra) worst = std::min(worst, offset + (t >= 0 ? t * e.lo : t * e.hi));
  return worst;
}

// Feasible means exactly PSD, so kappa and a never overshoot their upper limits.
double bisect_positive_scale(const std::function<double(double)>& min_eig) {
  auto feasible = [&](double t) { return min_eig(t) >= 0.0; };
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 64 && feasible(hi); ++i) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

std::vector<CMatrix> all_mum_operators(const OperatorBasis& basis, SimplexRoot root) {
  std::vector<CMatrix> all;
  for (int b = 0; b <= basis.dim; ++b)
    for (auto& f : mum_block_operators(basis, b, root)) all.push_back(std::move(f));
  return all;
}

}  // namespace

std::vector<CMatrix> mum_block_operators(const OperatorBasis& basis, int block, SimplexRoot root) {
  const int d = basis.dim;
  require_basis(d, basis);
  if (block < 0 || block > d) throw std::invalid_argument("mum_block_operators: block index out of range");
  const double sd = std::sqrt(static_cast<double>(d));
  const double coeff = root == SimplexRoot::Plus ? sd * (sd + 1.0) : sd * (sd - 1.0);
  const double last = root == SimplexRoot::Plus ? sd + 1.0 : 1.0 - sd;

  CMatrix sum = CMatrix::Zero(d, d);
  for (int n = 0; n < d - 1; ++n) sum += basis.ops[static_cast<std::size_t>(block * (d - 1) + n)];

  std::vector<CMatrix> out;
  for (int n = 0; n < d - 1; ++n) out.push_back(sum - coeff * basis.ops[static_cast<std::size_t>(block * (d - 1) + n)]);
  out.push_back(last * sum);
  return out;
}

double mum_kappa(int d, double t, SimplexRoot root) {
  const double sd = std::sqrt(static_cast<double>(d));
  const double c = root == SimplexRoot::Plus ? 1.0 + sd : sd - 1.0;
  return 1.0 / d + t * t * c * c * (d - 1);
}

double mum_min_eigenvalue(double t, const OperatorBasis& basis, SimplexRoot root) {
  return min_eigenvalue_over(spectra_extremes(all_mum_operators(basis, root)), 1.0 / basis.dim, t);
}

double max_t(int d, const OperatorBasis& basis, SimplexRoot root) {
  require_basis(d, basis);
  const auto ops = spectra_extremes(all_mum_operators(basis, root));
  return bisect_positive_scale([&](double t) { return min_eigenvalue_over(ops, 1.0 / d, t); });
}

MumSet build_mum(int d, int count, double t, const OperatorBasis& basis, SimplexRoot root, const Tolerances& tol) {
  require_basis(d, basis);
  if (count < 1 || count > d + 1)
    throw std::invalid_argument("build_mum: count must be in [1, d+1] = [1, " + std::to_string(d + 1) + "]");
  if (!std::isfinite(t) || t == 0.0) throw std::invalid_argument("build_mum: t must be finite and nonzero");

  MumSet set;
  set.dim = d;
  set.kappa = mum_kappa(d, t, root);
  set.t = t;
  const CMatrix centre = identity(d) / static_cast<double>(d);
  double worst = std::numeric_limits<double>::infinity();
  for (int b = 0; b < count; ++b) {
    std::vector<CMatrix> group;
    for (const auto& f : mum_block_operators(basis, b, root)) {
      CMatrix p = centre + t * f;
      worst = std::min(worst, min_eigenvalue(p, 1e-9));
      group.push_back(std::move(p));
    }
    set.groups.push_back(std::move(group));
  }
  if (worst < tol.eigenvalue_floor)
    throw std::invalid_argument("build_mum: t = " + std::to_string(t) +
                                " is outside the positivity range (min eigenvalue " + std::to_string(worst) + ")");
  return set;
}

std::vector<CMatrix> gsic_simplex_operators(const OperatorBasis& basis) {
  const int d = basis.dim;
  require_basis(d, basis);
  CMatrix sum = CMatrix::Zero(d, d);
  for (const auto& f : basis.ops) sum += f;
  const double coeff = static_cast<double>(d) * (d + 1);
  std::vector<CMatrix> out;
  for (const auto& f : basis.ops) out.push_back(sum - coeff * f);
  out.push_back(static_cast<double>(d + 1) * sum);
  return out;
}

double gsic_parameter(int d, double t) {
  const double dd = d;
  return 1.0 / (dd * dd * dd) + t * t * (dd + 1) * (dd + 1) * (dd * dd - 1);
}

double gsic_min_eigenvalue(double t, const OperatorBasis& basis) {
  const double d = basis.dim;
  return min_eigenvalue_over(spectra_extremes(gsic_simplex_operators(basis)), 1.0 / (d * d), t);
}

double gsic_max_t(int d, const OperatorBasis& basis) {
  require_basis(d, basis);
  const auto ops = spectra_extremes(gsic_simplex_operators(basis));
  const double offset = 1.0 / (static_cast<double>(d) * d);
  return bisect_positive_scale([&](double t) { return min_eigenvalue_over(ops, offset, t); });
}

GsicSet build_gsic(int d, double t, const OperatorBasis& basis, const Tolerances& tol) {
  require_basis(d, basis);
  if (!std::isfinite(t) || t == 0.0) throw std::invalid_argument("build_gsic: t must be finite and nonzero");
  GsicSet set;
  set.dim = d;
  set.a = gsic_parameter(d, t);
  set.t = t;
  const CMatrix centre = identity(d) / (static_cast<double>(d) * d);
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& g : gsic_simplex_operators(basis)) {
    CMatrix p = centre + t * g;
    worst = std::min(worst, min_eigenvalue(p, 1e-9));
    set.ops.push_back(std::move(p));
  }
  if (worst < tol.eigenvalue_floor)
    throw std::invalid_argument("build_gsic: t = " + std::to_string(t) +
                                " is outside the positivity range (min eigenvalue " + std::to_string(worst) + ")");
  return set;
}

MumSet mub_as_mum(const MubSet& mub) {
  MumSet set;
  set.dim = mub.dim;
  set.kappa = 1.0;
  for (const auto& basis : mub.bases) {
    std::vector<CMatrix> group;
    for (const auto& v : basis) group.push_back(projector(v));
    set.groups.push_back(std::move(group));
  }
  return set;
}

double FamilyReport::max_residual() const {
  double worst = 0.0;
  for (const auto& r : residuals) {
    if (std::isnan(r.value)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, r.value);
  }
  return worst;
}

double FamilyReport::residual(const std::string& condition) const {
  for (const auto& r : residuals)
    if (r.condition == condition) return r.value;
  return std::numeric_limits<double>::quiet_NaN();
}

bool FamilyReport::passes(double tol) const { return max_residual() <= tol; }

namespace {

// Hermiticity, positivity and (optionally) unit trace of a list of operators.
void operator_residuals(const std::vector<const CMatrix*>& ops, int d, double expected_trace, bool check_trace,
                        double& herm, double& positivity, double& trace) {
  herm = positivity = trace = 0.0;
  for (const CMatrix* p : ops) {
    if (p->rows() != d || p->cols() != d) {
      herm = positivity = trace = std::numeric_limits<double>::infinity();
      return;
    }
    herm = std::max(herm, hermiticity_residual(*p));
    Eigen::MatrixXcd sym = Eigen::MatrixXcd(*p);
    sym = 0.5 * (sym + sym.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sym, Eigen::EigenvaluesOnly);
    positivity = std::max(positivity, std::max(0.0, -solver.eigenvalues()(0)));
    if (check_trace) trace = std::max(trace, std::abs(p->trace() - Complex{expected_trace, 0.0}));
  }
}

double complex_trace_product_residual(const CMatrix& a, const CMatrix& b, double expected) {
  return std::abs((a * b).trace() - Complex{expected, 0.0});
}

}  // namespace

FamilyReport validate_family(const MubSet& mub) {
  FamilyReport report;
  report.family = "mub";
  const int d = mub.dim;
  double structure = (d >= 2 && mub.count() >= 1 && mub.count() <= d + 1) ? 0.0 : 1.0;
  for (const auto& basis : mub.bases) {
    if (static_cast<int>(basis.size()) != d) structure = 1.0;
    for (const auto& v : basis)
      if (v.size() != d) structure = 1.0;
  }
  report.residuals.push_back({"structure", structure});
  if (structure != 0.0) return report;

  double ortho = 0.0;
  double unbiased = 0.0;
  for (std::size_t b = 0; b < mub.bases.size(); ++b)
    for (std::size_t c = b; c < mub.bases.size(); ++c)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          const Complex ip = mub.bases[b][static_cast<std::size_t>(i)].dot(mub.bases[c][static_cast<std::size_t>(j)]);
          if (b == c)
            ortho = std::max(ortho, std::abs(ip - Complex{i == j ? 1.0 : 0.0, 0.0}));
          else
            unbiased = std::max(unbiased, std::abs(std::norm(ip) - 1.0 / d));
        }
  report.residuals.push_back({"orthonormality", ortho});
  report.residuals.push_back({"unbiasedness", unbiased});
  return report;
}

FamilyReport validate_family(const MumSet& mum) {
  FamilyReport report;
  report.family = "mum";
  const int d = mum.dim;
  double structure = (d >= 2 && mum.count() >= 1 && mum.count() <= d + 1) ? 0.0 : 1.0;
  std::vector<const CMatrix*> all;
  for (const auto& group : mum.groups) {
    if (static_cast<int>(group.size()) != d) structure = 1.0;
    for (const auto& p : group) all.push_back(&p);
  }
  report.residuals.push_back({"structure", structure});
  if (structure != 0.0) return report;

  double herm, positivity, trace;
  operator_residuals(all, d, 1.0, true, herm, positivity, trace);
  report.residuals.push_back({"hermiticity", herm});
  report.residuals.push_back({"positivity", positivity});
  report.residuals.push_back({"trace", trace});
  if (!std::isfinite(herm)) return report;

  double completeness = 0.0;
  for (const auto& group : mum.groups) {
    CMatrix sum = CMatrix::Zero(d, d);
    for (const auto& p : group) sum += p;
    completeness = std::max(completeness, max_abs_entry(sum - identity(d)));
  }
  report.residuals.push_back({"completeness", completeness});

  const double kappa = mum.kappa;
  const double intra = (1.0 - kappa) / (d - 1);
  double self = 0.0, within = 0.0, cross = 0.0;
  for (int b = 0; b < mum.count(); ++b)
    for (int n = 0; n < d; ++n)
      for (int c = 0; c < mum.count(); ++c)
        for (int m = 0; m < d; ++m) {
          const CMatrix& p = mum.groups[b][n];
          const CMatrix& q = mum.groups[c][m];
          if (b == c && n == m)
            self = std::max(self, complex_trace_product_residual(p, q, kappa));
          else if (b == c)
            within = std::max(within, complex_trace_product_residual(p, q, intra));
          else
            cross = std::max(cross, complex_trace_product_residual(p, q, 1.0 / d));
        }
  report.residuals.push_back({"self_overlap", self});
  report.residuals.push_back({"intra_overlap", within});
  report.residuals.push_back({"cross_overlap", cross});
  report.residuals.push_back({"kappa_range", std::max({0.0, 1.0 / d - kappa, kappa - 1.0})});
  return report;
}

FamilyReport validate_family(const GsicSet& gsic) {
  FamilyReport report;
  report.family = "gsic";
  const int d = gsic.dim;
  double structure = (d >= 2 && static_cast<int>(gsic.ops.size()) == d * d) ? 0.0 : 1.0;
  report.residuals.push_back({"structure", structure});
  if (structure != 0.0) return report;

  std::vector<const CMatrix*> all;
  for (const auto& p : gsic.ops) all.push_back(&p);
  double herm, positivity, trace;
  operator_residuals(all, d, 0.0, false, herm, positivity, trace);
  report.residuals.push_back({"hermiticity", herm});
  report.residuals.push_back({"positivity", positivity});
  if (!std::isfinite(herm)) return report;

  CMatrix sum = CMatrix::Zero(d, d);
  for (const auto& p : gsic.ops) sum += p;
  report.residuals.push_back({"completeness", max_abs_entry(sum - identity(d))});

  const double a = gsic.a;
  const double off = (1.0 - d * a) / (d * (static_cast<double>(d) * d - 1));
  double self = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < gsic.ops.size(); ++i)
    for (std::size_t j = 0; j < gsic.ops.size(); ++j) {
      if (i == j)
        self = std::max(self, complex_trace_product_residual(gsic.ops[i], gsic.ops[j], a));
      else
        cross = std::max(cross, complex_trace_product_residual(gsic.ops[i], gsic.ops[j], off));
    }
  report.residuals.push_back({"self_overlap", self});
  report.residuals.push_back({"cross_overlap", cross});
  const double dd = d;
  report.residuals.push_back({"parameter_range", std::max({0.0, 1.0 / (dd * dd * dd) - a, a - 1.0 / (dd * dd)})});
  return report;
}

FamilyReport validate_family(const MeasurementFamily& family) {
  return std::visit([](const auto& f) { return validate_family(f); }, family);
}

}  // namespace mubsep
