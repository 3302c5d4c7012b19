#include "mubsep/states.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mubsep {

namespace {

DensityMatrix pure(const CVector& v, Shape shape) {
  return DensityMatrix::assume_valid(projector(v), std::move(shape));
}

void check_weight(double p, const char* who) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(who) + ": p must lie in [0, 1]");
}

}  // namespace

DensityMatrix ghz(int n, int d) {
  if (n < 2 || d < 2) throw std::invalid_argument("ghz: needs n >= 2 parties of dimension >= 2");
  const Shape shape(std::vector<int>(static_cast<std::size_t>(n), d));
  CVector v = CVector::Zero(shape.total());
  // index of |j...j> is j (d^{n-1} + ... + 1)
  Eigen::Index step = 0;
  for (int i = 0, p = 1; i < n; ++i, p *= d) step += p;
  for (int j = 0; j < d; ++j) v(j * step) = 1.0 / std::sqrt(static_cast<double>(d));
  return pure(v, shape);
}

DensityMatrix w_state(int n) {
  if (n < 2) throw std::invalid_argument("w_state: needs n >= 2");
  const Shape shape(std::vector<int>(static_cast<std::size_t>(n), 2));
  CVector v = CVector::Zero(shape.total());
  for (int i = 0; i < n; ++i) v(Eigen::Index{1} << i) = 1.0 / std::sqrt(static_cast<double>(n));
  return pure(v, shape);
}

DensityMatrix bell(int d) { return ghz(2, d); }

DensityMatrix isotropic(int d, double p) {
  check_weight(p, "isotropic");
  return add_white_noise(bell(d), p);
}

DensityMatrix add_white_noise(const DensityMatrix& rho, double p) {
  check_weight(p, "add_white_noise");
  const double D = rho.dim();
  CMatrix mat = p * rho.matrix() + ((1.0 - p) / D) * identity(rho.dim());
  return DensityMatrix::assume_valid(std::move(mat), rho.shape());
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  while (u == 0.0) u = uniform();
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  spare_ = r * std::sin(2.0 * std::numbers::pi * v);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * v);
}

CVector Rng::haar_vector(int d) {
  CVector v(d);
  for (int i = 0; i < d; ++i) {
    const double re = gaussian();
    const double im = gaussian();
    v(i) = Complex(re, im);
  }
  return v / v.norm();
}

std::vector<double> Rng::simplex(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  double total = 0.0;
  for (auto& x : w) {
    double u = 0.0;
    while (u == 0.0) u = uniform();
    x = -std::log(u);
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

DensityMatrix SeparableEnsemble::assemble(const Shape& shape) const {
  if (weights.empty() || weights.size() != factors.size())
    throw std::invalid_argument("SeparableEnsemble: one weight per term is required");
  CMatrix acc = CMatrix::Zero(shape.total(), shape.total());
  for (std::size_t k = 0; k < factors.size(); ++k) {
    if (static_cast<int>(factors[k].size()) != shape.parties())
      throw std::invalid_argument("SeparableEnsemble: factor count does not match the shape");
    CMatrix term = factors[k][0];
    for (std::size_t i = 1; i < factors[k].size(); ++i) term = kron(term, factors[k][i]);
    if (term.rows() != shape.total()) throw std::invalid_argument("SeparableEnsemble: factor dims do not match");
    acc += weights[k] * term;
  }
  return DensityMatrix::assume_valid(std::move(acc), shape);
}

std::pair<DensityMatrix, SeparableEnsemble> random_separable(const Shape& shape, int terms, std::uint64_t seed) {
  if (terms < 1) throw std::invalid_argument("random_separable: terms must be >= 1");
  Rng rng(seed);
  SeparableEnsemble ens;
  ens.weights = rng.simplex(terms);
  for (int k = 0; k < terms; ++k) {
    std::vector<CMatrix> term;
    for (int d : shape.dims()) term.push_back(projector(rng.haar_vector(d)));
    ens.factors.push_back(std::move(term));
  }
  DensityMatrix rho = ens.assemble(shape);
  return {std::move(rho), std::move(ens)};
}

DensityMatrix random_mixed(const Shape& shape, int rank, std::uint64_t seed) {
  if (rank < 1) throw std::invalid_argument("random_mixed: rank must be >= 1");
  Rng rng(seed);
  const int D = shape.total();
  CMatrix g(D, rank);
  for (int c = 0; c < rank; ++c)
    for (int r = 0; r < D; ++r) {
      const double re = rng.gaussian();
      const double im = rng.gaussian();
      g(r, c) = Complex(re, im);
    }
  CMatrix rho = g * g.adjoint();
  rho /= trace_real(rho);
  return DensityMatrix::assume_valid(std::move(rho), shape);
}

DensityMatrix random_pure(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  return pure(rng.haar_vector(shape.total()), shape);
}

CMatrix partial_transpose(const CMatrix& mat, const Shape& shape, int block) {
  if (block < 0 || block >= shape.parties()) throw std::invalid_argument("partial_transpose: block out of range");
  if (mat.rows() != shape.total() || mat.cols() != shape.total())
    throw std::invalid_argument("partial_transpose: matrix does not match shape");
  const int d = shape.dim(block);
  Eigen::Index inner = 1;
  for (int j = block + 1; j < shape.parties(); ++j) inner *= shape.dim(j);
  CMatrix out(mat.rows(), mat.cols());
  for (Eigen::Index r = 0; r < mat.rows(); ++r)
    for (Eigen::Index c = 0; c < mat.cols(); ++c) {
      const Eigen::Index dr = (r / inner) % d;
      const Eigen::Index dc = (c / inner) % d;
      // swap the block digits of row and column
      out(r + (dc - dr) * inner, c + (dr - dc) * inner) = mat(r, c);
    }
  return out;
}

double ppt_min_eigenvalue(const DensityMatrix& rho, int block) {
  if (rho.shape().parties() != 2)
    throw std::invalid_argument("ppt_min_eigenvalue: needs a bipartite shape; coarse-grain first");
  return min_eigenvalue(partial_transpose(rho.matrix(), rho.shape(), block));
}

}  // namespace mubsep
