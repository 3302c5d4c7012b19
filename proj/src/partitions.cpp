#include "mubsep/partitions.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace mubsep {

std::vector<int> Bipartition::complement() const {
  std::vector<int> out;
  for (int p = 0; p < parties; ++p)
    if (!std::binary_search(block.begin(), block.end(), p)) out.push_back(p);
  return out;
}

std::string Bipartition::label() const {
  std::string out;
  for (int p : block) out += std::to_string(p + 1);
  out += '|';
  for (int p : complement()) out += std::to_string(p + 1);
  return out;
}

BipartitionCatalog enumerate_bipartitions(int n) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("enumerate_bipartitions: party count must be even and >= 2");
  if (n > 30) throw std::invalid_argument("enumerate_bipartitions: party count too large");
  BipartitionCatalog catalog;
  catalog.parties = n;
  std::vector<Bipartition> all;
  // every subset of parties 1..n-1, joined with party 0
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    Bipartition bp;
    bp.parties = n;
    bp.block.push_back(0);
    for (int p = 1; p < n; ++p)
      if (mask & (1u << (p - 1))) bp.block.push_back(p);
    bp.parity = bp.block.size() % 2 == 0 ? ParityClass::II : ParityClass::I;
    all.push_back(std::move(bp));
  }
  std::sort(all.begin(), all.end(), [](const Bipartition& a, const Bipartition& b) {
    if (a.trivial() != b.trivial()) return a.trivial();
    if (a.block.size() != b.block.size()) return a.block.size() < b.block.size();
    return a.block < b.block;
  });
  for (auto& bp : all) (bp.parity == ParityClass::I ? catalog.class_one : catalog.class_two).push_back(std::move(bp));
  return catalog;
}

CMatrix marginal_product(const DensityMatrix& rho, const Bipartition& split) {
  if (split.parties != rho.shape().parties())
    throw std::invalid_argument("marginal_product: bipartition does not match the state's party count");
  if (split.trivial()) return rho.matrix();

  const auto rest = split.complement();
  const CMatrix rho_a = partial_trace(rho.matrix(), rho.shape(), split.block);
  const CMatrix rho_b = partial_trace(rho.matrix(), rho.shape(), rest);

  std::vector<int> order = split.block;
  order.insert(order.end(), rest.begin(), rest.end());
  const Shape product_shape = permute_shape(rho.shape(), order);
  return permute_subsystems(kron(rho_a, rho_b), product_shape, inverse_permutation(order));
}

CMatrix delta_rho(const DensityMatrix& rho) {
  const int m = rho.shape().parties();
  if (m < 2 || m % 2 != 0) throw std::invalid_argument("delta_rho: the number of subsystems must be even");
  const auto catalog = enumerate_bipartitions(m);
  // Summed in catalog order so the result is reproducible bit for bit.
  CMatrix acc = CMatrix::Zero(rho.dim(), rho.dim());
  for (const auto& bp : catalog.class_two) acc += marginal_product(rho, bp);
  for (const auto& bp : catalog.class_one) acc -= marginal_product(rho, bp);
  return acc / static_cast<double>(1u << (m - 2));
}

CMatrix separable_delta_oracle(std::span<const double> weights, const std::vector<std::vector<CMatrix>>& factors) {
  if (weights.empty() || weights.size() != factors.size())
    throw std::invalid_argument("separable_delta_oracle: one weight per ensemble term is required");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("separable_delta_oracle: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("separable_delta_oracle: weights do not sum to 1");

  const std::size_t m = factors.front().size();
  if (m == 0) throw std::invalid_argument("separable_delta_oracle: empty factor list");
  for (const auto& term : factors) {
    if (term.size() != m) throw std::invalid_argument("separable_delta_oracle: inconsistent party count");
    for (std::size_t i = 0; i < m; ++i)
      if (term[i].rows() != factors.front()[i].rows() || term[i].rows() != term[i].cols())
        throw std::invalid_argument("separable_delta_oracle: factor dimensions do not match");
  }

  Eigen::Index total_dim = 1;
  for (const auto& f : factors.front()) total_dim *= f.rows();
  CMatrix acc = CMatrix::Zero(total_dim, total_dim);
  for (std::size_t k = 0; k < factors.size(); ++k)
    for (std::size_t l = 0; l < factors.size(); ++l) {
      if (k == l) continue;
      CMatrix term = factors[k][0] - factors[l][0];
      for (std::size_t i = 1; i < m; ++i) term = kron(term, factors[k][i] - factors[l][i]);
      acc += (weights[k] * weights[l]) * term;
    }
  return acc / static_cast<double>(1u << (m - 1));
}

KPartition KPartition::parse(const std::string& spec) {
  KPartition part;
  std::stringstream blocks(spec);
  std::string block;
  while (std::getline(blocks, block, '|')) {
    std::vector<int> members;
    std::stringstream items(block);
    std::string item;
    while (std::getline(items, item, ',')) {
      const auto first = item.find_first_not_of(" \t");
      if (first == std::string::npos) throw std::invalid_argument("partition: empty member in \"" + spec + "\"");
      const auto last = item.find_last_not_of(" \t");
      const std::string token = item.substr(first, last - first + 1);
      std::size_t used = 0;
      int value = 0;
      try {
        value = std::stoi(token, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("partition: bad member \"" + token + "\"");
      }
      if (used != token.size() || value < 1) throw std::invalid_argument("partition: bad member \"" + token + "\"");
      members.push_back(value - 1);
    }
    if (members.empty()) throw std::invalid_argument("partition: empty block in \"" + spec + "\"");
    part.blocks.push_back(std::move(members));
  }
  if (part.blocks.empty() || spec.back() == '|') throw std::invalid_argument("partition: empty block in \"" + spec + "\"");
  return part;
}

void KPartition::validate(int parties) const {
  std::vector<int> seen(static_cast<std::size_t>(parties), 0);
  for (const auto& block : blocks) {
    if (block.empty()) throw std::invalid_argument("partition: empty block");
    for (int p : block) {
      if (p < 0 || p >= parties)
        throw std::invalid_argument("partition: party " + std::to_string(p + 1) + " out of range");
      if (seen[static_cast<std::size_t>(p)]++)
        throw std::invalid_argument("partition: party " + std::to_string(p + 1) + " appears twice");
    }
  }
  for (int p = 0; p < parties; ++p)
    if (!seen[static_cast<std::size_t>(p)])
      throw std::invalid_argument("partition: party " + std::to_string(p + 1) + " is missing");
}

std::vector<int> coarse_grain_order(const KPartition& part) {
  std::vector<std::vector<int>> blocks = part.blocks;
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  std::sort(blocks.begin(), blocks.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
  std::vector<int> order;
  for (const auto& b : blocks) order.insert(order.end(), b.begin(), b.end());
  return order;
}

DensityMatrix coarse_grain(const DensityMatrix& rho, const KPartition& part) {
  part.validate(rho.shape().parties());
  std::vector<std::vector<int>> blocks = part.blocks;
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  std::sort(blocks.begin(), blocks.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });

  const auto order = coarse_grain_order(part);
  CMatrix mat = permute_subsystems(rho.matrix(), rho.shape(), order);
  std::vector<int> dims;
  for (const auto& b : blocks) {
    int d = 1;
    for (int p : b) d *= rho.shape().dim(p);
    dims.push_back(d);
  }
  return DensityMatrix::assume_valid(std::move(mat), Shape(std::move(dims)));
}

}  // namespace mubsep
