#pragma once

#include <span>
#include <string>
#include <vector>

#include "mubsep/tensor.hpp"

namespace mubsep {

enum class ParityClass { I, II };  // I: odd|odd, II: even|even

/// Unordered split of N parties, canonicalized so `block` contains party 0.
/// The trivial split (block = everything) belongs to class II and stands for rho.
struct Bipartition {
  int parties = 0;
  std::vector<int> block;  // sorted, contains 0
  ParityClass parity = ParityClass::II;

  bool trivial() const { return static_cast<int>(block.size()) == parties; }
  std::vector<int> complement() const;
  std::string label() const;  // 1-based, e.g. "13|24"; trivial is "1234|"
};

struct BipartitionCatalog {
  int parties = 0;
  std::vector<Bipartition> class_one;  // P_I
  std::vector<Bipartition> class_two;  // P_II, trivial split first
};

/// Throws std::invalid_argument unless n is even and >= 2.
BipartitionCatalog enumerate_bipartitions(int n);

/// rho_A (x) rho_complement, reordered back to the original party order.
CMatrix marginal_product(const DensityMatrix& rho, const Bipartition& split);

/// (Q_II - Q_I) / 2^{m-2} over the even|even and odd|odd bipartitions.
CMatrix delta_rho(const DensityMatrix& rho);

/// (1/2^{m-1}) sum_{k,l} p_k p_l (x)_i (rho_k^i - rho_l^i). Equals delta_rho of
/// the assembled mixture when the ensemble is fully separable.
/// factors[k][i] is the state of party i in term k.
CMatrix separable_delta_oracle(std::span<const double> weights, const std::vector<std::vector<CMatrix>>& factors);

/// Pairwise-disjoint nonempty blocks covering {0..N-1}.
struct KPartition {
  std::vector<std::vector<int>> blocks;

  /// Parses "1,2|3,4" (1-based members, '|' between blocks).
  static KPartition parse(const std::string& spec);
  /// Throws std::invalid_argument unless the blocks partition {0..parties-1}.
  void validate(int parties) const;
  int size() const { return static_cast<int>(blocks.size()); }
};

/// Makes each block contiguous (blocks ordered by smallest member, original
/// order inside a block) and merges each block into one subsystem.
DensityMatrix coarse_grain(const DensityMatrix& rho, const KPartition& part);

/// Party order used by coarse_grain.
std::vector<int> coarse_grain_order(const KPartition& part);

}  // namespace mubsep
