#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "mubsep/partitions.hpp"
#include "mubsep/states.hpp"
#include "oracle.hpp"

using namespace mubsep;

namespace {

std::vector<std::string> labels(const std::vector<Bipartition>& v) {
  std::vector<std::string> out;
  for (const auto& b : v) out.push_back(b.label());
  return out;
}

}  // namespace

TEST_CASE("bipartition catalogs") {
  const auto c2 = enumerate_bipartitions(2);
  CHECK(labels(c2.class_two) == std::vector<std::string>{"12|"});
  CHECK(labels(c2.class_one) == std::vector<std::string>{"1|2"});

  const auto c4 = enumerate_bipartitions(4);
  CHECK(labels(c4.class_two) == std::vector<std::string>{"1234|", "12|34", "13|24", "14|23"});
  CHECK(labels(c4.class_one) == std::vector<std::string>{"1|234", "123|4", "124|3", "134|2"});
  // 1|234, 2|134, 3|124, 4|123 as unordered splits
  std::set<std::set<int>> singles;
  for (const auto& b : c4.class_one) {
    const auto small = b.block.size() == 1 ? b.block : b.complement();
    CHECK(small.size() == 1);
    singles.insert({small.front()});
  }
  CHECK(singles.size() == 4);

  for (int n : {2, 4, 6, 8}) {
    const auto c = enumerate_bipartitions(n);
    CHECK(c.class_one.size() == (1u << (n - 2)));
    CHECK(c.class_two.size() == (1u << (n - 2)));
    CHECK(c.class_two.front().trivial());
    // brute force: all 2^{n-1} unordered splits by parity
    std::size_t odd = 0, even = 0;
    for (int mask = 0; mask < (1 << n); ++mask) {
      if (!(mask & 1)) continue;  // contains party 0
      const int k = __builtin_popcount(static_cast<unsigned>(mask));
      (k % 2 ? odd : even)++;
    }
    CHECK(odd == c.class_one.size());
    CHECK(even == c.class_two.size());
    for (const auto& b : c.class_one) CHECK(b.block.size() % 2 == 1);
    for (const auto& b : c.class_two) CHECK(b.block.front() == 0);
  }
  for (int n : {0, 1, 3, 5}) CHECK_THROWS_AS(enumerate_bipartitions(n), std::invalid_argument);
}

TEST_CASE("marginal products") {
  const DensityMatrix rho = random_mixed(Shape({2, 2}), 3, 4);
  const auto c2 = enumerate_bipartitions(2);
  CHECK(marginal_product(rho, c2.class_two.front()) == rho.matrix());

  const auto [prod, ens] = random_separable(Shape({2, 3}), 1, 9);
  CHECK(max_abs_entry(marginal_product(prod, c2.class_one.front()) - prod.matrix()) <= 1e-14);

  // |Phi+>_13 (x) |Phi+>_24 reordered into party order 1,2,3,4
  const DensityMatrix pairs = permute_subsystems(
      DensityMatrix::assume_valid(kron(bell().matrix(), bell().matrix()), Shape({2, 2, 2, 2})), {0, 2, 1, 3});
  const auto c4 = enumerate_bipartitions(4);
  const auto it = std::find_if(c4.class_two.begin(), c4.class_two.end(),
                               [](const Bipartition& b) { return b.label() == "13|24"; });
  REQUIRE(it != c4.class_two.end());
  CHECK(max_abs_entry(marginal_product(pairs, *it) - pairs.matrix()) <= 1e-14);

  const DensityMatrix r4 = random_mixed(Shape({2, 3, 2, 2}), 4, 5);
  for (const auto* cls : {&c4.class_one, &c4.class_two})
    for (const auto& b : *cls)
      CHECK(max_abs_entry(marginal_product(r4, b) - oracle::marginal_product(r4.matrix(), {2, 3, 2, 2}, b.block)) <=
            1e-14);
  CHECK_THROWS_AS(marginal_product(rho, c4.class_one.front()), std::invalid_argument);
}

TEST_CASE("delta rho examples") {
  const auto [prod, ens] = random_separable(Shape({3, 2}), 1, 11);
  CHECK(max_abs_entry(delta_rho(prod)) <= 1e-12);

  const CMatrix d = delta_rho(bell());
  CHECK(max_abs_entry(d - (bell().matrix() - identity(4) / 4.0)) <= 1e-15);
  CHECK(d(0, 0).real() == doctest::Approx(0.25));

  const DensityMatrix r4 = random_mixed(Shape({2, 2, 2, 2}), 5, 12);
  CMatrix listed = r4.matrix();
  const auto pm = [&](std::vector<int> a) { return oracle::marginal_product(r4.matrix(), {2, 2, 2, 2}, a); };
  listed += pm({0, 1}) + pm({0, 2}) + pm({0, 3});
  listed -= pm({0}) + pm({1}) + pm({2}) + pm({3});
  CHECK(max_abs_entry(delta_rho(r4) - listed / 4.0) <= 1e-14);

  CHECK_THROWS_AS(delta_rho(ghz(3, 2)), std::invalid_argument);
}

TEST_CASE("delta rho structure on random states") {
  double worst_trace = 0.0, worst_herm = 0.0, worst_oracle = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Shape shape = i % 2 ? Shape({2, 2, 2, 2}) : Shape({2 + i % 3, 2 + (i / 2) % 2});
    const DensityMatrix rho = random_mixed(shape, 1 + i % 4, 1000 + static_cast<std::uint64_t>(i));
    const CMatrix d = delta_rho(rho);
    worst_trace = std::max(worst_trace, std::abs(d.trace()));
    worst_herm = std::max(worst_herm, hermiticity_residual(d));
    if (i < 20) worst_oracle = std::max(worst_oracle, max_abs_entry(d - oracle::delta(rho.matrix(), shape.dims())));
  }
  CHECK(worst_trace <= 1e-12);
  CHECK(worst_herm <= 1e-12);
  CHECK(worst_oracle <= 1e-14);
}

TEST_CASE("delta rho vanishes on product states") {
  for (const auto& dims : std::vector<std::vector<int>>{{2, 2}, {2, 3}, {2, 2, 2, 2}, {3, 2, 2, 2}})
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto [rho, ens] = random_separable(Shape(dims), 1, seed);
      CHECK(max_abs_entry(delta_rho(rho)) <= 1e-12);
      // mixed product factors too
      CMatrix prod = random_mixed(Shape({dims[0]}), 2, seed + 50).matrix();
      for (std::size_t j = 1; j < dims.size(); ++j)
        prod = kron(prod, random_mixed(Shape({dims[j]}), 2, seed + 60 + j).matrix());
      CHECK(max_abs_entry(delta_rho(DensityMatrix::assume_valid(prod, Shape(dims)))) <= 1e-12);
    }
}

TEST_CASE("ensemble identity") {
  const auto [single, one] = random_separable(Shape({2, 2}), 1, 3);
  CHECK(max_abs_entry(separable_delta_oracle(one.weights, one.factors)) == 0.0);

  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Shape shape = i % 2 ? Shape({2, 2, 2, 2}) : Shape({2, 3});
    const auto [rho, ens] = random_separable(shape, 1 + i % 4, 500 + static_cast<std::uint64_t>(i));
    worst = std::max(worst, max_abs_entry(separable_delta_oracle(ens.weights, ens.factors) - delta_rho(rho)));
  }
  CHECK(worst <= 1e-10);

  // two equal-weight orthogonal qubit terms: |00> and |11>
  const CMatrix p0 = oracle::outer(CVector::Unit(2, 0)), p1 = oracle::outer(CVector::Unit(2, 1));
  const std::vector<double> w{0.5, 0.5};
  const CMatrix x = separable_delta_oracle(w, {{p0, p0}, {p1, p1}});
  // (1/2) * 2 * (1/4) (p0-p1)(x)(p0-p1) = diag(1,-1,-1,1)/4
  CHECK(x(0, 0).real() == doctest::Approx(0.25));
  CHECK(x(1, 1).real() == doctest::Approx(-0.25));
  CHECK(x(2, 2).real() == doctest::Approx(-0.25));
  CHECK(x(3, 3).real() == doctest::Approx(0.25));
  CHECK(max_abs_entry(x - delta_rho(DensityMatrix::assume_valid(0.5 * (kron(p0, p0) + kron(p1, p1)), Shape({2, 2})))) <= 1e-15);

  CHECK_THROWS_AS(separable_delta_oracle(std::vector<double>{0.5, 0.6}, {{p0, p0}, {p1, p1}}), std::invalid_argument);
  CHECK_THROWS_AS(separable_delta_oracle(std::vector<double>{1.0}, {{p0, p0}, {p1, p1}}), std::invalid_argument);
}

TEST_CASE("partition parsing") {
  const auto p = KPartition::parse("1,2|3,4");
  CHECK(p.blocks == std::vector<std::vector<int>>{{0, 1}, {2, 3}});
  CHECK_NOTHROW(p.validate(4));
  CHECK_THROWS_AS(p.validate(5), std::invalid_argument);
  CHECK_THROWS_AS(KPartition::parse("1,2|").validate(2), std::invalid_argument);
  CHECK_THROWS_AS(KPartition::parse("1,,2|3"), std::invalid_argument);
  CHECK_THROWS_AS(KPartition::parse("1,x|3"), std::invalid_argument);
  CHECK_THROWS_AS(KPartition::parse("0|1"), std::invalid_argument);
  CHECK_THROWS_AS(KPartition::parse("1,2|2,3").validate(3), std::invalid_argument);
  CHECK(coarse_grain_order(KPartition::parse("3,1|4,2")) == std::vector<int>{0, 2, 1, 3});
}

TEST_CASE("coarse graining") {
  const DensityMatrix rho = random_mixed(Shape({2, 2, 2, 2}), 6, 21);
  const auto singles = coarse_grain(rho, KPartition::parse("1|2|3|4"));
  CHECK(singles.shape() == rho.shape());
  CHECK(singles.matrix() == rho.matrix());

  const auto contiguous = coarse_grain(rho, KPartition::parse("1,2|3,4"));
  CHECK(contiguous.shape() == Shape({4, 4}));
  CHECK(contiguous.matrix() == rho.matrix());

  const auto crossed = coarse_grain(rho, KPartition::parse("1,3|2,4"));
  CHECK(crossed.shape() == Shape({4, 4}));
  CHECK(crossed.matrix() == permute_subsystems(rho, {0, 2, 1, 3}).matrix());

  const auto ev0 = hermitian_eigenvalues(rho.matrix()), ev1 = hermitian_eigenvalues(crossed.matrix());
  for (std::size_t i = 0; i < ev0.size(); ++i) CHECK(std::abs(ev0[i] - ev1[i]) <= 1e-10);
  CHECK(crossed.matrix().trace() == rho.matrix().trace());

  CHECK_THROWS_AS(coarse_grain(rho, KPartition::parse("1,2|3")), std::invalid_argument);
  const auto mixed = coarse_grain(random_mixed(Shape({2, 3, 2}), 2, 1), KPartition::parse("2|1,3"));
  CHECK(mixed.shape() == Shape({4, 3}));
}
