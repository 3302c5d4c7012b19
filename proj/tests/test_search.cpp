#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "mubsep/criteria.hpp"
#include "mubsep/partitions.hpp"
#include "mubsep/states.hpp"
#include "oracle.hpp"

using namespace mubsep;

namespace {

std::vector<std::vector<CMatrix>> mub_ops(const MubSet& m) {
  std::vector<std::vector<CMatrix>> out;
  for (const auto& b : m.bases) {
    std::vector<CMatrix> g;
    for (const auto& v : b) g.push_back(oracle::outer(v));
    out.push_back(g);
  }
  return out;
}

oracle::Instance thm1_instance(const DensityMatrix& rho, bool proof) {
  oracle::Instance in;
  in.rho = rho.matrix();
  in.dims = rho.shape().dims();
  in.groups = 1 << 30;
  for (int d : in.dims) {
    const auto m = build_mub_prime(d);
    in.ops.push_back(mub_ops(m));
    in.constants.push_back(1.0 + (m.count() - 1.0) / d);
    in.groups = std::min(in.groups, m.count());
  }
  in.slots = rho.shape().min_dim();
  in.proof = proof;
  return in;
}

oracle::Instance thm3_instance(const DensityMatrix& rho, const std::vector<GsicSet>& sets, bool absolute) {
  oracle::Instance in;
  in.rho = rho.matrix();
  in.dims = rho.shape().dims();
  in.groups = 1;
  for (const auto& g : sets) {
    in.ops.push_back({g.ops});
    in.constants.push_back((g.a * g.dim * g.dim + 1.0) / (g.dim * (g.dim + 1.0)));
  }
  in.slots = rho.shape().min_dim() * rho.shape().min_dim();
  in.absolute = absolute;
  return in;
}

GsicSet gsic(int d, double frac) {
  const auto b = gell_mann_basis(d);
  return build_gsic(d, frac * gsic_max_t(d, b), b);
}

// A random synthetic lhs-only instance.
SelectionProblem synthetic(std::mt19937_64& gen, std::vector<int> outcomes, int groups, int slots, bool diagonal) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SelectionProblem p;
  p.outcomes = outcomes;
  p.groups = groups;
  p.slots = slots;
  std::size_t size = 1;
  for (int n : outcomes) size *= static_cast<std::size_t>(n);
  for (int k = 0; k < groups; ++k) {
    std::vector<double> t(size);
    for (auto& x : t) x = 0.01 * u(gen);
    if (diagonal) {
      const int n = outcomes.front();
      for (int i = 0; i < n; ++i) {
        std::size_t idx = 0;
        for (std::size_t j = 0; j < outcomes.size(); ++j) idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(i);
        t[idx] = 1.0 + u(gen);
      }
      // symmetric under exchanging the two parties
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < a; ++b) t[static_cast<std::size_t>(b * n + a)] = t[static_cast<std::size_t>(a * n + b)];
    } else {
      for (auto& x : t) x = u(gen);
    }
    p.tables.push_back(t);
  }
  return p;
}

}  // namespace

TEST_CASE("exhaustive equals brute force for thm1") {
  const std::vector<std::vector<int>> shapes{{2, 2}, {2, 3}, {2, 2, 2, 2}};
  int instances = 0;
  for (const auto& dims : shapes)
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const DensityMatrix rho = random_mixed(Shape(dims), 1 + static_cast<int>(seed % 3), 40 + seed);
      std::vector<MubSet> mubs;
      for (int d : dims) mubs.push_back(build_mub_prime(d));
      for (bool proof : {true, false}) {
        const auto best = oracle::brute_force(thm1_instance(rho, proof));
        EvalOptions o;
        o.mode = proof ? BoundMode::Proof : BoundMode::Statement;
        const auto r = evaluate_thm1(rho, mubs, o);
        CHECK(std::abs(r.margin - (best.lhs - best.rhs)) <= 1e-12);
        if (!proof) CHECK(std::abs(r.lhs - best.lhs) <= 1e-12);
        // the reported selection achieves the reported values
        CHECK(std::abs(lhs_thm1(delta_rho(rho), rho.shape(), mubs, r.selection) - r.lhs) <= 1e-12);
        CHECK(std::abs(rhs_thm1(rho, mubs, r.selection, o.mode).value - r.rhs) <= 1e-12);
        o.search = SearchPolicy::Greedy;
        CHECK(evaluate_thm1(rho, mubs, o).margin <= r.margin + 1e-12);
        ++instances;
      }
    }
  CHECK(instances >= 36);
}

TEST_CASE("exhaustive equals brute force for thm3 on (2,2) and (2,3)") {
  for (const auto& dims : std::vector<std::vector<int>>{{2, 2}, {2, 3}})
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const DensityMatrix rho = random_mixed(Shape(dims), 2, 70 + seed);
      std::vector<GsicSet> sets;
      for (int d : dims) sets.push_back(gsic(d, 0.9));
      for (bool absolute : {false, true}) {
        EvalOptions o;
        o.absolute_terms = absolute;
        const auto r = evaluate_thm3(rho, sets, o);
        const auto best = oracle::brute_force(thm3_instance(rho, sets, absolute));
        CHECK(std::abs(r.margin - best.objective) <= 1e-12);
        o.search = SearchPolicy::Greedy;
        CHECK(evaluate_thm3(rho, sets, o).margin <= r.margin + 1e-12);
      }
    }
}

TEST_CASE("proof-mode search couples groups through the subsets") {
  // (2,3): the d=3 party picks 2 of 3 outcomes, so the proof bound depends on
  // the selection and the search must trade lhs against rhs.
  const auto b3 = gell_mann_basis(3);
  const auto b2 = gell_mann_basis(2);
  const std::vector<MumSet> mums{build_mum(2, 3, 0.9 * max_t(2, b2), b2), build_mum(3, 3, 0.9 * max_t(3, b3), b3)};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DensityMatrix rho = random_mixed(Shape({2, 3}), 2, 90 + seed);
    const auto problem = thm2_problem(rho, mums, BoundMode::Proof);
    CHECK(problem.bound_depends_on_selection());
    oracle::Instance in;
    in.rho = rho.matrix();
    in.dims = {2, 3};
    in.groups = 3;
    in.slots = 2;
    for (const auto& m : mums) {
      in.ops.push_back(m.groups);
      in.constants.push_back((3 - 1.0) / m.dim + m.kappa);
    }
    const auto best = oracle::brute_force(in);
    const auto r = evaluate_thm2(rho, mums);
    CHECK(std::abs(r.margin - best.objective) <= 1e-12);
  }
}

TEST_CASE("counting check on (2,3)") {
  const DensityMatrix rho = random_mixed(Shape({2, 3}), 2, 1);
  const std::vector<MubSet> mubs{build_mub_prime(2), build_mub_prime(3)};
  for (auto mode : {BoundMode::Proof, BoundMode::Statement}) {
    const auto p = thm1_problem(rho, mubs, mode);
    CHECK(p.groups == 3);
    CHECK(p.slots == 2);
    // per basis: 2 injections on the qubit side times 3*2 on the qutrit side
    CHECK(injection_tuple_count(p) == 12u * 12u * 12u);
    CHECK(oracle::injections(2, 2).size() * oracle::injections(3, 2).size() == 12u);
    const auto r = search_selections(SearchPolicy::Exhaustive, p);
    CHECK(r.evaluated == exhaustive_work(p));
  }
  // M = 1: 6^1 per subsystem product
  MubSet one = build_mub_prime(3);
  one.bases.resize(1);
  MubSet one2 = build_mub_prime(2);
  one2.bases.resize(1);
  const std::vector<MubSet> single{one2, one};
  CHECK(injection_tuple_count(thm1_problem(rho, single, BoundMode::Proof)) == 12u);
}

TEST_CASE("cap is enforced") {
  const DensityMatrix rho = random_mixed(Shape({3, 3}), 2, 2);
  const std::vector<GsicSet> sets(2, gsic(3, 0.9));
  EvalOptions o;
  o.search_options.exhaustive_cap = 1000;
  CHECK_THROWS_AS(evaluate_thm3(rho, sets, o), SearchCapExceeded);
  o.search = SearchPolicy::Greedy;
  CHECK_NOTHROW(evaluate_thm3(rho, sets, o));
  o.search = SearchPolicy::Identity;
  CHECK_NOTHROW(evaluate_thm3(rho, sets, o));
}

TEST_CASE("identity needs equal outcome counts") {
  const DensityMatrix rho = random_mixed(Shape({2, 3}), 2, 3);
  const std::vector<MubSet> mubs{build_mub_prime(2), build_mub_prime(3)};
  EvalOptions o;
  o.search = SearchPolicy::Identity;
  CHECK_THROWS_AS(evaluate_thm1(rho, mubs, o), std::invalid_argument);
  o.search = SearchPolicy::Greedy;
  CHECK_NOTHROW(evaluate_thm1(rho, mubs, o));
}

TEST_CASE("policy ordering on random instances") {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 50; ++i) {
    const auto p = synthetic(gen, {3, 3}, 2, 3, false);
    const double ex = search_selections(SearchPolicy::Exhaustive, p).objective;
    const double gr = search_selections(SearchPolicy::Greedy, p).objective;
    const double id = search_selections(SearchPolicy::Identity, p).objective;
    CHECK(ex >= gr - 1e-15);
    CHECK(gr >= id - 1e-15);
  }
}

TEST_CASE("greedy equals exhaustive on diagonal-dominant symmetric instances") {
  std::mt19937_64 gen(12);
  for (int i = 0; i < 50; ++i) {
    const auto p = synthetic(gen, {3, 3}, 2, 3, true);
    const auto ex = search_selections(SearchPolicy::Exhaustive, p);
    const auto gr = search_selections(SearchPolicy::Greedy, p);
    CHECK(gr.objective == doctest::Approx(ex.objective).epsilon(1e-14));
  }
}

TEST_CASE("single-slot instances agree across policies") {
  SelectionProblem p;
  p.outcomes = {1, 1};
  p.groups = 1;
  p.slots = 1;
  p.tables = {{-0.3}};
  const double ex = search_selections(SearchPolicy::Exhaustive, p).objective;
  CHECK(ex == doctest::Approx(0.3));
  CHECK(search_selections(SearchPolicy::Greedy, p).objective == ex);
  CHECK(search_selections(SearchPolicy::Identity, p).objective == ex);
}

TEST_CASE("greedy tie-break is lexicographic") {
  SelectionProblem p;
  p.outcomes = {2, 2};
  p.groups = 1;
  p.slots = 2;
  p.tables = {{0.5, 0.5, 0.5, 0.5}};
  const auto r = search_selections(SearchPolicy::Greedy, p);
  CHECK(r.plan == SelectionPlan::identity(2, 1, 2));
}

TEST_CASE("parallel search is deterministic") {
  const DensityMatrix rho = random_mixed(Shape({3, 3}), 3, 8);
  const std::vector<GsicSet> sets(2, gsic(3, 0.9));
  const auto p = thm3_problem(rho, sets, BoundMode::Proof);
  SearchOptions one, many;
  one.threads = 1;
  many.threads = 4;
  const auto a = search_selections(SearchPolicy::Exhaustive, p, one);
  const auto b = search_selections(SearchPolicy::Exhaustive, p, many);
  CHECK(a.plan == b.plan);
  CHECK(a.objective == b.objective);
}
