#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mubsep/measurements.hpp"
#include "mubsep/tensor.hpp"

namespace mubsep {

enum class CriterionId { Thm1, Thm2, Thm3 };

/// Statement: purity sums over every outcome of every measurement of a party.
/// Proof: purity sums over the selected slots only (never smaller bound).
enum class BoundMode { Proof, Statement };

enum class SearchPolicy { Exhaustive, Greedy, Identity };

enum class Verdict { Entangled, NotDetected };

std::string to_string(CriterionId id);
std::string to_string(BoundMode mode);
std::string to_string(SearchPolicy policy);
std::string to_string(Verdict verdict);
CriterionId parse_criterion(const std::string& text);
BoundMode parse_bound_mode(const std::string& text);
SearchPolicy parse_search_policy(const std::string& text);

/// map[party][group][slot] is the 0-based outcome assigned to that slot.
/// Every map[party][group] must be injective.
struct SelectionPlan {
  std::vector<std::vector<std::vector<int>>> map;

  int parties() const { return static_cast<int>(map.size()); }
  int groups() const { return map.empty() ? 0 : static_cast<int>(map.front().size()); }
  int slots() const { return groups() == 0 ? 0 : static_cast<int>(map.front().front().size()); }

  static SelectionPlan identity(int parties, int groups, int slots);
  /// 1-based rendering, e.g. "p1[g1:1,2 g2:1,2] p2[g1:2,1 g2:1,2]".
  std::string describe() const;

  bool operator==(const SelectionPlan&) const = default;
};

/// The maximization behind L, S and R. For every group k, tables[k] holds
/// Tr((x)_j P_{j,k,n_j} X) for all outcome tuples (party 0 most significant).
/// Bound data is optional; without it only the left-hand side is defined.
struct SelectionProblem {
  std::vector<int> outcomes;  // outcomes per group, per party
  int groups = 0;
  int slots = 0;
  bool absolute = true;  // sum |term| (L, S) or signed terms (R)
  std::vector<std::vector<double>> tables;

  BoundMode mode = BoundMode::Proof;
  std::vector<double> constants;                                // per party
  std::vector<std::vector<std::vector<double>>> probabilities;  // [party][group][outcome] of the reduced state
  std::vector<double> statement_sums;                           // per party

  int parties() const { return static_cast<int>(outcomes.size()); }
  bool has_bound() const { return !constants.empty(); }
  /// True when the objective depends on the selection through the bound as well.
  bool bound_depends_on_selection() const;
};

struct BoundEvaluation {
  double value = 0.0;
  int first = 0;  // lexicographically first minimizing ordered pair
  int second = 1;
  std::vector<double> purity_sums;
  std::vector<double> radicands;  // before clamping
  bool clamped = false;           // some radicand was negative and clamped to 0
};

void check_selection(const SelectionProblem& problem, const SelectionPlan& plan);
double selection_lhs(const SelectionProblem& problem, const SelectionPlan& plan);
BoundEvaluation selection_bound(const SelectionProblem& problem, const SelectionPlan& plan);

class SearchCapExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

struct SearchOptions {
  std::size_t exhaustive_cap = 1'000'000;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct SearchResult {
  SelectionPlan plan;
  double lhs = 0.0;
  std::optional<BoundEvaluation> bound;
  double objective = 0.0;  // margin in proof mode, otherwise lhs
  std::size_t evaluated = 0;
};

/// Number of raw injection tuples: prod_k prod_j n_j!/(n_j-s)!.
std::size_t injection_tuple_count(const SelectionProblem& problem);

/// Candidates the exhaustive policy visits. Relabeling slots simultaneously in
/// all parties leaves every objective unchanged, so party 0 is restricted to
/// increasing slot assignments; in proof mode the groups are coupled only
/// through the chosen outcome subsets.
std::size_t exhaustive_work(const SelectionProblem& problem);

/// Greedy and identity only ever return a feasible selection, so their values
/// are lower bounds of the exhaustive optimum. Exhaustive throws
/// SearchCapExceeded above the cap; identity throws std::invalid_argument when
/// the parties' outcome counts differ.
SearchResult search_selections(SearchPolicy policy, const SelectionProblem& problem, const SearchOptions& options = {});

/// Tr((x)_j ops[j][n_j] X) for every outcome tuple, party 0 most significant.
std::vector<double> expectation_table(const CMatrix& x, const Shape& shape,
                                      const std::vector<const std::vector<CMatrix>*>& ops);

struct CriterionReport {
  CriterionId criterion = CriterionId::Thm1;
  BoundMode mode = BoundMode::Proof;
  SearchPolicy search = SearchPolicy::Exhaustive;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  Verdict verdict = Verdict::NotDetected;
  SelectionPlan selection;
  int pair_first = 0;
  int pair_second = 1;
  std::vector<double> purity_sums;
  std::vector<double> radicands;
  bool radicand_clamped = false;
  std::size_t candidates = 0;
};

struct EvalOptions {
  BoundMode mode = BoundMode::Proof;
  SearchPolicy search = SearchPolicy::Exhaustive;
  SearchOptions search_options;
  bool absolute_terms = false;  // R(rho) with |.| per term; only affects thm3
  double verdict_threshold = kDefaultTolerances.verdict_margin;
};

// thm1: MUB diagonal elements of delta rho.
SelectionProblem thm1_problem(const DensityMatrix& rho, std::span<const MubSet> mubs, BoundMode mode);
double lhs_thm1(const CMatrix& delta, const Shape& shape, std::span<const MubSet> mubs, const SelectionPlan& plan);
BoundEvaluation rhs_thm1(const DensityMatrix& rho, std::span<const MubSet> mubs, const SelectionPlan& plan,
                         BoundMode mode);
CriterionReport evaluate_thm1(const DensityMatrix& rho, std::span<const MubSet> mubs, const EvalOptions& options = {});

// thm2: MUM traces; every party must supply the same number of groups.
SelectionProblem thm2_problem(const DensityMatrix& rho, std::span<const MumSet> mums, BoundMode mode);
double lhs_thm2(const CMatrix& delta, const Shape& shape, std::span<const MumSet> mums, const SelectionPlan& plan);
BoundEvaluation rhs_thm2(const DensityMatrix& rho, std::span<const MumSet> mums, const SelectionPlan& plan,
                         BoundMode mode);
CriterionReport evaluate_thm2(const DensityMatrix& rho, std::span<const MumSet> mums, const EvalOptions& options = {});

// thm3: GSIC traces, a single group of d^2 slots with d the smallest local dimension.
SelectionProblem thm3_problem(const DensityMatrix& rho, std::span<const GsicSet> sets, BoundMode mode,
                              bool absolute_terms = false);
double lhs_thm3(const CMatrix& delta, const Shape& shape, std::span<const GsicSet> sets, const SelectionPlan& plan,
                bool absolute_terms = false);
BoundEvaluation rhs_thm3(const DensityMatrix& rho, std::span<const GsicSet> sets, const SelectionPlan& plan,
                         BoundMode mode);
CriterionReport evaluate_thm3(const DensityMatrix& rho, std::span<const GsicSet> sets, const EvalOptions& options = {});

/// Searches `problem` and packages the result; shared by the three evaluators.
CriterionReport evaluate_problem(CriterionId id, const SelectionProblem& problem, const EvalOptions& options);

/// Single-system purity relations: the MUB and MUM sums are upper-bounded
/// (slack = bound - sum), the GSIC sum is an identity in Tr(rho^2).
struct PurityCheck {
  double sum = 0.0;
  double bound = 0.0;  // bound value, or the identity's right-hand side
  double purity = 0.0; // Tr(rho^2)
  double slack = 0.0;
  double residual = 0.0;  // violation of the inequality, or |sum - bound| for the identity
  bool equality = false;
  bool holds = false;
};

PurityCheck purity_identity_check(const CMatrix& rho, const MubSet& mub, double tol = 1e-10);
PurityCheck purity_identity_check(const CMatrix& rho, const MumSet& mum, double tol = 1e-10);
PurityCheck purity_identity_check(const CMatrix& rho, const GsicSet& gsic, double tol = 1e-10);

}  // namespace mubsep
