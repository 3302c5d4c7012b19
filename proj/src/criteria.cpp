#include "mubsep/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "mubsep/partitions.hpp"

namespace mubsep {

std::string to_string(CriterionId id) {
  switch (id) {
    case CriterionId::Thm1: return "THM1";
    case CriterionId::Thm2: return "THM2";
    case CriterionId::Thm3: return "THM3";
  }
  return "?";
}

std::string to_string(BoundMode mode) { return mode == BoundMode::Proof ? "proof" : "statement"; }

std::string to_string(SearchPolicy policy) {
  switch (policy) {
    case SearchPolicy::Exhaustive: return "exhaustive";
    case SearchPolicy::Greedy: return "greedy";
    case SearchPolicy::Identity: return "identity";
  }
  return "?";
}

std::string to_string(Verdict verdict) { return verdict == Verdict::Entangled ? "ENTANGLED" : "NOT_DETECTED"; }

CriterionId parse_criterion(const std::string& text) {
  if (text == "thm1" || text == "THM1") return CriterionId::Thm1;
  if (text == "thm2" || text == "THM2") return CriterionId::Thm2;
  if (text == "thm3" || text == "THM3") return CriterionId::Thm3;
  throw std::invalid_argument("unknown criterion \"" + text + "\" (expected thm1, thm2 or thm3)");
}

BoundMode parse_bound_mode(const std::string& text) {
  if (text == "proof") return BoundMode::Proof;
  if (text == "statement") return BoundMode::Statement;
  throw std::invalid_argument("unknown mode \"" + text + "\" (expected proof or statement)");
}

SearchPolicy parse_search_policy(const std::string& text) {
  if (text == "exhaustive") return SearchPolicy::Exhaustive;
  if (text == "greedy") return SearchPolicy::Greedy;
  if (text == "identity" || text == "identity-only") return SearchPolicy::Identity;
  throw std::invalid_argument("unknown search policy \"" + text + "\" (expected exhaustive, greedy or identity)");
}

SelectionPlan SelectionPlan::identity(int parties, int groups, int slots) {
  std::vector<int> ids(static_cast<std::size_t>(slots));
  std::iota(ids.begin(), ids.end(), 0);
  SelectionPlan plan;
  plan.map.assign(static_cast<std::size_t>(parties), std::vector<std::vector<int>>(static_cast<std::size_t>(groups), ids));
  return plan;
}

std::string SelectionPlan::describe() const {
  std::ostringstream os;
  for (int j = 0; j < parties(); ++j) {
    if (j) os << ' ';
    os << 'p' << j + 1 << '[';
    for (int k = 0; k < groups(); ++k) {
      if (k) os << ' ';
      os << 'g' << k + 1 << ':';
      const auto& slots_of = map[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < slots_of.size(); ++i) os << (i ? "," : "") << slots_of[i] + 1;
    }
    os << ']';
  }
  return os.str();
}

bool SelectionProblem::bound_depends_on_selection() const {
  if (!has_bound() || mode != BoundMode::Proof) return false;
  return std::any_of(outcomes.begin(), outcomes.end(), [this](int n) { return n > slots; });
}

namespace {

std::vector<std::size_t> table_strides(const std::vector<int>& outcomes) {
  std::vector<std::size_t> strides(outcomes.size());
  std::size_t s = 1;
  for (std::size_t j = outcomes.size(); j-- > 0;) {
    strides[j] = s;
    s *= static_cast<std::size_t>(outcomes[j]);
  }
  return strides;
}

inline double term_value(double raw, bool absolute) { return absolute ? std::abs(raw) : raw; }

std::size_t sat_mul(std::size_t a, std::size_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > std::numeric_limits<std::size_t>::max() / b) return std::numeric_limits<std::size_t>::max();
  return a * b;
}

std::size_t sat_add(std::size_t a, std::size_t b) {
  return a > std::numeric_limits<std::size_t>::max() - b ? std::numeric_limits<std::size_t>::max() : a + b;
}

std::size_t falling_factorial(int n, int k) {
  std::size_t out = 1;
  for (int i = 0; i < k; ++i) out = sat_mul(out, static_cast<std::size_t>(n - i));
  return out;
}

std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::size_t out = 1;
  for (int i = 1; i <= k; ++i) {
    // exact at every step: out * (n-k+i) is divisible by i
    const std::size_t num = sat_mul(out, static_cast<std::size_t>(n - k + i));
    if (num == std::numeric_limits<std::size_t>::max()) return num;
    out = num / static_cast<std::size_t>(i);
  }
  return out;
}

void check_problem(const SelectionProblem& problem) {
  if (problem.outcomes.empty() || problem.groups < 1 || problem.slots < 1)
    throw std::invalid_argument("selection problem: empty instance");
  for (int n : problem.outcomes)
    if (n < problem.slots) throw std::invalid_argument("selection problem: fewer outcomes than slots");
  std::size_t table_size = 1;
  for (int n : problem.outcomes) table_size *= static_cast<std::size_t>(n);
  if (problem.tables.size() != static_cast<std::size_t>(problem.groups))
    throw std::invalid_argument("selection problem: one table per group is required");
  for (const auto& t : problem.tables)
    if (t.size() != table_size) throw std::invalid_argument("selection problem: table size mismatch");
}

// Deterministic parallel argmax over [0, count): the first index attaining the
// maximum wins, independent of the thread count.
template <class Eval>
std::pair<double, std::size_t> best_of(std::size_t count, const Eval& eval, unsigned threads) {
  auto scan = [&eval](std::size_t lo, std::size_t hi) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = lo;
    for (std::size_t i = lo; i < hi; ++i) {
      const double v = eval(i);
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    return std::pair{best, arg};
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  if (threads <= 1 || count < 8192) return scan(0, count);

  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::vector<std::pair<double, std::size_t>> partial(threads);
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = std::min(count, t * chunk);
    const std::size_t hi = std::min(count, lo + chunk);
    pool.emplace_back([&, t, lo, hi] { partial[t] = scan(lo, hi); });
  }
  for (auto& th : pool) th.join();
  auto best = partial.front();
  for (std::size_t t = 1; t < partial.size(); ++t)
    if (partial[t].first > best.first) best = partial[t];
  return best;
}

std::vector<std::vector<int>> combinations(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(static_cast<std::size_t>(k));
  std::iota(current.begin(), current.end(), 0);
  while (true) {
    out.push_back(current);
    int i = k - 1;
    while (i >= 0 && current[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++current[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) current[static_cast<std::size_t>(j)] = current[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

std::vector<std::vector<int>> permutations(int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(static_cast<std::size_t>(k));
  std::iota(current.begin(), current.end(), 0);
  do out.push_back(current);
  while (std::next_permutation(current.begin(), current.end()));
  return out;
}

// Candidate layout shared by every group: party 0 picks an increasing subset,
// the other parties pick a subset and an ordering of it.
struct Layout {
  std::vector<std::vector<std::vector<int>>> combos;  // [party][profile digit] -> sorted subset
  std::vector<std::vector<int>> perms;
  std::vector<std::size_t> perm_flat;  // perms back to back
  std::vector<std::size_t> strides;
  std::size_t profiles = 1;
  std::size_t pairings = 1;

  std::vector<std::size_t> profile_digits(std::size_t p) const {
    std::vector<std::size_t> digits(combos.size());
    for (std::size_t j = combos.size(); j-- > 0;) {
      digits[j] = p % combos[j].size();
      p /= combos[j].size();
    }
    return digits;
  }
  std::vector<std::size_t> pairing_digits(std::size_t q) const {
    std::vector<std::size_t> digits(combos.size(), 0);
    for (std::size_t j = combos.size(); j-- > 1;) {
      digits[j] = q % perms.size();
      q /= perms.size();
    }
    return digits;
  }
};

Layout make_layout(const SelectionProblem& problem) {
  Layout layout;
  layout.strides = table_strides(problem.outcomes);
  for (int n : problem.outcomes) {
    layout.combos.push_back(combinations(n, problem.slots));
    layout.profiles *= layout.combos.back().size();
  }
  if (problem.parties() > 32) throw std::invalid_argument("search: too many parties");
  layout.perms = permutations(problem.slots);
  for (const auto& perm : layout.perms)
    for (int x : perm) layout.perm_flat.push_back(static_cast<std::size_t>(x));
  for (int j = 1; j < problem.parties(); ++j) layout.pairings *= layout.perms.size();
  return layout;
}

// Best slot pairing for one group and one subset profile. Offsets are
// precomputed so the inner loop only gathers table entries.
std::pair<double, std::size_t> best_pairing_for(const SelectionProblem& problem, const Layout& layout, int group,
                                                std::size_t p, unsigned threads) {
  const auto pd = layout.profile_digits(p);
  const std::size_t m = layout.combos.size();
  const std::size_t s = static_cast<std::size_t>(problem.slots);
  std::vector<std::size_t> offsets(m * s);  // [party][slot]
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < s; ++i)
      offsets[j * s + i] = static_cast<std::size_t>(layout.combos[j][pd[j]][i]) * layout.strides[j];
  const auto& perm_flat = layout.perm_flat;

  const double* table = problem.tables[static_cast<std::size_t>(group)].data();
  const bool absolute = problem.absolute;
  const std::size_t nperm = layout.perms.size();
  auto value = [&](std::size_t q) {
    std::size_t base[32];  // start of each party's permutation in perm_flat
    for (std::size_t j = m; j-- > 1;) {
      base[j] = (q % nperm) * s;
      q /= nperm;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
      std::size_t idx = offsets[i];
      for (std::size_t j = 1; j < m; ++j) idx += offsets[j * s + perm_flat[base[j] + i]];
      sum += term_value(table[idx], absolute);
    }
    return sum;
  };
  return best_of(layout.pairings, value, threads);
}

void write_candidate(const SelectionProblem& problem, const Layout& layout, int group, std::size_t p, std::size_t q,
                     SelectionPlan& plan) {
  const auto pd = layout.profile_digits(p);
  const auto qd = layout.pairing_digits(q);
  for (std::size_t j = 0; j < layout.combos.size(); ++j) {
    auto& dst = plan.map[j][static_cast<std::size_t>(group)];
    dst.resize(static_cast<std::size_t>(problem.slots));
    const auto& subset = layout.combos[j][pd[j]];
    for (int i = 0; i < problem.slots; ++i) {
      const int slot = j == 0 ? i : layout.perms[qd[j]][static_cast<std::size_t>(i)];
      dst[static_cast<std::size_t>(i)] = subset[static_cast<std::size_t>(slot)];
    }
  }
}

SelectionPlan empty_plan(const SelectionProblem& problem) {
  SelectionPlan plan;
  plan.map.assign(static_cast<std::size_t>(problem.parties()),
                  std::vector<std::vector<int>>(static_cast<std::size_t>(problem.groups)));
  return plan;
}

SearchResult finish(const SelectionProblem& problem, SelectionPlan plan, std::size_t evaluated) {
  SearchResult result;
  result.lhs = selection_lhs(problem, plan);
  result.objective = result.lhs;
  if (problem.has_bound()) {
    result.bound = selection_bound(problem, plan);
    if (problem.mode == BoundMode::Proof) result.objective = result.lhs - result.bound->value;
  }
  result.plan = std::move(plan);
  result.evaluated = evaluated;
  return result;
}

SearchResult search_exhaustive(const SelectionProblem& problem, const SearchOptions& options) {
  const std::size_t work = exhaustive_work(problem);
  if (work > options.exhaustive_cap)
    throw SearchCapExceeded("exhaustive search needs " +
                            (work == std::numeric_limits<std::size_t>::max() ? std::string("more than 2^64")
                                                                             : std::to_string(work)) +
                            " candidates, above the cap of " + std::to_string(options.exhaustive_cap) +
                            "; use the greedy policy or raise the cap");
  const Layout layout = make_layout(problem);
  SelectionPlan plan = empty_plan(problem);

  if (!problem.bound_depends_on_selection()) {
    // The objective separates over groups: maximize each one independently.
    for (int k = 0; k < problem.groups; ++k) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_p = 0, best_q = 0;
      for (std::size_t p = 0; p < layout.profiles; ++p) {
        const auto [value, q] = best_pairing_for(problem, layout, k, p, options.threads);
        if (value > best) {
          best = value;
          best_p = p;
          best_q = q;
        }
      }
      write_candidate(problem, layout, k, best_p, best_q, plan);
    }
    return finish(problem, std::move(plan), work);
  }

  // Proof-mode bound couples the groups through the outcome subsets only:
  // best pairing per (group, subset profile), then a joint scan over profiles.
  std::vector<std::vector<double>> best_value(static_cast<std::size_t>(problem.groups));
  std::vector<std::vector<std::size_t>> best_pairing(static_cast<std::size_t>(problem.groups));
  for (int k = 0; k < problem.groups; ++k)
    for (std::size_t p = 0; p < layout.profiles; ++p) {
      const auto [value, arg] = best_pairing_for(problem, layout, k, p, options.threads);
      best_value[static_cast<std::size_t>(k)].push_back(value);
      best_pairing[static_cast<std::size_t>(k)].push_back(arg);
    }

  // squared-probability sums of every subset, per party and group
  const int m = problem.parties();
  std::vector<std::vector<std::vector<double>>> subset_sums(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a)
    for (int k = 0; k < problem.groups; ++k) {
      std::vector<double> sums;
      for (const auto& subset : layout.combos[static_cast<std::size_t>(a)]) {
        double s = 0.0;
        for (int n : subset) {
          const double q = problem.probabilities[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)][static_cast<std::size_t>(n)];
          s += q * q;
        }
        sums.push_back(s);
      }
      subset_sums[static_cast<std::size_t>(a)].push_back(std::move(sums));
    }

  std::size_t joint = 1;
  for (int k = 0; k < problem.groups; ++k) joint *= layout.profiles;
  auto decode_joint = [&](std::size_t c) {
    std::vector<std::size_t> per_group(static_cast<std::size_t>(problem.groups));
    for (std::size_t k = per_group.size(); k-- > 0;) {
      per_group[k] = c % layout.profiles;
      c /= layout.profiles;
    }
    return per_group;
  };
  auto joint_margin = [&](std::size_t c) {
    const auto profile_of = decode_joint(c);
    double lhs = 0.0;
    for (int k = 0; k < problem.groups; ++k) lhs += best_value[static_cast<std::size_t>(k)][profile_of[static_cast<std::size_t>(k)]];
    std::vector<double> roots(static_cast<std::size_t>(m));
    for (int a = 0; a < m; ++a) {
      double s = 0.0;
      for (int k = 0; k < problem.groups; ++k) {
        const auto digit = layout.profile_digits(profile_of[static_cast<std::size_t>(k)])[static_cast<std::size_t>(a)];
        s += subset_sums[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)][digit];
      }
      roots[static_cast<std::size_t>(a)] = std::sqrt(std::max(0.0, problem.constants[static_cast<std::size_t>(a)] - s));
    }
    double rhs = std::numeric_limits<double>::infinity();
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        if (a != b) rhs = std::min(rhs, roots[static_cast<std::size_t>(a)] * roots[static_cast<std::size_t>(b)]);
    return lhs - rhs;
  };
  const auto [value, arg] = best_of(joint, joint_margin, options.threads);
  (void)value;
  const auto profile_of = decode_joint(arg);
  for (int k = 0; k < problem.groups; ++k) {
    const auto p = profile_of[static_cast<std::size_t>(k)];
    write_candidate(problem, layout, k, p, best_pairing[static_cast<std::size_t>(k)][p], plan);
  }
  return finish(problem, std::move(plan), work);
}

bool equal_outcomes(const SelectionProblem& problem) {
  return std::all_of(problem.outcomes.begin(), problem.outcomes.end(),
                     [&](int n) { return n == problem.outcomes.front(); });
}

SearchResult search_greedy(const SelectionProblem& problem) {
  const int m = problem.parties();
  const auto strides = table_strides(problem.outcomes);
  std::size_t table_size = 1;
  for (int n : problem.outcomes) table_size *= static_cast<std::size_t>(n);

  SelectionPlan plan = empty_plan(problem);
  std::size_t evaluated = 0;
  for (int k = 0; k < problem.groups; ++k) {
    const auto& table = problem.tables[static_cast<std::size_t>(k)];
    std::vector<std::vector<char>> used(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) used[static_cast<std::size_t>(j)].assign(static_cast<std::size_t>(problem.outcomes[static_cast<std::size_t>(j)]), 0);
    for (int slot = 0; slot < problem.slots; ++slot) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      // flat index order is lexicographic in the outcome tuple
      for (std::size_t idx = 0; idx < table_size; ++idx) {
        bool free = true;
        for (int j = 0; j < m && free; ++j) {
          const auto digit = (idx / strides[static_cast<std::size_t>(j)]) % static_cast<std::size_t>(problem.outcomes[static_cast<std::size_t>(j)]);
          free = !used[static_cast<std::size_t>(j)][digit];
        }
        if (!free) continue;
        ++evaluated;
        const double v = term_value(table[idx], problem.absolute);
        if (v > best) {
          best = v;
          arg = idx;
        }
      }
      for (int j = 0; j < m; ++j) {
        const auto digit = (arg / strides[static_cast<std::size_t>(j)]) % static_cast<std::size_t>(problem.outcomes[static_cast<std::size_t>(j)]);
        used[static_cast<std::size_t>(j)][digit] = 1;
        plan.map[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].push_back(static_cast<int>(digit));
      }
    }
  }
  SearchResult result = finish(problem, std::move(plan), evaluated);
  // The identity selection is a candidate too, so greedy never falls below it.
  if (equal_outcomes(problem)) {
    SearchResult id = finish(problem, SelectionPlan::identity(m, problem.groups, problem.slots), 1);
    if (id.objective > result.objective) {
      id.evaluated += result.evaluated;
      return id;
    }
    result.evaluated += 1;
  }
  return result;
}

}  // namespace

void check_selection(const SelectionProblem& problem, const SelectionPlan& plan) {
  if (plan.parties() != problem.parties() || plan.groups() != problem.groups)
    throw std::invalid_argument("selection plan does not match the problem's parties and groups");
  for (int j = 0; j < problem.parties(); ++j)
    for (int k = 0; k < problem.groups; ++k) {
      const auto& slots_of = plan.map[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      if (static_cast<int>(slots_of.size()) != problem.slots)
        throw std::invalid_argument("selection plan has the wrong number of slots");
      std::vector<char> seen(static_cast<std::size_t>(problem.outcomes[static_cast<std::size_t>(j)]), 0);
      for (int n : slots_of) {
        if (n < 0 || n >= problem.outcomes[static_cast<std::size_t>(j)])
          throw std::invalid_argument("selection out of range");
        if (seen[static_cast<std::size_t>(n)]++) throw std::invalid_argument("selection is not injective");
      }
    }
}

double selection_lhs(const SelectionProblem& problem, const SelectionPlan& plan) {
  check_problem(problem);
  check_selection(problem, plan);
  const auto strides = table_strides(problem.outcomes);
  double sum = 0.0;
  for (int k = 0; k < problem.groups; ++k)
    for (int i = 0; i < problem.slots; ++i) {
      std::size_t idx = 0;
      for (int j = 0; j < problem.parties(); ++j)
        idx += static_cast<std::size_t>(plan.map[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]) *
               strides[static_cast<std::size_t>(j)];
      sum += term_value(problem.tables[static_cast<std::size_t>(k)][idx], problem.absolute);
    }
  return sum;
}

BoundEvaluation selection_bound(const SelectionProblem& problem, const SelectionPlan& plan) {
  if (!problem.has_bound()) throw std::invalid_argument("selection problem carries no bound data");
  const int m = problem.parties();
  if (m < 2) throw std::invalid_argument("the bound needs at least two parties");
  BoundEvaluation out;
  for (int a = 0; a < m; ++a) {
    double s = 0.0;
    if (problem.mode == BoundMode::Statement) {
      s = problem.statement_sums[static_cast<std::size_t>(a)];
    } else {
      for (int k = 0; k < problem.groups; ++k)
        for (int n : plan.map[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)]) {
          const double q = problem.probabilities[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)][static_cast<std::size_t>(n)];
          s += q * q;
        }
    }
    out.purity_sums.push_back(s);
    out.radicands.push_back(problem.constants[static_cast<std::size_t>(a)] - s);
  }
  std::vector<double> roots;
  for (double r : out.radicands) {
    if (r < 0.0) out.clamped = true;
    roots.push_back(std::sqrt(std::max(0.0, r)));
  }
  out.value = std::numeric_limits<double>::infinity();
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      const double v = roots[static_cast<std::size_t>(a)] * roots[static_cast<std::size_t>(b)];
      if (v < out.value) {
        out.value = v;
        out.first = a;
        out.second = b;
      }
    }
  return out;
}

std::size_t injection_tuple_count(const SelectionProblem& problem) {
  std::size_t total = 1;
  for (int k = 0; k < problem.groups; ++k)
    for (int n : problem.outcomes) total = sat_mul(total, falling_factorial(n, problem.slots));
  return total;
}

std::size_t exhaustive_work(const SelectionProblem& problem) {
  std::size_t profiles = 1;
  for (int n : problem.outcomes) profiles = sat_mul(profiles, binomial(n, problem.slots));
  std::size_t pairings = 1;
  for (int j = 1; j < problem.parties(); ++j) pairings = sat_mul(pairings, falling_factorial(problem.slots, problem.slots));
  std::size_t work = sat_mul(static_cast<std::size_t>(problem.groups), sat_mul(profiles, pairings));
  if (problem.bound_depends_on_selection()) {
    std::size_t joint = 1;
    for (int k = 0; k < problem.groups; ++k) joint = sat_mul(joint, profiles);
    work = sat_add(work, joint);
  }
  return work;
}

SearchResult search_selections(SearchPolicy policy, const SelectionProblem& problem, const SearchOptions& options) {
  check_problem(problem);
  switch (policy) {
    case SearchPolicy::Exhaustive: return search_exhaustive(problem, options);
    case SearchPolicy::Greedy: return search_greedy(problem);
    case SearchPolicy::Identity:
      if (!equal_outcomes(problem))
        throw std::invalid_argument("identity selection requires every party to have the same number of outcomes");
      return finish(problem, SelectionPlan::identity(problem.parties(), problem.groups, problem.slots), 1);
  }
  throw std::invalid_argument("unknown search policy");
}

std::vector<double> expectation_table(const CMatrix& x, const Shape& shape,
                                      const std::vector<const std::vector<CMatrix>*>& ops) {
  if (static_cast<int>(ops.size()) != shape.parties())
    throw std::invalid_argument("expectation_table: one operator list per party is required");
  if (x.rows() != shape.total() || x.cols() != shape.total())
    throw std::invalid_argument("expectation_table: operator size does not match shape");

  // Contract the leading subsystem against every operator of its party; the
  // output list stays in row-major order over the contracted outcome digits.
  std::vector<CMatrix> current{x};
  Eigen::Index rest = shape.total();
  for (int j = 0; j < shape.parties(); ++j) {
    const int d = shape.dim(j);
    const Eigen::Index inner = rest / d;
    std::vector<CMatrix> next;
    next.reserve(current.size() * ops[static_cast<std::size_t>(j)]->size());
    for (const auto& y : current)
      for (const auto& p : *ops[static_cast<std::size_t>(j)]) {
        if (p.rows() != d || p.cols() != d) throw std::invalid_argument("expectation_table: operator dimension mismatch");
        CMatrix z = CMatrix::Zero(inner, inner);
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) {
            const Complex c = p(b, a);
            if (c == Complex{0.0, 0.0}) continue;
            z += c * y.block(a * inner, b * inner, inner, inner);
          }
        next.push_back(std::move(z));
      }
    current = std::move(next);
    rest = inner;
  }
  std::vector<double> out;
  out.reserve(current.size());
  for (const auto& z : current) out.push_back(z(0, 0).real());
  return out;
}

namespace {

// Per-party measurement data feeding a SelectionProblem.
struct LocalFamily {
  std::vector<std::vector<CMatrix>> groups;  // every group the party offers
  double constant = 0.0;
};

SelectionProblem assemble(const CMatrix* delta, const DensityMatrix* rho, const Shape& shape,
                          const std::vector<LocalFamily>& families, int groups, int slots, bool absolute,
                          BoundMode mode) {
  const int m = shape.parties();
  SelectionProblem problem;
  problem.groups = groups;
  problem.slots = slots;
  problem.absolute = absolute;
  problem.mode = mode;
  for (int j = 0; j < m; ++j)
    problem.outcomes.push_back(static_cast<int>(families[static_cast<std::size_t>(j)].groups.front().size()));

  if (delta != nullptr) {
    for (int k = 0; k < groups; ++k) {
      std::vector<const std::vector<CMatrix>*> ops;
      for (int j = 0; j < m; ++j) ops.push_back(&families[static_cast<std::size_t>(j)].groups[static_cast<std::size_t>(k)]);
      problem.tables.push_back(expectation_table(*delta, shape, ops));
    }
  } else {
    std::size_t size = 1;
    for (int n : problem.outcomes) size *= static_cast<std::size_t>(n);
    problem.tables.assign(static_cast<std::size_t>(groups), std::vector<double>(size, 0.0));
  }

  if (rho != nullptr) {
    for (int a = 0; a < m; ++a) {
      const auto& fam = families[static_cast<std::size_t>(a)];
      const CMatrix reduced = partial_trace(rho->matrix(), rho->shape(), std::vector<int>{a});
      std::vector<std::vector<double>> probs;
      double statement = 0.0;
      for (std::size_t k = 0; k < fam.groups.size(); ++k) {
        std::vector<double> row;
        for (const auto& p : fam.groups[k]) {
          const double q = trace_product_real(p, reduced);
          row.push_back(q);
          statement += q * q;
        }
        if (static_cast<int>(k) < groups) probs.push_back(std::move(row));
      }
      problem.constants.push_back(fam.constant);
      problem.probabilities.push_back(std::move(probs));
      problem.statement_sums.push_back(statement);
    }
  }
  return problem;
}

void require_even_parties(const Shape& shape) {
  if (shape.parties() < 2 || shape.parties() % 2 != 0)
    throw std::invalid_argument("the criteria need an even number (>= 2) of subsystems; got " +
                                std::to_string(shape.parties()));
}

template <class Set>
void require_one_per_party(const Shape& shape, std::span<const Set> sets, const char* what) {
  if (static_cast<int>(sets.size()) != shape.parties())
    throw std::invalid_argument(std::string("one ") + what + " set per subsystem is required (got " +
                                std::to_string(sets.size()) + " for " + std::to_string(shape.parties()) + " subsystems)");
  for (int j = 0; j < shape.parties(); ++j)
    if (sets[static_cast<std::size_t>(j)].dim != shape.dim(j))
      throw std::invalid_argument(std::string(what) + " set " + std::to_string(j + 1) + " has dimension " +
                                  std::to_string(sets[static_cast<std::size_t>(j)].dim) + ", subsystem has " +
                                  std::to_string(shape.dim(j)));
}

std::vector<LocalFamily> thm1_families(const Shape& shape, std::span<const MubSet> mubs, int& groups) {
  require_one_per_party(shape, mubs, "MUB");
  std::vector<LocalFamily> out;
  groups = std::numeric_limits<int>::max();
  for (int j = 0; j < shape.parties(); ++j) {
    const auto& mub = mubs[static_cast<std::size_t>(j)];
    if (mub.count() < 1) throw std::invalid_argument("MUB set " + std::to_string(j + 1) + " is empty");
    LocalFamily fam;
    for (const auto& basis : mub.bases) {
      std::vector<CMatrix> group;
      for (const auto& v : basis) group.push_back(projector(v));
      fam.groups.push_back(std::move(group));
    }
    fam.constant = 1.0 + static_cast<double>(mub.count() - 1) / mub.dim;
    groups = std::min(groups, mub.count());
    out.push_back(std::move(fam));
  }
  return out;
}

std::vector<LocalFamily> thm2_families(const Shape& shape, std::span<const MumSet> mums, int& groups) {
  require_one_per_party(shape, mums, "MUM");
  groups = mums.front().count();
  for (const auto& mum : mums)
    if (mum.count() != groups)
      throw std::invalid_argument("every subsystem must supply the same number M of MUM groups");
  if (groups < 1) throw std::invalid_argument("MUM sets are empty");
  std::vector<LocalFamily> out;
  for (const auto& mum : mums) {
    LocalFamily fam;
    fam.groups = mum.groups;
    fam.constant = static_cast<double>(groups - 1) / mum.dim + mum.kappa;
    out.push_back(std::move(fam));
  }
  return out;
}

std::vector<LocalFamily> thm3_families(const Shape& shape, std::span<const GsicSet> sets) {
  require_one_per_party(shape, sets, "GSIC");
  std::vector<LocalFamily> out;
  for (const auto& g : sets) {
    if (static_cast<int>(g.ops.size()) != g.dim * g.dim)
      throw std::invalid_argument("GSIC set must hold d^2 operators");
    LocalFamily fam;
    fam.groups.push_back(g.ops);
    const double d = g.dim;
    fam.constant = (g.a * d * d + 1.0) / (d * (d + 1.0));
    out.push_back(std::move(fam));
  }
  return out;
}

int gsic_slots(const Shape& shape) { return shape.min_dim() * shape.min_dim(); }

}  // namespace

SelectionProblem thm1_problem(const DensityMatrix& rho, std::span<const MubSet> mubs, BoundMode mode) {
  require_even_parties(rho.shape());
  int groups = 0;
  const auto families = thm1_families(rho.shape(), mubs, groups);
  const CMatrix delta = delta_rho(rho);
  return assemble(&delta, &rho, rho.shape(), families, groups, rho.shape().min_dim(), true, mode);
}

double lhs_thm1(const CMatrix& delta, const Shape& shape, std::span<const MubSet> mubs, const SelectionPlan& plan) {
  int groups = 0;
  const auto families = thm1_families(shape, mubs, groups);
  return selection_lhs(assemble(&delta, nullptr, shape, families, groups, shape.min_dim(), true, BoundMode::Proof), plan);
}

BoundEvaluation rhs_thm1(const DensityMatrix& rho, std::span<const MubSet> mubs, const SelectionPlan& plan,
                         BoundMode mode) {
  int groups = 0;
  const auto families = thm1_families(rho.shape(), mubs, groups);
  const auto problem = assemble(nullptr, &rho, rho.shape(), families, groups, rho.shape().min_dim(), true, mode);
  check_selection(problem, plan);
  return selection_bound(problem, plan);
}

CriterionReport evaluate_thm1(const DensityMatrix& rho, std::span<const MubSet> mubs, const EvalOptions& options) {
  return evaluate_problem(CriterionId::Thm1, thm1_problem(rho, mubs, options.mode), options);
}

SelectionProblem thm2_problem(const DensityMatrix& rho, std::span<const MumSet> mums, BoundMode mode) {
  require_even_parties(rho.shape());
  int groups = 0;
  const auto families = thm2_families(rho.shape(), mums, groups);
  const CMatrix delta = delta_rho(rho);
  return assemble(&delta, &rho, rho.shape(), families, groups, rho.shape().min_dim(), true, mode);
}

double lhs_thm2(const CMatrix& delta, const Shape& shape, std::span<const MumSet> mums, const SelectionPlan& plan) {
  int groups = 0;
  const auto families = thm2_families(shape, mums, groups);
  return selection_lhs(assemble(&delta, nullptr, shape, families, groups, shape.min_dim(), true, BoundMode::Proof), plan);
}

BoundEvaluation rhs_thm2(const DensityMatrix& rho, std::span<const MumSet> mums, const SelectionPlan& plan,
                         BoundMode mode) {
  int groups = 0;
  const auto families = thm2_families(rho.shape(), mums, groups);
  const auto problem = assemble(nullptr, &rho, rho.shape(), families, groups, rho.shape().min_dim(), true, mode);
  check_selection(problem, plan);
  return selection_bound(problem, plan);
}

CriterionReport evaluate_thm2(const DensityMatrix& rho, std::span<const MumSet> mums, const EvalOptions& options) {
  return evaluate_problem(CriterionId::Thm2, thm2_problem(rho, mums, options.mode), options);
}

SelectionProblem thm3_problem(const DensityMatrix& rho, std::span<const GsicSet> sets, BoundMode mode,
                              bool absolute_terms) {
  require_even_parties(rho.shape());
  const auto families = thm3_families(rho.shape(), sets);
  const CMatrix delta = delta_rho(rho);
  return assemble(&delta, &rho, rho.shape(), families, 1, gsic_slots(rho.shape()), absolute_terms, mode);
}

double lhs_thm3(const CMatrix& delta, const Shape& shape, std::span<const GsicSet> sets, const SelectionPlan& plan,
                bool absolute_terms) {
  const auto families = thm3_families(shape, sets);
  return selection_lhs(assemble(&delta, nullptr, shape, families, 1, gsic_slots(shape), absolute_terms, BoundMode::Proof),
                       plan);
}

BoundEvaluation rhs_thm3(const DensityMatrix& rho, std::span<const GsicSet> sets, const SelectionPlan& plan,
                         BoundMode mode) {
  const auto families = thm3_families(rho.shape(), sets);
  const auto problem = assemble(nullptr, &rho, rho.shape(), families, 1, gsic_slots(rho.shape()), false, mode);
  check_selection(problem, plan);
  return selection_bound(problem, plan);
}

CriterionReport evaluate_thm3(const DensityMatrix& rho, std::span<const GsicSet> sets, const EvalOptions& options) {
  return evaluate_problem(CriterionId::Thm3, thm3_problem(rho, sets, options.mode, options.absolute_terms), options);
}

CriterionReport evaluate_problem(CriterionId id, const SelectionProblem& problem, const EvalOptions& options) {
  if (!problem.has_bound()) throw std::invalid_argument("evaluate: selection problem carries no bound data");
  const SearchResult found = search_selections(options.search, problem, options.search_options);
  CriterionReport report;
  report.criterion = id;
  report.mode = problem.mode;
  report.search = options.search;
  report.lhs = found.lhs;
  report.rhs = found.bound->value;
  report.margin = report.lhs - report.rhs;
  report.verdict = report.margin > options.verdict_threshold ? Verdict::Entangled : Verdict::NotDetected;
  report.selection = found.plan;
  report.pair_first = found.bound->first;
  report.pair_second = found.bound->second;
  report.purity_sums = found.bound->purity_sums;
  report.radicands = found.bound->radicands;
  report.radicand_clamped = found.bound->clamped;
  report.candidates = found.evaluated;
  return report;
}

namespace {

double purity_of(const CMatrix& rho) { return trace_product_real(rho, rho); }

void require_square(const CMatrix& rho, int d) {
  if (rho.rows() != d || rho.cols() != d)
    throw std::invalid_argument("purity_identity_check: state dimension does not match the measurement");
}

PurityCheck inequality(double sum, double bound, double purity, double tol) {
  PurityCheck out;
  out.sum = sum;
  out.bound = bound;
  out.purity = purity;
  out.slack = bound - sum;
  out.residual = std::max(0.0, sum - bound);
  out.holds = sum <= bound + tol;
  return out;
}

}  // namespace

PurityCheck purity_identity_check(const CMatrix& rho, const MubSet& mub, double tol) {
  require_square(rho, mub.dim);
  double sum = 0.0;
  for (const auto& basis : mub.bases)
    for (const auto& v : basis) {
      const double q = v.dot(rho * v).real();
      sum += q * q;
    }
  return inequality(sum, 1.0 + static_cast<double>(mub.count() - 1) / mub.dim, purity_of(rho), tol);
}

PurityCheck purity_identity_check(const CMatrix& rho, const MumSet& mum, double tol) {
  require_square(rho, mum.dim);
  double sum = 0.0;
  for (const auto& group : mum.groups)
    for (const auto& p : group) {
      const double q = trace_product_real(p, rho);
      sum += q * q;
    }
  const double d = mum.dim;
  const double purity = purity_of(rho);
  const double bound = (mum.count() - 1) / d + (1.0 - mum.kappa + (mum.kappa * d - 1.0) * purity) / (d - 1.0);
  return inequality(sum, bound, purity, tol);
}

PurityCheck purity_identity_check(const CMatrix& rho, const GsicSet& gsic, double tol) {
  require_square(rho, gsic.dim);
  double sum = 0.0;
  for (const auto& p : gsic.ops) {
    const double q = trace_product_real(p, rho);
    sum += q * q;
  }
  const double d = gsic.dim;
  const double purity = purity_of(rho);
  PurityCheck out;
  out.sum = sum;
  out.purity = purity;
  out.bound = ((gsic.a * d * d * d - 1.0) * purity + d * (1.0 - gsic.a * d)) / (d * (d * d - 1.0));
  out.slack = out.bound - sum;
  out.residual = std::abs(sum - out.bound);
  out.equality = true;
  out.holds = out.residual <= tol;
  return out;
}

}  // namespace mubsep
