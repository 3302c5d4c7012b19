#include "mubsep/scan.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace mubsep {

ScanResult run_scan(const std::function<CriterionReport(double)>& evaluate, double from, double to, int steps,
                    double tolerance) {
  if (!std::isfinite(from) || !std::isfinite(to) || from > to)
    throw std::invalid_argument("scan: need a finite range with p-from <= p-to");
  if (from < to && steps < 2) throw std::invalid_argument("scan: need at least 2 steps for a nonempty range");
  if (!(tolerance > 0.0)) throw std::invalid_argument("scan: tolerance must be positive");

  ScanResult out;
  const int n = from == to ? 1 : steps;
  for (int i = 0; i < n; ++i) {
    // endpoints hit exactly
    const double p = i == n - 1 ? to : from + (to - from) * static_cast<double>(i) / (n - 1);
    out.rows.push_back({p, evaluate(p)});
  }

  bool seen_entangled = false;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const auto& r = out.rows[i].report;
    if (r.verdict == Verdict::Entangled) seen_entangled = true;
    else if (seen_entangled) out.monotone = false;
    if (i > 0) {
      const double prev = out.rows[i - 1].report.margin;
      if (r.margin < prev - 1e-12 * std::max(1.0, std::abs(prev))) out.monotone = false;
    }
  }

  std::size_t first = 0;
  while (first < out.rows.size() && out.rows[first].report.verdict != Verdict::Entangled) ++first;
  if (first == 0 || first == out.rows.size()) return out;

  double lo = out.rows[first - 1].p;
  double hi = out.rows[first].p;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    (evaluate(mid).verdict == Verdict::Entangled ? hi : lo) = mid;
    ++out.bisection_steps;
  }
  out.threshold = 0.5 * (lo + hi);
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string scan_csv(const ScanResult& scan) {
  std::string out = "p,lhs,rhs,margin,verdict\n";
  for (const auto& row : scan.rows) {
    out += format_double(row.p) + ',' + format_double(row.report.lhs) + ',' + format_double(row.report.rhs) + ',' +
           format_double(row.report.margin) + ',' + to_string(row.report.verdict) + '\n';
  }
  return out;
}

}  // namespace mubsep
