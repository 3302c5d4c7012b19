#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mubsep/criteria.hpp"

namespace mubsep {

struct ScanRow {
  double p = 0.0;
  CriterionReport report;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  /// Bisected between the last NOT_DETECTED and first ENTANGLED grid points.
  std::optional<double> threshold;
  std::optional<double> bracket_lo, bracket_hi;
  /// False when the margin column decreases somewhere or the verdict flips back.
  bool monotone = true;
  int bisection_steps = 0;
};

/// Evaluates `steps` evenly spaced points of [from, to] (a single point when
/// from == to). Throws std::invalid_argument on a bad range.
ScanResult run_scan(const std::function<CriterionReport(double)>& evaluate, double from, double to, int steps,
                    double tolerance = 1e-4);

/// Shortest round-trip decimal, independent of the global locale.
std::string format_double(double x);

/// "p,lhs,rhs,margin,verdict" with LF line endings.
std::string scan_csv(const ScanResult& scan);

}  // namespace mubsep
