#include "mubsep/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mubsep/criteria.hpp"
#include "mubsep/io.hpp"
#include "mubsep/measurements.hpp"
#include "mubsep/partitions.hpp"
#include "mubsep/scan.hpp"
#include "mubsep/states.hpp"

namespace mubsep {

namespace {

struct StateSource {
  std::string file;
  std::string family;
  std::vector<int> dims;
  double p = 1.0;
  int terms = 3;
  std::uint64_t seed = 1;
};

bool all_equal(const std::vector<int>& v) {
  return std::all_of(v.begin(), v.end(), [&](int x) { return x == v.front(); });
}

DensityMatrix family_state(const StateSource& src, double p) {
  std::vector<int> dims = src.dims;
  const std::string& f = src.family;
  if (dims.empty()) dims = {2, 2};
  if (f == "ghz") {
    if (!all_equal(dims)) throw std::invalid_argument("ghz needs equal dims");
    return add_white_noise(ghz(static_cast<int>(dims.size()), dims.front()), p);
  }
  if (f == "w") {
    if (dims.front() != 2 || !all_equal(dims)) throw std::invalid_argument("w needs qubit dims (2,2,...)");
    return add_white_noise(w_state(static_cast<int>(dims.size())), p);
  }
  if (f == "bell" || f == "isotropic") {
    if (dims.size() != 2 || dims[0] != dims[1]) throw std::invalid_argument(f + " needs dims d,d");
    return isotropic(dims[0], p);
  }
  if (f == "random-separable") return add_white_noise(random_separable(Shape(dims), src.terms, src.seed).first, p);
  if (f == "random-mixed") return add_white_noise(random_mixed(Shape(dims), src.terms, src.seed), p);
  throw std::invalid_argument("unknown family \"" + f +
                              "\" (expected ghz, w, bell, isotropic, random-separable or random-mixed)");
}

DensityMatrix load_state(const StateSource& src) {
  if (!src.file.empty()) {
    auto doc = read_document(src.file);
    auto* st = std::get_if<StateDocument>(&doc);
    if (!st) throw ParseError("\"" + src.file + "\" is a " + kind_of(doc) + " document, not a state");
    auto v = validate_density(st->mat, st->shape);
    if (!v.ok()) throw std::invalid_argument("\"" + src.file + "\" is not a valid state: " + v.summary());
    return *v.state;
  }
  if (src.family.empty()) throw std::invalid_argument("give --state FILE or --family NAME");
  return family_state(src, src.p);
}

void add_state_options(CLI::App* cmd, StateSource& src, bool with_file) {
  if (with_file) {
    auto* file = cmd->add_option("--state", src.file, "state document");
    auto* fam = cmd->add_option("--family", src.family, "ghz | w | bell | isotropic | random-separable | random-mixed");
    file->excludes(fam);
  } else {
    cmd->add_option("--family", src.family, "ghz | w | bell | isotropic | random-separable | random-mixed")->required();
  }
  cmd->add_option("--dims", src.dims, "subsystem dimensions, e.g. 2,2")->delimiter(',');
  cmd->add_option("--terms", src.terms, "ensemble terms (random-separable) or rank (random-mixed)");
  cmd->add_option("--seed", src.seed, "generator seed");
}

// Per-part measurement sets, resolved for one criterion.
struct PartMeasurements {
  std::vector<MubSet> mubs;
  std::vector<MumSet> mums;
  std::vector<GsicSet> gsics;
};

FamilyReport validate_measurement(const Document& doc) {
  if (auto* mub = std::get_if<MubSet>(&doc)) return validate_family(*mub);
  if (auto* mum = std::get_if<MumSet>(&doc)) return validate_family(*mum);
  return validate_family(std::get<GsicSet>(doc));
}

PartMeasurements load_measurements(const std::vector<std::string>& files, CriterionId id, int parts) {
  if (files.empty()) throw std::invalid_argument("no measurement files given (--meas)");
  if (static_cast<int>(files.size()) != 1 && static_cast<int>(files.size()) != parts)
    throw std::invalid_argument("give one shared measurement file or one per part (" + std::to_string(parts) +
                                "), not " + std::to_string(files.size()));
  PartMeasurements out;
  for (int j = 0; j < parts; ++j) {
    const auto& path = files[files.size() == 1 ? 0 : static_cast<std::size_t>(j)];
    Document doc = read_document(path);
    if (auto* st = std::get_if<StateDocument>(&doc); st != nullptr)
      throw std::invalid_argument("\"" + path + "\" holds a state, not a measurement");
    const auto report = validate_measurement(doc);
    if (!report.passes())
      throw std::invalid_argument("\"" + path + "\" fails " + report.family + " validation (max residual " +
                                  format_double(report.max_residual()) + ")");
    switch (id) {
      case CriterionId::Thm1:
        if (!std::holds_alternative<MubSet>(doc)) throw std::invalid_argument("thm1 needs mub files; \"" + path + "\" is " + kind_of(doc));
        out.mubs.push_back(std::get<MubSet>(doc));
        break;
      case CriterionId::Thm2:
        if (auto* mub = std::get_if<MubSet>(&doc)) out.mums.push_back(mub_as_mum(*mub));
        else if (auto* mum = std::get_if<MumSet>(&doc)) out.mums.push_back(*mum);
        else throw std::invalid_argument("thm2 needs mum (or mub) files; \"" + path + "\" is " + kind_of(doc));
        break;
      case CriterionId::Thm3:
        if (!std::holds_alternative<GsicSet>(doc)) throw std::invalid_argument("thm3 needs gsic files; \"" + path + "\" is " + kind_of(doc));
        out.gsics.push_back(std::get<GsicSet>(doc));
        break;
    }
  }
  return out;
}

struct CriterionOptions {
  std::string criterion = "thm1";
  std::vector<std::string> meas;
  std::string mode = "proof";
  std::string search = "exhaustive";
  std::string partition;
  bool abs = false;
  std::size_t cap = 1'000'000;
  unsigned threads = 0;
};

void add_criterion_options(CLI::App* cmd, CriterionOptions& o) {
  cmd->add_option("--criterion", o.criterion, "thm1 | thm2 | thm3")->required();
  cmd->add_option("--meas", o.meas, "measurement files: one shared, or one per part")->required();
  cmd->add_option("--mode", o.mode, "proof | statement");
  cmd->add_option("--search", o.search, "exhaustive | greedy | identity");
  cmd->add_option("--partition", o.partition, "coarse-graining, e.g. \"1,2|3,4\"");
  cmd->add_flag("--abs", o.abs, "absolute value per term in thm3");
  cmd->add_option("--cap", o.cap, "exhaustive search candidate cap");
  cmd->add_option("--threads", o.threads, "search threads (0: all cores)");
}

EvalOptions eval_options(const CriterionOptions& o) {
  EvalOptions e;
  e.mode = parse_bound_mode(o.mode);
  e.search = parse_search_policy(o.search);
  e.absolute_terms = o.abs;
  e.search_options.exhaustive_cap = o.cap;
  e.search_options.threads = o.threads;
  return e;
}

DensityMatrix apply_partition(const DensityMatrix& rho, const std::string& spec) {
  if (spec.empty()) return rho;
  return coarse_grain(rho, KPartition::parse(spec));
}

CriterionReport evaluate(CriterionId id, const DensityMatrix& rho, const PartMeasurements& m, const EvalOptions& e) {
  switch (id) {
    case CriterionId::Thm1: return evaluate_thm1(rho, m.mubs, e);
    case CriterionId::Thm2: return evaluate_thm2(rho, m.mums, e);
    case CriterionId::Thm3: return evaluate_thm3(rho, m.gsics, e);
  }
  throw std::invalid_argument("unknown criterion");
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_double(xs[i]);
  return s;
}

void print_report(std::ostream& out, const CriterionReport& r, const Shape& shape) {
  out << "criterion: " << to_string(r.criterion) << '\n'
      << "mode: " << to_string(r.mode) << '\n'
      << "search: " << to_string(r.search) << '\n'
      << "shape: " << to_string(shape) << '\n'
      << "lhs: " << format_double(r.lhs) << '\n'
      << "rhs: " << format_double(r.rhs) << '\n'
      << "margin: " << format_double(r.margin) << '\n'
      << "verdict: " << to_string(r.verdict) << '\n'
      << "pair: " << r.pair_first + 1 << ',' << r.pair_second + 1 << '\n'
      << "purity_sums: " << join(r.purity_sums) << '\n'
      << "radicands: " << join(r.radicands) << '\n'
      << "radicand_clamped: " << (r.radicand_clamped ? "yes" : "no") << '\n'
      << "selection: " << r.selection.describe() << '\n'
      << "candidates: " << r.candidates << '\n';
}

double positivity_margin(const std::vector<CMatrix>& ops) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& p : ops) lo = std::min(lo, min_eigenvalue(p));
  return lo;
}

struct GenMeasOptions {
  std::string type;
  int dim = 0;
  int count = 0;
  std::optional<double> t;
  std::optional<double> t_frac;
  std::string root = "plus";
  std::string out;
};

int cmd_gen_meas(const GenMeasOptions& o, std::ostream& out) {
  const int d = o.dim;
  if (d < 2) throw std::invalid_argument("--dim must be >= 2");
  const int count = o.count == 0 ? d + 1 : o.count;
  if (count < 1 || count > d + 1) throw std::invalid_argument("--count must lie in 1..d+1");
  if (o.t_frac && !(*o.t_frac > 0.0 && *o.t_frac <= 1.0)) throw std::invalid_argument("--t-frac must lie in (0, 1]");
  const SimplexRoot root = o.root == "plus" ? SimplexRoot::Plus
                           : o.root == "minus" ? SimplexRoot::Minus
                                               : throw std::invalid_argument("--root must be plus or minus");

  if (o.type == "mub") {
    if (d != 2 && !(is_prime(d) && d % 2 == 1))
      throw std::invalid_argument("mub: d = " + std::to_string(d) + " is not supported (prime dimensions only; import a file)");
    MubSet mub = build_mub_prime(d);
    mub.bases.resize(static_cast<std::size_t>(count));
    write_document(o.out, mub);
    out << "type: mub\ndim: " << d << "\nbases: " << count << "\nmax_residual: "
        << format_double(validate_family(mub).max_residual()) << '\n';
    return kExitOk;
  }
  const OperatorBasis basis = gell_mann_basis(d);
  if (o.type == "mum") {
    const double bound = max_t(d, basis, root);
    const double t = o.t ? *o.t : o.t_frac.value_or(0.9) * bound;
    MumSet mum = build_mum(d, count, t, basis, root);
    write_document(o.out, mum);
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& g : mum.groups) margin = std::min(margin, positivity_margin(g));
    out << "type: mum\ndim: " << d << "\ncount: " << count << "\nt: " << format_double(t)
        << "\nmax_t: " << format_double(bound) << "\nkappa: " << format_double(mum.kappa)
        << "\npositivity_margin: " << format_double(margin) << '\n';
    return kExitOk;
  }
  if (o.type == "gsic") {
    const double bound = gsic_max_t(d, basis);
    const double t = o.t ? *o.t : o.t_frac.value_or(0.9) * bound;
    GsicSet g = build_gsic(d, t, basis);
    write_document(o.out, g);
    out << "type: gsic\ndim: " << d << "\nt: " << format_double(t) << "\nmax_t: " << format_double(bound)
        << "\na: " << format_double(g.a) << "\npositivity_margin: " << format_double(positivity_margin(g.ops))
        << '\n';
    return kExitOk;
  }
  throw std::invalid_argument("--type must be mub, mum or gsic");
}

int cmd_validate(const std::string& path, std::ostream& out) {
  const Document doc = read_document(path);
  out << "kind: " << kind_of(doc) << '\n';
  if (auto* st = std::get_if<StateDocument>(&doc)) {
    const auto v = validate_density(st->mat, st->shape);
    out << "hermiticity: " << format_double(v.hermiticity_residual) << '\n'
        << "trace: " << format_double(v.trace_residual) << '\n'
        << "min_eigenvalue: " << format_double(v.min_eigenvalue) << '\n'
        << "result: " << (v.ok() ? "PASS" : "FAIL") << '\n';
    if (!v.ok()) out << v.summary() << '\n';
    return v.ok() ? kExitOk : kExitFailed;
  }
  const FamilyReport report = validate_measurement(doc);
  for (const auto& r : report.residuals) out << r.condition << ": " << format_double(r.value) << '\n';
  const bool ok = report.passes();
  out << "max_residual: " << format_double(report.max_residual()) << '\n'
      << "result: " << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kExitOk : kExitFailed;
}

int cmd_certify(const StateSource& src, const CriterionOptions& o, std::ostream& out) {
  const CriterionId id = parse_criterion(o.criterion);
  const EvalOptions e = eval_options(o);
  const DensityMatrix rho = apply_partition(load_state(src), o.partition);
  const auto meas = load_measurements(o.meas, id, rho.shape().parties());
  const auto report = evaluate(id, rho, meas, e);
  if (!o.partition.empty()) out << "partition: " << o.partition << '\n';
  print_report(out, report, rho.shape());
  return report.verdict == Verdict::Entangled ? kExitEntangled : kExitOk;
}

struct ScanOptions {
  double from = 0.0;
  double to = 1.0;
  int steps = 21;
  std::string out;
};

int cmd_scan(const StateSource& src, const CriterionOptions& o, const ScanOptions& s, std::ostream& out) {
  const CriterionId id = parse_criterion(o.criterion);
  const EvalOptions e = eval_options(o);
  if (!(s.from >= 0.0 && s.to <= 1.0)) throw std::invalid_argument("scan: need 0 <= p-from <= p-to <= 1");
  const int parts = apply_partition(family_state(src, 1.0), o.partition).shape().parties();
  const auto meas = load_measurements(o.meas, id, parts);
  const auto result = run_scan(
      [&](double p) { return evaluate(id, apply_partition(family_state(src, p), o.partition), meas, e); }, s.from,
      s.to, s.steps);
  const std::string csv = scan_csv(result);
  std::string prefix;
  if (s.out.empty()) {
    out << csv;
    prefix = "# ";
  } else {
    std::ofstream f(s.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write \"" + s.out + "\"");
    f << csv;
  }
  out << prefix << "rows: " << result.rows.size() << '\n';
  out << prefix << "threshold: " << (result.threshold ? format_double(*result.threshold) : std::string("none")) << '\n';
  if (result.bracket_lo)
    out << prefix << "bracket: " << format_double(*result.bracket_lo) << ',' << format_double(*result.bracket_hi) << '\n';
  out << prefix << "monotone: " << (result.monotone ? "yes" : "no") << '\n';
  if (!result.monotone) out << prefix << "warning: margin is not monotone in p; the threshold assumes it is\n";
  return kExitOk;
}

int cmd_gen_state(const StateSource& src, const std::string& path, std::ostream& out) {
  const DensityMatrix rho = family_state(src, src.p);
  write_document(path, state_document(rho));
  out << "family: " << src.family << "\nshape: " << to_string(rho.shape()) << "\ndim: " << rho.dim() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entanglement certification from mutually unbiased and symmetric measurements"};
  app.name("mubsep");
  app.require_subcommand(1);

  GenMeasOptions gm;
  auto* gen_meas = app.add_subcommand("gen-meas", "build a measurement family and write it as JSON");
  gen_meas->add_option("--type", gm.type, "mub | mum | gsic")->required();
  gen_meas->add_option("--dim", gm.dim, "local dimension")->required();
  gen_meas->add_option("--count", gm.count, "number of bases or groups (default d+1)");
  auto* t_opt = gen_meas->add_option("--t", gm.t, "simplex scale");
  auto* frac_opt = gen_meas->add_option("--t-frac", gm.t_frac, "scale as a fraction of the positivity bound (default 0.9)");
  t_opt->excludes(frac_opt);
  gen_meas->add_option("--root", gm.root, "plus | minus simplex root");
  gen_meas->add_option("--out", gm.out, "output file")->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate-meas", "check a measurement (or state) document");
  validate->add_option("file", validate_path, "document")->required();

  StateSource cert_src;
  CriterionOptions cert_opts;
  auto* certify = app.add_subcommand("certify", "evaluate a criterion on a state");
  add_state_options(certify, cert_src, true);
  certify->add_option("--p", cert_src.p, "white-noise mixing weight for families (default 1)");
  add_criterion_options(certify, cert_opts);

  StateSource scan_src;
  CriterionOptions scan_opts;
  ScanOptions scan_range;
  auto* scan = app.add_subcommand("scan", "sweep the white-noise weight p and locate the detection threshold");
  add_state_options(scan, scan_src, false);
  add_criterion_options(scan, scan_opts);
  scan->add_option("--p-from", scan_range.from, "start of the p range");
  scan->add_option("--p-to", scan_range.to, "end of the p range");
  scan->add_option("--steps", scan_range.steps, "grid points");
  scan->add_option("--out", scan_range.out, "CSV file (default: stdout)");

  StateSource gen_src;
  std::string gen_out;
  auto* gen_state = app.add_subcommand("gen-state", "write a benchmark state as JSON");
  add_state_options(gen_state, gen_src, false);
  gen_state->add_option("--p", gen_src.p, "white-noise mixing weight (default 1)");
  gen_state->add_option("--out", gen_out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_meas->parsed()) return cmd_gen_meas(gm, out);
    if (validate->parsed()) return cmd_validate(validate_path, out);
    if (certify->parsed()) return cmd_certify(cert_src, cert_opts, out);
    if (scan->parsed()) return cmd_scan(scan_src, scan_opts, scan_range, out);
    if (gen_state->parsed()) return cmd_gen_state(gen_src, gen_out, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SearchCapExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mubsep
