#include "mubsep/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mubsep {

using nlohmann::json;

namespace {

json encode(Complex z) { return json::array({z.real(), z.imag()}); }

json encode(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(encode(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json encode(const CVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(encode(v(i)));
  return out;
}

[[noreturn]] void fail(const std::string& what) { throw ParseError(what); }

const json& field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(std::string("missing field \"") + key + "\"");
  return *it;
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) fail(what + ": expected a number");
  return j.get<double>();
}

int positive_int(const json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 1 || j.get<long long>() > 1 << 20)
    fail(what + ": expected a positive integer");
  return j.get<int>();
}

Complex decode_complex(const json& j) {
  if (!j.is_array() || j.size() != 2) fail("complex scalar must be [re, im]");
  return {number(j[0], "real part"), number(j[1], "imaginary part")};
}

CMatrix decode_matrix(const json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) fail("matrix must have " + std::to_string(dim) + " rows");
  CMatrix m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      fail("matrix row " + std::to_string(r) + " must have " + std::to_string(dim) + " entries");
    for (int c = 0; c < dim; ++c) m(r, c) = decode_complex(row[static_cast<std::size_t>(c)]);
  }
  return m;
}

CVector decode_vector(const json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) fail("vector must have " + std::to_string(dim) + " entries");
  CVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = decode_complex(j[static_cast<std::size_t>(i)]);
  return v;
}

const json& params_of(const json& doc) {
  static const json empty = json::object();
  auto it = doc.find("params");
  if (it == doc.end()) return empty;
  if (!it->is_object()) fail("\"params\" must be an object");
  return *it;
}

void check_count(const json& params, std::size_t actual) {
  auto it = params.find("M");
  if (it != params.end() && positive_int(*it, "params.M") != static_cast<int>(actual))
    fail("params.M does not match the number of entries in data");
}

std::optional<double> optional_number(const json& params, const char* key) {
  auto it = params.find(key);
  if (it == params.end() || it->is_null()) return std::nullopt;
  return number(*it, std::string("params.") + key);
}

json to_json(const Document& doc) {
  json out;
  std::visit(
      [&out](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, StateDocument>) {
          out["kind"] = "state";
          out["dims"] = x.shape.dims();
          out["params"] = json::object();
          out["data"] = encode(x.mat);
        } else if constexpr (std::is_same_v<T, MubSet>) {
          out["kind"] = "mub";
          out["dim"] = x.dim;
          out["params"] = {{"M", x.count()}};
          json bases = json::array();
          for (const auto& basis : x.bases) {
            json vs = json::array();
            for (const auto& v : basis) vs.push_back(encode(v));
            bases.push_back(std::move(vs));
          }
          out["data"] = std::move(bases);
        } else if constexpr (std::is_same_v<T, MumSet>) {
          out["kind"] = "mum";
          out["dim"] = x.dim;
          out["params"] = {{"M", x.count()}, {"kappa", x.kappa}};
          if (x.t) out["params"]["t"] = *x.t;
          json groups = json::array();
          for (const auto& g : x.groups) {
            json ops = json::array();
            for (const auto& p : g) ops.push_back(encode(p));
            groups.push_back(std::move(ops));
          }
          out["data"] = std::move(groups);
        } else {
          out["kind"] = "gsic";
          out["dim"] = x.dim;
          out["params"] = {{"a", x.a}};
          if (x.t) out["params"]["t"] = *x.t;
          json ops = json::array();
          for (const auto& p : x.ops) ops.push_back(encode(p));
          out["data"] = std::move(ops);
        }
      },
      doc);
  return out;
}

Document from_json(const json& doc) {
  if (!doc.is_object()) fail("document must be a JSON object");
  const json& kind_j = field(doc, "kind");
  if (!kind_j.is_string()) fail("\"kind\" must be a string");
  const std::string kind = kind_j.get<std::string>();
  const json& params = params_of(doc);
  const json& data = field(doc, "data");
  if (!data.is_array()) fail("\"data\" must be an array");

  if (kind == "state") {
    const json& dims_j = field(doc, "dims");
    if (!dims_j.is_array() || dims_j.empty()) fail("\"dims\" must be a nonempty array");
    std::vector<int> dims;
    for (const auto& d : dims_j) dims.push_back(positive_int(d, "dims entry"));
    Shape shape;
    try {
      shape = Shape(dims);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    return StateDocument{decode_matrix(data, shape.total()), shape};
  }

  const int dim = positive_int(field(doc, "dim"), "dim");
  if (dim < 2) fail("dim must be >= 2");
  if (kind == "mub") {
    check_count(params, data.size());
    MubSet mub;
    mub.dim = dim;
    for (const auto& basis : data) {
      if (!basis.is_array() || static_cast<int>(basis.size()) != dim)
        fail("each basis must hold " + std::to_string(dim) + " vectors");
      std::vector<CVector> vs;
      for (const auto& v : basis) vs.push_back(decode_vector(v, dim));
      mub.bases.push_back(std::move(vs));
    }
    return mub;
  }
  if (kind == "mum") {
    check_count(params, data.size());
    MumSet mum;
    mum.dim = dim;
    const auto kappa = optional_number(params, "kappa");
    if (!kappa) fail("mum documents need params.kappa");
    mum.kappa = *kappa;
    mum.t = optional_number(params, "t");
    for (const auto& group : data) {
      if (!group.is_array() || static_cast<int>(group.size()) != dim)
        fail("each MUM group must hold " + std::to_string(dim) + " operators");
      std::vector<CMatrix> ops;
      for (const auto& p : group) ops.push_back(decode_matrix(p, dim));
      mum.groups.push_back(std::move(ops));
    }
    return mum;
  }
  if (kind == "gsic") {
    GsicSet g;
    g.dim = dim;
    const auto a = optional_number(params, "a");
    if (!a) fail("gsic documents need params.a");
    g.a = *a;
    g.t = optional_number(params, "t");
    if (static_cast<int>(data.size()) != dim * dim) fail("gsic data must hold d^2 operators");
    for (const auto& p : data) g.ops.push_back(decode_matrix(p, dim));
    return g;
  }
  fail("unknown kind \"" + kind + "\"");
}

}  // namespace

std::string serialize(const Document& doc) { return to_json(doc).dump(1) + "\n"; }

Document parse_document(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  try {
    return from_json(doc);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid document: ") + e.what());
  }
}

std::string kind_of(const Document& doc) {
  switch (doc.index()) {
    case 0: return "state";
    case 1: return "mub";
    case 2: return "mum";
    default: return "gsic";
  }
}

Document read_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_document(buf.str());
}

void write_document(const std::string& path, const Document& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write \"" + path + "\"");
  out << serialize(doc);
  if (!out) throw std::runtime_error("write to \"" + path + "\" failed");
}

}  // namespace mubsep
