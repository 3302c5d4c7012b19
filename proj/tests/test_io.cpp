#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>

#include "json.hpp"
#include "mubsep/io.hpp"
#include "mubsep/scan.hpp"
#include "mubsep/states.hpp"

using namespace mubsep;

namespace {

bool same_bits(const CMatrix& a, const CMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(Complex) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_bits(const CVector& a, const CVector& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(Complex) * static_cast<std::size_t>(a.size())) == 0;
}

template <class T>
T round_trip(const T& x) {
  return std::get<T>(parse_document(serialize(Document(x))));
}

}  // namespace

TEST_CASE("state round trip is bit exact") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const DensityMatrix rho = random_mixed(Shape({2, 3}), 3, s);
    const auto back = round_trip(state_document(rho));
    CHECK(back.shape == rho.shape());
    CHECK(same_bits(back.mat, rho.matrix()));
  }
  const auto g = round_trip(state_document(ghz(4, 2)));
  CHECK(g.shape == Shape({2, 2, 2, 2}));
  CHECK(g.mat.rows() == 16);
}

TEST_CASE("family round trips are bit exact") {
  for (int d : {2, 3, 5}) {
    const auto mub = build_mub_prime(d);
    const auto m = round_trip(mub);
    REQUIRE(m.count() == mub.count());
    for (int b = 0; b < mub.count(); ++b)
      for (int n = 0; n < d; ++n) CHECK(same_bits(m.bases[b][n], mub.bases[b][n]));

    const auto basis = gell_mann_basis(d);
    const auto mum = build_mum(d, d + 1, 0.9 * max_t(d, basis), basis);
    const auto u = round_trip(mum);
    CHECK(u.kappa == mum.kappa);
    CHECK(u.t == mum.t);
    for (int b = 0; b <= d; ++b)
      for (int n = 0; n < d; ++n) CHECK(same_bits(u.groups[b][n], mum.groups[b][n]));

    const auto gs = build_gsic(d, 0.9 * gsic_max_t(d, basis), basis);
    const auto h = round_trip(gs);
    CHECK(h.a == gs.a);
    for (int i = 0; i < d * d; ++i) CHECK(same_bits(h.ops[i], gs.ops[i]));
  }
}

TEST_CASE("extreme doubles survive") {
  CMatrix m(2, 2);
  m << Complex(5e-324, -0.0), Complex(1.7976931348623157e308, 0.1), Complex(1.0 / 3.0, -2.2250738585072014e-308),
      Complex(0.30000000000000004, 1e-300);
  const auto back = round_trip(StateDocument{m, Shape({2})});
  CHECK(same_bits(back.mat, m));
}

TEST_CASE("schema layout") {
  using nlohmann::json;
  const json mub = json::parse(serialize(build_mub_prime(3)));
  CHECK(mub["kind"] == "mub");
  CHECK(mub["dim"] == 3);
  CHECK(mub["params"]["M"] == 4);
  CHECK(mub["data"].size() == 4);
  CHECK(mub["data"][0][0].size() == 3);
  CHECK(mub["data"][0][0][0].size() == 2);

  const json st = json::parse(serialize(state_document(bell())));
  CHECK(st["kind"] == "state");
  CHECK(st["dims"] == json::array({2, 2}));
  CHECK(st["data"][0][0][0].get<double>() == doctest::Approx(0.5));
  CHECK(st["data"][0][3][1] == 0.0);

  const auto b = gell_mann_basis(2);
  const json mum = json::parse(serialize(build_mum(2, 2, 0.1, b)));
  CHECK(mum["params"]["M"] == 2);
  CHECK(mum["params"].contains("kappa"));
  const json g = json::parse(serialize(build_gsic(2, 0.05, b)));
  CHECK(g["params"].contains("a"));
  CHECK(g["data"].size() == 4);
}

TEST_CASE("parse errors") {
  const std::string ok = serialize(state_document(bell()));
  CHECK_THROWS_AS(parse_document(ok.substr(0, ok.size() / 2)), ParseError);
  CHECK_THROWS_AS(parse_document("[]"), ParseError);
  CHECK_THROWS_AS(parse_document(R"({"kind":"blob","dim":2,"data":[]})"), ParseError);
  CHECK_THROWS_AS(parse_document(R"({"kind":"state","dims":[2,2],"data":[[[1,0]]]})"), ParseError);
  CHECK_THROWS_AS(parse_document(R"({"kind":"state","dims":[1],"data":[[[1,0]]]})"), ParseError);
  CHECK_THROWS_AS(parse_document(R"({"kind":"state","dims":[2],"data":[[[1,0],[0,0]],[[0,0],["x",0]]]})"), ParseError);
  CHECK_THROWS_AS(parse_document(R"({"kind":"mum","dim":2,"params":{},"data":[]})"), ParseError);
  CHECK_THROWS_AS(parse_document(R"({"kind":"mub","dim":2,"params":{"M":2},"data":[[[[1,0],[0,0]],[[0,0],[1,0]]]]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_document(R"({"kind":"gsic","dim":2,"params":{"a":0.25},"data":[]})"), ParseError);
  CHECK_THROWS_AS(read_document("/nonexistent/file.json"), ParseError);
  CHECK(kind_of(parse_document(ok)) == "state");
}

TEST_CASE("number formatting is locale independent") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(-1.25e-7) == "-1.25e-07");
  CHECK(format_double(1.0) == "1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
