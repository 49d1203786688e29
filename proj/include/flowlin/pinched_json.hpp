#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "flowlin/errors.hpp"
#include "flowlin/pinched.hpp"

namespace flowlin {

/// Integer or "p/q" string.
inline Rational parse_rational(const nlohmann::json& j) {
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (!j.is_string()) raise(Errc::ParseError, "rational must be an integer or a \"p/q\" string, got " + j.dump());
  const auto s = j.get<std::string>();
  try {
    std::size_t used = 0;
    const auto slash = s.find('/');
    const std::int64_t num = std::stoll(s.substr(0, slash), &used);
    if (used != (slash == std::string::npos ? s.size() : slash)) throw std::invalid_argument(s);
    if (slash == std::string::npos) return Rational(num);
    const std::string den_text = s.substr(slash + 1);
    const std::int64_t den = std::stoll(den_text, &used);
    if (used != den_text.size() || den == 0) throw std::invalid_argument(s);
    return Rational(num, den);
  } catch (const std::exception&) {
    raise(Errc::ParseError, "cannot parse rational '" + s + "'");
  }
}

inline std::string rational_text(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline ArcSet parse_arc_set(const nlohmann::json& j, int m) {
  if (!j.is_array()) raise(Errc::ParseError, "arc set must be an array of boxes");
  ArcSet set;
  for (const auto& box : j) {
    if (!box.is_array() || static_cast<int>(box.size()) != m) {
      raise(Errc::ParseError, "each box must list m = " + std::to_string(m) + " arcs");
    }
    ArcBox b;
    for (const auto& arc : box) {
      if (!arc.is_array() || arc.size() != 2) raise(Errc::ParseError, "an arc is a pair [lo, hi]");
      b.push_back(Arc{parse_rational(arc[0]), parse_rational(arc[1])});
    }
    set.boxes.push_back(std::move(b));
  }
  return set;
}

/// {n, m, M, S, C, omega?}; M is row-major, flat or nested.
inline PinchedTorusSpec parse_pinched_spec(const nlohmann::json& j) {
  try {
    PinchedTorusSpec spec;
    spec.n = j.at("n").get<int>();
    spec.m = j.at("m").get<int>();
    if (spec.n < 1 || spec.m < 1) raise(Errc::ParseError, "n and m must be positive");
    const auto& mj = j.at("M");
    std::vector<std::int64_t> flat;
    for (const auto& row : mj) {
      if (row.is_array()) {
        for (const auto& v : row) flat.push_back(v.get<std::int64_t>());
      } else {
        flat.push_back(row.get<std::int64_t>());
      }
    }
    if (flat.size() != static_cast<std::size_t>(spec.n * spec.m)) raise(Errc::ParseError, "M must have m*n entries");
    spec.M.resize(spec.m, spec.n);
    for (int r = 0; r < spec.m; ++r)
      for (int c = 0; c < spec.n; ++c) spec.M(r, c) = flat[static_cast<std::size_t>(r * spec.n + c)];
    spec.S = j.contains("S") ? parse_arc_set(j.at("S"), spec.m) : ArcSet::whole(spec.m);
    const auto& cj = j.at("C");
    if (!cj.is_array()) raise(Errc::ParseError, "C must be an array of arc sets");
    for (const auto& c : cj) spec.C.push_back(parse_arc_set(c, spec.m));
    if (j.contains("omega")) {
      for (const auto& term : j.at("omega")) {
        OmegaTerm t;
        for (const auto& v : term.at("rational")) t.coefficients.push_back(parse_rational(v));
        t.prime_scale = term.value("prime_scale", std::int64_t{1});
        spec.omega_terms.push_back(std::move(t));
      }
    }
    return validate(std::move(spec));
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::ParseError, std::string("pinched spec: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ParseError, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::ParseError, path + ": " + e.what());
  }
}

}  // namespace flowlin
