#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "json.hpp"
#include "svph/errors.hpp"
#include "svph/map.hpp"

namespace svph {

using json = nlohmann::json;

namespace detail {

inline TrigPoly2 trig_from_json(const json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError("field '" + field + "' must be an object");
  const int K = j.value("K", 0);
  TrigPoly2 g;
  auto read = [&](const char* key, bool is_cos) {
    if (!j.contains(key)) return;
    const json& arr = j.at(key);
    if (!arr.is_array()) throw ConfigError("field '" + field + "." + key + "' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& e = arr[i];
      if (!e.is_array() || e.size() != 3)
        throw ConfigError("field '" + field + "." + key + "[" + std::to_string(i) + "]' must be [k, l, value]");
      const int k = e[0].get<int>();
      const int l = e[1].get<int>();
      if (std::abs(k) > K || std::abs(l) > K)
        throw ConfigError("field '" + field + "." + key + "[" + std::to_string(i) + "]' exceeds K=" +
                          std::to_string(K));
      const double v = e[2].get<double>();
      if (is_cos)
        g.add_cos(k, l, v);
      else
        g.add_sin(k, l, v);
    }
  };
  read("a", true);
  read("b", false);
  return g;
}

inline json trig_to_json(const TrigPoly2& g) {
  json a = json::array(), b = json::array();
  for (const auto& t : g.terms()) {
    if (t.a != 0.0) a.push_back({t.k, t.l, t.a});
    if (t.b != 0.0) b.push_back({t.k, t.l, t.b});
  }
  return {{"K", g.max_frequency()}, {"a", a}, {"b", b}};
}

}  // namespace detail

inline MapSpec map_from_json(const json& j) {
  try {
    MapSpec m;
    if (!j.contains("degree")) throw ConfigError("missing field 'degree'");
    m.degree = j.at("degree").get<int>();
    if (m.degree < 2) throw ConfigError("field 'degree' must be >= 2");
    m.f_pert = j.contains("f_pert") ? detail::trig_from_json(j.at("f_pert"), "f_pert") : TrigPoly2{};
    m.omega = j.contains("omega") ? detail::trig_from_json(j.at("omega"), "omega") : TrigPoly2{};
    m.epsilon = j.value("epsilon", 1.0);
    if (m.epsilon < 0.0) throw ConfigError("field 'epsilon' must be >= 0");
    m.name = j.value("name", std::string{});
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed map JSON: ") + e.what());
  }
}

inline json map_to_json(const MapSpec& m) {
  json j{{"degree", m.degree},
         {"f_pert", detail::trig_to_json(m.f_pert)},
         {"omega", detail::trig_to_json(m.omega)},
         {"epsilon", m.epsilon}};
  if (!m.name.empty()) j["name"] = m.name;
  return j;
}

inline MapSpec load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open map file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    // e.byte is the offset; report a line number for the user
    std::ifstream again(path);
    std::string text((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError(path + ":" + std::to_string(line) + ": " + e.what());
  }
  MapSpec m = map_from_json(j);
  if (m.name.empty()) m.name = path;
  return m;
}

/// Compact trigonometric polynomial syntax: a sum of terms `c`, `c*cos(k,l)`
/// or `c*sin(k,l)` (coefficient optional), joined by + or -.
/// Example: "sin(0,1) - 0.3*cos(1,0)".
inline TrigPoly2 parse_trig(const std::string& text) {
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
  auto fail = [&](const std::string& why) { return ConfigError("trig polynomial '" + text + "': " + why); };
  if (s.empty()) throw fail("empty expression");
  TrigPoly2 g;
  std::size_t pos = 0;
  while (pos < s.size()) {
    double sign = 1.0;
    if (s[pos] == '+' || s[pos] == '-') sign = s[pos++] == '-' ? -1.0 : 1.0;
    double coef = 1.0;
    bool have_coef = false;
    if (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.')) {
      std::size_t used = 0;
      try {
        coef = std::stod(s.substr(pos), &used);
      } catch (const std::logic_error&) {
        throw fail("bad number at offset " + std::to_string(pos));
      }
      pos += used;
      have_coef = true;
      if (pos < s.size() && s[pos] == '*') ++pos;
    }
    const bool is_cos = s.compare(pos, 4, "cos(") == 0, is_sin = s.compare(pos, 4, "sin(") == 0;
    if (!is_cos && !is_sin) {
      if (!have_coef) throw fail("expected cos(k,l), sin(k,l) or a number at offset " + std::to_string(pos));
      g.add_cos(0, 0, sign * coef);
      continue;
    }
    pos += 4;
    const std::size_t close = s.find(')', pos);
    if (close == std::string::npos) throw fail("missing ')'");
    const std::string args = s.substr(pos, close - pos);
    const std::size_t comma = args.find(',');
    if (comma == std::string::npos) throw fail("expected two frequencies (k,l)");
    int k = 0, l = 0;
    try {
      std::size_t u1 = 0, u2 = 0;
      k = std::stoi(args.substr(0, comma), &u1);
      l = std::stoi(args.substr(comma + 1), &u2);
      if (u1 != comma || u2 != args.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw fail("frequencies must be integers");
    }
    if (is_cos)
      g.add_cos(k, l, sign * coef);
    else
      g.add_sin(k, l, sign * coef);
    pos = close + 1;
  }
  return g;
}

/// The canonical examples shipped in maps/.
namespace examples {

/// Linear doubling in x, identity in theta.
inline MapSpec E0() {
  MapSpec m;
  m.degree = 2;
  m.epsilon = 1.0;
  m.name = "E0";
  return m;
}

/// f = 3x + 0.1 sin(2 pi x), omega = -sin(2 pi theta) + 0.3 cos(2 pi x).
inline MapSpec E1(double eps = 0.05) {
  MapSpec m;
  m.degree = 3;
  m.f_pert.add_sin(1, 0, 0.1);
  m.omega.add_sin(0, 1, -1.0);
  m.omega.add_cos(1, 0, 0.3);
  m.epsilon = eps;
  m.name = "E1";
  return m;
}

/// Doubling map with omega = Phi o f - Phi, Phi = sin(2 pi x) / (2 pi).
inline MapSpec E2(double eps = 0.05) {
  MapSpec m;
  m.degree = 2;
  m.omega.add_sin(2, 0, 1.0 / two_pi);
  m.omega.add_sin(1, 0, -1.0 / two_pi);
  m.epsilon = eps;
  m.name = "E2";
  return m;
}

}  // namespace examples

}  // namespace svph
