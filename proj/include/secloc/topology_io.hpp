#ifndef SECLOC_TOPOLOGY_IO_HPP
#define SECLOC_TOPOLOGY_IO_HPP

// Plain-text topology format:
//   x y        one line per anchor, metres
//   x y m      same, anchor is malicious
//   target x y exactly one such line
// '#' starts a comment; blank lines are ignored.

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "secloc/attack_sim.hpp"
#include "secloc/errors.hpp"

namespace secloc {

namespace detail {

inline double parse_double(std::string_view token, const std::string& where) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw ConfigError(where + ": bad number '" + std::string(token) + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline Topology parse_topology(std::istream& in) {
  Topology topo;
  bool have_target = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = "topology line " + std::to_string(lineno);
    if (tok[0] == "target") {
      if (tok.size() != 3) throw ConfigError(where + ": expected 'target x y'");
      if (have_target) throw ConfigError(where + ": duplicate target line");
      topo.target = Point(detail::parse_double(tok[1], where),
                          detail::parse_double(tok[2], where));
      have_target = true;
      continue;
    }
    if (tok.size() != 2 && !(tok.size() == 3 && tok[2] == "m"))
      throw ConfigError(where + ": expected 'x y [m]'");
    if (tok.size() == 3) topo.malicious.push_back(topo.anchors.size());
    topo.anchors.emplace_back(detail::parse_double(tok[0], where),
                              detail::parse_double(tok[1], where));
  }
  if (!have_target) throw ConfigError("topology has no target line");
  topo.validate();
  return topo;
}

inline Topology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open topology file " + path);
  return parse_topology(in);
}

inline std::string format_topology(const Topology& topo) {
  std::string out;
  for (std::size_t i = 0; i < topo.size(); ++i) {
    out += detail::format_double(topo.anchors[i].x()) + ' ' +
           detail::format_double(topo.anchors[i].y());
    if (topo.is_malicious(i)) out += " m";
    out += '\n';
  }
  out += "target " + detail::format_double(topo.target.x()) + ' ' +
         detail::format_double(topo.target.y()) + '\n';
  return out;
}

}  // namespace secloc

#endif  // SECLOC_TOPOLOGY_IO_HPP
