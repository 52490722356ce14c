#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "modstruct/aim.hpp"
#include "modstruct/error.hpp"
#include "modstruct/module_spec.hpp"

namespace modstruct {

/// Shortest text that reads back to the same double ("inf", "-inf", "nan"
/// for non-finite values). Locale independent.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

inline double parse_double(std::string_view s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  MODSTRUCT_REQUIRE(res.ec == std::errc{} && res.ptr == s.data() + s.size(), ErrorCode::Parse,
                    "not a number: '" + std::string(s) + "'");
  return v;
}

inline long long parse_int(std::string_view s) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  MODSTRUCT_REQUIRE(res.ec == std::errc{} && res.ptr == s.data() + s.size(), ErrorCode::Parse,
                    "not an integer: '" + std::string(s) + "'");
  return v;
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::string clean = line;
  for (char& c : clean) {
    if (c == ',' || c == '\t' || c == '\r') c = ' ';
  }
  std::istringstream in(clean);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::string located(const std::string& source, int line, const std::string& msg) {
  return source + ":" + std::to_string(line) + ": " + msg;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MODSTRUCT_REQUIRE(in.good(), ErrorCode::InvalidInput, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// Roster files hold one module per line: "id mass_kg Jx Jy Jz", separated by
// whitespace or commas. '#' starts a comment. A header line whose first field
// is "id" is skipped.
inline Roster parse_roster(std::istream& in, const std::string& source = "<roster>") {
  std::map<int, ModuleSpec> by_id;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto f = detail::split_fields(line);
    if (f.empty() || f[0] == "id") continue;
    MODSTRUCT_REQUIRE(f.size() == 5, ErrorCode::Parse,
                      detail::located(source, lineno, "expected 5 fields (id mass Jx Jy Jz), got " + std::to_string(f.size())));
    ModuleSpec m;
    try {
      m.id = static_cast<int>(parse_int(f[0]));
      m.mass = parse_double(f[1]);
      m.inertia_diag = {parse_double(f[2]), parse_double(f[3]), parse_double(f[4])};
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse, detail::located(source, lineno, e.what()));
    }
    MODSTRUCT_REQUIRE(m.mass > 0.0 && (m.inertia_diag.array() > 0.0).all() && std::isfinite(m.mass) &&
                          m.inertia_diag.allFinite(),
                      ErrorCode::Parse, detail::located(source, lineno, "mass and inertia must be positive and finite"));
    MODSTRUCT_REQUIRE(by_id.emplace(m.id, m).second, ErrorCode::Parse,
                      detail::located(source, lineno, "duplicate module id " + std::to_string(m.id)));
  }
  MODSTRUCT_REQUIRE(!by_id.empty(), ErrorCode::Parse, source + ": roster has no modules");
  Roster roster;
  int expect = 1;
  for (const auto& [id, spec] : by_id) {
    MODSTRUCT_REQUIRE(id == expect, ErrorCode::Parse,
                      source + ": missing module id " + std::to_string(expect) + " (ids must run 1..n)");
    roster.push_back(spec);
    ++expect;
  }
  return roster;
}

inline Roster read_roster_file(const std::string& path) {
  std::istringstream in(detail::slurp(path));
  return parse_roster(in, path);
}

inline void write_roster(std::ostream& out, const Roster& roster) {
  out << "# id mass_kg Jx Jy Jz\n";
  for (const auto& m : roster) {
    out << m.id << ' ' << format_double(m.mass) << ' ' << format_double(m.inertia_diag.x()) << ' '
        << format_double(m.inertia_diag.y()) << ' ' << format_double(m.inertia_diag.z()) << '\n';
  }
}

struct AimFile {
  Aim aim;
  double edge_length = 1.0;

  bool operator==(const AimFile&) const = default;
};

// "n=<int> l=<float>" then n rows of 4 integers.
inline AimFile parse_aim(std::istream& in, const std::string& source = "<aim>") {
  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  };
  MODSTRUCT_REQUIRE(next_line(), ErrorCode::Parse, source + ": empty AIM file");
  const auto header = detail::split_fields(line);
  MODSTRUCT_REQUIRE(header.size() == 2 && header[0].rfind("n=", 0) == 0 && header[1].rfind("l=", 0) == 0,
                    ErrorCode::Parse, detail::located(source, lineno, "header must be 'n=<int> l=<float>'"));
  AimFile file;
  long long n = 0;
  try {
    n = parse_int(std::string_view(header[0]).substr(2));
    file.edge_length = parse_double(std::string_view(header[1]).substr(2));
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, detail::located(source, lineno, e.what()));
  }
  MODSTRUCT_REQUIRE(n >= 1, ErrorCode::Parse, detail::located(source, lineno, "n must be >= 1"));
  MODSTRUCT_REQUIRE(file.edge_length > 0.0 && std::isfinite(file.edge_length), ErrorCode::Parse,
                    detail::located(source, lineno, "l must be positive"));
  file.aim = Aim(static_cast<int>(n));
  for (int i = 1; i <= n; ++i) {
    MODSTRUCT_REQUIRE(next_line(), ErrorCode::Parse,
                      source + ": expected " + std::to_string(n) + " rows, found " + std::to_string(i - 1));
    const auto f = detail::split_fields(line);
    MODSTRUCT_REQUIRE(f.size() == 4, ErrorCode::Parse, detail::located(source, lineno, "row must hold 4 integers"));
    for (int p = 0; p < kFaces; ++p) {
      try {
        file.aim.at(i, p) = static_cast<int>(parse_int(f[static_cast<std::size_t>(p)]));
      } catch (const Error& e) {
        throw Error(ErrorCode::Parse, detail::located(source, lineno, e.what()));
      }
    }
  }
  MODSTRUCT_REQUIRE(!next_line(), ErrorCode::Parse, detail::located(source, lineno, "trailing content after AIM rows"));
  return file;
}

inline AimFile read_aim_file(const std::string& path) {
  std::istringstream in(detail::slurp(path));
  return parse_aim(in, path);
}

inline void write_aim(std::ostream& out, const Aim& aim, double edge_length) {
  out << "n=" << aim.size() << " l=" << format_double(edge_length) << '\n';
  for (const auto& row : aim.rows()) out << row[0] << ' ' << row[1] << ' ' << row[2] << ' ' << row[3] << '\n';
}

inline std::string aim_to_string(const Aim& aim, double edge_length) {
  std::ostringstream ss;
  write_aim(ss, aim, edge_length);
  return ss.str();
}

}  // namespace modstruct
