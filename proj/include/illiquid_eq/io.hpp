#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "asymptotics.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "pde.hpp"

namespace illiquid_eq {

/// Shortest round-trip decimal representation; identical across runs and platforms.
inline std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

/// Fixed-precision representation for human-facing tables.
inline std::string format_fixed(double v, int digits) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, digits);
  return {buf.data(), res.ptr};
}

/// RFC 4180 writer: CRLF line ends, fields quoted when needed.
class CsvWriter {
public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw InputError("cannot write " + path.string());
  }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k) out_ << ',';
      out_ << quote(fields[k]);
    }
    out_ << "\r\n";
  }
  void row(const std::vector<double>& values) {
    std::vector<std::string> f;
    f.reserve(values.size());
    for (double v : values) f.push_back(format_number(v));
    row(f);
  }

private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  std::ofstream out_;
};

/// One row per (t, x) node: t, x, v, v_1..v_N, dv_dx.
inline void write_solution_csv(const std::filesystem::path& path, const EquilibriumSolution& sol) {
  CsvWriter w(path);
  std::vector<std::string> head{"t", "x", "v"};
  for (std::size_t i = 0; i < sol.agents(); ++i) head.push_back("v" + std::to_string(i + 1));
  head.emplace_back("dv_dx");
  w.row(head);
  std::vector<double> r;
  for (std::size_t n = 0; n < sol.grid.nt; ++n)
    for (std::size_t j = 0; j < sol.grid.nx; ++j) {
      r.clear();
      r.push_back(sol.grid.t(n, sol.horizon));
      r.push_back(sol.grid.x(j));
      r.push_back(sol.v(n, j));
      for (const auto& f : sol.vi) r.push_back(f(n, j));
      r.push_back(sol.dv_dx(n, j));
      w.row(r);
    }
}

/// One row per (t, x) node: t, x, value.
inline void write_surface_csv(const std::filesystem::path& path, const CorrectionSurface& s) {
  CsvWriter w(path);
  w.row(std::vector<std::string>{"t", "x", s.which == CorrectionKind::transaction ? "tc_correction" : "hc_correction"});
  for (std::size_t n = 0; n < s.grid.nt; ++n)
    for (std::size_t j = 0; j < s.grid.nx; ++j)
      w.row(std::vector<double>{s.grid.t(n, s.horizon), s.grid.x(j), s.values(n, j)});
}

namespace detail {
constexpr std::array<char, 8> cache_magic{'I', 'L', 'Q', 'E', 'Q', 'C', '0', '1'};

template <class T>
void put(std::ofstream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void get(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("cache: truncated file");
}
inline void put_field(std::ofstream& o, const Field2D& f) {
  o.write(reinterpret_cast<const char*>(f.data().data()), static_cast<std::streamsize>(f.data().size() * sizeof(double)));
}
inline void get_field(std::ifstream& in, Field2D& f) {
  in.read(reinterpret_cast<char*>(f.data().data()), static_cast<std::streamsize>(f.data().size() * sizeof(double)));
  if (!in) throw InputError("cache: truncated file");
}
}  // namespace detail

/// Compact binary cache; the spec hash is stored so stale files are detected.
inline void write_cache(const std::filesystem::path& path, const EquilibriumSolution& sol) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw InputError("cannot write " + path.string());
  o.write(detail::cache_magic.data(), detail::cache_magic.size());
  detail::put(o, sol.spec_hash);
  detail::put(o, static_cast<std::uint64_t>(sol.agents()));
  detail::put(o, static_cast<std::uint64_t>(sol.grid.nt));
  detail::put(o, static_cast<std::uint64_t>(sol.grid.nx));
  detail::put(o, sol.grid.x_min);
  detail::put(o, sol.grid.x_max);
  detail::put(o, sol.horizon);
  detail::put(o, sol.gamma);
  detail::put(o, sol.lambda);
  detail::put(o, sol.supply);
  detail::put_field(o, sol.v);
  detail::put_field(o, sol.dv_dx);
  for (const auto& f : sol.vi) detail::put_field(o, f);
}

/// Reads a cache written by write_cache; throws if the stored hash differs from `expected_hash`.
inline EquilibriumSolution read_cache(const std::filesystem::path& path, std::uint64_t expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open cache " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != detail::cache_magic) throw InputError("cache: bad header in " + path.string());
  EquilibriumSolution sol;
  std::uint64_t agents = 0, nt = 0, nx = 0;
  detail::get(in, sol.spec_hash);
  if (sol.spec_hash != expected_hash) throw InputError("cache: spec hash mismatch in " + path.string());
  detail::get(in, agents);
  detail::get(in, nt);
  detail::get(in, nx);
  detail::get(in, sol.grid.x_min);
  detail::get(in, sol.grid.x_max);
  detail::get(in, sol.horizon);
  detail::get(in, sol.gamma);
  detail::get(in, sol.lambda);
  detail::get(in, sol.supply);
  sol.grid.nt = nt;
  sol.grid.nx = nx;
  sol.v = Field2D(nt, nx);
  sol.dv_dx = Field2D(nt, nx);
  detail::get_field(in, sol.v);
  detail::get_field(in, sol.dv_dx);
  sol.vi.assign(agents, Field2D(nt, nx));
  for (auto& f : sol.vi) detail::get_field(in, f);
  return sol;
}

}  // namespace illiquid_eq
