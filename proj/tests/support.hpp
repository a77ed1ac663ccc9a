#pragma once

// Shared helpers for the test suite: brute-force graph references (usable up
// to ~16 vertices), a tiny CSV splitter for CLI output, and an in-process CLI
// runner.

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "qlab/cli.hpp"
#include "qlab/intervalgraph.hpp"

namespace qlab::testing {

inline std::vector<std::vector<bool>> adjacency_matrix(const IntervalGraph& g) {
  std::vector<std::vector<bool>> adj(g.n, std::vector<bool>(g.n, false));
  for (auto [u, v] : g.edges) {
    adj[u - 1][v - 1] = true;
    adj[v - 1][u - 1] = true;
  }
  return adj;
}

// Largest clique by subset enumeration. Exponential; keep n small.
inline std::uint32_t brute_force_clique(const IntervalGraph& g) {
  auto adj = adjacency_matrix(g);
  std::uint32_t best = 0;
  for (std::uint32_t mask = 1; mask < (1u << g.n); ++mask) {
    std::uint32_t size = 0;
    bool ok = true;
    for (std::uint32_t u = 0; u < g.n && ok; ++u) {
      if (!(mask & (1u << u))) continue;
      ++size;
      for (std::uint32_t v = u + 1; v < g.n && ok; ++v) {
        if ((mask & (1u << v)) && !adj[u][v]) ok = false;
      }
    }
    if (ok && size > best) best = size;
  }
  return best;
}

namespace detail {
inline bool color_backtrack(const std::vector<std::vector<bool>>& adj,
                            std::vector<int>& color, std::uint32_t v, int k) {
  if (v == adj.size()) return true;
  for (int c = 0; c < k; ++c) {
    bool ok = true;
    for (std::uint32_t u = 0; u < v; ++u) {
      if (adj[u][v] && color[u] == c) {
        ok = false;
        break;
      }
    }
    if (ok) {
      color[v] = c;
      if (color_backtrack(adj, color, v + 1, k)) return true;
      color[v] = -1;
    }
  }
  return false;
}
}  // namespace detail

// Smallest k admitting a proper coloring, by backtracking.
inline std::uint32_t brute_force_chromatic(const IntervalGraph& g) {
  if (g.n == 0) return 0;
  auto adj = adjacency_matrix(g);
  for (std::uint32_t k = 1; k <= g.n; ++k) {
    std::vector<int> color(g.n, -1);
    if (detail::color_backtrack(adj, color, 0, static_cast<int>(k))) return k;
  }
  return g.n;
}

struct CliResult {
  int rc = -1;
  std::string out;
  std::string err;
};

inline CliResult run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("qlab");
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.rc = cli_run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct Csv {
  std::vector<std::pair<std::string, std::string>> meta;  // "# key: value"
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Splits CLI CSV output. No quoted-field handling: the suite only parses
// numeric tables whose cells never contain commas.
inline Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      auto colon = line.find(": ");
      if (colon != std::string::npos) {
        csv.meta.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
      }
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      csv.header = cells;
      header_seen = true;
    } else {
      csv.rows.push_back(cells);
    }
  }
  return csv;
}

inline double cell_as_double(const Csv& csv, std::size_t row, const std::string& column) {
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (csv.header[c] == column) return std::stod(csv.rows.at(row).at(c));
  }
  throw std::runtime_error("no such column: " + column);
}

}  // namespace qlab::testing
