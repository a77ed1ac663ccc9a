#include "qlab/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qlab/asymptotics.hpp"
#include "qlab/exact_laws.hpp"
#include "qlab/intervalgraph.hpp"
#include "qlab/series.hpp"
#include "qlab/simulation.hpp"

#ifndef QLAB_BUILD_ID
#define QLAB_BUILD_ID "unknown"
#endif

namespace qlab {

namespace {

// ---------------------------------------------------------------------------
// tables and writers

struct Cell {
  enum Kind { kEmpty, kText, kReal, kInt } kind = kEmpty;
  std::string text;
  double real = 0.0;
  std::uint64_t integer = 0;
};

Cell cell() { return {}; }
Cell cell(std::string text) { return {Cell::kText, std::move(text), 0.0, 0}; }
Cell cell_real(double v) { return {Cell::kReal, {}, v, 0}; }
Cell cell_int(std::uint64_t v) { return {Cell::kInt, {}, 0.0, v}; }

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

using Meta = std::vector<std::pair<std::string, std::string>>;

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string cell_text(const Cell& c) {
  switch (c.kind) {
    case Cell::kEmpty: return "";
    case Cell::kText: return c.text;
    case Cell::kReal: return fmt_real(c.real);
    case Cell::kInt: return std::to_string(c.integer);
  }
  return "";
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  quoted += '"';
  return quoted;
}

void write_csv(std::ostream& os, const Meta& meta, const Table& table) {
  for (const auto& [key, value] : meta) os << "# " << key << ": " << value << "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    os << (i ? "," : "") << csv_escape(table.columns[i]);
  }
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      os << (i ? "," : "") << csv_escape(cell_text(row[i]));
    }
    os << "\n";
  }
}

void write_json(std::ostream& os, const Meta& meta, const Table& table) {
  nlohmann::ordered_json doc;
  for (const auto& [key, value] : meta) doc["meta"][key] = value;
  doc["columns"] = table.columns;
  auto& rows = doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    auto& r = rows.emplace_back(nlohmann::ordered_json::array());
    for (const Cell& c : row) {
      switch (c.kind) {
        case Cell::kEmpty: r.push_back(nullptr); break;
        case Cell::kText: r.push_back(c.text); break;
        case Cell::kReal: r.push_back(c.real); break;
        case Cell::kInt: r.push_back(c.integer); break;
      }
    }
  }
  os << doc.dump(2) << "\n";
}

void emit(std::ostream& out, const std::string& out_path, const std::string& format,
          const Meta& meta, const Table& table) {
  std::ofstream file;
  std::ostream* os = &out;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw domain_error("cannot open output file '" + out_path + "'");
    os = &file;
  }
  if (format == "json") {
    write_json(*os, meta, table);
  } else {
    write_csv(*os, meta, table);
  }
}

void dump_samples(const std::string& path, std::span<const std::uint32_t> samples) {
  std::ofstream file(path);
  if (!file) throw domain_error("cannot open dump file '" + path + "'");
  for (std::uint32_t x : samples) file << x << '\n';
}

// ---------------------------------------------------------------------------
// shared option plumbing

double parse_real(const std::string& text, const std::string& what) {
  std::size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &consumed);
  } catch (const std::exception&) {
    throw domain_error(what + ": cannot parse '" + text + "'");
  }
  if (consumed != text.size()) throw domain_error(what + ": cannot parse '" + text + "'");
  return v;
}

struct CommonOpts {
  std::string format = "csv";
  std::string out_path;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--format", opts.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", opts.out_path, "write the report to this file instead of stdout");
}

Meta base_meta(const std::string& command_line, std::initializer_list<std::pair<std::string, std::string>> config) {
  Meta meta;
  meta.emplace_back("command", command_line);
  for (const auto& kv : config) meta.push_back(kv);
  meta.emplace_back("build", QLAB_BUILD_ID);
  meta.emplace_back("rng", std::string(kRngId));
  return meta;
}

std::string join_argv(int argc, const char* const* argv) {
  std::string line;
  for (int i = 0; i < argc; ++i) {
    if (i) line += ' ';
    line += argv[i];
  }
  return line;
}

std::vector<int> to_orders(const std::string& list) {
  std::vector<int> orders;
  for (std::uint64_t m : parse_index_list(list)) {
    if (m < 1 || m > 20) throw domain_error("order out of range: " + std::to_string(m));
    orders.push_back(static_cast<int>(m));
  }
  return orders;
}

// ---------------------------------------------------------------------------
// exact

struct ExactCfg {
  std::string quantity;
  std::string lambda;
  std::string n_list, k_list, i_list, l_list, m_list = "1";
  std::string method = "default";
  double tol = kDefaultTol;
  double p = 0.0;
  std::uint64_t v = 0, w = 0;
  CommonOpts common;
  std::string command_line;
};

int run_exact(const ExactCfg& cfg, std::ostream& out) {
  Table table;
  Meta meta = base_meta(cfg.command_line, {{"quantity", cfg.quantity},
                                           {"lambda", cfg.lambda},
                                           {"tol", fmt_real(cfg.tol)},
                                           {"method", cfg.method}});

  if (cfg.quantity == "ruin") {
    if (!(cfg.p > 0.0) || cfg.v == 0 || cfg.w == 0) {
      throw domain_error("exact ruin needs --p, --v and --w");
    }
    table.columns = {"quantity", "p", "v", "w", "value"};
    table.rows.push_back({cell("ruin"), cell_real(cfg.p), cell_int(cfg.v), cell_int(cfg.w),
                          cell_real(gamblers_ruin(cfg.p, cfg.v, cfg.w, true))});
    emit(out, cfg.common.out_path, cfg.common.format, meta, table);
    return 0;
  }

  if (cfg.lambda.empty()) throw domain_error("exact " + cfg.quantity + " needs --lambda");
  const std::vector<double> lambdas = parse_grid(cfg.lambda);
  table.columns = {"quantity", "lambda", "index", "value"};

  auto require = [&](const std::string& list, const char* flag) -> std::vector<std::uint64_t> {
    if (list.empty()) {
      throw domain_error("exact " + cfg.quantity + " needs " + flag);
    }
    return parse_index_list(list);
  };
  auto add = [&](const std::string& tag, double lam, std::uint64_t idx, double value) {
    table.rows.push_back({cell(tag), cell_real(lam), cell_int(idx), cell_real(value)});
  };

  for (double lam : lambdas) {
    if (cfg.quantity == "n-pmf") {
      for (std::uint64_t n : require(cfg.n_list, "--n")) {
        add("Pr[N=" + std::to_string(n) + "]", lam, n, busy_size_pmf(StableRate(lam), n));
      }
    } else if (cfg.quantity == "n-moment") {
      for (std::uint64_t m : require(cfg.m_list, "--m")) {
        add("N^" + std::to_string(m), lam, m,
            busy_size_moment(StableRate(lam), static_cast<int>(m)));
      }
    } else if (cfg.quantity == "k-tail") {
      for (std::uint64_t k : require(cfg.k_list, "--k")) {
        add("K>" + std::to_string(k), lam, k, max_occupancy_tail(StableRate(lam), k));
      }
    } else if (cfg.quantity == "k-moment") {
      MomentMethod method = MomentMethod::kLambert;
      if (cfg.method == "direct") method = MomentMethod::kDirect;
      for (std::uint64_t m : require(cfg.m_list, "--m")) {
        add("K^" + std::to_string(m), lam, m,
            max_occupancy_moment(StableRate(lam), static_cast<int>(m), cfg.tol, method));
      }
    } else if (cfg.quantity == "i-tail") {
      for (std::uint64_t i : require(cfg.i_list, "--i")) {
        add("I>" + std::to_string(i), lam, i, station_search_tail(StableRate(lam), i));
      }
    } else if (cfg.quantity == "i-moment") {
      for (std::uint64_t m : require(cfg.m_list, "--m")) {
        add("I^" + std::to_string(m), lam, m,
            station_search_moment(StableRate(lam), static_cast<int>(m), cfg.tol));
      }
    } else if (cfg.quantity == "l-tail") {
      for (std::uint64_t l : require(cfg.l_list, "--l")) {
        add("L>" + std::to_string(l), lam, l, server_search_tail(ServerLoad(lam), l));
      }
    } else if (cfg.quantity == "l-moment") {
      for (std::uint64_t m : require(cfg.m_list, "--m")) {
        add("L^" + std::to_string(m), lam, m,
            server_search_moment(ServerLoad(lam), static_cast<int>(m), cfg.tol));
      }
    } else if (cfg.quantity == "t") {
      LambertMethod method = LambertMethod::kDirect;
      if (cfg.method == "divisor") method = LambertMethod::kDivisor;
      for (std::uint64_t l : require(cfg.l_list, "--l")) {
        add("T_" + std::to_string(l), lam, l,
            lambert_T(static_cast<int>(l), StableRate(lam), cfg.tol, method).value);
      }
    } else {
      throw domain_error("unknown exact quantity '" + cfg.quantity + "'");
    }
  }
  emit(out, cfg.common.out_path, cfg.common.format, meta, table);
  return 0;
}

// ---------------------------------------------------------------------------
// asym

struct AsymCfg {
  std::string quantity;
  std::string lambda;
  std::string l_list, m_list = "1";
  int order = 4;
  CommonOpts common;
  std::string command_line;
};

int run_asym(const AsymCfg& cfg, std::ostream& out) {
  if (cfg.lambda.empty()) throw domain_error("asym " + cfg.quantity + " needs --lambda");
  Table table;
  table.columns = {"quantity", "lambda", "index", "order", "value"};
  Meta meta = base_meta(cfg.command_line, {{"quantity", cfg.quantity},
                                           {"lambda", cfg.lambda},
                                           {"order", std::to_string(cfg.order)}});
  auto add = [&](const std::string& tag, double lam, std::uint64_t idx, bool with_order,
                 double value) {
    table.rows.push_back({cell(tag), cell_real(lam), cell_int(idx),
                          with_order ? cell_int(static_cast<std::uint64_t>(cfg.order)) : cell(),
                          cell_real(value)});
  };

  for (double lam : parse_grid(cfg.lambda)) {
    if (cfg.quantity == "k-mean") {
      add("K^1", lam, 1, false, k_moment_expansion(StableRate(lam), 1));
    } else if (cfg.quantity == "k-moment") {
      for (std::uint64_t m : parse_index_list(cfg.m_list)) {
        add("K^" + std::to_string(m), lam, m, false,
            k_moment_expansion(StableRate(lam), static_cast<int>(m)));
      }
    } else if (cfg.quantity == "k-var") {
      add("Var[K]", lam, 1, false, k_variance_expansion(StableRate(lam)));
    } else if (cfg.quantity == "n-moment") {
      for (std::uint64_t m : parse_index_list(cfg.m_list)) {
        add("N^" + std::to_string(m), lam, m, false,
            n_moment_leading(StableRate(lam), static_cast<int>(m)));
      }
    } else if (cfg.quantity == "l-mean") {
      add("L^1", lam, 1, false, l_moment_asym(ServerLoad(lam), 1));
    } else if (cfg.quantity == "l-moment") {
      for (std::uint64_t m : parse_index_list(cfg.m_list)) {
        add("L^" + std::to_string(m), lam, m, false,
            l_moment_asym(ServerLoad(lam), static_cast<int>(m)));
      }
    } else if (cfg.quantity == "t") {
      if (cfg.l_list.empty()) throw domain_error("asym t needs --l");
      for (std::uint64_t l : parse_index_list(cfg.l_list)) {
        double value = (l == 0) ? t_0_expansion(StableRate(lam), cfg.order)
                                : t_l_expansion(static_cast<int>(l), StableRate(lam), cfg.order);
        add("T_" + std::to_string(l), lam, l, true, value);
      }
    } else if (cfg.quantity == "inv-h") {
      add("1/h", lam, 0, true, inv_h_series(StableRate(lam), cfg.order));
    } else {
      throw domain_error("unknown asym quantity '" + cfg.quantity + "'");
    }
  }
  emit(out, cfg.common.out_path, cfg.common.format, meta, table);
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateCfg {
  double lambda = 0.0;
  double periods = 100000;
  double arrivals = 200000;
  double warmup = 10000;
  std::uint64_t seed = 1;
  int chains = kDefaultChains;
  int batches = 32;
  std::string m_list = "1,2";
  std::string tail_list;
  bool serial = false;
  std::string dump, dump_n, dump_k;
  CommonOpts common;
  std::string command_line;
};

void add_moment_rows(Table& table, std::string_view prefix,
                     const std::vector<MomentEstimate>& estimates, double lam) {
  for (const auto& e : estimates) {
    table.rows.push_back({cell(std::string(prefix) + "^" + std::to_string(e.order)),
                          cell_real(lam), cell_int(static_cast<std::uint64_t>(e.order)),
                          cell_real(e.mean), cell_real(e.std_error), cell_int(e.sample_count),
                          cell_int(static_cast<std::uint64_t>(e.batch_count))});
  }
}

void add_tail_rows(Table& table, std::string_view prefix,
                   std::span<const std::uint32_t> samples, const std::string& tail_list,
                   double lam, int batches, SampleKind kind) {
  if (tail_list.empty()) return;
  for (std::uint64_t idx : parse_index_list(tail_list)) {
    const auto threshold = static_cast<std::uint32_t>(idx);
    const double phat = empirical_tail(samples, threshold);
    double se = 0.0;
    const auto count = static_cast<double>(samples.size());
    if (kind == SampleKind::kIndependent) {
      se = std::sqrt(phat * (1.0 - phat) / count);
    } else {
      std::vector<double> indicator(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        indicator[i] = samples[i] > threshold ? 1.0 : 0.0;
      }
      const int one[] = {1};
      se = estimate_moments(std::span<const double>(indicator), one, batches, kind)[0]
               .std_error;
    }
    table.rows.push_back({cell(std::string(prefix) + ">" + std::to_string(idx)), cell_real(lam),
                          cell_int(idx), cell_real(phat), cell_real(se),
                          cell_int(samples.size()),
                          cell_int(kind == SampleKind::kIndependent
                                       ? 1
                                       : static_cast<std::uint64_t>(batches))});
  }
}

Meta simulate_meta(const SimulateCfg& cfg, const char* mode, std::uint64_t count,
                   const char* count_key) {
  Meta meta = base_meta(cfg.command_line, {{"mode", mode},
                                           {"lambda", fmt_real(cfg.lambda)},
                                           {count_key, std::to_string(count)}});
  if (std::string(mode) != "mm1") {
    meta.emplace_back("warmup", std::to_string(parse_count(cfg.warmup, "--warmup")));
    meta.emplace_back("chains", std::to_string(cfg.chains));
  }
  meta.emplace_back("orders", cfg.m_list);
  meta.emplace_back("batches", std::to_string(cfg.batches));
  meta.emplace_back("seed", std::to_string(cfg.seed));
  meta.emplace_back("parallel", cfg.serial ? "no" : "yes");
  return meta;
}

int run_simulate_mm1(const SimulateCfg& cfg, std::ostream& out) {
  const std::uint64_t periods = parse_count(cfg.periods, "--periods");
  const StableRate rate(cfg.lambda);
  auto samples = run_mm1_campaign({cfg.seed, 0}, rate, periods, !cfg.serial);
  const auto orders = to_orders(cfg.m_list);

  Table table;
  table.columns = {"quantity", "lambda", "index", "value", "std_error", "samples", "batches"};
  const auto ns = extract_n(samples);
  const auto ks = extract_k(samples);
  add_moment_rows(table, "N",
                  estimate_moments(std::span<const double>(ns), orders, cfg.batches,
                                   SampleKind::kIndependent),
                  cfg.lambda);
  add_moment_rows(table, "K",
                  estimate_moments(std::span<const double>(ks), orders, cfg.batches,
                                   SampleKind::kIndependent),
                  cfg.lambda);
  std::vector<std::uint32_t> k32(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) k32[i] = samples[i].k;
  add_tail_rows(table, "K", k32, cfg.tail_list, cfg.lambda, cfg.batches,
                SampleKind::kIndependent);

  if (!cfg.dump_n.empty()) {
    std::vector<std::uint32_t> n32(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) n32[i] = samples[i].n;
    dump_samples(cfg.dump_n, n32);
  }
  if (!cfg.dump_k.empty()) dump_samples(cfg.dump_k, k32);

  emit(out, cfg.common.out_path, cfg.common.format,
       simulate_meta(cfg, "mm1", periods, "periods"), table);
  return 0;
}

int run_simulate_stream(const SimulateCfg& cfg, std::ostream& out, bool stations) {
  const std::uint64_t arrivals = parse_count(cfg.arrivals, "--arrivals");
  const std::uint64_t warmup = parse_count(cfg.warmup, "--warmup");
  std::vector<std::uint32_t> samples;
  if (stations) {
    samples = run_station_campaign({cfg.seed, 0}, StableRate(cfg.lambda), arrivals, warmup,
                                   cfg.chains, !cfg.serial);
  } else {
    samples = run_ranked_campaign({cfg.seed, 0}, ServerLoad(cfg.lambda), arrivals, warmup,
                                  cfg.chains, !cfg.serial);
  }
  const auto orders = to_orders(cfg.m_list);
  const char* prefix = stations ? "I" : "L";

  Table table;
  table.columns = {"quantity", "lambda", "index", "value", "std_error", "samples", "batches"};
  add_moment_rows(table, prefix,
                  estimate_moments(std::span<const std::uint32_t>(samples), orders, cfg.batches,
                                   SampleKind::kEquilibrium),
                  cfg.lambda);
  add_tail_rows(table, prefix, samples, cfg.tail_list, cfg.lambda, cfg.batches,
                SampleKind::kEquilibrium);
  if (!cfg.dump.empty()) dump_samples(cfg.dump, samples);

  emit(out, cfg.common.out_path, cfg.common.format,
       simulate_meta(cfg, stations ? "stations" : "ranked", arrivals, "arrivals"), table);
  return 0;
}

// ---------------------------------------------------------------------------
// compare

struct CompareCfg {
  std::string quantity;
  std::string lambda;
  std::string m_list = "1";
  std::string tail_list;
  double periods = 200000;
  double arrivals = 200000;
  double warmup = 10000;
  std::uint64_t seed = 1;
  int chains = kDefaultChains;
  int batches = 32;
  double threshold = 4.0;
  double tol = kDefaultTol;
  bool serial = false;
  CommonOpts common;
  std::string command_line;
};

// Asymptotic value for a moment quantity, or an empty cell where the
// approximation does not apply (e.g. L^m below lambda = 1).
Cell asym_cell(const std::string& quantity, double lam, int m) {
  if (quantity == "n-moment") return cell_real(n_moment_leading(StableRate(lam), m));
  if (quantity == "k-moment") return cell_real(k_moment_expansion(StableRate(lam), m));
  if (quantity == "i-moment") return cell_real(lam * k_moment_expansion(StableRate(lam), m));
  if (quantity == "l-moment" && lam > 1.0) return cell_real(l_moment_asym(ServerLoad(lam), m));
  return cell();
}

int run_compare(const CompareCfg& cfg, std::ostream& out) {
  static const std::map<std::string, char> kFamily = {
      {"n-moment", '1'}, {"k-moment", '1'}, {"k-tail", '1'}, {"i-moment", 'i'},
      {"i-tail", 'i'},   {"l-moment", 'l'}, {"l-tail", 'l'}};
  auto family_it = kFamily.find(cfg.quantity);
  if (family_it == kFamily.end()) {
    throw domain_error("unknown compare quantity '" + cfg.quantity + "'");
  }
  const char family = family_it->second;
  const bool is_tail = cfg.quantity.ends_with("-tail");
  if (is_tail && cfg.tail_list.empty()) {
    throw domain_error("compare " + cfg.quantity + " needs --index (tail points)");
  }
  if (cfg.lambda.empty()) throw domain_error("compare needs --lambda");

  const std::uint64_t periods = parse_count(cfg.periods, "--periods");
  const std::uint64_t arrivals = parse_count(cfg.arrivals, "--arrivals");
  const std::uint64_t warmup = parse_count(cfg.warmup, "--warmup");
  const auto orders = to_orders(cfg.m_list);
  const auto tail_points = is_tail ? parse_index_list(cfg.tail_list) : std::vector<std::uint64_t>{};

  Table table;
  table.columns = {"quantity", "lambda", "exact", "asym", "sim_mean", "sim_se", "z", "ratio"};
  Meta meta = base_meta(
      cfg.command_line,
      {{"quantity", cfg.quantity},
       {"lambda", cfg.lambda},
       {is_tail ? "index" : "orders", is_tail ? cfg.tail_list : cfg.m_list},
       {family == '1' ? "periods" : "arrivals",
        std::to_string(family == '1' ? periods : arrivals)}});
  if (family != '1') {
    meta.emplace_back("warmup", std::to_string(warmup));
    meta.emplace_back("chains", std::to_string(cfg.chains));
  }
  meta.emplace_back("batches", std::to_string(cfg.batches));
  meta.emplace_back("threshold", fmt_real(cfg.threshold));
  meta.emplace_back("seed", std::to_string(cfg.seed));
  meta.emplace_back("parallel", cfg.serial ? "no" : "yes");

  // Each lambda gets its own band of stream ids so campaigns never overlap.
  constexpr std::uint64_t kStreamStride = 1'000'000;
  double worst_z = 0.0;
  const std::vector<double> lambdas = parse_grid(cfg.lambda);

  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    const double lam = lambdas[li];
    const RngStream stream{cfg.seed, li * kStreamStride};
    const SampleKind kind =
        (family == '1') ? SampleKind::kIndependent : SampleKind::kEquilibrium;

    std::vector<std::uint32_t> samples;  // K, I or L stream
    std::vector<double> values;          // N or K as reals for moment estimation
    if (family == '1') {
      auto periods_samples = run_mm1_campaign(stream, StableRate(lam), periods, !cfg.serial);
      if (cfg.quantity == "n-moment") {
        values = extract_n(periods_samples);
      } else {
        values = extract_k(periods_samples);
        samples.resize(periods_samples.size());
        for (std::size_t i = 0; i < periods_samples.size(); ++i) {
          samples[i] = periods_samples[i].k;
        }
      }
    } else if (family == 'i') {
      samples = run_station_campaign(stream, StableRate(lam), arrivals, warmup, cfg.chains,
                                     !cfg.serial);
    } else {
      samples = run_ranked_campaign(stream, ServerLoad(lam), arrivals, warmup, cfg.chains,
                                    !cfg.serial);
    }

    if (is_tail) {
      for (std::uint64_t idx : tail_points) {
        double exact = 0.0;
        if (cfg.quantity == "k-tail") exact = max_occupancy_tail(StableRate(lam), idx);
        if (cfg.quantity == "i-tail") exact = station_search_tail(StableRate(lam), idx);
        if (cfg.quantity == "l-tail") exact = server_search_tail(ServerLoad(lam), idx);
        std::string tag = std::string(1, static_cast<char>(std::toupper(cfg.quantity[0]))) +
                          ">" + std::to_string(idx);
        if (exact <= 0.0 || exact >= 1.0) {
          // Degenerate tail point (e.g. Pr[K>0] = 1): SE is 0, so no z-score;
          // any empirical mismatch is still a threshold failure.
          const double phat = empirical_tail(samples, static_cast<std::uint32_t>(idx));
          if (phat != exact) worst_z = std::numeric_limits<double>::infinity();
          table.rows.push_back({cell(tag), cell_real(lam), cell_real(exact), cell(),
                                cell_real(phat), cell_real(0.0), cell(), cell()});
          continue;
        }
        auto check = tail_z(samples, static_cast<std::uint32_t>(idx), exact, cfg.batches, kind);
        worst_z = std::max(worst_z, std::abs(check.z));
        table.rows.push_back({cell(tag), cell_real(lam), cell_real(exact), cell(),
                              cell_real(check.empirical), cell_real(check.std_error),
                              cell_real(check.z), cell()});
      }
      continue;
    }

    std::vector<MomentEstimate> estimates;
    if (family == '1') {
      estimates = estimate_moments(std::span<const double>(values), orders, cfg.batches, kind);
    } else {
      estimates =
          estimate_moments(std::span<const std::uint32_t>(samples), orders, cfg.batches, kind);
    }
    for (const auto& e : estimates) {
      double exact = 0.0;
      if (cfg.quantity == "n-moment") exact = busy_size_moment(StableRate(lam), e.order);
      if (cfg.quantity == "k-moment") {
        exact = max_occupancy_moment(StableRate(lam), e.order, cfg.tol);
      }
      if (cfg.quantity == "i-moment") {
        exact = station_search_moment(StableRate(lam), e.order, cfg.tol);
      }
      if (cfg.quantity == "l-moment") exact = server_search_moment(ServerLoad(lam), e.order, cfg.tol);
      const double z = (e.std_error > 0.0) ? (e.mean - exact) / e.std_error : 0.0;
      worst_z = std::max(worst_z, std::abs(z));
      Cell asym = asym_cell(cfg.quantity, lam, e.order);
      Cell ratio = (asym.kind == Cell::kReal && asym.real != 0.0)
                       ? cell_real(exact / asym.real)
                       : cell();
      std::string tag = std::string(1, static_cast<char>(std::toupper(cfg.quantity[0]))) + "^" +
                        std::to_string(e.order);
      table.rows.push_back({cell(tag), cell_real(lam), cell_real(exact), asym,
                            cell_real(e.mean), cell_real(e.std_error), cell_real(z), ratio});
    }
  }

  emit(out, cfg.common.out_path, cfg.common.format, meta, table);
  return worst_z <= cfg.threshold ? 0 : 3;
}

// ---------------------------------------------------------------------------
// graph

struct GraphCfg {
  std::string trace;
  std::string discipline = "fcfs";
  double lambda = 0.0;
  std::uint64_t seed = 1;
  std::string format = "edges";
  std::string out_path;
  std::string command_line;
};

int run_graph(const GraphCfg& cfg, std::ostream& out) {
  EventTrace trace;
  if (!cfg.trace.empty()) {
    trace = parse_trace(cfg.trace);
  } else if (cfg.lambda > 0.0) {
    trace = sample_busy_period({cfg.seed, 0}, StableRate(cfg.lambda));
  } else {
    throw domain_error("graph needs --trace or --lambda");
  }
  const Discipline discipline = parse_discipline(cfg.discipline);
  const auto intervals = assign_service(trace, discipline);
  const auto graph = build_graph(intervals);
  const std::uint32_t clique = clique_number(graph);
  const std::uint32_t chromatic = chromatic_number(graph);

  std::ofstream file;
  std::ostream* os = &out;
  if (!cfg.out_path.empty()) {
    file.open(cfg.out_path);
    if (!file) throw domain_error("cannot open output file '" + cfg.out_path + "'");
    os = &file;
  }

  if (cfg.format == "dot") {
    *os << "// " << cfg.command_line << "\n"
        << "// n=" << graph.n << " clique=" << clique << " chromatic=" << chromatic
        << " discipline=" << discipline_name(discipline) << "\n"
        << to_dot(graph);
  } else if (cfg.format == "json") {
    nlohmann::ordered_json doc;
    doc["meta"]["command"] = cfg.command_line;
    doc["meta"]["discipline"] = std::string(discipline_name(discipline));
    doc["meta"]["build"] = QLAB_BUILD_ID;
    doc["n"] = graph.n;
    doc["clique"] = clique;
    doc["chromatic"] = chromatic;
    auto& intervals_json = doc["intervals"] = nlohmann::ordered_json::array();
    for (const auto& c : graph.intervals) {
      intervals_json.push_back({{"service_order", c.service_order},
                                {"arrival_pos", c.arrival_pos},
                                {"departure_pos", c.departure_pos}});
    }
    auto& edges = doc["edges"] = nlohmann::ordered_json::array();
    for (const auto& [u, v] : graph.edges) edges.push_back({u, v});
    *os << doc.dump(2) << "\n";
  } else {  // edges
    *os << "# " << cfg.command_line << "\n"
        << "# n=" << graph.n << " edges=" << graph.edges.size() << " clique=" << clique
        << " chromatic=" << chromatic << " discipline=" << discipline_name(discipline) << "\n"
        << to_edge_list(graph);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// selfcheck

int run_selfcheck(std::ostream& out) {
  int failures = 0;
  auto report = [&](const char* name, bool ok) {
    out << (ok ? "ok   " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  {
    bool ok = true;
    for (double lam : {0.3, 0.5, 0.7, 0.9}) {
      for (int l = 0; l <= 3; ++l) {
        double direct = lambert_T(l, StableRate(lam), 1e-13, LambertMethod::kDirect).value;
        double divisor = lambert_T(l, StableRate(lam), 1e-13, LambertMethod::kDivisor).value;
        ok = ok && std::abs(direct - divisor) <= 1e-12 * std::abs(direct);
      }
    }
    report("lambert series: direct and divisor sums agree", ok);
  }
  {
    bool ok = true;
    for (double lam : {0.3, 0.5}) {
      const double log_lam = std::log(lam);
      double t0 = lambert_T(0, StableRate(lam), 1e-13).value;
      double via_psi = (q_polygamma(0, lam, 1.0) + std::log(1.0 - lam)) / log_lam;
      ok = ok && std::abs(t0 - via_psi) <= 1e-9 * std::abs(t0);
      for (int l = 1; l <= 2; ++l) {
        double tl = lambert_T(l, StableRate(lam), 1e-13).value;
        double psi = q_polygamma(l, lam, 1.0);
        double denom = std::pow(log_lam, l + 1);
        ok = ok && std::abs(tl - psi / denom) <= 1e-9 * std::abs(tl);
      }
    }
    report("q-polygamma identities reproduce the lambert sums", ok);
  }
  {
    bool ok = true;
    for (double lam : {0.3, 0.5, 0.9}) {
      for (std::uint64_t k = 1; k <= 20; ++k) {
        double tail = max_occupancy_tail(StableRate(lam), k);
        double ruin = gamblers_ruin(lam / (1.0 + lam), 1, k, true);
        ok = ok && std::abs(tail - ruin) <= 1e-15;
      }
    }
    report("max-occupancy tail equals the ruin closed form", ok);
  }
  {
    bool ok = true;
    for (double lam : {0.5, 0.9}) {
      StableRate rate(lam);
      NeumaierSum total;
      double term = 1.0;
      for (std::uint64_t n = 1; term > 1e-12 || n < 64; ++n) {
        term = busy_size_pmf(rate, n);
        total.add(term);
        if (n > 2'000'000) break;
      }
      ok = ok && total.value() >= 1.0 - 1e-8;
      ok = ok && std::abs(busy_size_moment(rate, 1) - 1.0 / (1.0 - lam)) <= 1e-12;
    }
    report("busy-size distribution normalizes; Ex[N] = 1/(1-lambda)", ok);
  }
  {
    StableRate r9(0.9), r99(0.99);
    double err9 = std::abs(t_l_expansion(1, r9, 1) - lambert_T(1, r9, 1e-14).value);
    double err99 = std::abs(t_l_expansion(1, r99, 1) - lambert_T(1, r99, 1e-14).value);
    report("finite T_1 expansion matches the exact sum", err9 <= 1e-6 && err99 <= 1e-9);
  }
  {
    bool ok = true;
    Rng rng({20260815, 0});
    Rng rng2({20260815, 0});
    for (int i = 0; i < 20000; ++i) {
      auto trace = sample_busy_period(rng, StableRate(0.7));
      trace.validate();
      auto stats = sample_busy_period_stats(rng2, StableRate(0.7));
      ok = ok && trace.n == stats.n && trace.k == stats.k;
    }
    report("sampled traces satisfy the prefix-excess invariants", ok);
  }
  {
    // The station runner asserts #occupied == max(J-1, 0) online; surviving
    // the run is the check. Also pin the server-busy probability.
    auto samples = run_station_campaign({20260815, 1000}, StableRate(0.8), 200000, 10000,
                                        kDefaultChains, true);
    auto check = tail_z(samples, 0, 0.8, 32, SampleKind::kEquilibrium);
    report("station process: occupancy invariant and Pr[I>0] ~ lambda",
           std::abs(check.z) <= 5.0);
  }
  {
    auto samples =
        run_ranked_campaign({20260815, 2000}, ServerLoad(50.0), 200000, 10000, kDefaultChains, true);
    double worst = 0.0;
    for (std::uint32_t l = 1; l <= 60; ++l) {
      auto check =
          tail_z(samples, l, server_search_tail(ServerLoad(50.0), l), 32, SampleKind::kEquilibrium);
      worst = std::max(worst, std::abs(check.z));
    }
    report("ranked servers: empirical tail tracks the loss formula", worst <= 5.0);
  }
  {
    auto trace = parse_trace("AAADADADADDD");
    auto fcfs = build_graph(assign_service(trace, Discipline::kFcfs));
    auto lcfs = build_graph(assign_service(trace, Discipline::kLcfs));
    const std::vector<std::pair<std::uint32_t, std::uint32_t>> fcfs_expect = {
        {1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}, {3, 5}, {4, 5}, {4, 6}, {5, 6}};
    const std::vector<std::pair<std::uint32_t, std::uint32_t>> lcfs_expect = {
        {1, 2}, {1, 6}, {2, 3}, {2, 6}, {3, 4}, {3, 6}, {4, 5}, {4, 6}, {5, 6}};
    report("fixture trace reproduces both reference edge sets",
           fcfs.edges == fcfs_expect && lcfs.edges == lcfs_expect && fcfs.n == 6 &&
               chromatic_number(fcfs) == 3 && chromatic_number(lcfs) == 3);
  }
  {
    bool ok = true;
    Rng rng({20260815, 3000});
    for (int i = 0; i < 2000 && ok; ++i) {
      auto trace = sample_busy_period(rng, StableRate(0.7));
      for (auto d : {Discipline::kFcfs, Discipline::kLcfs, Discipline::kOrderedStation}) {
        auto intervals = assign_service(trace, d);
        ok = ok && build_graph(intervals).n == trace.n &&
             clique_number(intervals) == trace.k && chromatic_number(intervals) == trace.k;
      }
    }
    report("random traces: n = N and chromatic = clique = K on all disciplines", ok);
  }
  {
    auto a = run_mm1_campaign({99, 0}, StableRate(0.9), 50000, false);
    auto b = run_mm1_campaign({99, 0}, StableRate(0.9), 50000, true);
    bool ok = a.size() == b.size();
    for (std::size_t i = 0; ok && i < a.size(); ++i) ok = a[i].n == b[i].n && a[i].k == b[i].k;
    auto c = run_station_campaign({99, 0}, StableRate(0.8), 100000, 5000, kDefaultChains, false);
    auto d = run_station_campaign({99, 0}, StableRate(0.8), 100000, 5000, kDefaultChains, true);
    auto e = run_ranked_campaign({99, 0}, ServerLoad(50.0), 100000, 5000, kDefaultChains, false);
    auto f = run_ranked_campaign({99, 0}, ServerLoad(50.0), 100000, 5000, kDefaultChains, true);
    report("serial and parallel campaigns are bitwise identical", ok && c == d && e == f);
  }
  out << (failures == 0 ? "all checks passed" : "CHECKS FAILED") << "\n";
  return failures == 0 ? 0 : 4;
}

}  // namespace

// ---------------------------------------------------------------------------
// parsing helpers

std::vector<double> parse_grid(const std::string& text) {
  if (text.empty()) throw domain_error("empty value list");
  std::vector<double> values;
  std::size_t range = text.find("..");
  if (range != std::string::npos) {
    std::size_t colon = text.find(':', range + 2);
    if (colon == std::string::npos) {
      throw domain_error("range '" + text + "' needs a step (a..b:step)");
    }
    double a = parse_real(text.substr(0, range), "range start");
    double b = parse_real(text.substr(range + 2, colon - range - 2), "range end");
    double step = parse_real(text.substr(colon + 1), "range step");
    if (!(step > 0.0)) throw domain_error("range step must be positive");
    if (b < a) throw domain_error("range end below start");
    auto count = static_cast<std::uint64_t>((b - a) / step + 1e-9) + 1;
    if (count > 1'000'000) throw domain_error("range too long");
    for (std::uint64_t i = 0; i < count; ++i) values.push_back(a + static_cast<double>(i) * step);
    return values;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(parse_real(item, "value list"));
  if (values.empty()) throw domain_error("empty value list");
  return values;
}

std::vector<std::uint64_t> parse_index_list(const std::string& text) {
  if (text.empty()) throw domain_error("empty index list");
  auto to_index = [](const std::string& part) {
    double v = parse_real(part, "index");
    if (v < 0 || v != std::floor(v) || v > 1e15) {
      throw domain_error("index '" + part + "' is not a nonnegative integer");
    }
    return static_cast<std::uint64_t>(v);
  };
  std::vector<std::uint64_t> values;
  std::size_t range = text.find("..");
  if (range != std::string::npos) {
    std::size_t colon = text.find(':', range + 2);
    std::uint64_t a = to_index(text.substr(0, range));
    std::uint64_t b = to_index(
        colon == std::string::npos ? text.substr(range + 2)
                                   : text.substr(range + 2, colon - range - 2));
    std::uint64_t step = colon == std::string::npos ? 1 : to_index(text.substr(colon + 1));
    if (step == 0) throw domain_error("range step must be positive");
    if (b < a) throw domain_error("range end below start");
    if ((b - a) / step > 1'000'000) throw domain_error("range too long");
    for (std::uint64_t v = a; v <= b; v += step) values.push_back(v);
    return values;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(to_index(item));
  if (values.empty()) throw domain_error("empty index list");
  return values;
}

std::uint64_t parse_count(double value, const std::string& what) {
  if (!(value >= 0) || value != std::floor(value) || value > 9e15) {
    throw domain_error(what + " must be a nonnegative integer");
  }
  return static_cast<std::uint64_t>(value);
}

// ---------------------------------------------------------------------------
// entry point

int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    CLI::App app{"queueing-analysis workbench: exact laws, asymptotics, simulation"};
    app.require_subcommand(1);
    const std::string command_line = join_argv(argc, argv);
    int rc = 0;

    ExactCfg exact_cfg;
    exact_cfg.command_line = command_line;
    auto* exact = app.add_subcommand("exact", "closed-form distributions and moments");
    exact->add_option("quantity", exact_cfg.quantity,
                      "n-pmf | n-moment | k-tail | k-moment | i-tail | i-moment | l-tail | "
                      "l-moment | t | ruin")
        ->required();
    exact->add_option("--lambda", exact_cfg.lambda, "arrival rate grid");
    exact->add_option("--n", exact_cfg.n_list, "busy-period sizes");
    exact->add_option("--k", exact_cfg.k_list, "occupancy tail points");
    exact->add_option("--i", exact_cfg.i_list, "station tail points");
    exact->add_option("--l", exact_cfg.l_list, "server tail points / series order l");
    exact->add_option("--m", exact_cfg.m_list, "moment orders");
    exact->add_option("--method", exact_cfg.method,
                      "t: direct|divisor; k-moment: lambert|direct");
    exact->add_option("--tol", exact_cfg.tol, "series truncation tolerance");
    exact->add_option("--p", exact_cfg.p, "ruin: up-step probability");
    exact->add_option("--v", exact_cfg.v, "ruin: starting fortune");
    exact->add_option("--w", exact_cfg.w, "ruin: opposing fortune");
    add_common(exact, exact_cfg.common);
    exact->callback([&] { rc = run_exact(exact_cfg, out); });

    AsymCfg asym_cfg;
    asym_cfg.command_line = command_line;
    auto* asym = app.add_subcommand("asym", "asymptotic expansions");
    asym->add_option("quantity", asym_cfg.quantity,
                     "k-mean | k-moment | k-var | n-moment | l-mean | l-moment | t | inv-h")
        ->required();
    asym->add_option("--lambda", asym_cfg.lambda, "arrival rate grid");
    asym->add_option("--l", asym_cfg.l_list, "series index l (t)");
    asym->add_option("--m", asym_cfg.m_list, "moment orders");
    asym->add_option("--order", asym_cfg.order, "series terms to keep");
    add_common(asym, asym_cfg.common);
    asym->callback([&] { rc = run_asym(asym_cfg, out); });

    SimulateCfg sim_cfg;
    sim_cfg.command_line = command_line;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo campaigns");
    simulate->require_subcommand(1);
    auto add_sim_common = [&](CLI::App* cmd) {
      cmd->add_option("--lambda", sim_cfg.lambda, "arrival rate")->required();
      cmd->add_option("--seed", sim_cfg.seed, "base RNG seed");
      cmd->add_option("--batches", sim_cfg.batches, "batch count for batch-means SE");
      cmd->add_option("--m", sim_cfg.m_list, "moment orders");
      cmd->add_flag("--serial", sim_cfg.serial, "disable the parallel path");
      add_common(cmd, sim_cfg.common);
    };
    auto* mm1 = simulate->add_subcommand("mm1", "busy periods: N and K");
    add_sim_common(mm1);
    mm1->add_option("--periods", sim_cfg.periods, "busy periods to sample");
    mm1->add_option("--k", sim_cfg.tail_list, "emit empirical Pr[K>k] rows");
    mm1->add_option("--dump-n", sim_cfg.dump_n, "write N samples, one per line");
    mm1->add_option("--dump-k", sim_cfg.dump_k, "write K samples, one per line");
    mm1->callback([&] { rc = run_simulate_mm1(sim_cfg, out); });

    auto* stations = simulate->add_subcommand("stations", "ordered-station index I");
    add_sim_common(stations);
    stations->add_option("--arrivals", sim_cfg.arrivals, "recorded arrivals (after warmup)");
    stations->add_option("--warmup", sim_cfg.warmup, "warmup arrivals per chain");
    stations->add_option("--chains", sim_cfg.chains, "independent chains");
    stations->add_option("--i", sim_cfg.tail_list, "emit empirical Pr[I>i] rows");
    stations->add_option("--dump", sim_cfg.dump, "write I samples, one per line");
    stations->callback([&] { rc = run_simulate_stream(sim_cfg, out, true); });

    auto* ranked = simulate->add_subcommand("ranked", "ranked-server index L");
    add_sim_common(ranked);
    ranked->add_option("--arrivals", sim_cfg.arrivals, "recorded arrivals (after warmup)");
    ranked->add_option("--warmup", sim_cfg.warmup, "warmup arrivals per chain");
    ranked->add_option("--chains", sim_cfg.chains, "independent chains");
    ranked->add_option("--l", sim_cfg.tail_list, "emit empirical Pr[L>l] rows");
    ranked->add_option("--dump", sim_cfg.dump, "write L samples, one per line");
    ranked->callback([&] { rc = run_simulate_stream(sim_cfg, out, false); });

    CompareCfg cmp_cfg;
    cmp_cfg.command_line = command_line;
    auto* compare = app.add_subcommand("compare", "exact vs asymptotic vs simulated");
    compare->add_option("--quantity", cmp_cfg.quantity,
                        "n-moment | k-moment | k-tail | i-moment | i-tail | l-moment | l-tail")
        ->required();
    compare->add_option("--lambda", cmp_cfg.lambda, "arrival rate grid")->required();
    compare->add_option("--m", cmp_cfg.m_list, "moment orders");
    compare->add_option("--index", cmp_cfg.tail_list, "tail points for *-tail quantities");
    compare->add_option("--periods", cmp_cfg.periods, "busy periods per lambda");
    compare->add_option("--arrivals", cmp_cfg.arrivals, "recorded arrivals per lambda");
    compare->add_option("--warmup", cmp_cfg.warmup, "warmup arrivals per chain");
    compare->add_option("--chains", cmp_cfg.chains, "independent chains");
    compare->add_option("--batches", cmp_cfg.batches, "batch count");
    compare->add_option("--threshold", cmp_cfg.threshold, "max |z| for exit code 0");
    compare->add_option("--tol", cmp_cfg.tol, "exact-series tolerance");
    compare->add_option("--seed", cmp_cfg.seed, "base RNG seed");
    compare->add_flag("--serial", cmp_cfg.serial, "disable the parallel path");
    add_common(compare, cmp_cfg.common);
    compare->callback([&] { rc = run_compare(cmp_cfg, out); });

    GraphCfg graph_cfg;
    graph_cfg.command_line = command_line;
    auto* graph = app.add_subcommand("graph", "busy-period interval graph");
    graph->add_option("--trace", graph_cfg.trace, "A/D event string (one busy period)");
    graph->add_option("--discipline", graph_cfg.discipline, "fcfs | lcfs | stations");
    graph->add_option("--lambda", graph_cfg.lambda, "generate a random trace at this rate");
    graph->add_option("--seed", graph_cfg.seed, "seed for --lambda generation");
    graph->add_option("--format", graph_cfg.format, "edges | dot | json")
        ->check(CLI::IsMember({"edges", "dot", "json"}));
    graph->add_option("--out", graph_cfg.out_path, "write to this file instead of stdout");
    graph->callback([&] { rc = run_graph(graph_cfg, out); });

    auto* selfcheck = app.add_subcommand("selfcheck", "run the invariant suite");
    selfcheck->callback([&] { rc = run_selfcheck(out); });

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      int cli_rc = app.exit(e, out, err);
      return cli_rc == 0 ? 0 : 2;
    }
    return rc;
  } catch (const domain_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const convergence_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const internal_error& e) {
    err << "internal error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace qlab
