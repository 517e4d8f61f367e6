#pragma once

// Run configuration and subcommand dispatch for the carpet tool. Argument
// parsing lives in tools/; everything here takes a filled-in RunConfig.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "carpet/boundary.hpp"
#include "carpet/cache.hpp"
#include "carpet/covers.hpp"
#include "carpet/fit.hpp"
#include "carpet/harmonic.hpp"
#include "carpet/io.hpp"
#include "carpet/kernels.hpp"
#include "carpet/reproduce.hpp"
#include "carpet/spectra.hpp"

namespace carpet {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitConvergence = 3, kExitResource = 4 };

struct RunConfig {
  std::string command;
  std::string target;  ///< table id for `reproduce`
  int level = 3;
  std::string bc = "dirichlet";
  std::optional<std::string> vs;  ///< second spectrum for differences
  std::size_t k = 10;
  bool full = false;
  double tol = 1e-9;
  double r_inv = 1.25;
  std::optional<double> rho;
  std::string out_dir = ".";
  std::optional<std::string> cache_dir;
  int max_eig_level = kMaxEigenLevel;
  int max_harmonic_level = kMaxHarmonicLevel;
  int harmonic_k = 1;
  std::string edge = "top";         ///< edge carrying the sin data
  std::string decay_edge = "bottom";
  std::optional<std::string> data_file;
  std::string side = "top";
  double t = 0.5;
  std::optional<std::string> cell;
  std::optional<std::string> to;
  std::string corner = "top_left";
  std::optional<std::size_t> eigen_index;  ///< 1-based Dirichlet eigenfunction
  std::string cover = "staircase";
  std::size_t thetas = 65;
  bool pgm = false;
  std::uint64_t seed = 1;

  double rho_value() const { return rho.value_or(8.0 * r_inv); }

  nlohmann::json to_json() const {
    nlohmann::json j{{"command", command}, {"level", level},     {"bc", bc},
                     {"k", k},             {"full", full},       {"tol", tol},
                     {"r_inv", r_inv},     {"rho", rho_value()}, {"max_eig_level", max_eig_level},
                     {"max_harmonic_level", max_harmonic_level}};
    if (!target.empty()) j["target"] = target;
    if (vs) j["vs"] = *vs;
    if (command == "harmonic" || command == "decay" || command == "corner-decay" ||
        command == "gauss-green") {
      j["harmonic_k"] = harmonic_k;
      j["edge"] = edge;
    }
    if (data_file) j["data"] = *data_file;
    if (command == "poisson") {
      j["side"] = side;
      j["t"] = t;
    }
    if (cell) j["cell"] = *cell;
    if (to) j["to"] = *to;
    if (command == "decay") j["decay_edge"] = decay_edge;
    if (command == "corner-decay") j["corner"] = corner;
    if (eigen_index) j["eigen"] = *eigen_index;
    if (command == "bands") {
      j["cover"] = cover;
      j["thetas"] = thetas;
    }
    if (command == "gauss-green") j["seed"] = seed;
    return j;
  }
};

inline Corner parse_corner(const std::string& s) {
  if (s == "top_left") return Corner::top_left;
  if (s == "top_right") return Corner::top_right;
  if (s == "bottom_right") return Corner::bottom_right;
  if (s == "bottom_left") return Corner::bottom_left;
  throw ConfigError("unknown corner '" + s + "'");
}

namespace detail {

class Runner {
 public:
  Runner(const RunConfig& cfg, std::ostream& out) : cfg_(cfg), out_(out) {
    settings_.tol = cfg.tol;
    settings_.rho = cfg.rho_value();
    settings_.max_eig_level = cfg.max_eig_level;
    settings_.max_harmonic_level = cfg.max_harmonic_level;
    settings_.cache = EigenCache::from_env(cfg.cache_dir);
    if (!(cfg.r_inv > 0)) throw ConfigError("r_inv must be positive");
    if (!(cfg.tol > 0)) throw ConfigError("tol must be positive");
  }

  void dispatch() {
    const auto& c = cfg_.command;
    if (c == "graph") graph();
    else if (c == "harmonic") harmonic();
    else if (c == "poisson") poisson();
    else if (c == "resistance") resistance();
    else if (c == "eigs") eigs();
    else if (c == "counting") counting(false);
    else if (c == "weyl") counting(true);
    else if (c == "heat") heat();
    else if (c == "dirichlet-kernel") dirichlet_kernel_cmd();
    else if (c == "decay") decay();
    else if (c == "corner-decay") corner_decay();
    else if (c == "gauss-green") gauss_green();
    else if (c == "bands") bands();
    else if (c == "reproduce") reproduce();
    else throw ConfigError("unknown command '" + c + "'");
  }

 private:
  const RunConfig& cfg_;
  std::ostream& out_;
  SolveSettings settings_;

  CarpetGraph graph_for(int level) const { return build_graph(level); }

  std::ofstream open(const std::string& name) const {
    std::filesystem::create_directories(cfg_.out_dir);
    const auto p = std::filesystem::path(cfg_.out_dir) / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open output file " + p.string());
    out_ << "wrote " << p.string() << '\n';
    return f;
  }

  CsvHeader header(const CarpetGraph& g, const BoundarySpec& spec) const {
    auto h = CsvHeader::standard(g.level(), spec, cfg_.r_inv, cfg_.rho_value(), cfg_.tol);
    h.add("graph_hash", graph_hash(g)).add("config", cfg_.to_json().dump());
    return h;
  }

  void write_field(const std::string& stem, const CarpetGraph& g, const BoundarySpec& spec,
                   const Field& f) const {
    {
      auto os = open(stem + ".csv");
      write_field_csv(os, g, f, header(g, spec));
    }
    if (cfg_.pgm) {
      auto os = open(stem + ".pgm");
      write_pgm(os, g, f);
    }
  }

  void write_json(const std::string& name, nlohmann::json j) const {
    auto os = open(name);
    os << j.dump(2) << '\n';
  }

  std::string stem(const std::string& what) const {
    return what + "_m" + std::to_string(cfg_.level);
  }

  std::size_t cell_or(const CarpetGraph& g, const std::optional<std::string>& a, std::size_t dflt) const {
    return a ? g.index_of(*a) : dflt;
  }

  /// Center-most cell on the top edge.
  static std::size_t top_center(const CarpetGraph& g) { return g.boundary_cell(Side::top, g.side_cells() / 2); }

  std::size_t eigen_count(const CarpetGraph& g) const { return cfg_.full ? g.size() : cfg_.k; }

  RealEigenSet spectrum(const CarpetGraph& g, const BoundarySpec& spec, bool fields = true) const {
    return cached_eigenset(g, spec, eigen_count(g), settings_, fields);
  }

  BoundaryData harmonic_data(const CarpetGraph& g) const {
    if (!cfg_.data_file) return sin_boundary_data(g, cfg_.harmonic_k, parse_side(cfg_.edge));
    // Rows: side,position,value where value may be "neumann".
    std::ifstream in(*cfg_.data_file);
    if (!in) throw ConfigError("cannot read boundary data " + *cfg_.data_file);
    auto d = BoundaryData::zero(g);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("side", 0) == 0) continue;
      std::stringstream ss(line);
      std::string side, pos, val;
      if (!std::getline(ss, side, ',') || !std::getline(ss, pos, ',') || !std::getline(ss, val))
        throw ConfigError("malformed boundary data row '" + line + "'");
      const auto p = static_cast<std::size_t>(parse_double(pos));
      if (val == "neumann") d.set(g, parse_side(side), p, std::nullopt);
      else d.set(g, parse_side(side), p, parse_double(val));
    }
    return d;
  }

  void graph() {
    const auto g = build_graph(cfg_.level);
    write_json("graph_m" + std::to_string(cfg_.level) + ".json", graph_to_json(g));
    out_ << "cells " << g.size() << "\nvirtual_cells " << g.num_virtual() << "\nedges "
         << g.edges().size() << "\nhash " << graph_hash(g) << '\n';
  }

  void harmonic() {
    const auto g = graph_for(cfg_.level);
    const auto data = harmonic_data(g);
    const auto h = HarmonicSolver(g, data.dirichlet_mask(), LinearSolverKind::direct,
                                  cfg_.max_harmonic_level)
                       .solve(data);
    write_field(stem("harmonic") + (cfg_.data_file ? "_data" : "_k" + std::to_string(cfg_.harmonic_k)),
                g, BoundarySpec::dirichlet(), h.cells);
    out_ << "energy " << fmt(energy(h.cells, h.cells, g, cfg_.r_inv)) << "\nresidual "
         << fmt(h.residual) << '\n';
  }

  void poisson() {
    const auto g = graph_for(cfg_.level);
    const HarmonicSolver solver(g, std::vector<bool>(g.num_virtual(), true), LinearSolverKind::direct,
                                cfg_.max_harmonic_level);
    const auto p = poisson_kernel(solver, {parse_side(cfg_.side), cfg_.t});
    write_field(stem("poisson"), g, BoundarySpec::dirichlet(), p.cells);
    out_ << "residual " << fmt(p.residual) << '\n';
  }

  void resistance() {
    const auto g = graph_for(cfg_.level);
    const auto y = cell_or(g, cfg_.cell, top_center(g));
    if (cfg_.to) {
      out_ << "resistance " << fmt(effective_resistance(g, g.index_of(*cfg_.to), y, cfg_.r_inv)) << '\n';
      return;
    }
    const auto r = resistance_field(g, y, cfg_.r_inv);
    write_field(stem("resistance"), g, BoundarySpec::neumann(), r);
    out_ << "source " << g.address(y).str() << "\nmax " << fmt(r.maxCoeff()) << '\n';
  }

  void eigs() {
    const auto g = graph_for(cfg_.level);
    const auto spec = BoundarySpec::parse(cfg_.bc);
    const auto set = spectrum(g, spec);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < set.size(); ++i)
      rows.push_back({std::to_string(i + 1), fmt(set.values[i]), fmt(set.lambda_sc(i)),
                      to_string(set.labels[i]), fmt(set.residuals[i])});
    auto os = open(stem("eigs") + "_" + spec.name() + ".csv");
    write_table_csv(os, header(g, spec), {"index", "lambda", "lambda_sc", "label", "residual"}, rows);
    out_ << "eigenvalues " << set.size() << '\n';
  }

  void counting(bool weyl) {
    const auto g = graph_for(cfg_.level);
    const auto spec = BoundarySpec::parse(cfg_.bc);
    const auto a = spectrum(g, spec, false).renormalized();
    const double alpha = std::log(8.0) / std::log(cfg_.rho_value());
    const double beta = std::log(3.0) / std::log(cfg_.rho_value());
    auto h = header(g, spec);
    if (cfg_.vs) {
      const auto spec_b = BoundarySpec::parse(*cfg_.vs);
      const auto b = spectrum(g, spec_b, false).renormalized();
      const auto grid = merged_midpoints(a, b);
      const auto d = weyl ? difference_ratio(a, b, grid, beta) : counting_difference(a, b, grid);
      h.add("vs", spec_b.str());
      auto os = open(stem(weyl ? "weyl_diff" : "counting_diff") + "_" + spec.name() + "_" + spec_b.name() + ".csv");
      write_curve_csv(os, h, weyl ? "diff_over_t_beta" : "diff", grid, d);
      const auto raw = counting_difference(a, b, grid);
      out_ << "sign_changes " << sign_changes(raw) << "\nmax_abs "
           << fmt(raw.empty() ? 0.0 : std::max(std::abs(*std::max_element(raw.begin(), raw.end())),
                                               std::abs(*std::min_element(raw.begin(), raw.end()))))
           << '\n';
      return;
    }
    std::vector<double> t(a.begin(), a.end()), n(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) n[i] = static_cast<double>(i + 1);
    if (weyl)
      for (std::size_t i = 0; i < a.size(); ++i) n[i] /= std::pow(std::max(t[i], 1e-300), alpha);
    auto os = open(stem(weyl ? "weyl" : "counting") + "_" + spec.name() + ".csv");
    write_curve_csv(os, h, weyl ? "N_over_t_alpha" : "N", t, n);
    if (!weyl && a.size() >= 60) {
      const std::size_t lo = 50, hi = std::min<std::size_t>(2000, a.size());
      std::vector<double> x(a.begin() + static_cast<long>(lo - 1), a.begin() + static_cast<long>(hi));
      std::vector<double> y;
      for (std::size_t j = lo; j <= hi; ++j) y.push_back(static_cast<double>(j));
      out_ << "slope_50_" << hi << ' ' << fmt(fit_loglog(x, y).slope) << '\n';
    }
  }

  void heat() {
    const auto g = graph_for(cfg_.level);
    const auto spec = BoundarySpec::parse(cfg_.bc);
    const auto a = spectrum(g, spec, false).renormalized();
    const double alpha = std::log(8.0) / std::log(cfg_.rho_value());
    const double beta = std::log(3.0) / std::log(cfg_.rho_value());
    auto h = header(g, spec);
    if (cfg_.vs) {
      const auto spec_b = BoundarySpec::parse(*cfg_.vs);
      const auto b = spectrum(g, spec_b, false).renormalized();
      const auto fit = heat_trace_difference_slope(a, b, cfg_.rho_value());
      const auto t = log_grid(fit.window.t_lo, 1.0, 200);
      const auto za = heat_trace(a, t), zb = heat_trace(b, t);
      std::vector<std::vector<std::string>> rows;
      for (std::size_t i = 0; i < t.size(); ++i)
        rows.push_back({fmt(t[i]), fmt(za[i] - zb[i]), fmt(std::pow(t[i], beta) * (za[i] - zb[i]))});
      h.add("vs", spec_b.str()).add("fit_t_lo", fit.window.t_lo).add("fit_t_hi", fit.window.t_hi);
      auto os = open(stem("heat_diff") + "_" + spec.name() + "_" + spec_b.name() + ".csv");
      write_table_csv(os, h, {"t", "Z_diff", "t_beta_Z_diff"}, rows);
      out_ << "window " << fmt(fit.window.t_lo) << ' ' << fmt(fit.window.t_hi) << "\nslope "
           << fmt(fit.fit.slope) << '\n';
      return;
    }
    const auto fit = heat_trace_slope(a, cfg_.rho_value());
    const auto t = log_grid(fit.window.t_lo, 1.0, 200);
    const auto z = heat_trace(a, t);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < t.size(); ++i)
      rows.push_back({fmt(t[i]), fmt(z[i]), fmt(std::pow(t[i], alpha) * z[i])});
    h.add("fit_t_lo", fit.window.t_lo).add("fit_t_hi", fit.window.t_hi);
    auto os = open(stem("heat") + "_" + spec.name() + ".csv");
    write_table_csv(os, h, {"t", "Z", "t_alpha_Z"}, rows);
    out_ << "window " << fmt(fit.window.t_lo) << ' ' << fmt(fit.window.t_hi) << "\nslope "
         << fmt(fit.fit.slope) << '\n';
  }

  void dirichlet_kernel_cmd() {
    const auto g = graph_for(cfg_.level);
    const auto spec = BoundarySpec::parse(cfg_.bc);
    const auto set = spectrum(g, spec);
    const auto y = cell_or(g, cfg_.cell, top_center(g));
    const auto d = dirichlet_kernel(set, set.size(), y);
    write_field(stem("dirichlet_kernel") + "_" + spec.name() + "_N" + std::to_string(set.size()), g, spec, d);
    out_ << "source " << g.address(y).str() << "\npeak " << fmt(d[static_cast<Eigen::Index>(y)]) << '\n';
  }

  /// h_k from sin data, or the requested Dirichlet eigenfunction.
  std::pair<Field, std::string> decay_subject(const CarpetGraph& g) const {
    if (cfg_.eigen_index) {
      if (*cfg_.eigen_index < 1) throw ConfigError("--eigen is 1-based");
      const auto set = cached_eigenset(g, BoundarySpec::dirichlet(), *cfg_.eigen_index, settings_);
      if (set.size() < *cfg_.eigen_index) throw ConfigError("eigen index beyond the spectrum");
      return {set.fields.col(static_cast<Eigen::Index>(*cfg_.eigen_index - 1)),
              "phi" + std::to_string(*cfg_.eigen_index)};
    }
    if (g.level() > cfg_.max_harmonic_level)
      throw ResourceError("harmonic solves limited to level " + std::to_string(cfg_.max_harmonic_level));
    return {solve_bvp(g, harmonic_data(g)).cells, "h" + std::to_string(cfg_.harmonic_k)};
  }

  void decay() {
    const auto g = graph_for(cfg_.level);
    const auto [u, name] = decay_subject(g);
    const Side side = parse_side(cfg_.decay_edge);
    const auto p = decay_profile(u, g, side);
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : p.rows) rows.push_back({std::to_string(r.position), fmt(r.fit.A), fmt(r.fit.alpha)});
    {
      auto os = open(stem("decay") + "_" + name + "_" + std::string(to_string(side)) + ".csv");
      write_table_csv(os, header(g, BoundarySpec::dirichlet()), {"position", "A", "alpha"}, rows);
    }
    write_json(stem("decay") + "_" + name + "_" + std::string(to_string(side)) + ".json",
               {{"edge", to_string(side)},
                {"stacks", p.rows.size()},
                {"degenerate", p.degenerate},
                {"mean_alpha", p.mean_alpha},
                {"min_alpha", p.min_alpha},
                {"max_alpha", p.max_alpha},
                {"config", cfg_.to_json()}});
    out_ << "stacks " << p.rows.size() << "\nmean_alpha " << fmt(p.mean_alpha) << '\n';
  }

  void corner_decay() {
    const auto g = graph_for(cfg_.level);
    const auto [u, name] = decay_subject(g);
    const auto f = fit_corner_decay(u, corner_stack(g, parse_corner(cfg_.corner)), g.level());
    out_ << name << ' ' << cfg_.corner << "\nA " << fmt(f.A) << "\nalpha " << fmt(f.alpha) << '\n';
  }

  void gauss_green() {
    const auto g = graph_for(cfg_.level);
    const auto data = harmonic_data(g);
    const auto h = solve_bvp(g, data);
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> nd;
    Field v(static_cast<Eigen::Index>(g.size()));
    for (auto& x : v) x = nd(rng);
    const auto gg = gauss_green_residual(h, v, g, cfg_.r_inv);
    const auto bf = boundary_functional(h, Field::Ones(v.size()), g, cfg_.r_inv);
    std::vector<std::vector<std::string>> rows;
    const auto vcs = g.virtual_cells();
    for (std::size_t i = 0; i < vcs.size(); ++i)
      rows.push_back({std::string(to_string(vcs[i].side)), std::to_string(vcs[i].position),
                      fmt(bf.densities[static_cast<Eigen::Index>(i)])});
    {
      auto os = open(stem("boundary_density") + "_h" + std::to_string(cfg_.harmonic_k) + ".csv");
      write_table_csv(os, header(g, BoundarySpec::dirichlet()), {"side", "position", "density"}, rows);
    }
    out_ << "lhs " << fmt(gg.lhs) << "\ninterior " << fmt(gg.interior) << "\nboundary " << fmt(gg.boundary)
         << "\nresidual " << fmt(gg.residual) << "\nboundary_functional_v1 " << fmt(bf.value) << '\n';
  }

  void bands() {
    const auto g = graph_for(cfg_.level);
    const auto cover = parse_cover(cfg_.cover);
    SweepOptions opt;
    opt.tol = cfg_.tol;
    opt.rho = cfg_.rho_value();
    opt.max_level = cfg_.max_eig_level;
    const auto sw = sweep_bands(cover, g, theta_grid(cfg_.thetas), cfg_.k, opt);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t b = 0; b < sw.bands.size(); ++b)
      for (std::size_t r = 0; r < sw.thetas.size(); ++r)
        rows.push_back({fmt(sw.thetas[r]), std::to_string(b), fmt(sw.bands[b].values[r] * sw.scale()),
                        std::to_string(sw.bands[b].cls)});
    const auto name = stem("bands") + "_" + to_string(cover);
    {
      auto os = open(name + ".csv");
      write_table_csv(os, header(g, cover_spec(cover, 0.0)), {"theta", "band", "lambda_sc", "class"}, rows);
    }
    const auto proj = project_spectrum(sw);
    const auto groups = group_structure_report(sw);
    nlohmann::json j;
    j["config"] = cfg_.to_json();
    j["intervals"] = nlohmann::json::array();
    for (const auto& iv : proj.intervals) j["intervals"].push_back({iv.lo, iv.hi});
    j["gaps"] = nlohmann::json::array();
    for (const auto& iv : proj.gaps) j["gaps"].push_back({iv.lo, iv.hi});
    j["group_sizes"] = groups.sizes;
    j["incomplete"] = sw.incomplete;
    nlohmann::json flagged = nlohmann::json::array();
    for (const auto& r : sw.rows)
      if (!r.converged || r.ambiguous) flagged.push_back({{"theta", r.theta}, {"converged", r.converged}, {"ambiguous", r.ambiguous}, {"note", r.note}});
    j["flagged_rows"] = flagged;
    write_json(name + ".json", j);
    out_ << "bands " << sw.bands.size() << "\nintervals " << proj.intervals.size() << "\ngroups";
    for (auto s : groups.sizes) out_ << ' ' << s;
    out_ << '\n';
  }

  void reproduce() {
    const auto& id = cfg_.target;
    if (id == "3.1") return table_3_1();
    if (id == "4.1") return eigen_table(BoundarySpec::dirichlet(), {5}, 60);
    if (id == "4.2") return eigen_table(BoundarySpec::neumann(), {5}, 60);
    if (id == "4.3") return eigen_table(BoundarySpec::torus(), {4, 5}, 15);
    if (id == "4.4") return eigen_table(BoundarySpec::klein(), {4, 5}, 15);
    if (id == "4.5") return eigen_table(BoundarySpec::projective(), {4, 5}, 15);
    if (id == "6.1" || id == "6.2") return corner_table(id == "6.1" ? Corner::top_left : Corner::bottom_left, id);
    if (id == "6.3") return dirichlet_corner(id);
    throw ConfigError("unknown table '" + id + "' (expected 3.1, 4.1-4.5, 6.1-6.3)");
  }

  CsvHeader table_header(const std::string& id, int level, const BoundarySpec& spec) const {
    auto h = CsvHeader::standard(level, spec, cfg_.r_inv, cfg_.rho_value(), cfg_.tol);
    h.add("table", id).add("graph_hash", graph_hash(build_graph(level))).add("config", cfg_.to_json().dump());
    return h;
  }

  void table_3_1() {
    const auto e = energy_table(cfg_.r_inv, std::min(6, cfg_.max_harmonic_level));
    std::vector<std::vector<std::string>> rows;
    for (int m = 1; m <= 6; ++m) {
      std::vector<std::string> r{std::to_string(m)};
      for (int k = 0; k < 6; ++k) r.push_back(fmt(e[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(k)]));
      rows.push_back(r);
    }
    auto os = open("table_3.1.csv");
    write_table_csv(os, table_header("3.1", 6, BoundarySpec::dirichlet()),
                    {"m", "k1", "k2", "k3", "k4", "k5", "k6"}, rows);
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out_ << (i ? " " : "") << r[i];
      out_ << '\n';
    }
  }

  void eigen_table(const BoundarySpec& spec, const std::vector<int>& levels, std::size_t count) {
    std::vector<RealEigenSet> sets;
    for (int m : levels) sets.push_back(cached_eigenset(build_graph(m), spec, count, settings_));
    const auto& top = sets.back();
    std::vector<std::string> names{"j", "lambda_sc"};
    for (int m : levels) names.push_back("level" + std::to_string(m));
    if (spec.d4_invariant()) names.push_back("label");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < top.size(); ++i) {
      std::vector<std::string> r{std::to_string(i + 1), fmt(top.lambda_sc(i))};
      for (const auto& s : sets) r.push_back(i < s.size() ? fmt(s.values[i]) : "");
      if (spec.d4_invariant()) r.push_back(to_string(top.labels[i]));
      rows.push_back(r);
    }
    const std::string id = spec.kind == BoundaryKind::dirichlet  ? "4.1"
                           : spec.kind == BoundaryKind::neumann  ? "4.2"
                           : spec.kind == BoundaryKind::torus    ? "4.3"
                           : spec.kind == BoundaryKind::klein    ? "4.4"
                                                                 : "4.5";
    auto os = open("table_" + id + ".csv");
    write_table_csv(os, table_header(id, levels.back(), spec), names, rows);
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out_ << (i ? " " : "") << r[i];
      out_ << '\n';
    }
  }

  void write_fit_table(const std::string& id, int level, const CornerFits& fits) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < fits.size(); ++k) {
      if (fits[k]) rows.push_back({std::to_string(k + 1), fmt(fits[k]->alpha), fmt(fits[k]->A), "ok"});
      else rows.push_back({std::to_string(k + 1), "", "", "degenerate"});
    }
    auto os = open("table_" + id + ".csv");
    write_table_csv(os, table_header(id, level, BoundarySpec::dirichlet()), {"k", "alpha", "A", "status"}, rows);
    for (const auto& r : rows) out_ << r[0] << ' ' << (r[3] == "ok" ? r[1] + ' ' + r[2] : r[3]) << '\n';
  }

  void corner_table(Corner c, const std::string& id) {
    const int level = std::min(6, cfg_.max_harmonic_level);
    write_fit_table(id, level, harmonic_corner_table(level, c));
  }

  void dirichlet_corner(const std::string& id) {
    const int level = std::min(5, cfg_.max_eig_level);
    write_fit_table(id, level, dirichlet_corner_table(level, settings_));
  }
};

}  // namespace detail

/// Executes one subcommand; returns the process exit code.
inline int run(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    detail::Runner(cfg, out).dispatch();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConvergenceError& e) {
    err << "convergence failure: " << e.what() << " (achieved " << e.achieved() << ")\n";
    return kExitConvergence;
  } catch (const ResourceError& e) {
    err << "resource limit: " << e.what() << '\n';
    return kExitResource;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace carpet
