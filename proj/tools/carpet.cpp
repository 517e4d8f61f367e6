// carpet: command-line front end for the Sierpinski carpet library.

#include <iostream>

#include <CLI11.hpp>

#include "carpet/cli.hpp"

int main(int argc, char** argv) {
  carpet::RunConfig cfg;
  CLI::App app{"Method of averages on the Sierpinski carpet"};
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("-m,--level", cfg.level, "Graph level m")->check(CLI::Range(0, carpet::kMaxSupportedLevel));
  app.add_option("--bc", cfg.bc, "Boundary spec: dirichlet, neumann, torus, klein, projective, strip:THETA, staircase:THETA");
  app.add_option("-k", cfg.k, "Number of eigenpairs or bands")->check(CLI::PositiveNumber);
  app.add_flag("--full", cfg.full, "Use the complete spectrum");
  app.add_option("--tol", cfg.tol, "Eigensolver residual tolerance")->check(CLI::PositiveNumber);
  app.add_option("--r-inv", cfg.r_inv, "Energy renormalization r^{-1}")->check(CLI::PositiveNumber);
  app.add_option("--rho", cfg.rho, "Laplacian renormalization (default 8 r^{-1})")->check(CLI::PositiveNumber);
  app.add_option("-o,--out", cfg.out_dir, "Output directory");
  app.add_option("--cache-dir", cfg.cache_dir, "Eigenset cache directory (default $CARPET_CACHE_DIR)");
  app.add_option("--max-eig-level", cfg.max_eig_level, "Largest level for eigensolves");
  app.add_option("--max-harmonic-level", cfg.max_harmonic_level, "Largest level for harmonic solves");
  app.add_flag("--pgm", cfg.pgm, "Also write fields as PGM rasters");

  auto harmonic_opts = [&](CLI::App* s) {
    s->add_option("--harmonic-k", cfg.harmonic_k, "Index k of the sin(pi k t) boundary data")->check(CLI::PositiveNumber);
    s->add_option("--edge", cfg.edge, "Edge carrying the sin data")->check(CLI::IsMember({"top", "right", "bottom", "left"}));
    s->add_option("--data", cfg.data_file, "Boundary data CSV (side,position,value|neumann)");
  };

  app.add_subcommand("graph", "Build and serialize the level-m graph");
  harmonic_opts(app.add_subcommand("harmonic", "Harmonic function for boundary data"));
  auto* poisson = app.add_subcommand("poisson", "Poisson kernel for a boundary stimulus point");
  poisson->add_option("--side", cfg.side)->check(CLI::IsMember({"top", "right", "bottom", "left"}));
  poisson->add_option("--t", cfg.t, "Edge parameter in [0, 1]");
  auto* res = app.add_subcommand("resistance", "Effective resistance field or value");
  res->add_option("--cell", cfg.cell, "Source cell address (default: top-center cell)");
  res->add_option("--to", cfg.to, "Second cell; prints R(to, cell) only");
  auto* eigs = app.add_subcommand("eigs", "Lowest eigenvalues with symmetry labels");
  auto* counting = app.add_subcommand("counting", "Eigenvalue counting function");
  auto* weyl = app.add_subcommand("weyl", "Weyl ratio N(t)/t^alpha");
  auto* heat = app.add_subcommand("heat", "Heat trace and small-t slope");
  for (auto* s : {counting, weyl, heat}) s->add_option("--vs", cfg.vs, "Second boundary spec for differences");
  auto* dk = app.add_subcommand("dirichlet-kernel", "Dirichlet kernel partial sum D_k(., y)");
  dk->add_option("--cell", cfg.cell, "Source cell address");
  auto* decay = app.add_subcommand("decay", "Boundary decay fits along an edge");
  harmonic_opts(decay);
  decay->add_option("--decay-edge", cfg.decay_edge)->check(CLI::IsMember({"top", "right", "bottom", "left"}));
  decay->add_option("--eigen", cfg.eigen_index, "Use Dirichlet eigenfunction j (1-based)");
  auto* corner = app.add_subcommand("corner-decay", "Decay fit at a corner");
  harmonic_opts(corner);
  corner->add_option("--corner", cfg.corner)
      ->check(CLI::IsMember({"top_left", "top_right", "bottom_right", "bottom_left"}));
  corner->add_option("--eigen", cfg.eigen_index, "Use Dirichlet eigenfunction j (1-based)");
  auto* gg = app.add_subcommand("gauss-green", "Discrete Gauss-Green identity check");
  harmonic_opts(gg);
  gg->add_option("--seed", cfg.seed, "Seed for the random test field");
  auto* bands = app.add_subcommand("bands", "Theta-band sweep of a cover");
  bands->add_option("--cover", cfg.cover)->check(CLI::IsMember({"strip", "staircase"}));
  bands->add_option("--thetas", cfg.thetas, "Number of theta points on [0, 1/2]")->check(CLI::PositiveNumber);
  auto* rep = app.add_subcommand("reproduce", "Regenerate a table (3.1, 4.1-4.5, 6.1-6.3)");
  rep->add_option("table", cfg.target)->required();
  (void)eigs;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return carpet::kExitConfig;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  return carpet::run(cfg);
}
