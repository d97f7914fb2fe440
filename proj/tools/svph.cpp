#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svph/cones.hpp"
#include "svph/curves.hpp"
#include "svph/manifest.hpp"
#include "svph/map_io.hpp"
#include "svph/parallel.hpp"
#include "svph/spectral.hpp"
#include "svph/transfer.hpp"
#include "svph/transversality.hpp"

namespace fs = std::filesystem;
using namespace svph;
using nlohmann::json;

namespace {

/// Hypotheses needed to run the command do not hold.
struct HypothesisFailure : Error {
  using Error::Error;
};

struct Context {
  std::string map_path;
  std::string out_dir = ".";
  int threads = 0;
  std::uint64_t seed = 0;
  RunManifest manifest;
  Stopwatch clock;

  MapSpec load() const { return load_map(map_path); }

  fs::path path(const std::string& name) {
    manifest.outputs.push_back(name);
    return fs::path(out_dir) / name;
  }

  void finish(const json& summary) {
    write_json(path(manifest.command + ".json"), summary);
    manifest.map_file = map_path;
    manifest.map_hash = map_path.empty() ? "" : file_hash(map_path);
    manifest.seed = seed;
    manifest.threads = max_threads();
    manifest.wall_time = clock.seconds();
    write_json(fs::path(out_dir) / (manifest.command + ".manifest.json"), manifest.to_json());
    std::cout << std::setw(2) << summary << '\n';
  }
};

/// Grid-like options take SVPH_GRID when not given on the command line.
void env_grid(const CLI::Option* opt, auto& value) {
  if (opt->count() > 0) return;
  if (const char* g = std::getenv("SVPH_GRID")) {
    try {
      value = static_cast<std::remove_reference_t<decltype(value)>>(std::stoul(g));
    } catch (const std::logic_error&) {
      throw ConfigError(std::string("SVPH_GRID='") + g + "' is not a positive integer");
    }
  }
}

ConeSetup require_cones(const MapSpec& map, int r, int grid) {
  try {
    return cone_parameters(map, r, grid);
  } catch (const EmptyConeInterval& e) {
    throw HypothesisFailure(std::string("cone setup unavailable: ") + e.what());
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw ConfigError("list item '" + item + "' is not a number");
    }
  }
  if (v.empty()) throw ConfigError("empty list '" + s + "'");
  return v;
}

json point_json(const Point2& p) { return {{"x", p.x}, {"theta", p.theta}}; }

json cplx_json(cplx v, double residual) { return {{"re", v.real()}, {"im", v.imag()}, {"residual", residual}}; }

json condition_json(const ConditionResult& c) {
  return {{"name", c.name}, {"pass", c.pass}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"margin", c.margin}, {"note", c.note}};
}

json constants_json(const HyperbolicityConstants& h) {
  return {{"lambda", h.lambda},
          {"Lambda", h.Lambda},
          {"lambda_minus", h.lambda_minus},
          {"lambda_plus", h.lambda_plus},
          {"mu_minus", h.mu_minus},
          {"mu_plus", h.mu_plus},
          {"mu", h.mu},
          {"iota_star", h.iota_star},
          {"C_star", h.C_star},
          {"zeta_r", h.zeta_r},
          {"alpha", h.alpha},
          {"general_admissible", h.general_admissible}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for partially hyperbolic skew products of the torus"};
  app.require_subcommand(1);
  Context ctx;
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "Base RNG seed (default per command, or SVPH_SEED)");
  app.add_option("--threads", ctx.threads, "Cap on worker threads (0: all cores)");
  app.add_option("--out", ctx.out_dir, "Output directory")->capture_default_str();
  ctx.manifest.argv.assign(argv, argv + argc);

  auto add_map = [&](CLI::App* sub) { sub->add_option("--map", ctx.map_path, "Map JSON file")->required(); };
  auto seed_or = [&](std::uint64_t fallback) {
    if (seed_opt->count() > 0) return seed_flag;
    if (const char* s = std::getenv("SVPH_SEED")) {
      try {
        return static_cast<std::uint64_t>(std::stoull(s));
      } catch (const std::logic_error&) {
        throw ConfigError(std::string("SVPH_SEED='") + s + "' is not an integer");
      }
    }
    return fallback;
  };

  // check
  auto* check = app.add_subcommand("check", "Hypothesis checker: conditions (1)-(6), pinching, (H0), (H4)");
  add_map(check);
  int check_r = supported_regularity, check_grid = 512;
  check->add_option("--r", check_r, "Regularity r")->capture_default_str();
  auto* check_grid_opt = check->add_option("--grid", check_grid, "Grid per axis for sup/inf")->capture_default_str();

  // cones
  auto* cones = app.add_subcommand("cones", "Cone apertures, hyperbolicity constants and measured rates");
  add_map(cones);
  int cones_grid = 512, cones_n = 8, cones_samples = 200, cones_m_grid = 4;
  auto* cones_grid_opt = cones->add_option("--grid", cones_grid, "Grid per axis")->capture_default_str();
  cones->add_option("--n", cones_n, "Horizon of the measured rates")->capture_default_str();
  cones->add_option("--samples", cones_samples, "Random points for the measured rates")->capture_default_str();
  cones->add_option("--m-grid", cones_m_grid, "Point grid for the cone entry time")->capture_default_str();

  // pullback
  auto* pull = app.add_subcommand("pullback", "Pull back a central curve along every inverse branch");
  add_map(pull);
  std::string pull_curve = "vertical:0.3";
  int pull_n = 8, pull_j = 3;
  std::size_t pull_samples = 2048;
  double pull_c = 4.0;
  pull->add_option("--curve", pull_curve, "vertical:X or sine:X:A[:K]")->capture_default_str();
  pull->add_option("--n", pull_n, "Depth")->capture_default_str();
  pull->add_option("--samples", pull_samples, "Samples per curve")->capture_default_str();
  pull->add_option("--c", pull_c, "Derivative-bound constant c")->capture_default_str();
  pull->add_option("--j", pull_j, "Highest derivative order checked (1-3)")->capture_default_str();

  // transversality
  auto* trans = app.add_subcommand("transversality", "N, N-tilde, frak-N, n0 and the relation check");
  add_map(trans);
  int trans_n = 6, trans_grid = 16, trans_n0_max = 10;
  std::string trans_eps;
  trans->add_option("--n", trans_n, "Largest depth")->capture_default_str();
  auto* trans_grid_opt = trans->add_option("--grid", trans_grid, "y-grid per axis")->capture_default_str();
  trans->add_option("--n0-max", trans_n0_max, "Largest depth searched for n0")->capture_default_str();
  trans->add_option("--eps-list", trans_eps, "Comma-separated eps values for a sweep table");

  // spectrum
  auto* spec = app.add_subcommand("spectrum", "Top eigenvalues, peripheral group and Cesaro check");
  add_map(spec);
  std::string spec_kind = "ulam";
  std::size_t spec_nx = 64, spec_nt = 64;
  int spec_K = 16, spec_k = 8, spec_cesaro = 200;
  double spec_gap = 0.05;
  std::string spec_triplets;
  spec->add_option("--kind", spec_kind, "ulam or fourier")->check(CLI::IsMember({"ulam", "fourier"}))->capture_default_str();
  auto* spec_nx_opt = spec->add_option("--nx", spec_nx, "Ulam cells in x")->capture_default_str();
  auto* spec_nt_opt = spec->add_option("--nt", spec_nt, "Ulam cells in theta")->capture_default_str();
  spec->add_option("--K", spec_K, "Fourier cutoff")->capture_default_str();
  spec->add_option("--k", spec_k, "Number of eigenpairs")->capture_default_str();
  spec->add_option("--delta-gap", spec_gap, "Peripheral threshold 1 - delta")->capture_default_str();
  spec->add_option("--cesaro-terms", spec_cesaro, "Terms of the Cesaro average")->capture_default_str();
  spec->add_option("--triplets", spec_triplets, "Also write the operator as row,col,value CSV to this file name");

  // srb
  auto* srb = app.add_subcommand("srb", "SRB density by the Ulam fixed point and by orbit histograms");
  add_map(srb);
  std::string srb_method = "both";
  std::size_t srb_nx = 256, srb_nt = 256;
  double srb_steps = 1e8;
  int srb_seeds = 64;
  srb->add_option("--method", srb_method, "ulam, orbit or both")
      ->check(CLI::IsMember({"ulam", "orbit", "both"}))
      ->capture_default_str();
  auto* srb_nx_opt = srb->add_option("--nx", srb_nx, "Cells in x")->capture_default_str();
  auto* srb_nt_opt = srb->add_option("--nt", srb_nt, "Cells in theta")->capture_default_str();
  srb->add_option("--steps", srb_steps, "Total orbit steps")->capture_default_str();
  srb->add_option("--seeds", srb_seeds, "Independent orbits")->capture_default_str();

  // correlations
  auto* corr = app.add_subcommand("correlations", "Decay of correlations by orbit averages, Ulam cross-check");
  add_map(corr);
  std::string corr_phi = "sin(0,1)", corr_psi = "sin(0,1)";
  int corr_n = 30, corr_seeds = 16;
  double corr_steps = 2e7;
  std::size_t corr_grid = 0;
  corr->add_option("--phi", corr_phi, "Observable phi, e.g. \"cos(1,0) + 0.5*sin(0,1)\"")->capture_default_str();
  corr->add_option("--psi", corr_psi, "Observable psi")->capture_default_str();
  corr->add_option("--n-max", corr_n, "Largest lag")->capture_default_str();
  corr->add_option("--steps", corr_steps, "Total orbit steps")->capture_default_str();
  corr->add_option("--seeds", corr_seeds, "Independent orbits")->capture_default_str();
  auto* corr_grid_opt = corr->add_option("--ulam-grid", corr_grid, "Ulam grid for the cross-check (0: skip)")->capture_default_str();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Factorization, projection, H1 and correlation rate along eps");
  add_map(sweep);
  std::string sweep_eps = "0.1,0.05,0.025";
  std::size_t sweep_grid = 256;
  double sweep_steps = 2e6;
  int sweep_n = 30;
  std::string sweep_phi = "sin(0,1)";
  sweep->add_option("--eps-list", sweep_eps, "Comma-separated eps values")->capture_default_str();
  auto* sweep_grid_opt = sweep->add_option("--grid", sweep_grid, "Ulam cells per axis")->capture_default_str();
  sweep->add_option("--steps", sweep_steps, "Orbit steps for the correlation rate")->capture_default_str();
  sweep->add_option("--n-max", sweep_n, "Largest correlation lag")->capture_default_str();
  sweep->add_option("--phi", sweep_phi, "Observable for the correlation rate (phi = psi)")->capture_default_str();

  // xconst
  auto* xc = app.add_subcommand("xconst", "Periodic-orbit test for x-constancy of omega");
  add_map(xc);
  int xc_period = 6;
  double xc_theta = 0.0, xc_tol = 1e-8;
  xc->add_option("--period", xc_period, "Largest period")->capture_default_str();
  xc->add_option("--theta", xc_theta, "Fiber")->capture_default_str();
  xc->add_option("--tol", xc_tol, "Agreement tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (ctx.threads > 0) set_max_threads(ctx.threads);
    fs::create_directories(ctx.out_dir);
    auto& P = ctx.manifest.parameters;

    if (*check) {
      env_grid(check_grid_opt, check_grid);
      ctx.manifest.command = "check";
      P = {{"r", check_r}, {"grid", check_grid}};
      const MapSpec map = ctx.load();
      const HypothesisReport rep = check_hypotheses(map, check_r, check_grid);
      json conds = json::array();
      for (const auto& c : rep.conditions) conds.push_back(condition_json(c));
      json out{{"map", map.name}, {"r", rep.r}, {"zeta_r", rep.zeta_r}, {"all_pass", rep.all_pass()}, {"conditions", conds}};
      if (rep.setup) out["constants"] = constants_json(rep.setup->constants);
      ctx.finish(out);
    } else if (*cones) {
      env_grid(cones_grid_opt, cones_grid);
      ctx.manifest.command = "cones";
      ctx.seed = seed_or(7);
      P = {{"grid", cones_grid}, {"n", cones_n}, {"samples", cones_samples}, {"m_grid", cones_m_grid}};
      const MapSpec map = ctx.load();
      const ConeSetup s = require_cones(map, supported_regularity, cones_grid);
      const EmpiricalConstants e = empirical_constants(map, s.cones.chi_c, cones_n, cones_samples, ctx.seed);
      int m_worst = 0;
      for (const auto& p : detail::uniform_grid(cones_m_grid)) m_worst = std::max(m_worst, m_chi_u(map, s.cones, p).m);
      json out{{"map", map.name},
               {"chi_u", s.cones.chi_u},
               {"chi_c", s.cones.chi_c},
               {"u_star", s.cones.u_star},
               {"iota_star", s.cones.iota_star},
               {"constants", constants_json(s.constants)},
               {"empirical",
                {{"n", e.n},
                 {"lambda_minus", e.lambda_minus},
                 {"lambda_plus", e.lambda_plus},
                 {"mu_minus", e.mu_minus},
                 {"mu_plus", e.mu_plus},
                 {"mu", e.mu},
                 {"alpha", e.alpha}}},
               {"alpha_effective", effective_alpha(s.constants, e)},
               {"m_chi_u", m_worst}};
      ctx.finish(out);
    } else if (*pull) {
      ctx.manifest.command = "pullback";
      P = {{"curve", pull_curve}, {"n", pull_n}, {"samples", pull_samples}, {"c", pull_c}, {"j", pull_j}};
      const MapSpec map = ctx.load();
      const ConeSetup s = require_cones(map, supported_regularity, 256);
      const CentralCurve gamma = parse_curve(pull_curve, pull_samples);
      const auto curves = pull_back_curve(map, gamma, pull_n);
      CsvWriter csv(ctx.path("pullback.csv"), {"branch", "t", "x", "dx", "ddx"});
      json per = json::array();
      int admissible = 0;
      double worst_residual = 0.0;
      for (const auto& c : curves) {
        const CurveClassReport cr = curve_class_check(c.curve, pull_c, pull_j, s.cones.chi_c, c.closure_defect);
        const double res = pullback_residual(map, gamma, c, pull_n);
        worst_residual = std::max(worst_residual, res);
        admissible += cr.pass;
        per.push_back({{"branch", c.id.str()}, {"admissible", cr.pass}, {"tangent_margin", cr.tangent_margin},
                       {"derivative_norms", cr.derivative_norms}, {"closure_defect", c.closure_defect},
                       {"residual", res}});
        for (std::size_t i = 0; i < c.curve.size(); ++i)
          csv.values(c.id.str(), static_cast<double>(i) * c.curve.step(), c.curve.x[i], c.curve.dx[i], c.curve.ddx[i]);
      }
      ctx.finish({{"map", map.name},
                  {"curves", curves.size()},
                  {"admissible", admissible},
                  {"min_gap", pullback_min_gap(curves)},
                  {"max_residual", worst_residual},
                  {"per_curve", per}});
    } else if (*trans) {
      env_grid(trans_grid_opt, trans_grid);
      ctx.manifest.command = "transversality";
      P = {{"n", trans_n}, {"grid", trans_grid}, {"n0_max", trans_n0_max}, {"eps_list", trans_eps}};
      const MapSpec base = ctx.load();
      auto table_for = [&](const MapSpec& map, CsvWriter& csv, json* detail) {
        const ConeSetup s = require_cones(map, supported_regularity, 256);
        const FiberField h(map);
        const auto L = sup_L_n_1_profile(map, trans_n, trans_grid);
        json rows = json::array();
        for (int n = 1; n <= trans_n; ++n) {
          const auto N = grid_sup_transversality(map, s.cones, n, trans_grid, true);
          const auto Nt = grid_sup_transversality(map, s.cones, n, trans_grid, false);
          const auto fN = frak_n_sup(map, s.cones, h, n, trans_grid);
          csv.values(map.epsilon, n, N.value, Nt.value, fN.value, L[n - 1].value);
          json w = json::array();
          for (const auto& b : N.witness) w.push_back(b.str());
          rows.push_back({{"n", n}, {"N", N.value}, {"Ntilde", Nt.value}, {"frakN", fN.value},
                          {"L_n_1_sup", L[n - 1].value}, {"point", point_json(N.point)}, {"witnesses", w}});
        }
        if (detail) {
          const N0Report r0 = n0_estimate(map, s.cones, trans_n0_max, trans_grid);
          (*detail)["n0"] = r0.found ? json(r0.n0) : json(nullptr);
          json wit = json::array();
          for (const auto& p : r0.points)
            if (p.n == r0.n0 && wit.size() < 8)
              wit.push_back({{"point", point_json(p.point)},
                             {"pair", {p.witness.first.str(), p.witness.second.str()}},
                             {"gap", p.gap}});
          (*detail)["n0_witnesses"] = wit;
          if (r0.found) (*detail)["frakN_n0"] = frak_n_sup(map, s.cones, h, r0.n0, trans_grid).value;
          (*detail)["table"] = rows;
          (*detail)["chi_u"] = s.cones.chi_u;
          const EmpiricalConstants e = empirical_constants(map, s.cones.chi_c, 8, 200);
          const double alpha = effective_alpha(s.constants, e);
          json rel = json::array();
          for (int n = 1; n <= trans_n; ++n) {
            const RelationReport r = relation_check(map, s.cones, n, alpha, trans_grid);
            rel.push_back({{"n", n}, {"m0", r.m0}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"slack", r.slack},
                           {"product_slack", r.product_slack}});
          }
          (*detail)["alpha"] = alpha;
          (*detail)["relation"] = rel;
        }
      };
      CsvWriter csv(ctx.path("transversality.csv"), {"epsilon", "n", "N", "Ntilde", "frakN", "L_n_1_sup"});
      json out{{"map", base.name}};
      table_for(base, csv, &out);
      if (!trans_eps.empty())
        for (double e : parse_list(trans_eps)) table_for(base.with_epsilon(e), csv, nullptr);
      ctx.finish(out);
    } else if (*spec) {
      env_grid(spec_nx_opt, spec_nx);
      env_grid(spec_nt_opt, spec_nt);
      ctx.manifest.command = "spectrum";
      ctx.seed = seed_or(11);
      P = {{"kind", spec_kind}, {"nx", spec_nx}, {"nt", spec_nt}, {"K", spec_K}, {"k", spec_k},
           {"delta_gap", spec_gap}, {"cesaro_terms", spec_cesaro}};
      const MapSpec map = ctx.load();
      const DiscreteOperator op = spec_kind == "ulam" ? ulam_matrix(map, spec_nx, spec_nt) : fourier_matrix(map, spec_K);
      EigenOptions eo;
      eo.seed = ctx.seed;
      const SpectralReport rep = peripheral_spectrum(op, spec_k, eo, spec_gap, spec_cesaro);
      json vals = json::array();
      for (std::size_t i = 0; i < rep.pairs.values.size(); ++i) vals.push_back(cplx_json(rep.pairs.values[i], rep.pairs.residuals[i]));
      json out{{"map", map.name},
               {"kind", spec_kind},
               {"dimension", op.dimension()},
               {"eigenvalues", vals},
               {"peripheral", rep.peripheral},
               {"peripheral_count", rep.peripheral.size()},
               {"cesaro_discrepancy", rep.cesaro_discrepancy},
               {"roots_of_unity", rep.roots_of_unity},
               {"root_orders", rep.root_orders},
               {"degenerate_fibers", map.fibers_invariant()}};
      if (op.kind == OperatorKind::ulam) out["raw_column_defect"] = op.raw_defect;
      write_json(ctx.path("spectrum_values.json"), vals);
      if (!spec_triplets.empty()) op.write_triplets(ctx.path(spec_triplets).string());
      ctx.finish(out);
    } else if (*srb) {
      env_grid(srb_nx_opt, srb_nx);
      env_grid(srb_nt_opt, srb_nt);
      ctx.manifest.command = "srb";
      ctx.seed = seed_or(2024);
      P = {{"method", srb_method}, {"nx", srb_nx}, {"nt", srb_nt}, {"steps", srb_steps}, {"seeds", srb_seeds}};
      const MapSpec map = ctx.load();
      SrbOptions o;
      o.nx = srb_nx;
      o.nt = srb_nt;
      o.method = srb_method == "ulam" ? SrbMethod::ulam : srb_method == "orbit" ? SrbMethod::orbit : SrbMethod::both;
      o.orbit.steps = static_cast<std::uint64_t>(srb_steps);
      o.orbit.seeds = srb_seeds;
      o.orbit.seed = ctx.seed;
      const SrbResult r = srb_density(map, o);
      std::vector<std::string> header{"x", "theta"};
      if (r.ulam) header.push_back("h_ulam");
      if (r.orbit) header.push_back("h_orbit");
      CsvWriter csv(ctx.path("srb.csv"), header);
      const GridFunction& g = r.ulam ? *r.ulam : *r.orbit;
      for (std::size_t j = 0; j < g.nt; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) {
          std::vector<std::string> row{fmt(g.x(i)), fmt(g.theta(j))};
          if (r.ulam) row.push_back(fmt(r.ulam->at(i, j)));
          if (r.orbit) row.push_back(fmt(r.orbit->at(i, j)));
          csv.row(row);
        }
      json out{{"map", map.name}, {"warnings", r.warnings}, {"non_unique", r.non_unique},
               {"degenerate_fibers", r.degenerate_fibers}};
      if (r.ulam) {
        out["ulam_residual"] = r.ulam_residual;
        out["ulam_mass"] = r.ulam->integral();
        out["ulam_min"] = r.ulam->min();
        out["second_modulus"] = r.second_modulus;
      }
      if (r.orbit) out["orbit_mass"] = r.orbit->integral();
      if (r.l1_between >= 0.0) out["l1_between"] = r.l1_between;
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      ctx.finish(out);
    } else if (*corr) {
      env_grid(corr_grid_opt, corr_grid);
      ctx.manifest.command = "correlations";
      ctx.seed = seed_or(99);
      P = {{"phi", corr_phi}, {"psi", corr_psi}, {"n_max", corr_n}, {"steps", corr_steps}, {"seeds", corr_seeds},
           {"ulam_grid", corr_grid}};
      const MapSpec map = ctx.load();
      const TrigPoly2 phi = parse_trig(corr_phi), psi = parse_trig(corr_psi);
      CorrelationOptions o;
      o.steps = static_cast<std::uint64_t>(corr_steps);
      o.seeds = corr_seeds;
      o.seed = ctx.seed;
      const CorrelationTable t = correlation_decay(map, phi, psi, corr_n, o);
      std::vector<double> cu;
      if (corr_grid > 0) {
        const DiscreteOperator op = ulam_matrix(map, corr_grid, corr_grid);
        cu = correlation_ulam(op, ulam_fixed_density(op).density, phi, psi, corr_n);
      }
      CsvWriter csv(ctx.path("correlations.csv"), {"n", "C", "stderr", "C_ulam"});
      for (int n = 0; n <= corr_n; ++n) csv.values(n, t.C[n], t.stderr_[n], cu.empty() ? std::string("") : fmt(cu[n]));
      ctx.finish({{"map", map.name},
                  {"rate", t.rate},
                  {"r_squared", t.r_squared},
                  {"resolvable", t.resolvable},
                  {"noise_floor", t.noise_floor}});
    } else if (*sweep) {
      env_grid(sweep_grid_opt, sweep_grid);
      ctx.manifest.command = "sweep";
      ctx.seed = seed_or(99);
      P = {{"eps_list", sweep_eps}, {"grid", sweep_grid}, {"steps", sweep_steps}, {"n_max", sweep_n}, {"phi", sweep_phi}};
      const MapSpec base = ctx.load();
      const TrigPoly2 phi = parse_trig(sweep_phi);
      CsvWriter csv(ctx.path("sweep.csv"),
                    {"epsilon", "factorization_error", "hatP_error", "h1_norm", "fitted_rate", "theta_mass_3sqrt_eps"});
      std::ofstream dat(ctx.path("sweep.dat"));
      dat << "# epsilon factorization_error hatP_error h1_norm fitted_rate\n";
      json rows = json::array();
      for (double e : parse_list(sweep_eps)) {
        const MapSpec map = base.with_epsilon(e);
        const DiscreteOperator op = ulam_matrix(map, sweep_grid, sweep_grid);
        const GridFunction h = ulam_fixed_density(op).density;
        const GridFunction hs = fiber_h_star_grid(map, sweep_grid, sweep_grid);
        const FiberField hf(map);
        const double fact = factorization_error(h, hs).error;
        double hat = std::numeric_limits<double>::quiet_NaN(), mass = hat;
        try {
          const AveragedField avg = averaged_field(map, hf);
          hat = hat_p_projection(h, avg, hs).error;
          for (const auto& z : avg.zeros)
            if (z.stable) mass = theta_window_mass(h, z.theta, 3.0 * std::sqrt(e));
        } catch (const DegenerateZero&) {
        }
        const double h1 = eigenfunction_h1(h);
        CorrelationOptions o;
        o.steps = static_cast<std::uint64_t>(sweep_steps);
        o.seed = ctx.seed;
        const CorrelationTable t = correlation_decay(map, phi, phi, sweep_n, o);
        csv.values(e, fact, hat, h1, t.rate, mass);
        dat << fmt(e) << ' ' << fmt(fact) << ' ' << fmt(hat) << ' ' << fmt(h1) << ' ' << fmt(t.rate) << '\n';
        rows.push_back({{"epsilon", e}, {"factorization_error", fact}, {"hatP_error", hat}, {"h1_norm", h1},
                        {"fitted_rate", t.rate}, {"theta_mass_3sqrt_eps", mass}});
      }
      ctx.finish({{"map", base.name}, {"rows", rows}});
    } else if (*xc) {
      ctx.manifest.command = "xconst";
      P = {{"period", xc_period}, {"theta", xc_theta}, {"tol", xc_tol}};
      const MapSpec map = ctx.load();
      const XConstantReport r = x_constant_test(map, xc_theta, xc_period, xc_tol);
      CsvWriter csv(ctx.path("xconst.csv"), {"word", "period", "average"});
      for (const auto& o : r.orbits) {
        std::string w;
        for (int c : o.word) w += std::to_string(c);
        csv.values(w, o.points.size(), o.average);
      }
      json out{{"map", map.name},
               {"verdict", r.consistent ? "consistent" : "not x-constant"},
               {"consistent", r.consistent},
               {"spread", r.spread},
               {"orbits", r.orbits.size()}};
      if (r.witness) {
        auto orbit = [](const PeriodicOrbit& o) { return json{{"points", o.points}, {"average", o.average}}; };
        out["witness"] = {orbit(r.witness->first), orbit(r.witness->second)};
      }
      ctx.finish(out);
    }
  } catch (const HypothesisFailure& e) {
    std::cerr << "hypothesis failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
