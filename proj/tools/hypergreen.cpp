// hypergreen: learn hyperbolic Green's functions from solver queries.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hypergreen/io.hpp"
#include "hypergreen/pipeline.hpp"
#include "hypergreen/rank_detect.hpp"

namespace fs = std::filesystem;
using namespace hypergreen;

namespace {

struct Options {
  std::string oracle = "exact";
  double c = 2.0;
  double eps = 0.1;
  double ell = 0.1;
  double variance = 1.0;
  int panels = 8;
  int nodes = 8;
  double kc = 1.0;
  std::string q_mode = "auto";
  std::uint64_t seed = 7;
  std::uint64_t budget = 2'000'000;
  int workers = 0;
  int max_level = -1;
  int fd_nx = 512;
  int fd_nt = 512;
  double cfl = 0.9;
  int probes = 4;
  std::string out = "out";
};

void add_common(CLI::App* app, Options& o) {
  app->add_option("--oracle", o.oracle, "exact | upwind1 | ctcs2 | zero")->capture_default_str();
  app->add_option("--c", o.c, "wave speed (operator u_tt - c^2 u_xx)")->capture_default_str();
  app->add_option("--eps", o.eps, "tolerance in (0, 1/2)")->capture_default_str();
  app->add_option("--ell", o.ell, "covariance length scale")->capture_default_str();
  app->add_option("--sigma2", o.variance, "covariance variance")->capture_default_str();
  app->add_option("--panels", o.panels, "panels per dimension (power of two)")->capture_default_str();
  app->add_option("--nodes", o.nodes, "Gauss-Legendre nodes per panel")->capture_default_str();
  app->add_option("--kc", o.kc, "constant C in k_eps = max(4, ceil(C/eps))")->capture_default_str();
  app->add_option("--q-mode", o.q_mode, "power exponent: auto or an integer")->capture_default_str();
  app->add_option("--seed", o.seed, "master seed")->capture_default_str();
  app->add_option("--budget", o.budget, "maximum number of input-output pairs")->capture_default_str();
  app->add_option("--workers", o.workers, "worker threads (default: HYPERGREEN_WORKERS or all cores)");
  app->add_option("--max-level", o.max_level, "partition depth cap (default: grid alignment bound)");
  app->add_option("--fd-nx", o.fd_nx, "finite-difference spatial intervals")->capture_default_str();
  app->add_option("--fd-nt", o.fd_nt, "finite-difference minimum time steps")->capture_default_str();
  app->add_option("--cfl", o.cfl, "finite-difference Courant number")->capture_default_str();
  app->add_option("--probes", o.probes, "probe count for the operator error estimate")->capture_default_str();
  app->add_option("--out", o.out, "output directory")->capture_default_str();
}

RunConfig to_config(const Options& o) {
  RunConfig c;
  c.oracle = parse_oracle_kind(o.oracle);
  c.c = o.c;
  c.eps = o.eps;
  c.ell = o.ell;
  c.variance = o.variance;
  c.panels = o.panels;
  c.nodes = o.nodes;
  c.kc = o.kc;
  if (o.q_mode != "auto") {
    try {
      std::size_t used = 0;
      c.q = std::stoi(o.q_mode, &used);
      require(used == o.q_mode.size(), ErrorKind::Config, "");
    } catch (...) {
      fail(ErrorKind::Config, "--q-mode must be 'auto' or a nonnegative integer, got '" + o.q_mode + "'");
    }
  }
  c.seed = o.seed;
  c.budget = o.budget;
  c.workers = o.workers > 0 ? o.workers : default_workers();
  if (o.max_level >= 0) c.max_level = o.max_level;
  c.fd = FdOptions{o.fd_nx, o.fd_nt, o.cfl};
  c.probes = o.probes;
  c.validate();
  return c;
}

json config_json(const RunConfig& c) {
  json j = {{"oracle", to_string(c.oracle)}, {"c", c.c},       {"eps", c.eps},       {"ell", c.ell},
            {"sigma2", c.variance},          {"panels", c.panels}, {"nodes", c.nodes}, {"kc", c.kc},
            {"seed", c.seed},                {"budget", c.budget}};
  j["q_mode"] = c.q ? json(*c.q) : json("auto");
  if (c.oracle == OracleKind::Upwind1 || c.oracle == OracleKind::Ctcs2)
    j["fd"] = {{"nx", c.fd.nx}, {"nt", c.fd.nt}, {"cfl", c.fd.cfl}};
  return j;
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::Config, "cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

json queries_json(const LearnResult& r, std::uint64_t counter) {
  return {{"schema_version", kSchemaVersion},
          {"detection", r.detection_queries},
          {"detection_formula", r.detection_formula},
          {"approximation", r.approximation_queries},
          {"approximation_formula", r.approximation_formula},
          {"validation", r.validation_queries},
          {"total", r.detection_queries + r.approximation_queries + r.validation_queries},
          {"oracle_counter", counter},
          {"budget_exceeded", r.budget_exceeded}};
}

void write_learn_outputs(const fs::path& out, const RunConfig& cfg, const LearnResult& r, std::uint64_t counter) {
  json model = model_to_json(r.model, &r.tree);
  model["config"] = config_json(cfg);
  write_json(model, (out / "model.json").string());
  write_json(queries_json(r, counter), (out / "queries.json").string());
  json metrics = {{"schema_version", kSchemaVersion},
                  {"relative_operator_error", r.relative_error},
                  {"green_leaves", r.model.blocks().size()},
                  {"red_leaves", r.model.red_leaves().size()},
                  {"final_level", r.tree.final_level},
                  {"red_volume_by_level", r.tree.red_volume_by_level},
                  {"seed", cfg.seed}};
  write_json(metrics, (out / "metrics.json").string());
}

std::function<double(double, double, double, double)> exact_kernel(const RunConfig& cfg) {
  const WaveSpec spec{cfg.c, 0};
  return [spec](double x, double t, double y, double s) { return exact_wave_green_value(spec, x, t, y, s); };
}

int cmd_learn(const Options& o) {
  const RunConfig cfg = to_config(o);
  const fs::path out = prepare_out(o.out);
  auto grid = build_grid(cfg.panels, cfg.nodes);
  auto oracle = make_oracle(cfg, grid);
  const LearnResult r = learn(*oracle, cfg);
  write_learn_outputs(out, cfg, r, oracle->queries());
  std::cout << "learned " << r.model.blocks().size() << " green / " << r.model.red_leaves().size()
            << " red leaves, " << oracle->queries() << " queries, relative error " << r.relative_error << "\n";
  if (r.budget_exceeded) fail(ErrorKind::Budget, "query budget exhausted; partial model written");
  return 0;
}

int cmd_slice(const Options& o, double y, double s, int res, const std::string& model_path) {
  const RunConfig cfg = to_config(o);
  const fs::path out = prepare_out(o.out);
  GreenModel model;
  if (!model_path.empty()) {
    model = model_from_json(read_json(model_path));
  } else {
    auto grid = build_grid(cfg.panels, cfg.nodes);
    auto oracle = make_oracle(cfg, grid);
    LearnResult r = learn(*oracle, cfg, false);
    model = std::move(r.model);
  }
  auto exact = exact_kernel(cfg);
  const Slice sl = export_slice(model, y, s, res, &exact);
  write_slice_csv(sl, (out / "slice.csv").string());
  write_json(slice_blocks_to_json(sl), (out / "blocks.json").string());
  std::cout << "slice (" << y << ", " << s << ") written, max |error| " << (sl.approx - *sl.exact).cwiseAbs().maxCoeff()
            << "\n";
  return 0;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      fail(ErrorKind::Config, "cannot parse '" + item + "' as a number");
    }
  }
  require(!out.empty(), ErrorKind::Config, "empty list");
  return out;
}

int cmd_converge(const Options& o, const std::string& eps_list) {
  RunConfig cfg = to_config(o);
  const fs::path out = prepare_out(o.out);
  auto grid = build_grid(cfg.panels, cfg.nodes);
  auto oracle = make_oracle(cfg, grid);
  std::vector<double> n, e;
  CsvWriter w((out / "converge.csv").string());
  w.header({"eps", "N_queries", "relative_error"});
  for (double eps : parse_list(eps_list)) {
    cfg.eps = eps;
    oracle->reset_queries();
    const LearnResult r = learn(*oracle, cfg);
    const double nq = static_cast<double>(r.detection_queries + r.approximation_queries);
    n.push_back(nq);
    e.push_back(r.relative_error);
    w.row({eps, nq, r.relative_error});
    std::cout << "eps " << eps << ": N = " << nq << ", relative error " << r.relative_error << "\n";
  }
  const double slope = loglog_slope(n, e);
  write_json({{"schema_version", kSchemaVersion}, {"slope", slope}, {"seed", cfg.seed}},
             (out / "converge.json").string());
  std::cout << "fitted log-log slope " << slope << "\n";
  return 0;
}

std::function<double(double)> parse_psi(const std::string& spec, double& a, double& b) {
  // box:a,b is the indicator of [a, b].
  require(spec.rfind("box:", 0) == 0, ErrorKind::Config, "psi must look like box:a,b");
  const auto v = parse_list(spec.substr(4));
  require(v.size() == 2 && v[0] < v[1], ErrorKind::Config, "psi box needs a < b");
  a = v[0];
  b = v[1];
  const double lo = a, hi = b;
  return [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; };
}

int cmd_ivp(const Options& o, const std::string& psi_spec, double delta) {
  const RunConfig cfg = to_config(o);
  const fs::path out = prepare_out(o.out);
  double a = 0, b = 0;
  const auto psi = parse_psi(psi_spec, a, b);
  auto grid = build_grid(cfg.panels, cfg.nodes);
  auto oracle = make_oracle(cfg, grid);
  const LearnResult r = learn(*oracle, cfg, false);
  const std::optional<double> d = delta > 0 ? std::optional<double>(delta) : std::nullopt;
  bool smeared = false;
  const DiscreteFunction u = duhamel_solve(r.model, psi, d, &smeared);
  const DiscreteFunction ud = duhamel_solve(*oracle, psi, d);
  CsvWriter w((out / "ivp.csv").string());
  w.header({"x", "t", "approx", "direct", "exact"});
  const double reflect = std::min(a, 1.0 - b) / cfg.c;
  for (Index l = 0; l < u.patch.size(); ++l) {
    const double x = u.patch.x(l), t = u.patch.t(l);
    std::vector<std::string> row{format_number(x), format_number(t), format_number(u.values(l)),
                                 format_number(ud.values(l))};
    row.push_back(cfg.oracle == OracleKind::Exact && t < reflect ? format_number(dalembert_box(cfg.c, a, b, x, t))
                                                                 : "");
    w.row_strings(row);
  }
  if (smeared) std::cerr << "warning: pulse width exceeds one time panel; the impulse is smeared\n";
  std::cout << "ivp written (" << u.patch.size() << " nodes)\n";
  return 0;
}

int cmd_compare(const Options& o, double y, double s, int res) {
  const fs::path out = prepare_out(o.out);
  json summary = {{"schema_version", kSchemaVersion}, {"seed", o.seed}, {"runs", json::array()}};
  const WaveSpec spec{o.c, 0};
  for (const std::string kind : {"exact", "upwind1", "ctcs2"}) {
    Options oo = o;
    oo.oracle = kind;
    const RunConfig cfg = to_config(oo);
    auto grid = build_grid(cfg.panels, cfg.nodes);
    auto oracle = make_oracle(cfg, grid);
    const LearnResult r = learn(*oracle, cfg);
    const fs::path sub = prepare_out((out / kind).string());
    write_learn_outputs(sub, cfg, r, oracle->queries());
    auto exact = exact_kernel(cfg);
    const Slice sl = export_slice(r.model, y, s, res, &exact);
    write_slice_csv(sl, (sub / "slice.csv").string());
    write_json(slice_blocks_to_json(sl), (sub / "blocks.json").string());
    int inside = 0;
    for (const auto& b : r.model.red_leaves()) inside += in_cone_interior(spec, b) ? 1 : 0;
    summary["runs"].push_back({{"oracle", kind},
                               {"red_leaves", r.model.red_leaves().size()},
                               {"red_leaves_in_cone_interior", inside},
                               {"red_volume_by_level", r.tree.red_volume_by_level},
                               {"relative_operator_error", r.relative_error},
                               {"queries", oracle->queries()}});
    std::cout << kind << ": " << r.model.red_leaves().size() << " red leaves\n";
  }
  write_json(summary, (out / "compare.json").string());
  return 0;
}

int cmd_rank_test(const Options& o, const std::vector<std::int64_t>& box_spec) {
  const RunConfig cfg = to_config(o);
  const fs::path out = prepare_out(o.out);
  require(box_spec.size() == 5, ErrorKind::Config, "--box needs level,i,j,k,l");
  SubdomainBox box{static_cast<int>(box_spec[0]), {box_spec[1], box_spec[2], box_spec[3], box_spec[4]}};
  for (auto i : box.index)
    require(i >= 0 && i < (std::int64_t{1} << box.level), ErrorKind::Domain, "box index outside the level");
  auto grid = build_grid(cfg.panels, cfg.nodes);
  auto oracle = make_oracle(cfg, grid);
  const DetectOptions d{cfg.eps, cfg.kc, cfg.q, box_seed(cfg.seed, box)};
  const RankDecision rd =
      detect_rank(*oracle, box, CovarianceKernel::squared_exponential(cfg.ell, cfg.variance), d);
  json j = box_to_json(box);
  j["schema_version"] = kSchemaVersion;
  j["verdict"] = to_string(rd.verdict);
  j["k"] = rd.k;
  j["q"] = rd.q;
  j["sigma"] = vector_to_json(rd.sigma);
  j["queries"] = rd.queries;
  j["zero_block"] = rd.zero_block;
  j["rank_deficient"] = rd.rank_deficient;
  j["seed"] = cfg.seed;
  write_json(j, (out / "rank.json").string());
  std::cout << to_string(rd.verdict) << " (sigma_k / sigma_1 = "
            << (rd.sigma.size() && rd.sigma(0) > 0 ? rd.sigma(rd.sigma.size() - 1) / rd.sigma(0) : 0.0) << ")\n";
  return 0;
}

int report(ErrorKind kind, const std::string& what) {
  json err = {{"error", {{"kind", to_string(kind)}, {"message", what}, {"exit_code", exit_code(kind)}}}};
  std::cerr << err.dump() << "\n";
  return exit_code(kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn Green's functions of hyperbolic PDEs from input-output pairs"};
  app.require_subcommand(1);
  Options o;

  auto* learn_cmd = app.add_subcommand("learn", "partition, assemble and write model.json / queries.json / metrics.json");
  add_common(learn_cmd, o);

  double y = 0.8, s = 0.1;
  int res = 128;
  std::string model_path;
  auto* slice_cmd = app.add_subcommand("slice", "write slice.csv and blocks.json at a fixed (y, s)");
  add_common(slice_cmd, o);
  slice_cmd->add_option("--y", y)->capture_default_str();
  slice_cmd->add_option("--s", s)->capture_default_str();
  slice_cmd->add_option("--res", res)->capture_default_str();
  slice_cmd->add_option("--model", model_path, "reuse a model.json instead of learning");

  std::string eps_list = "0.4,0.3,0.2,0.15,0.1";
  auto* conv_cmd = app.add_subcommand("converge", "sweep eps and fit the error-vs-queries slope");
  add_common(conv_cmd, o);
  conv_cmd->add_option("--eps-list", eps_list)->capture_default_str();

  std::string psi = "box:0.2,0.3";
  double delta = 0.0;
  auto* ivp_cmd = app.add_subcommand("ivp", "solve u_t(x,0) = psi via Duhamel's principle");
  add_common(ivp_cmd, o);
  ivp_cmd->add_option("--psi", psi, "initial velocity, box:a,b")->capture_default_str();
  ivp_cmd->add_option("--delta", delta, "pulse width (default: one time panel)");

  auto* cmp_cmd = app.add_subcommand("compare-solvers", "learn from exact, upwind1 and ctcs2 data");
  add_common(cmp_cmd, o);
  cmp_cmd->add_option("--y", y)->capture_default_str();
  cmp_cmd->add_option("--s", s)->capture_default_str();
  cmp_cmd->add_option("--res", res)->capture_default_str();

  std::vector<std::int64_t> box_spec{0, 0, 0, 0, 0};
  auto* rank_cmd = app.add_subcommand("rank-test", "run the rank test on one box");
  add_common(rank_cmd, o);
  rank_cmd->add_option("--box", box_spec, "level,i,j,k,l")->delimiter(',')->expected(5);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report(ErrorKind::Config, e.what());
  }

  try {
    if (*learn_cmd) return cmd_learn(o);
    if (*slice_cmd) return cmd_slice(o, y, s, res, model_path);
    if (*conv_cmd) return cmd_converge(o, eps_list);
    if (*ivp_cmd) return cmd_ivp(o, psi, delta);
    if (*cmp_cmd) return cmd_compare(o, y, s, res);
    if (*rank_cmd) return cmd_rank_test(o, box_spec);
  } catch (const Error& e) {
    return report(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report(ErrorKind::Numerical, e.what());
  }
  return 0;
}
