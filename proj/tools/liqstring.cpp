// liqstring command-line driver.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <liqstring/analytic_mpr.hpp>
#include <liqstring/arbitrage.hpp>
#include <liqstring/calibration.hpp>
#include <liqstring/demand_surface.hpp>
#include <liqstring/errors.hpp>
#include <liqstring/mpr.hpp>
#include <liqstring/order_book.hpp>
#include <liqstring/params_io.hpp>
#include <liqstring/pricing.hpp>
#include <liqstring/rng.hpp>
#include <liqstring/simulator.hpp>

namespace fs = std::filesystem;
using namespace liqstring;

namespace {

enum exit_code { ok = 0, usage = 2, data = 3, numerical = 4 };

struct report_lines {
  std::vector<std::pair<std::string, std::string>> kv;
  void add(const std::string& k, const std::string& v) { kv.emplace_back(k, v); }
  void add(const std::string& k, double v) { kv.emplace_back(k, fmt_double(v)); }
  void add(const std::string& k, std::uint64_t v) { kv.emplace_back(k, std::to_string(v)); }
  void add(const std::string& k, int v) { kv.emplace_back(k, std::to_string(v)); }
};

struct common_opts {
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
};

fs::path out_path(const common_opts& c, const std::string& name) {
  fs::path p(name);
  if (p.is_absolute()) return p;
  return fs::path(c.out_dir) / p;
}

std::vector<double> parse_strikes(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(parse_double_or_throw(trim(tok), "strike range"));
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
      throw config_error("strike range must be lo:hi:step with step > 0 and hi >= lo");
    const long count = std::lround(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long i = 0; i <= count; ++i) out.push_back(parts[0] + i * parts[2]);
  } else {
    for (auto f : split_csv(spec))
      if (!f.empty()) out.push_back(parse_double_or_throw(f, "strike"));
  }
  if (out.empty()) throw config_error("no strikes given");
  return out;
}

// ---- stage options ----

struct synth_opts {
  std::string out = "events.csv";
  generator_config gen;
};

struct ingest_opts {
  std::string events;
  std::string out = "surface.csv";
  double p_lo = 344.24, p_hi = 350.96;
  int cells = 100;
  int steps = 78;
  std::int64_t step_ms = 300000;
  std::int64_t t0_ms = 0;
  double horizon = 1.0;
  bool lenient = false;
};

struct calibrate_opts {
  std::string surface;
  std::string out = "params.txt";
  calibration_config cal;
};

struct simulate_opts {
  std::string params;
  std::string out = "paths.csv";
  std::string report = "run_report.txt";
  int paths = 1000;
  std::string meas = "risk_neutral";
  int dump_surfaces = 0;
  bool no_positions = false;
};

struct price_opts {
  std::string paths = "paths.csv";
  std::string out = "smile.csv";
  std::string strikes = "340:355:1";
  std::string kind = "call";
  double rate = 0.002537;
  double days = 30.0;
  double spot = 0.0;  // 0: pi(t_0) of the first path
  bool discount = false;
  std::string market_vols;
};

struct demo_opts {
  int paths = 1000;
  int steps = 250;
  double horizon = 1.0;
  std::string report = "arbitrage_report.txt";
  std::string minima = "arbitrage_minima.csv";
};

void add_generator_flags(CLI::App* c, generator_config& g) {
  c->add_option("--p-lo", g.p_lo, "lowest window price")->capture_default_str();
  c->add_option("--p-hi", g.p_hi, "highest window price")->capture_default_str();
  c->add_option("--cells", g.n_cells, "price cells")->capture_default_str();
  c->add_option("--mid0", g.mid0, "opening reference mid")->capture_default_str();
  c->add_option("--hump", g.hump, "intraday hump of the mid, dollars")->capture_default_str();
  c->add_option("--mid-vol", g.mid_vol, "random-walk scale of the mid, dollars per session")->capture_default_str();
  c->add_option("--initial-orders", g.initial_orders, "orders resting at the open")->capture_default_str();
  c->add_option("--arrival-rate", g.arrival_rate, "adds per second")->capture_default_str();
  c->add_option("--lifetime", g.mean_lifetime_s, "mean order lifetime, seconds")->capture_default_str();
  c->add_option("--modify-prob", g.modify_prob, "share of orders modified once")->capture_default_str();
  c->add_option("--marketable-prob", g.marketable_prob, "share of marketable arrivals")->capture_default_str();
  c->add_option("--session-ms", g.session, "session length, ms")->capture_default_str();
}

void add_ingest_flags(CLI::App* c, ingest_opts& o) {
  c->add_option("--p-lo", o.p_lo, "lowest grid price")->capture_default_str();
  c->add_option("--p-hi", o.p_hi, "highest grid price S")->capture_default_str();
  c->add_option("--cells", o.cells, "price cells")->capture_default_str();
  c->add_option("--steps", o.steps, "snapshot steps")->capture_default_str();
  c->add_option("--step-ms", o.step_ms, "snapshot spacing, ms")->capture_default_str();
  c->add_option("--t0-ms", o.t0_ms, "first snapshot, ms")->capture_default_str();
  c->add_option("--horizon", o.horizon, "model time of the last snapshot")->capture_default_str();
  c->add_flag("--lenient", o.lenient, "skip malformed event rows instead of failing");
}

void add_calibrate_flags(CLI::App* c, calibration_config& k) {
  c->add_option("--x-min", k.x_min, "largest short position")->capture_default_str();
  c->add_option("--x-max", k.x_max, "largest long position")->capture_default_str();
  c->add_option("--smooth", k.smooth_cells, "Gaussian smoothing of q in price cells (0 = none)")->capture_default_str();
  c->add_option("--gamma", k.gamma, "share of bound headroom used by the F ranges")->capture_default_str();
  c->add_option("--d0-min-share", k.d0_min_share, "delta_0min as a share of its range")->capture_default_str();
  c->add_option("--ridge", k.ridge_rel, "ridge relative to the covariance trace")->capture_default_str();
  c->add_flag("--q0-projection", k.q0_tail_projection, "load Q(p_0) on the tail bands");
}

void add_simulate_flags(CLI::App* c, simulate_opts& o) {
  c->add_option("--paths", o.paths, "number of paths")->capture_default_str();
  c->add_option("--measure", o.meas, "physical | risk_neutral")->capture_default_str();
  c->add_option("--dump-surfaces", o.dump_surfaces, "write the surfaces of the first K paths")->capture_default_str();
  c->add_flag("--no-positions", o.no_positions, "do not record P(x_min, .) and P(x_max, .)");
}

void add_price_flags(CLI::App* c, price_opts& o) {
  c->add_option("--strikes", o.strikes, "lo:hi:step or comma list")->capture_default_str();
  c->add_option("--rate", o.rate, "continuously-compounded annual rate")->capture_default_str();
  c->add_option("--days", o.days, "days to expiry")->capture_default_str();
  c->add_option("--spot", o.spot, "pi(t_0); 0 takes it from the paths")->capture_default_str();
  c->add_flag("--discount", o.discount, "discount Monte Carlo payoffs at the rate");
}

// ---- stages ----

std::vector<order_event> load_events(const std::string& path, bool lenient, report_lines& rep) {
  auto in = open_in(path);
  parse_options po;
  po.strict = !lenient;
  auto r = parse_events(in, po);
  rep.add("events_read", static_cast<std::uint64_t>(r.events.size()));
  rep.add("events_malformed", static_cast<std::uint64_t>(r.issues.size()));
  if (!r.issues.empty()) std::cerr << describe(r.issues);
  return std::move(r.events);
}

std::vector<order_event> stage_synth(const common_opts& c, const synth_opts& o, report_lines& rep) {
  const auto ev = synthesize_events(o.gen, stage_seed(c.seed, "synth"));
  auto out = open_out(out_path(c, o.out).string());
  write_events(out, ev);
  rep.add("events_written", static_cast<std::uint64_t>(ev.size()));
  return ev;
}

demand_surface stage_ingest(const common_opts& c, const ingest_opts& o, const std::vector<order_event>& ev,
                            report_lines& rep) {
  const auto px = price_axis::spanning(o.p_lo, o.p_hi, o.cells);
  time_axis tx;
  tx.t0_ms = o.t0_ms;
  tx.step_ms = o.step_ms;
  tx.n_steps = o.steps;
  tx.horizon = o.horizon;
  surface_report sr;
  const auto s = build_surface(ev, px, tx, &sr);
  auto out = open_out(out_path(c, o.out).string());
  write_surface(out, s);
  rep.add("events_used", sr.events_used);
  rep.add("events_outside_time", sr.events_outside_time);
  rep.add("prices_clipped", sr.prices_clipped);
  rep.add("stale_refs", sr.stale_refs);
  rep.add("trades", sr.trades);
  const auto chk = check_surface(s);
  rep.add("surface_monotone", chk.monotone ? "true" : "false");
  rep.add("surface_density_nonnegative", chk.density_nonnegative ? "true" : "false");
  return s;
}

model_params stage_calibrate(const common_opts& c, const calibrate_opts& o, const demand_surface& s, report_lines& rep) {
  calibration_report cr;
  const auto m = calibrate(s, o.cal, &cr);
  save_params(out_path(c, o.out).string(), m);
  rep.add("d0_min", m.d0_min);
  rep.add("d0_max", m.d0_max);
  rep.add("d1_min", m.d1_min);
  rep.add("d1_max", m.d1_max);
  rep.add("largest_drop0", cr.drop0);
  rep.add("largest_drop1", cr.drop1);
  rep.add("inversion_clamps", cr.clamps);
  rep.add("ridge", cr.ridge);
  rep.add("degenerate", cr.degenerate ? "true" : "false");
  rep.add("feasible", feasibility_bounds(m).feasible() ? "true" : "false");
  return m;
}

std::vector<path_result> stage_simulate(const common_opts& c, const simulate_opts& o, const model_params& m,
                                        report_lines& rep) {
  sim_config cfg;
  cfg.n_paths = o.paths;
  cfg.seed = stage_seed(c.seed, "simulate");
  cfg.meas = parse_measure(o.meas);
  cfg.threads = c.threads;
  cfg.record_surfaces = o.dump_surfaces > 0;
  if (!o.no_positions) cfg.positions = {m.x_min, m.x_max};
  auto paths = run(m, cfg);
  const auto rr = summarize(paths, m);
  {
    auto out = open_out(out_path(c, o.out).string());
    write_paths(out, paths);
  }
  {
    auto out = open_out(out_path(c, o.report).string());
    write_run_report(out, rr, cfg);
    if (!cfg.positions.empty()) {
      for (std::size_t k = 0; k < cfg.positions.size(); ++k) {
        double sum = 0.0;
        int cnt = 0;
        for (const auto& p : paths)
          if (!p.failed) {
            sum += p.P[k].back();
            ++cnt;
          }
        out << "mean_P_T_at_x" << k << " = " << fmt_double(cnt ? sum / cnt : 0.0) << "  # x = " << fmt_double(cfg.positions[k])
            << '\n';
      }
    }
  }
  for (int k = 0; k < o.dump_surfaces && k < static_cast<int>(paths.size()); ++k) {
    const auto& p = paths[k];
    if (p.failed) continue;
    const auto s = to_surface(p, m);
    auto out = open_out(out_path(c, "surface_path" + std::to_string(p.path_id) + ".csv").string());
    write_surface(out, s);
  }
  rep.add("paths", rr.paths);
  rep.add("failed_paths", rr.failed);
  rep.add("violations", rr.violations.total());
  rep.add("max_mpr_residual_rel", rr.max_residual);
  return paths;
}

smile stage_smile(const common_opts& c, const price_opts& o, const std::vector<path_row>& rows, report_lines& rep,
                  bool both_kinds) {
  const auto pi_T = terminal_from_rows(rows);
  if (pi_T.size() < 2) throw data_error("need at least 2 complete paths to price");
  double spot = o.spot;
  if (!(spot > 0.0)) {
    if (rows.empty() || rows.front().t_index != 0) throw data_error("paths file does not start at t_index 0; pass --spot");
    spot = rows.front().pi;
  }
  const auto strikes = parse_strikes(o.strikes);
  const double T = o.days / 365.0;
  smile sm = smile_report(pi_T, spot, strikes, o.rate, T, o.discount);
  if (!both_kinds) {
    const option_kind keep = o.kind == "put" ? option_kind::put : option_kind::call;
    if (o.kind != "put" && o.kind != "call") throw config_error("--kind must be call or put");
    std::erase_if(sm.points, [&](const smile_point& p) { return p.kind != keep; });
    std::erase_if(sm.failures, [&](const smile_failure& f) { return f.kind != keep; });
  }
  std::ostringstream note;
  note << "spot " << fmt_double(spot) << ", rate " << fmt_double(o.rate) << ", expiry " << fmt_double(o.days)
       << " days, samples " << pi_T.size() << ", payoffs " << (o.discount ? "discounted" : "undiscounted");
  auto out = open_out(out_path(c, o.out).string());
  write_smile_csv(out, sm, note.str());
  rep.add("spot", spot);
  rep.add("samples", static_cast<std::uint64_t>(pi_T.size()));
  rep.add("rows", static_cast<std::uint64_t>(sm.points.size()));
  rep.add("inversion_failures", static_cast<std::uint64_t>(sm.failures.size()));

  if (!o.market_vols.empty()) {
    auto in = open_in(o.market_vols);
    std::map<std::pair<std::string, double>, double> mv;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto f = split_csv(t);
      if (f.size() < 3) throw parse_error("market vols: expected kind,strike,implied_vol");
      mv[{std::string(f[0]), parse_double_or_throw(f[1], "strike")}] = parse_double_or_throw(f[2], "implied_vol");
    }
    auto ov = open_out(out_path(c, "smile_overlay.csv").string());
    ov << "kind,strike,delta,implied_vol,market_vol\n";
    for (const auto& p : sm.points) {
      auto it = mv.find({to_string(p.kind), p.strike});
      if (it == mv.end()) continue;
      ov << to_string(p.kind) << ',' << fmt_double(p.strike) << ',' << fmt_double(p.delta) << ',' << fmt_double(p.implied_vol)
         << ',' << fmt_double(it->second) << '\n';
    }
  }
  return sm;
}

std::vector<path_row> load_path_rows(const std::string& path) {
  auto in = open_in(path);
  return read_paths(in);
}

void write_report(const fs::path& p, const std::string& command, int code, const std::string& message, const report_lines& rep) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) return;
  out << "command = " << command << '\n';
  out << "status = " << (code == 0 ? "ok" : "error") << '\n';
  out << "exit_code = " << code << '\n';
  if (!message.empty()) out << "message = " << message << '\n';
  for (const auto& [k, v] : rep.kv) out << k << " = " << v << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"liqstring: stochastic string model of limit-order-book liquidity"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI file with option values; flags override it");

  common_opts common;
  if (const char* env = std::getenv("LIQSTRING_OUT_DIR")) common.out_dir = env;
  if (common.out_dir.empty()) common.out_dir = ".";
  app.add_option("--out-dir", common.out_dir, "output directory (default $LIQSTRING_OUT_DIR or .)")->capture_default_str();
  app.add_option("--seed", common.seed, "top-level seed")->capture_default_str();
  app.add_option("--threads", common.threads, "worker threads, 0 = all")->capture_default_str();

  synth_opts so;
  auto* c_synth = app.add_subcommand("synth", "synthesize an order-event stream");
  c_synth->add_option("--out", so.out, "event CSV")->capture_default_str();
  add_generator_flags(c_synth, so.gen);

  ingest_opts io;
  auto* c_ingest = app.add_subcommand("ingest", "replay events into a net-demand surface");
  c_ingest->add_option("--events", io.events, "event CSV")->required();
  c_ingest->add_option("--out", io.out, "surface CSV")->capture_default_str();
  add_ingest_flags(c_ingest, io);

  calibrate_opts co;
  co.cal.smooth_cells = 3.0;
  auto* c_cal = app.add_subcommand("calibrate", "fit model parameters to a surface");
  c_cal->add_option("--surface", co.surface, "surface CSV")->required();
  c_cal->add_option("--out", co.out, "parameters file")->capture_default_str();
  c_cal->add_option("--horizon", co.cal.horizon, "model time of the surface window")->capture_default_str();
  add_calibrate_flags(c_cal, co.cal);

  std::string feas_params;
  auto* c_feas = app.add_subcommand("check-feasibility", "check the clearing-price bound conditions");
  c_feas->add_option("--params", feas_params, "parameters file")->required();

  std::string mpr_params, mpr_out = "lambda.csv";
  int mpr_path = 0;
  auto* c_mpr = app.add_subcommand("solve-mpr", "market price of risk along one risk-neutral path");
  c_mpr->add_option("--params", mpr_params, "parameters file")->required();
  c_mpr->add_option("--path-id", mpr_path, "path index")->capture_default_str();
  c_mpr->add_option("--out", mpr_out, "lambda CSV")->capture_default_str();

  simulate_opts sim;
  auto* c_sim = app.add_subcommand("simulate", "simulate clearing-price paths");
  c_sim->add_option("--params", sim.params, "parameters file")->required();
  c_sim->add_option("--out", sim.out, "path CSV")->capture_default_str();
  c_sim->add_option("--report", sim.report, "run report")->capture_default_str();
  add_simulate_flags(c_sim, sim);

  price_opts po;
  auto* c_price = app.add_subcommand("price", "Monte Carlo option prices and implied vols, one kind");
  c_price->add_option("--paths", po.paths, "path CSV")->capture_default_str();
  c_price->add_option("--out", po.out, "smile CSV")->capture_default_str();
  c_price->add_option("--kind", po.kind, "call | put")->capture_default_str();
  add_price_flags(c_price, po);

  price_opts sm_o;
  auto* c_smile = app.add_subcommand("smile", "call and put smile indexed by delta");
  c_smile->add_option("--paths", sm_o.paths, "path CSV")->capture_default_str();
  c_smile->add_option("--out", sm_o.out, "smile CSV")->capture_default_str();
  c_smile->add_option("--market-vols", sm_o.market_vols, "CSV kind,strike,implied_vol to overlay");
  add_price_flags(c_smile, sm_o);

  demo_opts dmo;
  auto* c_demo = app.add_subcommand("demo-arbitrage", "constant buy strategy in the finite-factor model");
  c_demo->add_option("--paths", dmo.paths, "Z paths")->capture_default_str();
  c_demo->add_option("--steps", dmo.steps, "time steps")->capture_default_str();
  c_demo->add_option("--horizon", dmo.horizon, "years")->capture_default_str();

  std::string replay_events;
  auto* c_replay = app.add_subcommand("match-replay", "replay events through the matching engine and print the books");
  c_replay->add_option("--events", replay_events, "event CSV")->required();

  std::string pipe_synth = "default", pipe_events;
  synth_opts pso;
  ingest_opts pio;
  calibrate_opts pco;
  pco.cal.smooth_cells = 3.0;
  simulate_opts psim;
  price_opts ppo;
  auto* c_pipe = app.add_subcommand("pipeline", "synth, ingest, calibrate, simulate and smile in one run");
  c_pipe->add_option("--synth", pipe_synth, "generator preset (default)")->capture_default_str();
  c_pipe->add_option("--events", pipe_events, "use this event CSV instead of synthesizing");
  c_pipe->add_option("--paths", psim.paths, "number of paths")->capture_default_str();
  c_pipe->add_option("--measure", psim.meas, "physical | risk_neutral")->capture_default_str();
  c_pipe->add_option("--x-min", pco.cal.x_min, "largest short position")->capture_default_str();
  c_pipe->add_option("--x-max", pco.cal.x_max, "largest long position")->capture_default_str();
  c_pipe->add_option("--smooth", pco.cal.smooth_cells, "smoothing of q in price cells")->capture_default_str();
  add_price_flags(c_pipe, ppo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_code::ok : exit_code::usage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  report_lines rep;
  int code = exit_code::ok;
  std::string message;
  try {
    fs::create_directories(common.out_dir);
    {
      std::ofstream cfg(out_path(common, name + ".config.ini"), std::ios::binary | std::ios::trunc);
      cfg << app.config_to_str(true, false);
    }

    if (cmd == c_synth) {
      stage_synth(common, so, rep);
    } else if (cmd == c_ingest) {
      const auto ev = load_events(io.events, io.lenient, rep);
      stage_ingest(common, io, ev, rep);
    } else if (cmd == c_cal) {
      auto in = open_in(co.surface);
      stage_calibrate(common, co, read_surface(in), rep);
    } else if (cmd == c_feas) {
      const auto m = load_params(feas_params);
      const auto f = feasibility_bounds(m);
      rep.add("d1_min", m.d1_min);
      rep.add("d1_min_lower_bound", f.d1_min_lower);
      rep.add("d1_max", m.d1_max);
      rep.add("d1_max_upper_bound", f.d1_max_upper);
      rep.add("eps", m.eps());
      rep.add("eps_upper_bound", f.eps_upper);
      rep.add("mc_hold", f.mc_hold ? "true" : "false");
      rep.add("bound_hold", f.bound_hold ? "true" : "false");
      rep.add("delta_order", f.delta_order ? "true" : "false");
      rep.add("eps_ok", f.eps_ok ? "true" : "false");
      rep.add("d0_condition", f.d0_condition ? "true" : "false");
      rep.add("feasible", f.feasible() ? "true" : "false");
      for (const auto& [k, v] : rep.kv) std::cout << k << " = " << v << '\n';
    } else if (cmd == c_mpr) {
      const auto m = load_params(mpr_params);
      sim_config cfg;
      cfg.n_paths = 1;
      cfg.first_path = mpr_path;
      cfg.seed = stage_seed(common.seed, "simulate");
      cfg.meas = measure::risk_neutral;
      cfg.record_lambda = true;
      cfg.threads = 1;
      const auto paths = run(m, cfg);
      const auto& p = paths.front();
      if (p.failed) throw numerical_error("path " + std::to_string(p.path_id) + ": " + p.failure);
      std::vector<Eigen::VectorXd> lam;
      for (int j = 0; j < m.grid.n_steps; ++j) lam.push_back(p.lambda->values.col(j));
      auto out = open_out(out_path(common, mpr_out).string());
      write_lambda_csv(out, lam, {p.max_residual});
      rep.add("steps", m.grid.n_steps);
      rep.add("max_mpr_residual_rel", p.max_residual);
      rep.add("lambda_energy", p.lambda_energy);
    } else if (cmd == c_sim) {
      stage_simulate(common, sim, load_params(sim.params), rep);
    } else if (cmd == c_price) {
      stage_smile(common, po, load_path_rows(po.paths), rep, false);
    } else if (cmd == c_smile) {
      stage_smile(common, sm_o, load_path_rows(sm_o.paths), rep, true);
    } else if (cmd == c_demo) {
      arbitrage_config ac;
      ac.n_paths = dmo.paths;
      ac.n_steps = dmo.steps;
      ac.horizon = dmo.horizon;
      ac.seed = stage_seed(common.seed, "arbitrage");
      const auto r = run_demo(finite_factor_model::standard(), ac);
      {
        auto out = open_out(out_path(common, dmo.report).string());
        write_arbitrage_report(out, r);
      }
      {
        auto out = open_out(out_path(common, dmo.minima).string());
        write_path_minima_csv(out, r);
      }
      write_arbitrage_report(std::cout, r);
      rep.add("verdict", to_string(r.verdict));
      if (r.verdict == arbitrage_verdict::precondition_failed) throw config_error(r.message);
    } else if (cmd == c_replay) {
      auto in = open_in(replay_events);
      const auto ev = parse_events(in).events;
      book_state book;
      std::optional<double> last;
      std::uint64_t trades = 0;
      for (const auto& e : ev) {
        const auto r = book.apply(e);
        for (const auto& t : r.trades) {
          std::cout << "trade " << format_price(t.price) << " " << t.quantity << " (maker " << t.maker_ref << ", taker "
                    << t.taker_ref << ")\n";
          ++trades;
        }
        if (r.clearing_price) last = r.clearing_price;
      }
      if (last)
        std::cout << "clearing price " << format_price(*last) << '\n';
      else
        std::cout << "clearing price none\n";
      print_book(std::cout, book);
      rep.add("trades", trades);
      rep.add("clearing_price", last ? format_price(*last) : std::string("none"));
    } else if (cmd == c_pipe) {
      std::vector<order_event> ev;
      if (!pipe_events.empty()) {
        ev = load_events(pipe_events, false, rep);
      } else {
        if (pipe_synth != "default") throw config_error("unknown generator preset '" + pipe_synth + "' (default)");
        ev = stage_synth(common, pso, rep);
      }
      const auto s = stage_ingest(common, pio, ev, rep);
      const auto m = stage_calibrate(common, pco, s, rep);
      stage_simulate(common, psim, m, rep);
      ppo.paths = out_path(common, psim.out).string();
      stage_smile(common, ppo, load_path_rows(ppo.paths), rep, true);
    }
  } catch (const config_error& e) {
    code = exit_code::usage;
    message = e.what();
  } catch (const data_error& e) {
    code = exit_code::data;
    message = e.what();
  } catch (const numerical_error& e) {
    code = exit_code::numerical;
    message = e.what();
  } catch (const std::exception& e) {
    code = exit_code::data;
    message = e.what();
  }
  if (code != exit_code::ok) std::cerr << "liqstring " << name << ": " << message << '\n';
  write_report(out_path(common, name + ".report.txt"), name, code, message, rep);
  return code;
}
