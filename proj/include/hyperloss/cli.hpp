#pragma once

// Command-line front end. Every subcommand parses flags, calls one library
// operation and prints its result: machine output (CSV or JSON) on `out`,
// human-readable summaries on `err`.
//
// Exit codes: 0 success, 1 validation error, 2 fit/numeric error, 3 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hyperloss/hyperloss.hpp"

namespace hyperloss::cli {

inline constexpr const char* kVersion = "hyperloss 0.1.0";
inline constexpr double kDefaultBudgetSeconds = 10800;  // three hours

enum ExitCode : int { ok = 0, validation_error = 1, numeric_error = 2, io_error = 3 };

namespace detail {

using nlohmann::json;

struct ShapeFlags {
  TransformerShape shape;
  void add(CLI::App* app, bool require_all = true) {
    auto opt = [&](const char* name, std::uint64_t& field, const char* help) {
      auto* o = app->add_option(name, field, help);
      if (require_all) o->required();
    };
    opt("--d", shape.d, "embedding dimension");
    opt("--n", shape.n, "number of layers");
    opt("--s", shape.s, "sequence length");
    opt("--v", shape.v, "vocabulary size");
    opt("--w", shape.w, "MLP width");
    opt("--h", shape.h, "number of attention heads");
  }
};

struct BudgetFlags {
  std::optional<double> T;
  std::optional<std::uint64_t> batch;
  std::optional<std::string> token_mode;
  void add(CLI::App* app) {
    app->add_option("--T", T, "training budget in seconds (default 10800)");
    app->add_option("--batch", batch, "sequences per step (default: bundle value)");
    app->add_option("--token-mode", token_mode, "steps | tokens (default: bundle value)");
  }
  // Applies overrides to the bundle budget. T always falls back to the
  // three-hour default rather than a bundle value, and says so.
  TrainBudget resolve(TrainBudget base, std::ostream& err) const {
    if (T) {
      base.T = *T;
    } else {
      base.T = kDefaultBudgetSeconds;
      err << "T = " << kDefaultBudgetSeconds << " s (default)\n";
    }
    if (batch) base.batch = *batch;
    if (token_mode) base.token_mode = parse_token_mode(*token_mode);
    return base;
  }
};

inline json fit_json(const FitReport& r) {
  return {{"slope", r.slope}, {"intercept", r.intercept}, {"r2_pearson", r.r2_pearson}, {"r2_raw", r.r2_raw},
          {"count", r.count}};
}

inline json time_json(const TimeCoefficients& c) {
  json j = {{"c1", c.c1}, {"c2", c.c2}, {"c3", c.c3}, {"mode", to_string(c.mode)}, {"warnings", c.warnings}};
  if (c.fit) j["fit"] = fit_json(*c.fit);
  return j;
}

inline json law_json(const ScalingLaw& l) {
  json j = {{"A", l.A}, {"B", l.B}, {"E", l.E}, {"alpha", l.alpha}, {"beta", l.beta}, {"warnings", l.warnings}};
  if (l.fit) j["fit"] = fit_json(*l.fit);
  return j;
}

inline void print_warnings(const std::vector<std::string>& w, std::ostream& err) {
  for (const auto& m : w) err << "warning: " << m << '\n';
}

inline CoefficientBundle load_bundle(const std::string& path, std::ostream& err) {
  std::vector<std::string> warnings;
  auto b = load_coefficients(path, &warnings);
  print_warnings(warnings, err);
  return b;
}

inline RunDataset load_dataset(const std::string& path, std::ostream& err) {
  std::vector<std::string> warnings;
  auto ds = load_runs(path, &warnings);
  print_warnings(warnings, err);
  err << "loaded " << ds.size() << " runs from " << path << '\n';
  return ds;
}

inline std::string csv_number(double x) { return hyperloss::detail::format_double(x); }

// Axis range "lo:hi:count", optionally suffixed ":log".
inline GridAxis parse_grid(Axis axis, const std::string& spec) {
  GridAxis g;
  g.axis = axis;
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3 && !(parts.size() == 4 && parts[3] == "log")) {
    throw ValidationError("range must be lo:hi:count[:log], got '" + spec + "'");
  }
  try {
    g.lo = std::stod(parts[0]);
    g.hi = std::stod(parts[1]);
    g.count = std::stoul(parts[2]);
  } catch (const std::exception&) {
    throw ValidationError("range must be lo:hi:count[:log], got '" + spec + "'");
  }
  g.log_spaced = parts.size() == 4;
  if (g.count == 0) throw ValidationError("range count must be >= 1");
  if (g.log_spaced && !(g.lo > 0 && g.hi > 0)) throw ValidationError("log range bounds must be positive");
  return g;
}

inline void write_output(const std::string& text, const std::optional<std::string>& path, std::ostream& out) {
  if (!path) {
    out << text;
    return;
  }
  std::ofstream f(*path);
  if (!f) throw IoError("cannot write " + *path);
  f << text;
  if (!f) throw IoError("write failed: " + *path);
}

}  // namespace detail

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using detail::json;
  CLI::App app{"Cost accounting, step-time and loss prediction for decoder-only transformers", "hyperloss"};
  app.set_help_flag("--help", "print this help and exit");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::function<void()> action;

  // count
  detail::ShapeFlags count_shape;
  bool count_json = false;
  auto* count = app.add_subcommand("count", "PARAMS, MEMCPYS and FLOPS of a shape");
  count->set_help_flag("--help", "print this help and exit");
  count_shape.add(count);
  count->add_flag("--json", count_json, "emit JSON instead of CSV");
  count->callback([&] {
    action = [&] {
      const auto& x = count_shape.shape;
      const auto p = count_params(x), m = count_memcpys(x), f = count_flops(x);
      detail::print_warnings(range_warnings(x), err);
      if (count_json) {
        out << json{{"params", p}, {"memcpys", m}, {"flops", f}}.dump() << '\n';
      } else {
        out << "params,memcpys,flops\n" << p << ',' << m << ',' << f << '\n';
      }
    };
  });

  // breakdown
  detail::ShapeFlags bd_shape;
  std::string bd_kind = "flops";
  bool bd_json = false;
  auto* breakdown = app.add_subcommand("breakdown", "per-component cost table");
  breakdown->set_help_flag("--help", "print this help and exit");
  bd_shape.add(breakdown);
  breakdown->add_option("--kind", bd_kind, "params | memcpys | flops")->capture_default_str();
  breakdown->add_flag("--json", bd_json, "emit JSON instead of CSV");
  breakdown->callback([&] {
    action = [&] {
      const auto b = itemized_breakdown(bd_shape.shape, parse_cost_kind(bd_kind));
      if (bd_json) {
        json rows = json::array();
        for (const auto& e : b.per_component) rows.push_back({{"label", e.label}, {"count", e.count}});
        out << json{{"kind", to_string(b.kind)}, {"per_component", rows}, {"total", b.total}}.dump() << '\n';
      } else {
        out << "label,count\n";
        for (const auto& e : b.per_component) out << hyperloss::detail::csv_escape(e.label) << ',' << e.count << '\n';
        out << "total," << b.total << '\n';
      }
    };
  });

  // fit-time
  std::string ft_runs, ft_mode = "both";
  std::optional<std::string> ft_out, ft_base;
  auto* fit_time = app.add_subcommand("fit-time", "fit c1, c2, c3 of the step-time model");
  fit_time->set_help_flag("--help", "print this help and exit");
  fit_time->add_option("--runs", ft_runs, "run CSV")->required();
  fit_time->add_option("--mode", ft_mode, "both | memcpy_only | flops_only")->capture_default_str();
  fit_time->add_option("--out", ft_out, "write a coefficient bundle here");
  fit_time->add_option("--coeffs", ft_base, "bundle supplying the law and budget for --out");
  fit_time->callback([&] {
    action = [&] {
      const auto ds = detail::load_dataset(ft_runs, err);
      const auto c = fit_time_coefficients(ds, parse_time_mode(ft_mode));
      detail::print_warnings(c.warnings, err);
      out << detail::time_json(c).dump() << '\n';
      if (ft_out) {
        CoefficientBundle b = ft_base ? detail::load_bundle(*ft_base, err) : CoefficientBundle{};
        b.time = c;
        b.provenance = {dataset_hash(ds), utc_timestamp(), "time_mode=" + ft_mode, "fit-time --runs " + ft_runs};
        save_coefficients(b, *ft_out);
        err << "wrote " << *ft_out << '\n';
      }
    };
  });

  // fit-loss
  std::string fl_runs, fl_token_mode = "steps";
  double fl_alpha = 0, fl_beta = 0;
  std::optional<std::string> fl_out, fl_base;
  auto* fit_loss = app.add_subcommand("fit-loss", "fit A, B, E of the loss law at fixed exponents");
  fit_loss->set_help_flag("--help", "print this help and exit");
  fit_loss->add_option("--runs", fl_runs, "run CSV")->required();
  fit_loss->add_option("--alpha", fl_alpha, "parameter exponent")->required();
  fit_loss->add_option("--beta", fl_beta, "data exponent")->required();
  fit_loss->add_option("--token-mode", fl_token_mode, "steps | tokens")->capture_default_str();
  fit_loss->add_option("--out", fl_out, "write a coefficient bundle here");
  fit_loss->add_option("--coeffs", fl_base, "bundle supplying time coefficients and budget for --out");
  fit_loss->callback([&] {
    action = [&] {
      const auto ds = detail::load_dataset(fl_runs, err);
      const auto mode = parse_token_mode(fl_token_mode);
      const auto law = fit_law_coefficients(ds, fl_alpha, fl_beta, mode);
      detail::print_warnings(law.warnings, err);
      out << detail::law_json(law).dump() << '\n';
      if (fl_out) {
        CoefficientBundle b = fl_base ? detail::load_bundle(*fl_base, err) : CoefficientBundle{};
        b.law = law;
        b.budget.token_mode = mode;
        b.provenance = {dataset_hash(ds), utc_timestamp(), "token_mode=" + fl_token_mode,
                        "fit-loss --runs " + fl_runs};
        save_coefficients(b, *fl_out);
        err << "wrote " << *fl_out << '\n';
      }
    };
  });

  // predict
  std::string pr_coeffs;
  detail::ShapeFlags pr_shape;
  detail::BudgetFlags pr_budget;
  auto* predict = app.add_subcommand("predict", "final loss from hyperparameters and a time budget");
  predict->set_help_flag("--help", "print this help and exit");
  predict->add_option("--coeffs", pr_coeffs, "coefficient bundle")->required();
  pr_shape.add(predict);
  pr_budget.add(predict);
  predict->callback([&] {
    action = [&] {
      const auto b = detail::load_bundle(pr_coeffs, err);
      const auto budget = pr_budget.resolve(b.budget, err);
      const double loss = predict_loss_from_shape(pr_shape.shape, b.time, b.law, budget);
      out << json{{"loss", loss}}.dump() << '\n';
    };
  });

  // estimate-data
  std::string ed_coeffs;
  detail::ShapeFlags ed_shape;
  detail::BudgetFlags ed_budget;
  auto* estimate = app.add_subcommand("estimate-data", "steps or tokens consumed within the budget");
  estimate->set_help_flag("--help", "print this help and exit");
  estimate->add_option("--coeffs", ed_coeffs, "coefficient bundle")->required();
  ed_shape.add(estimate);
  ed_budget.add(estimate);
  estimate->callback([&] {
    action = [&] {
      const auto b = detail::load_bundle(ed_coeffs, err);
      const auto budget = ed_budget.resolve(b.budget, err);
      const double data = estimate_data(ed_shape.shape, b.time, budget);
      out << json{{"data", data}, {"unit", to_string(budget.token_mode)}}.dump() << '\n';
    };
  });

  // grad-field
  std::string gf_coeffs, gf_axes = "n,w", gf_range1, gf_range2;
  double gf_d = 256, gf_n = 4, gf_w = 1024, gf_h = 4, gf_s = 512, gf_v = 8000;
  detail::BudgetFlags gf_budget;
  auto* field = app.add_subcommand("grad-field", "projected negative loss gradient over a 2-D grid (CSV)");
  field->set_help_flag("--help", "print this help and exit");
  field->add_option("--coeffs", gf_coeffs, "coefficient bundle")->required();
  field->add_option("--axes", gf_axes, "two of d,n,w,h, comma separated")->capture_default_str();
  field->add_option("--range1", gf_range1, "first axis lo:hi:count[:log]")->required();
  field->add_option("--range2", gf_range2, "second axis lo:hi:count[:log]")->required();
  field->add_option("--d", gf_d, "embedding dimension at the base point")->capture_default_str();
  field->add_option("--n", gf_n, "layers at the base point")->capture_default_str();
  field->add_option("--w", gf_w, "MLP width at the base point")->capture_default_str();
  field->add_option("--h", gf_h, "heads at the base point")->capture_default_str();
  field->add_option("--s", gf_s, "sequence length (fixed)")->capture_default_str();
  field->add_option("--v", gf_v, "vocabulary size (fixed)")->capture_default_str();
  gf_budget.add(field);
  field->callback([&] {
    action = [&] {
      const auto b = detail::load_bundle(gf_coeffs, err);
      const auto comma = gf_axes.find(',');
      if (comma == std::string::npos) throw ValidationError("--axes needs two comma-separated axes");
      const Axis a1 = parse_axis(gf_axes.substr(0, comma));
      const Axis a2 = parse_axis(gf_axes.substr(comma + 1));
      const Objective obj{b.time, b.law, gf_budget.resolve(b.budget, err), gf_s, gf_v};
      const auto samples = gradient_field(detail::parse_grid(a1, gf_range1), detail::parse_grid(a2, gf_range2),
                                          HyperVector{gf_d, gf_n, gf_w, gf_h}, obj);
      out << "# axis1=" << to_string(a1) << " axis2=" << to_string(a2) << '\n';
      out << "axis1,axis2,arrow1,arrow2,loss,params,error\n";
      std::size_t failures = 0;
      for (const auto& s : samples) {
        out << detail::csv_number(s.coord1) << ',' << detail::csv_number(s.coord2) << ',';
        if (s.error) {
          ++failures;
          out << ",,,," << hyperloss::detail::csv_escape(*s.error) << '\n';
        } else {
          out << detail::csv_number(s.arrow1) << ',' << detail::csv_number(s.arrow2) << ','
              << detail::csv_number(s.loss) << ',' << detail::csv_number(s.params) << ",\n";
        }
      }
      if (failures) err << failures << " grid points could not be evaluated\n";
    };
  });

  // optimize
  std::string op_coeffs;
  double op_d = 0, op_n = 0, op_w = 0, op_h = 0, op_s = 512, op_v = 8000, op_step = 1;
  std::size_t op_iters = 100;
  detail::BudgetFlags op_budget;
  auto* optimize = app.add_subcommand("optimize", "descend the predicted loss at constant parameter count (JSON)");
  optimize->set_help_flag("--help", "print this help and exit");
  optimize->add_option("--coeffs", op_coeffs, "coefficient bundle")->required();
  optimize->add_option("--d", op_d, "starting embedding dimension")->required();
  optimize->add_option("--n", op_n, "starting layers")->required();
  optimize->add_option("--w", op_w, "starting MLP width")->required();
  optimize->add_option("--h", op_h, "starting heads")->required();
  optimize->add_option("--s", op_s, "sequence length (fixed)")->capture_default_str();
  optimize->add_option("--v", op_v, "vocabulary size (fixed)")->capture_default_str();
  optimize->add_option("--step", op_step, "initial step length")->capture_default_str();
  optimize->add_option("--iters", op_iters, "descent iterations")->capture_default_str();
  op_budget.add(optimize);
  optimize->callback([&] {
    action = [&] {
      const auto b = detail::load_bundle(op_coeffs, err);
      const Objective obj{b.time, b.law, op_budget.resolve(b.budget, err), op_s, op_v};
      const auto path = constrained_descent(HyperVector{op_d, op_n, op_w, op_h}, op_step, op_iters, obj);
      json traj = json::array();
      for (const auto& p : path) {
        traj.push_back({{"d", p.x.d}, {"n", p.x.n}, {"w", p.x.w}, {"h", p.x.h}, {"loss", p.loss}, {"params", p.params}});
      }
      const auto r = round_to_shape(path.back().x, obj);
      out << json{{"trajectory", traj},
                  {"rounded",
                   {{"d", r.shape.d},
                    {"n", r.shape.n},
                    {"w", r.shape.w},
                    {"h", r.shape.h},
                    {"loss", r.loss},
                    {"params", r.params},
                    {"param_deviation", r.param_deviation}}}}
                 .dump()
          << '\n';
      err << "descent: " << path.size() - 1 << " accepted steps, loss " << path.front().loss << " -> "
          << path.back().loss << '\n';
    };
  });

  // simulate
  SweepSpec sim;
  std::optional<std::string> sim_coeffs, sim_out;
  std::optional<double> sim_alpha, sim_beta;
  detail::BudgetFlags sim_budget;
  auto* simulate = app.add_subcommand("simulate", "generate synthetic runs with known coefficients (CSV)");
  simulate->set_help_flag("--help", "print this help and exit");
  simulate->add_option("--count", sim.count, "number of runs")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "master seed")->capture_default_str();
  simulate->add_option("--sigma", sim.noise_sigma, "relative lognormal noise")->capture_default_str();
  simulate->add_option("--s", sim.s, "sequence length")->capture_default_str();
  simulate->add_option("--v", sim.v, "vocabulary size")->capture_default_str();
  simulate->add_option("--coeffs", sim_coeffs, "bundle with the ground-truth time and law coefficients");
  simulate->add_option("--alpha", sim_alpha, "law exponent (without --coeffs: published A, B, E)");
  simulate->add_option("--beta", sim_beta, "law exponent (without --coeffs: published A, B, E)");
  simulate->add_option("--out", sim_out, "write the CSV here instead of standard output");
  sim_budget.add(simulate);
  simulate->callback([&] {
    action = [&] {
      TrainBudget base;
      if (sim_coeffs) {
        const auto b = detail::load_bundle(*sim_coeffs, err);
        sim.true_time = b.time;
        sim.true_law = b.law;
        base = b.budget;
      } else {
        if (!sim_alpha || !sim_beta) throw ValidationError("simulate needs --coeffs or both --alpha and --beta");
        sim.true_law = published_linear_coefficients(*sim_alpha, *sim_beta);
      }
      if (sim_alpha) sim.true_law.alpha = *sim_alpha;
      if (sim_beta) sim.true_law.beta = *sim_beta;
      sim.budget = sim_budget.resolve(base, err);
      std::ostringstream csv;
      write_runs(csv, generate_runs(sim));
      detail::write_output(csv.str(), sim_out, out);
    };
  });

  // eval
  std::string ev_coeffs, ev_runs, ev_split = "auto", ev_source = "empirical";
  auto* eval = app.add_subcommand("eval", "calibration line of predicted against actual loss (JSON)");
  eval->set_help_flag("--help", "print this help and exit");
  eval->add_option("--coeffs", ev_coeffs, "coefficient bundle")->required();
  eval->add_option("--runs", ev_runs, "run CSV with final_loss")->required();
  eval->add_option("--split", ev_split, "auto | holdout | train | all")->capture_default_str();
  eval->add_option("--source", ev_source,
                   "empirical: data from the run log; estimated: data from predicted step time")
      ->capture_default_str();
  eval->callback([&] {
    action = [&] {
      const auto b = detail::load_bundle(ev_coeffs, err);
      const auto ds = detail::load_dataset(ev_runs, err);
      if (ev_source != "empirical" && ev_source != "estimated") throw ValidationError("--source must be empirical or estimated");
      std::vector<std::size_t> rows;
      if (ev_split == "holdout" || (ev_split == "auto" && !ds.holdout_indices().empty())) {
        rows = ds.holdout_indices();
      } else if (ev_split == "train") {
        for (std::size_t i = 0; i < ds.size(); ++i)
          if (ds.split_of(i) == Split::train) rows.push_back(i);
      } else if (ev_split == "all" || ev_split == "auto") {
        for (std::size_t i = 0; i < ds.size(); ++i) rows.push_back(i);
      } else {
        throw ValidationError("--split must be auto, holdout, train or all");
      }
      std::vector<double> predicted, actual;
      for (std::size_t i : rows) {
        const auto& r = ds.records[i];
        if (!r.final_loss) continue;
        if (ev_source == "empirical") {
          predicted.push_back(predict_loss_from_record(r, b.law, b.budget.token_mode));
        } else {
          TrainBudget budget = b.budget;
          budget.batch = r.batch;
          if (r.train_seconds) budget.T = *r.train_seconds;
          predicted.push_back(predict_loss_from_shape(r.shape, b.time, b.law, budget));
        }
        actual.push_back(*r.final_loss);
      }
      if (predicted.size() < 2) throw ValidationError("eval needs at least 2 runs with final_loss");
      out << detail::fit_json(calibration_line(predicted, actual)).dump() << '\n';
    };
  });

  // split
  std::string sp_runs;
  double sp_fraction = 0.5;
  std::uint64_t sp_seed = 0;
  std::optional<std::string> sp_out;
  auto* split = app.add_subcommand("split", "assign a seeded train/holdout split (CSV with split column)");
  split->set_help_flag("--help", "print this help and exit");
  split->add_option("--runs", sp_runs, "run CSV")->required();
  split->add_option("--fraction", sp_fraction, "holdout fraction in (0, 1)")->capture_default_str();
  split->add_option("--seed", sp_seed, "seed")->capture_default_str();
  split->add_option("--out", sp_out, "write the CSV here instead of standard output");
  split->callback([&] {
    action = [&] {
      const auto ds = split_dataset(detail::load_dataset(sp_runs, err), sp_fraction, sp_seed);
      err << "holdout: " << ds.holdout_indices().size() << " of " << ds.size() << '\n';
      std::ostringstream csv;
      write_runs(csv, ds);
      detail::write_output(csv.str(), sp_out, out);
    };
  });

  if (!args.empty() && !args.front().empty() && args.front().front() != '-') {
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == args.front();
    if (!known) {
      err << "error: unknown subcommand '" << args.front() << "'\n\n" << app.help();
      return validation_error;
    }
  }

  std::vector<const char*> argv{"hyperloss"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return validation_error;
  }

  try {
    if (action) action();
    return ok;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return validation_error;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return numeric_error;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return io_error;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return numeric_error;
  }
}

}  // namespace hyperloss::cli
