#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "profmatch/cli.hpp"
#include "profmatch/error.hpp"
#include "profmatch/glm.hpp"
#include "profmatch/matching.hpp"
#include "profmatch/paired.hpp"
#include "profmatch/simulation.hpp"
#include "profmatch/solver.hpp"

namespace py = pybind11;
using namespace profmatch;

namespace {

Dataset to_dataset(const py::dict& columns) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
  for (const auto& [key, value] : columns) {
    names.push_back(py::cast<std::string>(key));
    values.push_back(py::cast<std::vector<double>>(value));
  }
  return Dataset(std::move(names), std::move(values));
}

py::dict to_dict(const Dataset& data) {
  py::dict out;
  for (const auto& name : data.names()) {
    const auto col = data.column(name);
    out[py::str(name)] = py::array_t<double>(static_cast<py::ssize_t>(col.size()), col.data());
  }
  return out;
}

py::dict selection_dict(const SelectionResult& r) {
  py::dict d;
  d["selected"] = r.selected_indices();
  d["objective"] = r.objective;
  d["upper_bound"] = r.upper_bound;
  d["status"] = to_string(r.status);
  d["nodes_explored"] = r.nodes_explored;
  return d;
}

py::dict gamma_dict(const GammaResult& g) {
  py::dict d;
  d["gamma_star"] = g.gamma_star ? py::cast(*g.gamma_star) : py::none();
  d["alpha"] = g.alpha;
  d["p_at_gamma1"] = g.p_at_gamma1;
  d["direction"] = g.direction;
  d["at_ceiling"] = g.at_ceiling;
  d["degenerate"] = g.degenerate;
  return d;
}

Link parse_link(const std::string& name) {
  if (name == "probit") return Link::probit;
  if (name == "logit") return Link::logit;
  throw DomainError("link must be 'probit' or 'logit', got '" + name + "'");
}

ScenarioSpec make_spec(const py::kwargs& kw) {
  ScenarioSpec s;
  for (const auto& [key, value] : kw) {
    const auto k = py::cast<std::string>(key);
    if (k == "selection_family") s.selection_family = parse_selection_family(py::cast<std::string>(value));
    else if (k == "overlap") s.overlap = parse_overlap(py::cast<std::string>(value));
    else if (k == "outcome_model") s.outcome_model = py::cast<int>(value);
    else if (k == "heterogeneity") s.heterogeneity = parse_heterogeneity(py::cast<std::string>(value));
    else if (k == "het_form") s.het_form = parse_het_form(py::cast<std::string>(value));
    else if (k == "ps_spec") s.ps_spec = py::cast<int>(value);
    else if (k == "method") s.method = parse_method(py::cast<std::string>(value));
    else if (k == "n_cohort") s.n_cohort = py::cast<std::size_t>(value);
    else if (k == "replicates") s.replicates = py::cast<std::size_t>(value);
    else if (k == "bootstrap_B") s.bootstrap_B = py::cast<std::size_t>(value);
    else if (k == "master_seed") s.master_seed = py::cast<std::uint64_t>(value);
    else if (k == "target") s.target = parse_target(py::cast<std::string>(value));
    else if (k == "multiplier") s.multiplier = py::cast<double>(value);
    else if (k == "solver_time_limit") s.solver_time_limit = py::cast<double>(value);
    else if (k == "solver_gap") s.solver_gap = py::cast<int>(value);
    else if (k == "solver_node_limit") s.solver_node_limit = py::cast<long>(value);
    else if (k == "workers") s.workers = py::cast<std::size_t>(value);
    else throw ConfigError("unknown scenario field '" + k + "'");
  }
  s.validate();
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Profile matching, weighting estimators and paired sensitivity analysis";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "Error", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object instance = type(e.what());
      instance.attr("code") = e.code();
      PyErr_SetObject(type.ptr(), instance.ptr());
    }
  });

  m.def(
      "fit_binary_glm",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& link) {
        const auto fit = fit_binary_glm(x, y, parse_link(link));
        py::dict d;
        d["coefficients"] = fit.coefficients;
        d["iterations"] = fit.iterations;
        d["log_likelihood"] = fit.log_likelihood;
        d["score_norm"] = fit.score_norm;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("link") = "probit",
      "Probit or logit maximum likelihood; no intercept is added.");

  m.def(
      "solve_max_balanced_subset",
      [](const Eigen::MatrixXd& deviations, const std::vector<double>& tolerances,
         double time_limit, int gap, long node_limit) {
        BalanceProblem p{deviations, tolerances, time_limit, gap, node_limit};
        return selection_dict(solve_max_balanced_subset(p));
      },
      py::arg("deviations"), py::arg("tolerances"), py::arg("time_limit") = 60.0,
      py::arg("gap") = 0, py::arg("node_limit") = 0,
      "Largest row subset whose column means stay within tolerance of zero.");

  m.def(
      "brute_force_reference",
      [](const Eigen::MatrixXd& deviations, const std::vector<double>& tolerances) {
        BalanceProblem p{deviations, tolerances};
        return selection_dict(brute_force_reference(p));
      },
      py::arg("deviations"), py::arg("tolerances"));

  m.def(
      "solve_assignment",
      [](const Eigen::MatrixXd& cost) {
        const auto a = solve_assignment(cost);
        return py::make_tuple(a.column_of_row, a.total);
      },
      py::arg("cost"), "Minimum-cost perfect assignment: (column_of_row, total).");

  m.def(
      "profile_match",
      [](const py::dict& columns, const std::vector<std::string>& features,
         const std::vector<double>& targets, const std::vector<double>& tolerances,
         const std::string& group_column, const std::vector<double>& labels, double time_limit,
         int gap) {
        const Dataset data = to_dataset(columns);
        Profile profile;
        for (const auto& f : features) profile.features.push_back(FeatureSpec::parse(f));
        profile.targets = targets;
        profile.tolerances = tolerances;
        const auto groups =
            profile_match(data, profile, group_column, labels, {time_limit, gap, 0});
        py::list out;
        for (const auto& g : groups) {
          py::dict d = selection_dict(g.result);
          d["label"] = g.label;
          d["rows"] = g.matched_rows();
          py::list balance;
          for (const auto& b : g.balance)
            balance.append(py::dict(py::arg("feature") = b.feature, py::arg("before") = b.before,
                                    py::arg("after") = b.after));
          d["balance"] = balance;
          out.append(d);
        }
        return out;
      },
      py::arg("columns"), py::arg("features"), py::arg("targets"), py::arg("tolerances"),
      py::arg("group_column"), py::arg("labels"), py::arg("time_limit") = 60.0,
      py::arg("gap") = 0,
      "Balance each group toward the targets; returns one dict per label with "
      "the selected row indices.");

  m.def(
      "mcnemar_exact",
      [](std::size_t n11, std::size_t n10, std::size_t n01, std::size_t n00) {
        const auto r = mcnemar_test({n11, n10, n01, n00}, McNemarMode::exact);
        return py::make_tuple(r.p_two_sided, r.p_one_sided);
      },
      py::arg("n11"), py::arg("n10"), py::arg("n01"), py::arg("n00"),
      "Exact McNemar test: (two-sided p, one-sided p).");

  m.def(
      "wilcoxon_signed_rank",
      [](const std::vector<double>& d, bool exact) {
        const auto r =
            wilcoxon_signed_rank(d, exact ? WilcoxonMode::exact : WilcoxonMode::normal);
        return py::make_tuple(r.t_plus, r.p_two_sided);
      },
      py::arg("differences"), py::arg("exact") = true,
      "Signed-rank test: (T+, two-sided p).");

  m.def(
      "rosenbaum_gamma_binary",
      [](std::size_t n10, std::size_t n01, double alpha) {
        return gamma_dict(rosenbaum_gamma_binary({0, n10, n01, 0}, alpha));
      },
      py::arg("n10"), py::arg("n01"), py::arg("alpha") = 0.05);

  m.def(
      "rosenbaum_gamma_rank",
      [](const std::vector<double>& d, double alpha) {
        return gamma_dict(rosenbaum_gamma_rank(d, alpha));
      },
      py::arg("differences"), py::arg("alpha") = 0.05);

  m.def(
      "generate_cohort",
      [](std::size_t replicate, const py::kwargs& kw) {
        return to_dict(generate_cohort(make_spec(kw), replicate));
      },
      py::arg("replicate") = 0, "One simulated cohort as a dict of numpy arrays.");

  m.def(
      "run_scenario",
      [](const py::kwargs& kw) {
        const ScenarioSpec spec = make_spec(kw);
        MetricsRow row;
        {
          py::gil_scoped_release release;
          row = run_scenario(spec);
        }
        py::dict d;
        d["scenario"] = row.scenario;
        d["replicates_ok"] = row.replicates_ok;
        d["mab"] = row.mab;
        d["rmse"] = row.rmse;
        d["variance"] = row.variance;
        d["mean_ess"] = row.mean_ess;
        d["coverage"] = row.coverage ? py::cast(*row.coverage) : py::none();
        d["mean_ci_length"] = row.mean_ci_length ? py::cast(*row.mean_ci_length) : py::none();
        d["max_tasmd_after"] = row.max_tasmd_after;
        d["estimates"] = row.estimates;
        return d;
      },
      "Runs one simulation scenario; keyword arguments are scenario fields.");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> all = {"profmatch"};
        all.insert(all.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : all) argv.push_back(a.c_str());
        return cli_main(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line tool in-process and returns its exit code.");
}
