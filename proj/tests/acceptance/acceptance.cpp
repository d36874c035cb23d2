// Runs every acceptance criterion at its stated size and tolerance and prints
// one PASS/FAIL line per criterion. Arguments select criteria by number; no
// arguments runs all ten.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "profmatch/error.hpp"
#include "profmatch/glm.hpp"
#include "profmatch/io.hpp"
#include "profmatch/matching.hpp"
#include "profmatch/numerics.hpp"
#include "profmatch/paired.hpp"
#include "profmatch/parallel.hpp"
#include "profmatch/simulation.hpp"
#include "profmatch/solver.hpp"

#ifndef PROFMATCH_CLI_PATH
#error "PROFMATCH_CLI_PATH must name the profmatch executable"
#endif

namespace pm = profmatch;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (ok ? "" : "MISS ") << what << "; ";
  }
};

std::string fmt(double v, int digits = 4) { return pm::format_significant(v, digits); }

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

// Simulation runs shared between criteria, keyed by scenario id.
std::map<std::string, pm::MetricsRow> g_runs;

pm::ScenarioSpec cell(pm::Overlap overlap, int om, pm::Heterogeneity het, int ps,
                      pm::Method method, std::size_t reps, std::size_t boot) {
  pm::ScenarioSpec s;
  s.overlap = overlap;
  s.outcome_model = om;
  s.heterogeneity = het;
  s.ps_spec = ps;
  s.method = method;
  s.replicates = reps;
  s.bootstrap_B = boot;
  s.master_seed = 20240601;
  // A one-unit shortfall from the proven bound keeps the 200-replicate cells
  // within minutes; every selection is still feasible.
  s.solver_gap = 1;
  s.workers = pm::default_workers();
  return s;
}

const pm::MetricsRow& run(const pm::ScenarioSpec& spec) {
  const std::string key =
      spec.id() + "-r" + std::to_string(spec.replicates) + "-b" + std::to_string(spec.bootstrap_B);
  auto it = g_runs.find(key);
  if (it != g_runs.end()) return it->second;
  const auto t0 = std::chrono::steady_clock::now();
  auto row = pm::run_scenario(spec);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "  ran " << key << " in " << fmt(secs, 3) << " s\n";
  return g_runs.emplace(key, std::move(row)).first->second;
}

using pm::Heterogeneity;
using pm::Method;
using pm::Overlap;

void balance_by_construction(Verdict& v) {
  double worst = 0.0;
  std::size_t failed = 0, nonoptimal = 0, cells = 0;
  for (auto overlap : {Overlap::high, Overlap::low})
    for (int om : {1, 2, 3})
      for (auto het : {Heterogeneity::A, Heterogeneity::B}) {
        const auto& r = run(cell(overlap, om, het, 1, Method::pm, 200, 0));
        worst = std::max(worst, r.max_tasmd_after);
        failed += r.replicates_failed;
        nonoptimal += r.nonoptimal_solves;
        ++cells;
      }
  v.require(cells == 12 && failed == 0,
            std::to_string(cells) + " PM1 cells, failed replicates " + std::to_string(failed));
  v.require(worst <= 0.05, "max raw-covariate TASMD after matching " + fmt(worst, 10) + " <= 0.05");
  v.detail << "solves short of proven optimum " << nonoptimal << "; ";
}

void effective_sample_size(Verdict& v) {
  struct Case {
    Method method;
    Overlap overlap;
    double target;
    double rel;
    const char* name;
  };
  for (const Case& c : {Case{Method::pm, Overlap::high, 412.8, 0.10, "PM1 high"},
                        Case{Method::pm, Overlap::low, 194.0, 0.12, "PM1 low"},
                        Case{Method::iow, Overlap::high, 400.1, 0.10, "IOW1 high"},
                        Case{Method::iow, Overlap::low, 147.9, 0.12, "IOW1 low"}}) {
    const auto& r = run(cell(c.overlap, 1, Heterogeneity::A, 1, c.method, 200, 0));
    v.require(within(r.mean_ess, c.target, c.rel * c.target),
              std::string(c.name) + " ESS " + fmt(r.mean_ess) + " vs " + fmt(c.target));
  }
}

void accuracy(Verdict& v) {
  const auto& a = run(cell(Overlap::high, 1, Heterogeneity::A, 1, Method::pm, 200, 0));
  v.require(within(a.mab, 0.09, 0.03), "PM1/OM1/high MAB " + fmt(a.mab) + " vs 0.09");
  v.require(within(a.variance, 0.01, 0.005),
            "PM1/OM1/high variance " + fmt(a.variance) + " vs 0.01");
  const auto& b = run(cell(Overlap::high, 3, Heterogeneity::A, 1, Method::pm, 200, 0));
  v.require(within(b.mab, 0.74, 0.20), "PM1/OM3/high MAB " + fmt(b.mab) + " vs 0.74");
  const auto& c = run(cell(Overlap::low, 3, Heterogeneity::A, 3, Method::apm, 200, 0));
  v.require(within(c.mab, 0.61, 0.20), "aPM3/OM3/low MAB " + fmt(c.mab) + " vs 0.61");
}

void coverage(Verdict& v) {
  const auto& p = run(cell(Overlap::high, 1, Heterogeneity::A, 1, Method::pm, 100, 200));
  const double pc = p.coverage.value_or(-1), pl = p.mean_ci_length.value_or(-1);
  v.require(pc >= 0.91 && pc <= 1.0, "PM1 coverage " + fmt(pc) + " in [0.91, 1]");
  v.require(within(pl, 0.46, 0.25 * 0.46), "PM1 CI length " + fmt(pl) + " vs 0.46");
  const auto& w = run(cell(Overlap::high, 1, Heterogeneity::A, 1, Method::iow, 100, 200));
  const double wc = w.coverage.value_or(-1);
  v.require(wc >= 0.89 && wc <= 0.99, "IOW1 coverage " + fmt(wc) + " in [0.89, 0.99]");
  v.detail << "bootstrap failures " << p.bootstrap_failed + w.bootstrap_failed << "; ";
}

void heterogeneity(Verdict& v) {
  for (auto form : {pm::HetForm::shift, pm::HetForm::draft_noise}) {
    pm::ScenarioSpec s;
    s.heterogeneity = Heterogeneity::B;
    s.het_form = form;
    s.n_cohort = 100000;
    s.master_seed = 99;
    const auto data = pm::generate_cohort(s, 0);
    const auto x6 = data.column("X6"), y0 = data.column("Y0"), y1 = data.column("Y1");
    double sum[2] = {0, 0}, count[2] = {0, 0}, all = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      const int g = x6[i] == 1.0 ? 1 : 0;
      sum[g] += y1[i] - y0[i];
      count[g] += 1;
      all += y1[i] - y0[i];
    }
    const std::string tag = pm::to_string(form);
    for (int g : {0, 1}) {
      const double e = sum[g] / count[g];
      v.require(within(std::abs(e), 5.0, 0.1),
                tag + " effect | X6=" + std::to_string(g) + " " + fmt(e));
    }
    const double marginal = all / static_cast<double>(data.rows());
    v.require(std::abs(marginal) <= 0.05, tag + " marginal " + fmt(marginal));
  }
}

void solver_exactness(Verdict& v) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> delta(0.01, 0.5);
  int agree = 0, feasible = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 17);
    const int K = 1 + static_cast<int>(rng() % 3);
    pm::BalanceProblem p;
    p.deviations.resize(n, K);
    for (int t = 0; t < n; ++t)
      for (int k = 0; k < K; ++k) p.deviations(t, k) = normal(rng);
    for (int k = 0; k < K; ++k) p.tolerances.push_back(delta(rng));
    const auto solved = pm::solve_max_balanced_subset(p);
    const int oracle_best = oracle::max_balanced_subset(p.deviations, p.tolerances);
    const auto reference = pm::brute_force_reference(p);
    if (solved.objective == oracle_best && reference.objective == oracle_best) ++agree;
    if (pm::satisfies_balance(p, solved.selected)) ++feasible;
  }
  v.require(agree == 500, "solver = enumeration on " + std::to_string(agree) + "/500");
  v.require(feasible == 500, "feasible selections " + std::to_string(feasible) + "/500");

  int copy_agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 11);
    const int K = 1 + static_cast<int>(rng() % 3);
    pm::BalanceProblem p;
    p.deviations.resize(n, K);
    for (int t = 0; t < n; ++t)
      for (int k = 0; k < K; ++k) p.deviations(t, k) = normal(rng);
    for (int k = 0; k < K; ++k) p.tolerances.push_back(delta(rng));
    if (pm::solve_max_balanced_subset(p).objective ==
        pm::profile_match_via_copy(p).objective)
      ++copy_agree;
  }
  v.require(copy_agree == 200,
            "single vs copy formulation " + std::to_string(copy_agree) + "/200");
}

void assignment_exactness(Verdict& v) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd cost(7, 7);
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j)
        cost(i, j) = trial % 2 ? std::floor(u(rng) / 2.0) : u(rng);
    const auto a = pm::solve_assignment(cost);
    double total = 0;
    std::set<std::size_t> used(a.column_of_row.begin(), a.column_of_row.end());
    for (int i = 0; i < 7; ++i) total += cost(i, static_cast<Eigen::Index>(a.column_of_row[i]));
    if (used.size() == 7 && std::abs(total - oracle::min_assignment(cost)) <= 1e-9 &&
        std::abs(a.total - total) <= 1e-9)
      ++agree;
  }
  v.require(agree == 200, "Hungarian = 7! enumeration on " + std::to_string(agree) + "/200");
}

std::vector<double> random_differences(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> d(n);
  std::normal_distribution<double> normal(0.3, 1.0);
  const bool ties = rng() % 2;
  for (auto& x : d)
    x = ties ? static_cast<double>(static_cast<int>(rng() % 7) - 2) : normal(rng);
  return d;
}

void test_oracles(Verdict& v) {
  std::mt19937_64 rng(8);
  int wilcoxon_ok = 0, wilcoxon_cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = random_differences(rng, 1 + rng() % 10);
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) {
      bool threw = false;
      try {
        pm::wilcoxon_signed_rank(d, pm::WilcoxonMode::exact);
      } catch (const pm::DegenerateError&) {
        threw = true;
      }
      wilcoxon_ok += threw;
      ++wilcoxon_cases;
      continue;
    }
    const auto r = pm::wilcoxon_signed_rank(d, pm::WilcoxonMode::exact);
    const auto o = oracle::signed_rank_enumeration(d);
    const double two = std::min(1.0, 2.0 * std::min(o.upper, o.lower));
    wilcoxon_ok += std::abs(r.t_plus - o.t_plus) < 1e-12 && std::abs(r.p_upper - o.upper) < 1e-12 &&
                   std::abs(r.p_two_sided - two) < 1e-12;
    ++wilcoxon_cases;
  }
  v.require(wilcoxon_ok == 1000,
            "exact Wilcoxon = enumeration " + std::to_string(wilcoxon_ok) + "/" +
                std::to_string(wilcoxon_cases));

  int mcnemar_ok = 0;
  for (int trial = 0; trial < 500; ++trial) {
    pm::PairedBinary b{rng() % 20, rng() % 40, rng() % 40, rng() % 20};
    const auto r = pm::mcnemar_test(b, pm::McNemarMode::exact);
    const unsigned D = static_cast<unsigned>(b.discordant());
    const unsigned k = static_cast<unsigned>(std::max(b.n10, b.n01));
    const double one = D == 0 ? 1.0 : oracle::sign_test_tail(D, k);
    const double two = std::min(1.0, 2.0 * one);
    mcnemar_ok += std::abs(r.p_one_sided - one) <= 1e-12 && std::abs(r.p_two_sided - two) <= 1e-12;
  }
  v.require(mcnemar_ok == 500, "McNemar exact = binomial tail " + std::to_string(mcnemar_ok) + "/500");

  int gamma1_ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    if (trial % 2 == 0) {
      pm::PairedBinary b{rng() % 10, 1 + rng() % 30, rng() % 30, rng() % 10};
      gamma1_ok += pm::gamma_binary_p(b, 1.0) ==
                   pm::mcnemar_test(b, pm::McNemarMode::exact).p_one_sided;
    } else {
      auto d = random_differences(rng, 5 + rng() % 40);
      d.push_back(1.5);
      const auto w = pm::wilcoxon_signed_rank(d, pm::WilcoxonMode::normal, false);
      const double z = std::abs(w.t_plus - w.expected) / std::sqrt(w.variance);
      gamma1_ok += std::abs(pm::gamma_rank_p(d, 1.0) - oracle::Phi(-z)) <= 1e-12;
    }
  }
  v.require(gamma1_ok == 200, "Gamma = 1 equals base one-sided test " +
                                  std::to_string(gamma1_ok) + "/200");

  int bracket_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    pm::GammaResult g;
    std::function<double(double)> p;
    std::vector<double> d;
    pm::PairedBinary b;
    if (trial % 2 == 0) {
      b = {rng() % 10, 5 + rng() % 60, rng() % 15, rng() % 10};
      g = pm::rosenbaum_gamma_binary(b);
      p = [&](double gamma) { return pm::gamma_binary_p(b, gamma); };
    } else {
      d = random_differences(rng, 10 + rng() % 60);
      for (auto& x : d) x += 0.8;
      d.push_back(2.0);
      g = pm::rosenbaum_gamma_rank(d);
      p = [&](double gamma) { return pm::gamma_rank_p(d, gamma); };
    }
    bool ok;
    if (!g.gamma_star)
      ok = p(1.0) > g.alpha;
    else if (g.at_ceiling)
      ok = p(100.0) <= g.alpha;
    else
      ok = p(*g.gamma_star) <= g.alpha && p(*g.gamma_star + 0.005) > g.alpha;
    bracket_ok += ok;
  }
  v.require(bracket_ok == 100, "Gamma* brackets alpha to 0.005 on " +
                                   std::to_string(bracket_ok) + "/100");
}

void glm_fidelity(Verdict& v) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const Eigen::Vector3d truth(-0.3, 0.8, -0.5);
  int recovered = 0, score_ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool probit = trial % 2 == 0;
    const int n = 1000;
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      x(i, 1) = normal(rng);
      x(i, 2) = unif(rng) < 0.4 ? 1.0 : 0.0;
      const double eta = x.row(i).dot(truth);
      const double p = probit ? oracle::Phi(eta) : 1.0 / (1.0 + std::exp(-eta));
      y[i] = unif(rng) < p ? 1.0 : 0.0;
    }
    const auto fit = pm::fit_binary_glm(x, y, probit ? pm::Link::probit : pm::Link::logit);
    const double score = oracle::glm_score(x, y, fit.coefficients, probit).cwiseAbs().maxCoeff();
    score_ok += fit.converged && score < 1e-6;
    const auto cov = oracle::glm_covariance(x, fit.coefficients, probit);
    bool inside = true;
    for (int j = 0; j < 3; ++j)
      inside = inside && std::abs(fit.coefficients[j] - truth[j]) <= 3.0 * std::sqrt(cov(j, j));
    recovered += inside;
  }
  v.require(score_ok == 200, "score norm < 1e-6 on " + std::to_string(score_ok) + "/200");
  v.require(recovered >= 190, "within 3 SE on " + std::to_string(recovered) + "/200");

  int closed_ok = 0, closed_cases = 0;
  for (int n : {10, 57, 400, 2001})
    for (int k = 1; k < n; k += std::max(1, n / 7)) {
      Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, 1);
      Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < k; ++i) y[i] = 1.0;
      const auto fit = pm::fit_binary_glm(x, y, pm::Link::probit);
      closed_ok += std::abs(fit.coefficients[0] - oracle::Phi_inv(double(k) / n)) <= 1e-6;
      ++closed_cases;
    }
  v.require(closed_ok == closed_cases, "intercept-only probit = inverse-normal(k/n) on " +
                                           std::to_string(closed_ok) + "/" +
                                           std::to_string(closed_cases));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int shell(const std::string& cmd) { return std::system(cmd.c_str()); }

void determinism(Verdict& v) {
  const fs::path dir = fs::temp_directory_path() / ("profmatch_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string cli = PROFMATCH_CLI_PATH;

  pm::ScenarioSpec s;
  s.n_cohort = 600;
  s.master_seed = 5;
  auto data = pm::generate_cohort(s, 0);
  pm::CsvTable table;
  for (const auto& name : data.names()) table.header.push_back(name);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < data.cols(); ++j) {
      const double x = data.column(j)[i];
      row.push_back(std::isnan(x) ? "" : pm::format_significant(x, 17));
    }
    table.rows.push_back(std::move(row));
  }
  pm::write_output((dir / "cohort.csv").string(), pm::to_csv(table));

  struct Run {
    std::string name;
    std::string args;
    std::vector<std::string> outputs;
  };
  const std::vector<Run> runs = {
      {"simulate pm", "simulate --reps 6 --bootstrap-b 20 --gap 1 --seed 11 --precision full --out {}/sim_pm.csv",
       {"sim_pm.csv"}},
      {"simulate aiow", "simulate --method aiow --overlap low --om 3 --reps 6 --bootstrap-b 20 --seed 11 --precision full --out {}/sim_aiow.csv",
       {"sim_aiow.csv"}},
      {"match", "match --data {}/cohort.csv --treatment Z --outcome Y --selection S --covariates X1,X2,X3,X4,X5,X6 --groups 0,1 --gap 1 --bootstrap 40 --seed 3 --precision full --out {}/m.csv --report {}/r.csv --estimate {}/e.csv",
       {"m.csv", "r.csv", "e.csv"}},
  };
  for (const auto& r : runs) {
    std::string args = r.args;
    for (auto pos = args.find("{}"); pos != std::string::npos; pos = args.find("{}"))
      args.replace(pos, 2, dir.string());
    std::map<int, std::vector<std::string>> bytes;
    bool ran = true;
    for (int workers : {1, 8}) {
      const std::string cmd =
          "\"" + cli + "\" --workers " + std::to_string(workers) + " " + args + " 2>/dev/null";
      ran = ran && shell(cmd) == 0;
      for (const auto& o : r.outputs) bytes[workers].push_back(slurp(dir / o));
    }
    bool same = ran;
    for (std::size_t i = 0; i < r.outputs.size(); ++i)
      same = same && !bytes[1][i].empty() && bytes[1][i] == bytes[8][i];
    v.require(same, r.name + " identical at 1 and 8 workers");
  }
  fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<void(Verdict&)>>> criteria = {
      {"balance by construction", balance_by_construction},
      {"effective sample size", effective_sample_size},
      {"accuracy", accuracy},
      {"coverage and length", coverage},
      {"heterogeneity", heterogeneity},
      {"solver exactness", solver_exactness},
      {"assignment exactness", assignment_exactness},
      {"test oracles", test_oracles},
      {"glm fidelity", glm_fidelity},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(number)) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "threw: " << e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << number << " ("
              << criteria[i].first << ", " << fmt(secs, 3) << " s): " << v.detail.str()
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
