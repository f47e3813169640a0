// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "iscc/evalsim.hpp"
#include "iscc/oracle.hpp"
#include "iscc/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

using namespace iscc;

namespace {

constexpr int kScenarios = 100;
constexpr std::uint64_t kSeed = 42;

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail, double seconds) {
  std::printf("[%s] %2d %-28s %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, name, detail.c_str(),
              seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int cells = 0, bad = 0;
  for (int k = 1; k <= 2; ++k) {
    for (int l = 2; l <= 3; ++l) {
      for (int n = 1; n <= 2; ++n) {
        for (std::uint64_t s = 0; s < 10; ++s) {
          ScenarioConfig cfg;
          cfg.devices.count = k;
          cfg.devices.feature_count = n;
          cfg.statistics.num_classes = l;
          cfg.system.latency_budget = 1.85 * k / 3.0;
          const Problem p = build_scenario(cfg, derive_seed(kSeed, s)).problem();
          const SolveReport rep = solve_p2(p, SolverConfig{});
          const OracleResult o = grid_optimum(p);
          ++cells;
          if (!rep.ok() || !o.found) {
            ++bad;
            continue;
          }
          const double gap = std::abs(rep.gain - o.value) / o.value;
          worst = std::max(worst, gap);
          if (gap > 0.01) ++bad;
        }
      }
    }
  }
  report(1, "oracle equivalence", bad == 0,
         fmt("%d cells, %d outside 1%%, worst relative gap %.2e", cells, bad, worst),
         seconds_since(t0));
}

struct ScenarioRuns {
  std::vector<Problem> problems;
  std::vector<std::map<Scheme, SolveReport>> reports;
  double seconds = 0.0;
};

ScenarioRuns default_runs() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioRuns runs;
  for (int s = 0; s < kScenarios; ++s) {
    const std::uint64_t seed = derive_seed(kSeed, static_cast<std::uint64_t>(s));
    runs.problems.push_back(build_scenario(ScenarioConfig{}, seed).problem());
    SolverConfig cfg;
    cfg.seed = derive_seed(seed, 3);
    std::map<Scheme, SolveReport> r;
    for (Scheme sc : {Scheme::optimal, Scheme::power_aware, Scheme::time_aware,
                      Scheme::quantization_aware}) {
      r.emplace(sc, solve_scheme(sc, runs.problems.back(), cfg));
    }
    runs.reports.push_back(std::move(r));
  }
  runs.seconds = seconds_since(t0);
  return runs;
}

void kkt_certification(const ScenarioRuns& runs) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_stat = 0.0, worst_cs = 0.0;
  int checked = 0, bad = 0;
  for (std::size_t i = 0; i < runs.problems.size(); ++i) {
    for (const auto& [scheme, rep] : runs.reports[i]) {
      if (!rep.ok() || !rep.final_p4.converged) continue;
      SolverConfig cfg;
      cfg.seed = derive_seed(derive_seed(kSeed, i), 3);
      const Pins pins = scheme == Scheme::optimal ? Pins{} : baseline_pins(scheme, runs.problems[i], cfg);
      const KktReport k =
          kkt_residual(runs.problems[i], rep.final_aux, rep.transformed.comm_time, rep.final_p4, pins);
      ++checked;
      worst_stat = std::max(worst_stat, k.stationarity_norm);
      worst_cs = std::max(worst_cs, k.complementary_slackness);
      if (!(k.stationarity_norm <= 1e-4) || !(k.complementary_slackness <= 1e-6)) ++bad;
    }
  }
  report(2, "KKT certification", bad == 0 && checked > 0,
         fmt("%d solutions, %d failing, worst stationarity %.2e, worst slackness %.2e", checked,
             bad, worst_stat, worst_cs),
         runs.seconds + seconds_since(t0));
}

void outer_monotonicity(const ScenarioRuns& runs) {
  double worst = 0.0;
  int bad = 0, runs_checked = 0;
  for (const auto& r : runs.reports) {
    const auto& rep = r.at(Scheme::optimal);
    ++runs_checked;
    if (!rep.ok()) {
      ++bad;
      continue;
    }
    for (std::size_t i = 1; i < rep.objective_trace.size(); ++i) {
      const double prev = rep.objective_trace[i - 1];
      const double drop = (prev - rep.objective_trace[i]) / std::abs(prev);
      worst = std::max(worst, drop);
      if (drop > 1e-6) ++bad;
    }
  }
  report(3, "sum-of-ratios monotonicity", bad == 0,
         fmt("%d runs, %d violations, largest relative drop %.2e", runs_checked, bad, worst), 0.0);
}

void inner_monotonicity(const ScenarioRuns& runs) {
  int updates = 0, bad = 0, rejected = 0;
  double worst = 0.0;
  for (const auto& r : runs.reports) {
    for (const auto& a : r.at(Scheme::optimal).alternations) {
      ++updates;
      // A rejected trial split leaves the previous schedule in place.
      const double adopted = a.accepted ? a.after : a.before;
      if (!a.accepted) ++rejected;
      worst = std::max(worst, a.before - adopted);
      if (adopted < a.before - 1e-8) ++bad;
    }
  }
  report(4, "time-update monotonicity", bad == 0 && updates > 0,
         fmt("%d updates (%d trial splits rejected), %d violations, largest drop %.2e", updates,
             rejected, bad, worst),
         0.0);
}

void feasibility(const ScenarioRuns& runs) {
  int returned = 0, bad = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < runs.problems.size(); ++i) {
    const Problem& p = runs.problems[i];
    for (const auto& [scheme, rep] : runs.reports[i]) {
      if (rep.transformed.size() == 0) continue;
      ++returned;
      const auto f = check_feasibility(p.devices(), p.sys(), rep.allocation);
      double slack = f.latency_slack;
      slack = std::min({slack, f.capacity_slack.minCoeff(), f.energy_slack.minCoeff()});
      worst = std::min(worst, slack);
      if (!f.feasible) ++bad;
    }
  }
  report(5, "feasibility", bad == 0 && returned > 0,
         fmt("%d allocations, %d infeasible, most negative slack %.2e", returned, bad, worst), 0.0);
}

void scheme_ordering(const ScenarioRuns& runs) {
  int wins = 0;
  std::map<Scheme, double> mean;
  for (const auto& r : runs.reports) {
    const double g = r.at(Scheme::optimal).ok() ? r.at(Scheme::optimal).gain : 0.0;
    bool win = r.at(Scheme::optimal).ok();
    for (const auto& [scheme, rep] : r) {
      const double gb = rep.ok() ? rep.gain : 0.0;
      mean[scheme] += gb / static_cast<double>(runs.reports.size());
      if (scheme != Scheme::optimal && g < gb * (1 - 1e-6)) win = false;
    }
    wins += win ? 1 : 0;
  }
  report(6, "scheme ordering", wins >= 99,
         fmt("optimal >= all baselines in %d/%d; mean G optimal %.3f, quantization_aware %.3f, "
             "time_aware %.3f, power_aware %.3f",
             wins, kScenarios, mean[Scheme::optimal], mean[Scheme::quantization_aware],
             mean[Scheme::time_aware], mean[Scheme::power_aware]),
         0.0);
}

struct TrendCheck {
  int steps = 0, bad = 0;
  double worst = 0.0;  // largest decrease in pooled standard errors
};

void check_trend(const std::vector<CellSummary>& cells, bool accuracy, TrendCheck& t) {
  std::map<Scheme, std::vector<const CellSummary*>> by;
  for (const auto& c : cells) by[c.scheme].push_back(&c);
  for (auto& [scheme, v] : by) {
    std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->value < b->value; });
    for (std::size_t i = 1; i < v.size(); ++i) {
      const double a = accuracy ? v[i - 1]->mean_accuracy : v[i - 1]->mean_gain;
      const double b = accuracy ? v[i]->mean_accuracy : v[i]->mean_gain;
      const double se = accuracy ? pooled_se(v[i - 1]->se_accuracy, v[i]->se_accuracy)
                                 : pooled_se(v[i - 1]->se_gain, v[i]->se_gain);
      ++t.steps;
      if (a - b > se) ++t.bad;
      if (a > b) t.worst = std::max(t.worst, se > 0 ? (a - b) / se : INFINITY);
    }
  }
}

SweepSpec sweep(SweptParam param, std::vector<double> values, int accuracy_samples) {
  SweepSpec s;
  s.param = param;
  s.values = std::move(values);
  s.repetitions = 20;
  s.seed = kSeed;
  s.accuracy_samples = accuracy_samples;
  return s;
}

struct Plateau {
  bool pass = false;
  std::string detail;
};

Plateau budget_trends() {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepResult energy =
      run_sweep(sweep(SweptParam::energy_budget, {0.05, 0.1, 0.15, 0.2, 0.25, 0.3}, 0));
  const SweepResult latency =
      run_sweep(sweep(SweptParam::latency, {1.85, 1.98, 2.11, 2.24, 2.37, 2.5}, 0));
  TrendCheck t;
  check_trend(energy.summary, false, t);
  check_trend(latency.summary, false, t);
  int nonconverged = 0;
  for (const auto* r : {&energy, &latency}) {
    for (const auto& row : r->rows) {
      if (row.termination == Termination::dual_nonconvergence ||
          row.termination == Termination::max_iterations) {
        ++nonconverged;
      }
    }
  }
  const double secs = seconds_since(t0);
  report(7, "budget monotonicity", t.bad == 0,
         fmt("%d steps over 4 schemes, %d decreases beyond 1 pooled SE (worst %.2f SE), %d "
             "non-converged cells",
             t.steps, t.bad, t.worst, nonconverged),
         secs);

  std::vector<const CellSummary*> pa;
  for (const auto& c : latency.summary) {
    if (c.scheme == Scheme::power_aware) pa.push_back(&c);
  }
  std::sort(pa.begin(), pa.end(), [](auto* a, auto* b) { return a->value < b->value; });
  const auto* hi = pa[pa.size() - 1];
  const auto* lo = pa[pa.size() - 2];
  const double diff = std::abs(hi->mean_gain - lo->mean_gain);
  const double se = pooled_se(hi->se_gain, lo->se_gain);
  return {diff < se,
          fmt("mean G %.4f at T=%.2f vs %.4f at T=%.2f, difference %.4f, pooled SE %.4f",
              lo->mean_gain, lo->value, hi->mean_gain, hi->value, diff, se)};
}

void device_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepResult r = run_sweep(sweep(SweptParam::device_count, {1, 2, 3, 4}, 10000));
  TrendCheck g, a;
  check_trend(r.summary, false, g);
  check_trend(r.summary, true, a);
  double g1 = 0, g4 = 0, a1 = 0, a4 = 0;
  for (const auto& c : r.summary) {
    if (c.scheme != Scheme::optimal) continue;
    if (c.value == 1) g1 = c.mean_gain, a1 = c.mean_accuracy;
    if (c.value == 4) g4 = c.mean_gain, a4 = c.mean_accuracy;
  }
  report(8, "device-count trend", g.bad == 0 && a.bad == 0,
         fmt("G: %d/%d steps decrease beyond 1 SE; accuracy: %d/%d; optimal G %.2f -> %.2f, "
             "accuracy %.3f -> %.3f",
             g.bad, g.steps, a.bad, a.steps, g1, g4, a1, a4),
         seconds_since(t0));
}

void gain_accuracy() {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem p = build_scenario(ScenarioConfig{}, kSeed).problem();
  const SolveReport rep = solve_p2(p, SolverConfig{});
  if (!rep.ok()) {
    report(9, "accuracy-gain monotonicity", false, "base solve failed: " + rep.message,
           seconds_since(t0));
    return;
  }
  const auto ladder = gain_ladder(p, rep.transformed, kGainLadderFactors, 10000, kSeed);
  std::vector<double> g, acc;
  for (const auto& pt : ladder) {
    g.push_back(pt.gain);
    acc.push_back(pt.accuracy);
  }
  const double rho = spearman(g, acc);
  report(9, "accuracy-gain monotonicity", rho > 0.95,
         fmt("Spearman %.4f over %zu ladder points, accuracy %.3f -> %.3f", rho, ladder.size(),
             acc.front(), acc.back()),
         seconds_since(t0));
}

}  // namespace

int main() {
  oracle_equivalence();
  const ScenarioRuns runs = default_runs();
  kkt_certification(runs);
  outer_monotonicity(runs);
  inner_monotonicity(runs);
  feasibility(runs);
  scheme_ordering(runs);
  const Plateau plateau = budget_trends();
  device_trend();
  gain_accuracy();
  report(10, "power-aware latency plateau", plateau.pass, plateau.detail, 0.0);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
