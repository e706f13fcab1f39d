#pragma once

// Score-axis geometry of an idealized stage chain.
//
// beta is the stage-1 gap, eta_i the drop of the mean real score from
// critic i to critic i+1, and phi_i the rise of the mean fake score from
// stage i to stage i+1. Equal spacing at equilibrium gives
//   phi_1 = (beta - eta_1) / 2,   phi_i = (phi_{i-1} - eta_i) / 2,
// and the total gap reduction TGR(N+1) = sum_i (eta_i + phi_i) = beta - phi_N.

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gogan/errors.hpp"
#include "gogan/rng.hpp"
#include "gogan/text.hpp"
#include "gogan/trainer.hpp"

namespace gogan {

struct GapGeometry {
  double beta = 1.0;
  std::vector<double> etas;
  std::vector<double> phis;  // as far as the recursion stayed feasible
  bool feasible = true;
  std::optional<std::size_t> infeasible_at;  // 1-based stage of the first negative phi

  std::size_t stages() const { return etas.size(); }
};

// Runs the phi recursion; stops at the first negative phi and flags the
// configuration infeasible.
inline GapGeometry phi_recursion(double beta, const std::vector<double>& etas) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be positive and finite");
  for (double e : etas) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw DomainError("etas must be nonnegative and finite");
  }
  GapGeometry g;
  g.beta = beta;
  g.etas = etas;
  double prev = beta;
  for (std::size_t i = 0; i < etas.size(); ++i) {
    const double phi = (prev - etas[i]) / 2.0;
    if (phi < 0.0) {
      g.feasible = false;
      g.infeasible_at = i + 1;
      break;
    }
    g.phis.push_back(phi);
    prev = phi;
  }
  return g;
}

namespace detail {

inline void require_feasible(const GapGeometry& g, const char* what) {
  if (!g.feasible) {
    throw DomainError(std::string(what) + ": infeasible geometry (negative phi at stage " +
                      std::to_string(g.infeasible_at.value_or(0)) + ")");
  }
  if (g.etas.empty()) throw DomainError(std::string(what) + ": geometry has no stages");
  if (g.phis.size() != g.etas.size()) throw DomainError(std::string(what) + ": phis and etas disagree in length");
}

}  // namespace detail

// TGR(N+1) by direct summation of (eta_i + phi_i).
inline double tgr_sum(const GapGeometry& g) {
  detail::require_feasible(g, "tgr_sum");
  double total = 0.0;
  for (std::size_t i = 0; i < g.etas.size(); ++i) total += g.etas[i] + g.phis[i];
  return total;
}

// TGR(N+1) as beta - phi_N.
inline double tgr_closed_form(const GapGeometry& g) {
  detail::require_feasible(g, "tgr_closed_form");
  return g.beta - g.phis.back();
}

struct HalfBound {
  bool holds = false;
  double margin = 0.0;  // TGR(N+1) - beta/2
};

inline HalfBound check_half_bound(const GapGeometry& g) {
  const double tgr = tgr_sum(g);
  return {tgr >= g.beta / 2.0, tgr - g.beta / 2.0};
}

// The first n stages of g (n >= 1), i.e. the geometry up to stage n+1.
inline GapGeometry truncate(const GapGeometry& g, std::size_t n) {
  return phi_recursion(g.beta, std::vector<double>(g.etas.begin(), g.etas.begin() + static_cast<std::ptrdiff_t>(n)));
}

// Random feasible geometry: eta_i drawn uniformly from [0, phi_{i-1}].
inline GapGeometry random_feasible_geometry(Rng& rng, std::size_t max_stages = 8) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> stages(1, max_stages);
  const double beta = 0.1 + 9.9 * unit(rng);
  const std::size_t n = stages(rng);
  std::vector<double> etas;
  double prev = beta;
  for (std::size_t i = 0; i < n; ++i) {
    const double eta = prev * unit(rng);
    etas.push_back(eta);
    prev = (prev - eta) / 2.0;
  }
  return phi_recursion(beta, etas);
}

// ---------------------------------------------------------------------------
// Empirical geometry from a trained chain

struct StageScores {
  double real = 0.0;  // mean D_k(x)
  double fake = 0.0;  // mean D_k(G_k(z))
};

struct EmpiricalGeometry {
  double beta = 0.0;
  std::vector<double> etas;       // eta_i = mean D_i(x) - mean D_{i+1}(x)
  std::vector<double> phis;       // phi_i = mean D_{i+1}(G_{i+1}) - mean D_i(G_i)
  std::vector<double> residuals;  // phi_i - (phi_{i-1} - eta_i) / 2, phi_0 = beta
  std::vector<StageScores> scores;
};

inline EmpiricalGeometry geometry_from_scores(const std::vector<StageScores>& scores) {
  if (scores.size() < 2) throw UsageError("empirical geometry needs at least 2 stages");
  EmpiricalGeometry g;
  g.scores = scores;
  g.beta = scores[0].real - scores[0].fake;
  double prev_phi = g.beta;
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    const double eta = scores[i].real - scores[i + 1].real;
    const double phi = scores[i + 1].fake - scores[i].fake;
    g.etas.push_back(eta);
    g.phis.push_back(phi);
    g.residuals.push_back(phi - (prev_phi - eta) / 2.0);
    prev_phi = phi;
  }
  return g;
}

inline EmpiricalGeometry empirical_geometry(const GoGANChain& chain, const Tensor& eval_real, const Tensor& eval_noise) {
  if (chain.stages.size() < 2) throw UsageError("empirical geometry needs at least 2 stages");
  std::vector<StageScores> scores;
  for (const auto& stage : chain.stages) {
    scores.push_back({mean_score(stage.critic, eval_real), mean_score(stage.critic, generate(stage.generator, eval_noise))});
  }
  return geometry_from_scores(scores);
}

inline std::string empirical_geometry_text(const EmpiricalGeometry& g) {
  std::ostringstream out;
  out << "beta " << format_real(g.beta) << "\n";
  out << "stage,real_mean,fake_mean\n";
  for (std::size_t k = 0; k < g.scores.size(); ++k) {
    out << k + 1 << "," << format_real(g.scores[k].real) << "," << format_real(g.scores[k].fake) << "\n";
  }
  out << "i,eta,phi,residual\n";
  for (std::size_t i = 0; i < g.etas.size(); ++i) {
    out << i + 1 << "," << format_real(g.etas[i]) << "," << format_real(g.phis[i]) << ","
        << format_real(g.residuals[i]) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  GapGeometry geometry;
  double tgr = 0.0;
  double closed_form = 0.0;
  double bound_margin = 0.0;
  bool identity_ok = false;    // |sum - closed form| < tol
  bool bound_ok = false;       // TGR >= beta/2, equality only when N = 1 and eta_1 = 0
  bool monotone_ok = false;    // TGR(k+1) > TGR(k) along the chain
  bool recursion_ok = false;   // phis match an independent recomputation
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  std::size_t identity_pass = 0, bound_pass = 0, monotone_pass = 0, recursion_pass = 0, feasible = 0;

  bool all_pass() const {
    return identity_pass == feasible && bound_pass == feasible && monotone_pass == feasible &&
           recursion_pass == feasible;
  }
};

inline SweepRow evaluate_geometry(const GapGeometry& g, double tol = 1e-12) {
  SweepRow row;
  row.geometry = g;
  if (!g.feasible) return row;
  row.tgr = tgr_sum(g);
  row.closed_form = tgr_closed_form(g);
  const HalfBound hb = check_half_bound(g);
  row.bound_margin = hb.margin;
  row.identity_ok = std::abs(row.tgr - row.closed_form) < tol * std::max(1.0, g.beta);
  const bool tight_case = g.stages() == 1 && g.etas[0] == 0.0;
  row.bound_ok = hb.holds && (tight_case ? std::abs(hb.margin) <= tol * std::max(1.0, g.beta) : hb.margin > 0.0);

  row.monotone_ok = true;
  double prev_tgr = 0.0;  // TGR(1) = 0: no reduction before stage 2
  for (std::size_t n = 1; n <= g.stages(); ++n) {
    const double t = tgr_sum(truncate(g, n));
    const bool prev_phi_positive = n == 1 || g.phis[n - 2] > 0.0;
    if (prev_phi_positive && !(t > prev_tgr)) row.monotone_ok = false;
    prev_tgr = t;
  }

  row.recursion_ok = true;
  double phi = g.beta;
  for (std::size_t i = 0; i < g.stages(); ++i) {
    phi = 0.5 * phi - 0.5 * g.etas[i];
    if (std::abs(phi - g.phis[i]) > tol * std::max(1.0, g.beta)) row.recursion_ok = false;
  }
  return row;
}

inline SweepSummary run_theory_sweep(std::size_t configs, std::uint64_t seed, std::size_t max_stages = 8) {
  Rng rng = substream(seed, "theory/sweep");
  SweepSummary summary;
  // The tight boundary case always leads the sweep.
  summary.rows.push_back(evaluate_geometry(phi_recursion(1.0, {0.0})));
  while (summary.rows.size() < configs) summary.rows.push_back(evaluate_geometry(random_feasible_geometry(rng, max_stages)));
  for (const auto& r : summary.rows) {
    if (!r.geometry.feasible) continue;
    ++summary.feasible;
    summary.identity_pass += r.identity_ok;
    summary.bound_pass += r.bound_ok;
    summary.monotone_pass += r.monotone_ok;
    summary.recursion_pass += r.recursion_ok;
  }
  return summary;
}

inline std::string sweep_csv(const SweepSummary& s) {
  auto list = [](const std::vector<double>& v) { return join(v, ";", [](double x) { return format_real(x); }); };
  std::string out = "beta,etas,phis,tgr,bound_margin,feasible\n";
  for (const auto& r : s.rows) {
    out += format_real(r.geometry.beta) + "," + list(r.geometry.etas) + "," + list(r.geometry.phis) + "," +
           format_real(r.tgr) + "," + format_real(r.bound_margin) + "," + (r.geometry.feasible ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace gogan
