#include "rolediv/fqi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include "rolediv/error.hpp"
#include "rolediv/parallel.hpp"
#include "rolediv/simplex.hpp"

namespace rolediv::fqi {

// ------------------------------------------------------------------- spec

void FiniteMDPSpec::validate() const {
  if (agents.empty()) throw Error("bad-spec", "at least one agent is required");
  if (!(gamma >= 0 && gamma < 1)) throw Error("bad-spec", "gamma must lie in [0, 1)");
  if (!(reward_bound > 0)) throw Error("bad-spec", "reward bound must be positive");
  if (reward_noise < 0) throw Error("bad-spec", "reward noise must be non-negative");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const std::string who = "agent " + std::to_string(i);
    if (a.states < 1 || a.actions < 1) throw Error("bad-spec", who + ": empty state or action set");
    if (a.transition.rows() != a.cells() || a.transition.cols() != a.states)
      throw Error("bad-kernel", who + ": transition has the wrong shape");
    for (int c = 0; c < a.cells(); ++c) {
      if ((a.transition.row(c).array() < 0).any() ||
          std::abs(a.transition.row(c).sum() - 1.0) > 1e-9)
        throw Error("bad-kernel", who + ": row " + std::to_string(c) + " is not stochastic");
    }
    if (a.reward.rows() != a.states || a.reward.cols() != a.actions)
      throw Error("bad-spec", who + ": reward has the wrong shape");
    if (a.reward.cwiseAbs().maxCoeff() + reward_noise > reward_bound + 1e-12)
      throw Error("bad-spec", who + ": |r| + noise exceeds the reward bound");
  }
  if (team_weights.size() != 0) {
    if (team_weights.size() != agent_count() || !on_simplex(team_weights))
      throw Error("bad-spec", "team weights must be a simplex vector with one entry per agent");
  }
  if (shared_reward) {
    if (!homogeneous_shapes()) throw Error("bad-spec", "shared reward needs identical shapes");
    for (const auto& a : agents)
      if (a.reward != agents.front().reward)
        throw Error("bad-spec", "shared reward flag set but reward tables differ");
  }
  const double joint = static_cast<double>(joint_states()) * static_cast<double>(joint_actions());
  if (joint * static_cast<double>(joint_states()) > 5e7)
    throw Error("bad-spec", "joint MDP too large for the exact oracle");
}

Eigen::VectorXd FiniteMDPSpec::weights() const {
  if (team_weights.size() != 0) return team_weights;
  return Eigen::VectorXd::Constant(agent_count(), 1.0 / agent_count());
}

long FiniteMDPSpec::joint_states() const {
  long n = 1;
  for (const auto& a : agents) n *= a.states;
  return n;
}

long FiniteMDPSpec::joint_actions() const {
  long n = 1;
  for (const auto& a : agents) n *= a.actions;
  return n;
}

bool FiniteMDPSpec::homogeneous_shapes() const {
  for (const auto& a : agents)
    if (a.states != agents.front().states || a.actions != agents.front().actions) return false;
  return true;
}

// ----------------------------------------------------------------- oracle

Eigen::MatrixXd value_iteration(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& reward,
                                double gamma, double tol) {
  const Eigen::Index S = reward.rows(), A = reward.cols();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(S, A);
  for (int iter = 0; iter < 10'000'000; ++iter) {
    const Eigen::VectorXd v = q.rowwise().maxCoeff();
    const Eigen::VectorXd next_v = transition * v;  // one entry per (z, u) cell
    Eigen::MatrixXd next = reward;
    for (Eigen::Index z = 0; z < S; ++z)
      for (Eigen::Index u = 0; u < A; ++u) next(z, u) += gamma * next_v[z * A + u];
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    // ||Q_k - Q*|| <= gamma / (1 - gamma) * ||Q_k - Q_{k-1}||
    if (gamma == 0 || gamma / (1 - gamma) * change <= tol) break;
  }
  return q;
}

Eigen::MatrixXd policy_evaluation(const Eigen::MatrixXd& transition,
                                  const Eigen::MatrixXd& reward, const std::vector<int>& policy,
                                  double gamma) {
  const Eigen::Index S = reward.rows(), A = reward.cols();
  Eigen::MatrixXd p_pi(S, S);
  Eigen::VectorXd r_pi(S);
  for (Eigen::Index z = 0; z < S; ++z) {
    p_pi.row(z) = transition.row(z * A + policy[z]);
    r_pi[z] = reward(z, policy[z]);
  }
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(S, S) - gamma * p_pi;
  const Eigen::VectorXd v = lhs.partialPivLu().solve(r_pi);
  const Eigen::VectorXd next_v = transition * v;
  Eigen::MatrixXd q = reward;
  for (Eigen::Index z = 0; z < S; ++z)
    for (Eigen::Index u = 0; u < A; ++u) q(z, u) += gamma * next_v[z * A + u];
  return q;
}

namespace {

// Mixed-radix decoding with agent 0 most significant.
std::vector<int> decode(long index, const std::vector<int>& radix) {
  std::vector<int> digits(radix.size());
  for (int i = static_cast<int>(radix.size()) - 1; i >= 0; --i) {
    digits[i] = static_cast<int>(index % radix[i]);
    index /= radix[i];
  }
  return digits;
}

std::vector<int> state_radix(const FiniteMDPSpec& spec) {
  std::vector<int> r;
  for (const auto& a : spec.agents) r.push_back(a.states);
  return r;
}

std::vector<int> action_radix(const FiniteMDPSpec& spec) {
  std::vector<int> r;
  for (const auto& a : spec.agents) r.push_back(a.actions);
  return r;
}

}  // namespace

Oracle value_iteration_oracle(const FiniteMDPSpec& spec) {
  spec.validate();
  Oracle out;
  for (const auto& a : spec.agents)
    out.agent_q.push_back(value_iteration(a.transition, a.reward, spec.gamma));

  // Joint MDP: product kernel, team-weighted reward.
  const long JS = spec.joint_states(), JA = spec.joint_actions();
  const auto sr = state_radix(spec), ar = action_radix(spec);
  const Eigen::VectorXd w = spec.weights();
  Eigen::MatrixXd P(JS * JA, JS);
  Eigen::MatrixXd R(JS, JA);
  for (long s = 0; s < JS; ++s) {
    const auto z = decode(s, sr);
    for (long a = 0; a < JA; ++a) {
      const auto u = decode(a, ar);
      double r = 0;
      for (int i = 0; i < spec.agent_count(); ++i) r += w[i] * spec.agents[i].reward(z[i], u[i]);
      R(s, a) = r;
      for (long s2 = 0; s2 < JS; ++s2) {
        const auto z2 = decode(s2, sr);
        double p = 1;
        for (int i = 0; i < spec.agent_count(); ++i) {
          const auto& ag = spec.agents[i];
          p *= ag.transition(z[i] * ag.actions + u[i], z2[i]);
        }
        P(s * JA + a, s2) = p;
      }
    }
  }
  out.joint_q = value_iteration(P, R, spec.gamma);

  if (spec.homogeneous_shapes()) {
    const auto& first = spec.agents.front();
    Eigen::MatrixXd p_bar = Eigen::MatrixXd::Zero(first.transition.rows(), first.transition.cols());
    Eigen::MatrixXd r_bar = Eigen::MatrixXd::Zero(first.states, first.actions);
    for (const auto& a : spec.agents) {
      p_bar += a.transition;
      r_bar += a.reward;
    }
    p_bar /= spec.agent_count();
    r_bar /= spec.agent_count();
    out.shared_q = value_iteration(p_bar, r_bar, spec.gamma);
  }
  return out;
}

// -------------------------------------------------------------- hypothesis

int Hypothesis::cell_of(int z, int states) const {
  if (kind == Kind::exact_tabular) return z;
  return static_cast<int>(static_cast<long>(z) * k / states);
}

int Hypothesis::cell_count(int states) const {
  return kind == Kind::exact_tabular ? states : k;
}

std::string Hypothesis::name() const {
  return kind == Kind::exact_tabular ? "exact" : "aggregated(" + std::to_string(k) + ")";
}

Hypothesis hypothesis_from_string(std::string_view text) {
  if (text == "exact" || text == "exact_tabular") return Hypothesis::exact();
  const std::string_view prefix = "aggregated(";
  if (text.substr(0, prefix.size()) == prefix && text.size() > prefix.size() + 1 &&
      text.back() == ')') {
    const std::string digits(text.substr(prefix.size(), text.size() - prefix.size() - 1));
    try {
      std::size_t used = 0;
      const int k = std::stoi(digits, &used);
      if (used == digits.size() && k >= 1) return Hypothesis::aggregated(k);
    } catch (const std::exception&) {
    }
  }
  throw Error("bad-config", "unknown hypothesis space '" + std::string(text) + "'");
}

std::string_view to_string(FqiMode mode) {
  return mode == FqiMode::separate ? "separate" : "shared";
}

FqiMode fqi_mode_from_string(std::string_view text) {
  if (text == "separate") return FqiMode::separate;
  if (text == "shared") return FqiMode::shared;
  throw Error("bad-config", "unknown FQI mode '" + std::string(text) + "'");
}

// --------------------------------------------------------------------- FQI

const Eigen::MatrixXd& FqiResult::q(int agent, int t) const {
  return iterates[mode == FqiMode::shared ? 0 : agent].at(t);
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<double> cumulative(const Eigen::Ref<const Eigen::RowVectorXd>& p) {
  std::vector<double> c(p.size());
  double total = 0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    total += p[k];
    c[k] = total;
  }
  for (auto& x : c) x /= total;
  c.back() = 1.0;
  return c;
}

int draw(const std::vector<double>& cdf, std::mt19937_64& rng) {
  const double x = uniform01(rng);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
  return std::min(static_cast<int>(it - cdf.begin()), static_cast<int>(cdf.size()) - 1);
}

Eigen::VectorXd local_nu(const LocalMDP& a, const Eigen::VectorXd& nu) {
  if (nu.size() == 0) return Eigen::VectorXd::Constant(a.cells(), 1.0 / a.cells());
  if (nu.size() != a.cells() || (nu.array() < 0).any() || std::abs(nu.sum() - 1) > 1e-9)
    throw Error("bad-config", "sampling distribution does not match the local cells");
  return nu;
}

}  // namespace

FqiResult fqi_run(const FiniteMDPSpec& spec, const FqiOptions& options) {
  spec.validate();
  if (options.samples < 1) throw Error("bad-config", "FQI needs at least one sample");
  if (options.iterations < 0) throw Error("bad-config", "FQI iterations must be non-negative");
  const bool shared = options.mode == FqiMode::shared;
  if (shared && !spec.homogeneous_shapes())
    throw Error("bad-spec", "shared FQI needs identical local shapes");
  const int n = spec.agent_count();
  const int tables = shared ? 1 : n;
  for (const auto& a : spec.agents) {
    if (options.hypothesis.kind == Hypothesis::Kind::aggregated &&
        (options.hypothesis.k < 1 || options.hypothesis.k > a.states))
      throw Error("bad-config", "aggregated(k) needs 1 <= k <= |Z|");
  }

  FqiResult out;
  out.mode = options.mode;
  out.iterates.resize(tables);
  for (int j = 0; j < tables; ++j) {
    const auto& a = spec.agents[j];
    out.iterates[j].push_back(Eigen::MatrixXd::Zero(a.states, a.actions));
  }

  std::vector<std::vector<double>> nu_cdf;
  std::vector<std::vector<std::vector<double>>> kernel_cdf;
  for (const auto& a : spec.agents) {
    nu_cdf.push_back(cumulative(local_nu(a, options.nu).transpose()));
    std::vector<std::vector<double>> rows;
    for (int c = 0; c < a.cells(); ++c) rows.push_back(cumulative(a.transition.row(c)));
    kernel_cdf.push_back(std::move(rows));
  }

  std::mt19937_64 rng(options.seed);
  const auto& h = options.hypothesis;
  for (int t = 1; t <= options.iterations; ++t) {
    std::vector<Eigen::MatrixXd> sums, counts;
    for (int j = 0; j < tables; ++j) {
      const auto& a = spec.agents[j];
      sums.push_back(Eigen::MatrixXd::Zero(h.cell_count(a.states), a.actions));
      counts.push_back(Eigen::MatrixXd::Zero(h.cell_count(a.states), a.actions));
    }
    for (int i = 0; i < n; ++i) {
      const int j = shared ? 0 : i;
      const auto& a = spec.agents[i];
      const Eigen::VectorXd v_prev = out.iterates[j][t - 1].rowwise().maxCoeff();
      for (long s = 0; s < options.samples; ++s) {
        const int c = draw(nu_cdf[i], rng);
        const int z = c / a.actions, u = c % a.actions;
        const int z2 = draw(kernel_cdf[i][c], rng);
        double r = a.reward(z, u);
        if (spec.reward_noise > 0) r += spec.reward_noise * (2 * uniform01(rng) - 1);
        const int hc = h.cell_of(z, a.states);
        sums[j](hc, u) += r + spec.gamma * v_prev[z2];
        counts[j](hc, u) += 1;
      }
    }
    for (int j = 0; j < tables; ++j) {
      const auto& a = spec.agents[j];
      Eigen::MatrixXd next = out.iterates[j][t - 1];
      for (int z = 0; z < a.states; ++z)
        for (int u = 0; u < a.actions; ++u) {
          const int hc = h.cell_of(z, a.states);
          if (counts[j](hc, u) > 0) next(z, u) = sums[j](hc, u) / counts[j](hc, u);
        }
      out.iterates[j].push_back(std::move(next));
    }
  }
  return out;
}

// ----------------------------------------------------------------- weights

WeightFit fit_credit_weights(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& target,
                             const Eigen::VectorXd& mu) {
  const Eigen::Index C = estimates.rows(), n = estimates.cols();
  if (n < 1) throw Error("dimension-mismatch", "no estimate columns");
  if (target.size() != C || mu.size() != C)
    throw Error("dimension-mismatch", "estimates, target and mu lengths differ");
  WeightFit fit;
  if (n == 1) {
    fit.w = Eigen::VectorXd::Ones(1);
    return fit;
  }
  const double scale = std::max(1.0, estimates.cwiseAbs().maxCoeff());
  bool all_equal = true;
  for (Eigen::Index i = 1; i < n && all_equal; ++i)
    all_equal = (estimates.col(i) - estimates.col(0)).cwiseAbs().maxCoeff() <= 1e-12 * scale;
  if (all_equal) {
    fit.w = Eigen::VectorXd::Constant(n, 1.0 / n);
    fit.degenerate = true;
    return fit;
  }

  const Eigen::MatrixXd G = estimates.transpose() * mu.asDiagonal() * estimates;
  const Eigen::VectorXd b = estimates.transpose() * mu.asDiagonal() * target;
  auto objective = [&](const Eigen::VectorXd& w) { return w.dot(G * w) - 2 * b.dot(w); };

  if (n <= 12) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_w;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < n; ++i)
        if ((mask >> i) & 1u) idx.push_back(i);
      const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
      Eigen::VectorXd rhs(m + 1);
      for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index c = 0; c < m; ++c) kkt(a, c) = G(idx[a], idx[c]);
        kkt(a, m) = 1;
        kkt(m, a) = 1;
        rhs[a] = b[idx[a]];
      }
      rhs[m] = 1;
      const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      const double resid_scale =
          kkt.cwiseAbs().maxCoeff() * sol.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff();
      if ((kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-7 * resid_scale) continue;
      Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
      bool feasible = true;
      for (Eigen::Index a = 0; a < m; ++a) {
        if (sol[a] < -1e-12) feasible = false;
        w[idx[a]] = std::max(0.0, sol[a]);
      }
      if (!feasible || w.sum() <= 0) continue;
      w /= w.sum();
      const double f = objective(w);
      if (f < best - 1e-14 * std::max(1.0, std::abs(best))) {
        best = f;
        best_w = w;
      }
    }
    if (best_w.size() == n) {
      fit.w = best_w;
      return fit;
    }
  }

  // Projected gradient for larger agent counts.
  const double lipschitz = 2 * G.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int iter = 0; iter < 100000; ++iter) {
    const Eigen::VectorXd next = project_to_simplex(w - (2 * (G * w - b)) / lipschitz);
    const double step = (next - w).cwiseAbs().maxCoeff();
    w = next;
    if (step < 1e-15) break;
  }
  fit.w = w;
  return fit;
}

Eigen::MatrixXd joint_columns(const FiniteMDPSpec& spec, const std::vector<Eigen::MatrixXd>& q) {
  const long JS = spec.joint_states(), JA = spec.joint_actions();
  const auto sr = state_radix(spec), ar = action_radix(spec);
  Eigen::MatrixXd out(JS * JA, spec.agent_count());
  for (long s = 0; s < JS; ++s) {
    const auto z = decode(s, sr);
    for (long a = 0; a < JA; ++a) {
      const auto u = decode(a, ar);
      for (int i = 0; i < spec.agent_count(); ++i) out(s * JA + a, i) = q[i](z[i], u[i]);
    }
  }
  return out;
}

Eigen::VectorXd flatten_joint(const Eigen::MatrixXd& joint_q) {
  Eigen::VectorXd out(joint_q.size());
  for (Eigen::Index s = 0; s < joint_q.rows(); ++s)
    for (Eigen::Index a = 0; a < joint_q.cols(); ++a) out[s * joint_q.cols() + a] = joint_q(s, a);
  return out;
}

double algorithmic_term(double gamma, double reward_bound, int iterations) {
  return 4.0 * std::pow(gamma, iterations + 1) * reward_bound / ((1 - gamma) * (1 - gamma));
}

double concentration_proxy(const FiniteMDPSpec& spec, const Oracle& oracle,
                           const Eigen::VectorXd& nu) {
  double worst = 0;
  const double g = spec.gamma;
  for (int i = 0; i < spec.agent_count(); ++i) {
    const auto& a = spec.agents[i];
    const Eigen::VectorXd v = local_nu(a, nu);
    std::vector<int> policy(a.states);
    for (int z = 0; z < a.states; ++z) oracle.agent_q[i].row(z).maxCoeff(&policy[z]);

    Eigen::VectorXd d = Eigen::VectorXd::Constant(a.cells(), 1.0 / a.cells());
    double phi = 0;
    for (int m = 1; m < 100000; ++m) {
      const Eigen::RowVectorXd next_state = d.transpose() * a.transition;
      Eigen::VectorXd next = Eigen::VectorXd::Zero(a.cells());
      for (int z = 0; z < a.states; ++z) next[z * a.actions + policy[z]] = next_state[z];
      d = next;
      double chi = 0;
      for (int c = 0; c < a.cells(); ++c) {
        if (d[c] == 0) continue;
        if (v[c] == 0) return std::numeric_limits<double>::infinity();
        chi += d[c] * d[c] / v[c];
      }
      const double weight = std::pow(g, m - 1) * m;
      phi += weight * std::sqrt(chi);
      if (weight < 1e-14) break;
      if (g == 0) break;
    }
    worst = std::max(worst, (1 - g) * (1 - g) * phi);
  }
  return worst;
}

// -------------------------------------------------------------- decompose

namespace {

// ||Pi_H(T q) - T q||_{2,nu} for one local table under its Bellman operator.
double projection_residual(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& reward,
                           double gamma, const Eigen::MatrixXd& q, const Hypothesis& h,
                           const Eigen::VectorXd& nu) {
  const int S = static_cast<int>(reward.rows()), A = static_cast<int>(reward.cols());
  const Eigen::VectorXd next_v = transition * q.rowwise().maxCoeff();
  Eigen::MatrixXd tq = reward;
  for (int z = 0; z < S; ++z)
    for (int u = 0; u < A; ++u) tq(z, u) += gamma * next_v[z * A + u];

  const int K = h.cell_count(S);
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(K, A), sum = Eigen::MatrixXd::Zero(K, A);
  for (int z = 0; z < S; ++z)
    for (int u = 0; u < A; ++u) {
      const int k = h.cell_of(z, S);
      mass(k, u) += nu[z * A + u];
      sum(k, u) += nu[z * A + u] * tq(z, u);
    }
  double total = 0;
  for (int z = 0; z < S; ++z)
    for (int u = 0; u < A; ++u) {
      const int k = h.cell_of(z, S);
      const double proj = mass(k, u) > 0 ? sum(k, u) / mass(k, u) : tq(z, u);
      total += nu[z * A + u] * (proj - tq(z, u)) * (proj - tq(z, u));
    }
  return std::sqrt(total);
}

double l1(const Eigen::VectorXd& f, const Eigen::VectorXd& mu) {
  return mu.dot(f.cwiseAbs());
}

double sqrt_var_l1(const Eigen::MatrixXd& columns, const Eigen::VectorXd& mu) {
  const Eigen::VectorXd mean = columns.rowwise().mean();
  const Eigen::VectorXd var =
      (columns.colwise() - mean).array().square().rowwise().mean().matrix();
  return mu.dot(var.cwiseSqrt());
}

}  // namespace

DecompositionReport decompose(const FiniteMDPSpec& spec, const Oracle& oracle,
                              const FqiResult& run, const FqiOptions& options,
                              const Eigen::VectorXd& mu_in) {
  const long C = spec.joint_states() * spec.joint_actions();
  Eigen::VectorXd mu = mu_in;
  if (mu.size() == 0) mu = Eigen::VectorXd::Constant(C, 1.0 / static_cast<double>(C));
  if (mu.size() != C)
    throw Error("support-mismatch", "mu has " + std::to_string(mu.size()) + " cells, the joint "
                                    "space has " + std::to_string(C));
  if ((mu.array() < 0).any() || std::abs(mu.sum() - 1) > 1e-9)
    throw Error("support-mismatch", "mu is not a probability vector");
  const int T = options.iterations;
  if (T < 0 || T > run.iterations())
    throw Error("bad-config", "requested iteration exceeds the FQI run");
  const bool shared = run.mode == FqiMode::shared;
  if (shared && !oracle.shared_q) throw Error("bad-spec", "shared mode needs the shared oracle");
  const int n = spec.agent_count();

  DecompositionReport rep;
  rep.samples = options.samples;
  rep.iterations = T;

  const Eigen::VectorXd target = flatten_joint(oracle.joint_q);
  const Eigen::MatrixXd x_star = joint_columns(spec, oracle.agent_q);
  std::vector<Eigen::MatrixXd> learned;
  for (int i = 0; i < n; ++i) learned.push_back(run.q(i, T));
  const Eigen::MatrixXd x_hat = joint_columns(spec, learned);

  const WeightFit star = fit_credit_weights(x_star, target, mu);
  const WeightFit hat = fit_credit_weights(x_hat, target, mu);
  rep.w_star = star.w;
  rep.w_hat = hat.w;
  rep.degenerate = star.degenerate || hat.degenerate;

  rep.best_err = l1(target - x_star * star.w, mu);
  rep.err = l1(target - x_hat * hat.w, mu) - rep.best_err;

  Eigen::MatrixXd x_bar;
  if (oracle.shared_q) {
    x_bar = joint_columns(spec, std::vector<Eigen::MatrixXd>(n, *oracle.shared_q));
    rep.sharing_bias = l1((x_star - x_bar) * star.w, mu);
  }
  rep.var_term = std::sqrt(static_cast<double>(n)) * (star.w - hat.w).norm() *
                 sqrt_var_l1(shared ? x_bar : x_star, mu);

  if (shared) {
    const auto& first = spec.agents.front();
    Eigen::MatrixXd p_bar = Eigen::MatrixXd::Zero(first.transition.rows(), first.transition.cols());
    Eigen::MatrixXd r_bar = Eigen::MatrixXd::Zero(first.states, first.actions);
    for (const auto& a : spec.agents) {
      p_bar += a.transition;
      r_bar += a.reward;
    }
    p_bar /= n;
    r_bar /= n;
    rep.approx_proxy = projection_residual(p_bar, r_bar, spec.gamma, run.q(0, T),
                                           options.hypothesis, local_nu(first, options.nu));
    rep.sup_error = (run.q(0, T) - *oracle.shared_q).cwiseAbs().maxCoeff();
  } else {
    for (int i = 0; i < n; ++i) {
      const auto& a = spec.agents[i];
      rep.approx_proxy = std::max(
          rep.approx_proxy, projection_residual(a.transition, a.reward, spec.gamma, run.q(i, T),
                                                options.hypothesis, local_nu(a, options.nu)));
      rep.sup_error =
          std::max(rep.sup_error, (run.q(i, T) - oracle.agent_q[i]).cwiseAbs().maxCoeff());
    }
  }

  rep.algorithmic_term = algorithmic_term(spec.gamma, spec.reward_bound, T);
  rep.concentration_proxy = concentration_proxy(spec, oracle, options.nu);
  const double g = spec.gamma;
  rep.bound_rhs = rep.var_term + (shared ? rep.sharing_bias : 0.0) +
                  4 * rep.concentration_proxy * g / ((1 - g) * (1 - g)) * rep.approx_proxy +
                  rep.algorithmic_term;
  return rep;
}

// ------------------------------------------------------------------ family

FiniteMDPSpec chain_family(double diversity, int agents, double gamma, double reward_noise) {
  if (!(diversity >= 0 && diversity <= 1)) throw Error("bad-config", "diversity must lie in [0, 1]");
  if (agents < 1) throw Error("bad-config", "at least one agent is required");
  constexpr int S = 3, A = 2;
  LocalMDP base;
  base.states = S;
  base.actions = A;
  base.transition = Eigen::MatrixXd::Zero(S * A, S);
  base.reward.resize(S, A);
  for (int z = 0; z < S; ++z) {
    const int right = (z + 1) % S, left = (z + S - 1) % S;
    // action 0 mostly holds position, action 1 mostly advances
    base.transition(z * A + 0, z) += 0.8;
    base.transition(z * A + 0, right) += 0.1;
    base.transition(z * A + 0, left) += 0.1;
    base.transition(z * A + 1, right) += 0.6;
    base.transition(z * A + 1, z) += 0.2;
    base.transition(z * A + 1, left) += 0.2;
    for (int u = 0; u < A; ++u) base.reward(z, u) = 0.4 + 0.1 * (z - 1) + 0.2 * u;
  }

  FiniteMDPSpec spec;
  spec.gamma = gamma;
  spec.reward_bound = 1.0;
  spec.reward_noise = reward_noise;
  for (int i = 0; i < agents; ++i) {
    LocalMDP a = base;
    const double sign = i % 2 == 0 ? 1.0 : -1.0;
    for (int z = 0; z < S; ++z) {
      a.reward(z, 1) += 0.25 * diversity * sign;
      a.reward(z, 0) -= 0.25 * diversity * sign;
    }
    spec.agents.push_back(std::move(a));
  }
  spec.shared_reward = diversity == 0;
  spec.validate();
  return spec;
}

FiniteMDPSpec make_family(std::string_view name, double diversity, int agents, double gamma,
                          double reward_noise) {
  if (name == "chain") return chain_family(diversity, agents, gamma, reward_noise);
  throw Error("bad-config", "unknown MDP family '" + std::string(name) + "'");
}

Eigen::VectorXd skewed_distribution(int cells, double ratio) {
  if (cells < 1 || !(ratio > 0)) throw Error("bad-config", "invalid skewed distribution");
  Eigen::VectorXd v(cells);
  for (int c = 0; c < cells; ++c) v[c] = std::pow(ratio, c);
  return v / v.sum();
}

// -------------------------------------------------------------------- sweep

void SweepGrid::validate() const {
  auto fail = [](const std::string& m) { throw Error("bad-config", m); };
  if (samples.empty() || iterations.empty() || modes.empty() || hypotheses.empty() ||
      diversity.empty())
    fail("theory grid axes must be non-empty");
  for (long s : samples)
    if (s < 1) fail("theory.samples entries must be positive");
  for (int t : iterations)
    if (t < 0) fail("theory.iterations entries must be non-negative");
  if (seeds.empty()) fail("theory.seeds must not be empty");
  if (agents < 1) fail("theory.agents must be positive");
  if (!(nu_skew > 0)) fail("theory.nu_skew must be positive");
}

Stat mean_sd(const std::vector<double>& values) {
  Stat s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::vector<SweepRow> sweep(const SweepGrid& grid, int jobs) {
  grid.validate();
  const int max_t = *std::max_element(grid.iterations.begin(), grid.iterations.end());
  const int n_seeds = static_cast<int>(grid.seeds.size());

  std::vector<FiniteMDPSpec> specs;
  std::vector<Oracle> oracles;
  for (double d : grid.diversity) {
    specs.push_back(make_family(grid.family, d, grid.agents, grid.gamma, grid.reward_noise));
    oracles.push_back(value_iteration_oracle(specs.back()));
  }
  const int cells = specs.front().agents.front().cells();
  const Eigen::VectorXd nu =
      grid.nu_skew == 1.0 ? Eigen::VectorXd() : skewed_distribution(cells, grid.nu_skew);

  // One FQI run per (diversity, mode, hypothesis, N, seed) at the largest T;
  // every T in the grid reads its prefix.
  struct RunKey {
    int d, m, h;
    std::size_t s;
    int seed;
  };
  std::vector<RunKey> keys;
  for (int d = 0; d < static_cast<int>(grid.diversity.size()); ++d)
    for (int m = 0; m < static_cast<int>(grid.modes.size()); ++m)
      for (int h = 0; h < static_cast<int>(grid.hypotheses.size()); ++h)
        for (std::size_t s = 0; s < grid.samples.size(); ++s)
          for (int seed = 0; seed < n_seeds; ++seed) keys.push_back({d, m, h, s, seed});

  const auto reports = parallel_map(static_cast<int>(keys.size()), jobs, [&](int k) {
    const auto& key = keys[k];
    FqiOptions opt;
    opt.hypothesis = grid.hypotheses[key.h];
    opt.mode = grid.modes[key.m];
    opt.samples = grid.samples[key.s];
    opt.iterations = max_t;
    opt.nu = nu;
    opt.seed = grid.seeds[key.seed];
    const auto run = fqi_run(specs[key.d], opt);
    std::vector<DecompositionReport> per_t;
    for (int t : grid.iterations) {
      opt.iterations = t;
      per_t.push_back(decompose(specs[key.d], oracles[key.d], run, opt));
    }
    return per_t;
  });

  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < keys.size(); k += n_seeds) {
    const auto& key = keys[k];
    for (std::size_t ti = 0; ti < grid.iterations.size(); ++ti) {
      SweepRow row;
      row.diversity = grid.diversity[key.d];
      row.mode = grid.modes[key.m];
      row.hypothesis = grid.hypotheses[key.h];
      row.samples = grid.samples[key.s];
      row.iterations = grid.iterations[ti];
      row.seeds = n_seeds;
      auto collect = [&](auto field) {
        std::vector<double> v;
        for (int s = 0; s < n_seeds; ++s) v.push_back(reports[k + s][ti].*field);
        return mean_sd(v);
      };
      row.err = collect(&DecompositionReport::err);
      row.var_term = collect(&DecompositionReport::var_term);
      row.sharing_bias = collect(&DecompositionReport::sharing_bias);
      row.approx_proxy = collect(&DecompositionReport::approx_proxy);
      row.concentration_proxy = collect(&DecompositionReport::concentration_proxy);
      row.bound_rhs = collect(&DecompositionReport::bound_rhs);
      row.sup_error = collect(&DecompositionReport::sup_error);
      row.algorithmic_term = reports[k][ti].algorithmic_term;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& config_hash) {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << "\n";
  out << "diversity,mode,hypothesis,N,T,seeds,err_mean,err_sd,var_term_mean,var_term_sd,"
         "sharing_bias_mean,sharing_bias_sd,approx_proxy_mean,approx_proxy_sd,"
         "concentration_proxy_mean,concentration_proxy_sd,bound_rhs_mean,bound_rhs_sd,"
         "sup_error_mean,sup_error_sd,algorithmic_term\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << num(r.diversity) << ',' << to_string(r.mode) << ",\"" << r.hypothesis.name() << "\","
        << r.samples << ',' << r.iterations << ',' << r.seeds;
    for (const Stat* s : {&r.err, &r.var_term, &r.sharing_bias, &r.approx_proxy,
                          &r.concentration_proxy, &r.bound_rhs, &r.sup_error})
      out << ',' << num(s->mean) << ',' << num(s->sd);
    out << ',' << num(r.algorithmic_term) << '\n';
  }
  return out.str();
}

}  // namespace rolediv::fqi
