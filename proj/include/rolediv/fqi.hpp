#pragma once

// Exact small Dec-MDPs, fitted Q-iteration with separate or shared Q
// functions, and direct measurement of every term of the excess-risk bound.
//
// Every agent owns a local MDP over (z, u) with its own kernel and reward;
// the joint MDP is their product and the team reward is the team-weighted sum
// of the agent rewards. Local tables are states x actions; a local cell index
// is z * actions + u.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace rolediv::fqi {

struct LocalMDP {
  int states = 1;
  int actions = 1;
  Eigen::MatrixXd transition;  // (states * actions) x states, rows sum to 1
  Eigen::MatrixXd reward;      // states x actions

  int cells() const { return states * actions; }
};

struct FiniteMDPSpec {
  std::vector<LocalMDP> agents;
  Eigen::VectorXd team_weights;  // on the simplex; uniform when empty
  double gamma = 0.9;
  double reward_bound = 1.0;  // M
  double reward_noise = 0.0;  // sampled rewards get uniform(-noise, noise) added
  bool shared_reward = false;  // every agent carries the same reward table

  // Throws bad-kernel for non-stochastic rows and bad-spec otherwise.
  void validate() const;
  int agent_count() const { return static_cast<int>(agents.size()); }
  Eigen::VectorXd weights() const;
  long joint_states() const;
  long joint_actions() const;
  bool homogeneous_shapes() const;
};

// Optimal Q by value iteration until the sup-norm error bound drops below
// `tol`.
Eigen::MatrixXd value_iteration(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& reward,
                                double gamma, double tol = 1e-10);

// Q-function of a deterministic policy (one action per state).
Eigen::MatrixXd policy_evaluation(const Eigen::MatrixXd& transition,
                                  const Eigen::MatrixXd& reward, const std::vector<int>& policy,
                                  double gamma);

struct Oracle {
  std::vector<Eigen::MatrixXd> agent_q;  // Q*_i, states x actions
  Eigen::MatrixXd joint_q;               // Q*_tot, joint states x joint actions
  std::optional<Eigen::MatrixXd> shared_q;  // optimum of the agent-averaged MDP
};

Oracle value_iteration_oracle(const FiniteMDPSpec& spec);

struct Hypothesis {
  enum class Kind { exact_tabular, aggregated };
  Kind kind = Kind::exact_tabular;
  int k = 0;  // super-states for aggregated

  static Hypothesis exact() { return {}; }
  static Hypothesis aggregated(int k) { return {Kind::aggregated, k}; }
  int cell_of(int z, int states) const;
  int cell_count(int states) const;
  std::string name() const;  // "exact" or "aggregated(k)"
};

Hypothesis hypothesis_from_string(std::string_view text);  // throws bad-config

enum class FqiMode { separate, shared };

std::string_view to_string(FqiMode mode);
FqiMode fqi_mode_from_string(std::string_view text);  // throws bad-config

struct FqiOptions {
  Hypothesis hypothesis;
  FqiMode mode = FqiMode::separate;
  long samples = 1000;  // N per agent per iteration
  int iterations = 10;  // T
  Eigen::VectorXd nu;   // over local cells; uniform when empty
  std::uint64_t seed = 0;
};

struct FqiResult {
  FqiMode mode = FqiMode::separate;
  // iterates[j][t]: table j (one per agent, or a single shared table) after
  // t iterations; iterates[j][0] is zero.
  std::vector<std::vector<Eigen::MatrixXd>> iterates;

  int iterations() const { return iterates.empty() ? 0 : static_cast<int>(iterates[0].size()) - 1; }
  // Table used by `agent` after t iterations (the shared table in shared mode).
  const Eigen::MatrixXd& q(int agent, int t) const;
  const Eigen::MatrixXd& final_q(int agent) const { return q(agent, iterations()); }
};

FqiResult fqi_run(const FiniteMDPSpec& spec, const FqiOptions& options);

struct WeightFit {
  Eigen::VectorXd w;
  bool degenerate = false;
};

// argmin over the simplex of sum_c mu_c (target_c - estimates.row(c) w)^2.
// Exact active-set enumeration up to 12 agents, projected gradient above.
WeightFit fit_credit_weights(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& target,
                             const Eigen::VectorXd& mu);

// Joint-cell columns (z_i, u_i) -> q_i(z_i, u_i), one column per agent.
Eigen::MatrixXd joint_columns(const FiniteMDPSpec& spec, const std::vector<Eigen::MatrixXd>& q);

// Q*_tot flattened over joint cells (joint state major).
Eigen::VectorXd flatten_joint(const Eigen::MatrixXd& joint_q);

double algorithmic_term(double gamma, double reward_bound, int iterations);

// Single-policy stand-in for the concentration coefficient: the greedy
// policy of Q*_i replaces the supremum over policy sequences.
double concentration_proxy(const FiniteMDPSpec& spec, const Oracle& oracle,
                           const Eigen::VectorXd& nu);

struct DecompositionReport {
  double err = 0;
  double best_err = 0;  // ||Q*_tot - w*^T Q*||_{1,mu}
  double var_term = 0;
  double sharing_bias = 0;
  double approx_proxy = 0;
  double algorithmic_term = 0;
  double concentration_proxy = 0;
  double bound_rhs = 0;  // measured right-hand side, statistical term omitted
  double sup_error = 0;  // ||Q~_T - Q*||_inf against the matching oracle
  Eigen::VectorXd w_hat;
  Eigen::VectorXd w_star;
  bool degenerate = false;
  long samples = 0;
  int iterations = 0;
};

// Reads the iterate at options.iterations, so one long run serves every
// shorter T. `mu` is over joint cells (uniform when empty); throws
// support-mismatch when its size or mass does not fit.
DecompositionReport decompose(const FiniteMDPSpec& spec, const Oracle& oracle,
                              const FqiResult& run, const FqiOptions& options,
                              const Eigen::VectorXd& mu = {});

// ------------------------------------------------------------------ family

// Three-state cyclic chain with two actions per agent. `diversity` in [0, 1]
// tilts agents' rewards toward opposite actions; 0 gives clones.
FiniteMDPSpec chain_family(double diversity, int agents = 2, double gamma = 0.9,
                           double reward_noise = 0.05);

FiniteMDPSpec make_family(std::string_view name, double diversity, int agents, double gamma,
                          double reward_noise);  // throws bad-config

// nu with geometric decay `ratio` over local cells (ratio 1 is uniform).
Eigen::VectorXd skewed_distribution(int cells, double ratio);

struct SweepGrid {
  std::string family = "chain";
  int agents = 2;
  double gamma = 0.9;
  double reward_noise = 0.05;
  std::vector<long> samples = {1000};
  std::vector<int> iterations = {10};
  std::vector<FqiMode> modes = {FqiMode::separate};
  std::vector<Hypothesis> hypotheses = {Hypothesis::exact()};
  std::vector<double> diversity = {0.5};
  double nu_skew = 1.0;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7};

  void validate() const;  // throws bad-config
};

struct Stat {
  double mean = 0;
  double sd = 0;
};

struct SweepRow {
  double diversity = 0;
  FqiMode mode = FqiMode::separate;
  Hypothesis hypothesis;
  long samples = 0;
  int iterations = 0;
  int seeds = 0;
  Stat err, var_term, sharing_bias, approx_proxy, concentration_proxy, bound_rhs, sup_error;
  double algorithmic_term = 0;
};

std::vector<SweepRow> sweep(const SweepGrid& grid, int jobs = 1);
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& config_hash);

Stat mean_sd(const std::vector<double>& values);

}  // namespace rolediv::fqi
