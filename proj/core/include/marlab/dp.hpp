#pragma once

#include <string>
#include <vector>

#include "marlab/game.hpp"

namespace marlab {

/// One agent's state x action value table.
struct QTable {
  int num_states = 0;
  int num_actions = 0;
  int agent_index = -1;  // -1 for joint-action tables
  std::vector<double> values;

  static QTable zeros(int num_states, int num_actions, int agent_index);

  double& at(int s, int a) {
    return values[static_cast<std::size_t>(s) * num_actions + a];
  }
  double at(int s, int a) const {
    return values[static_cast<std::size_t>(s) * num_actions + a];
  }
  std::span<const double> row(int s) const {
    return {values.data() + static_cast<std::size_t>(s) * num_actions,
            static_cast<std::size_t>(num_actions)};
  }
  std::span<double> row(int s) {
    return {values.data() + static_cast<std::size_t>(s) * num_actions,
            static_cast<std::size_t>(num_actions)};
  }
  bool operator==(const QTable&) const = default;
};

/// Sup-norm distance between two tables of identical shape.
double sup_distance(const QTable& a, const QTable& b);

enum class PolicyKind { deterministic, stochastic };

/// A single agent's policy over states: either a state -> action map or a
/// row-stochastic state x action matrix. Rows of stochastic policies must sum
/// to 1 within 1e-12 (enforced at construction).
class AgentPolicy {
 public:
  static AgentPolicy deterministic(std::vector<int> actions, int num_actions);
  static AgentPolicy stochastic(int num_states, int num_actions, std::vector<double> probs);
  static AgentPolicy uniform(int num_states, int num_actions);

  PolicyKind kind() const { return kind_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  /// Probability of taking `a` in `s` (0/1 for deterministic policies).
  double prob(int s, int a) const;
  /// Deterministic policies only.
  int action(int s) const { return actions_[static_cast<std::size_t>(s)]; }
  const std::vector<int>& actions() const { return actions_; }
  std::span<const double> prob_row(int s) const {
    return {probs_.data() + static_cast<std::size_t>(s) * num_actions_,
            static_cast<std::size_t>(num_actions_)};
  }

  int sample(int s, Rng& rng) const;

  bool operator==(const AgentPolicy&) const = default;

 private:
  AgentPolicy() = default;
  PolicyKind kind_ = PolicyKind::deterministic;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<int> actions_;    // deterministic
  std::vector<double> probs_;   // stochastic, S x A row-major
};

/// Per-agent policies jointly defining the product policy.
struct JointPolicy {
  std::vector<AgentPolicy> agents;

  int num_agents() const { return static_cast<int>(agents.size()); }
  JointPolicy with_agent(int i, AgentPolicy p) const;
  static JointPolicy greedy_from(const std::vector<QTable>& tables);

  bool operator==(const JointPolicy&) const = default;
};

/// The single-agent MDP agent i faces once every other agent's policy is
/// frozen and marginalized out: P_i(s'|s,a_i) and r_i(s,a_i).
struct InducedMDP {
  int num_states = 0;
  int num_actions = 0;
  int agent_index = 0;
  double gamma = 0.0;
  std::vector<double> transition;  // S x A x S
  std::vector<double> reward;      // S x A
  std::vector<AgentPolicy> frozen_others;  // provenance, agent order minus i

  std::span<const double> transition_row(int s, int a) const {
    return {transition.data() +
                (static_cast<std::size_t>(s) * num_actions + a) * num_states,
            static_cast<std::size_t>(num_states)};
  }
  double reward_at(int s, int a) const {
    return reward[static_cast<std::size_t>(s) * num_actions + a];
  }
};

/// Builds the induced MDP for `agent` by exact expectation over the other
/// agents' policies. `others` must carry all agents of the game; the entry at
/// `agent` is ignored.
InducedMDP induce_mdp(const StochasticGame& game, int agent, const JointPolicy& others);

/// Applies exactly `iterations` synchronous Bellman optimality backups.
QTable q_iteration(const InducedMDP& mdp, QTable q_init, int iterations);

struct ResidualRun {
  QTable q;
  int iterations = 0;
  double final_residual = 0.0;
};

/// Backups until the successive-iterate sup residual drops to `max_residual`
/// (at least one backup). Throws if `max_iterations` is exhausted first.
ResidualRun q_iterate_to_residual(const InducedMDP& mdp, QTable q_init,
                                  double max_residual, int max_iterations = 2'000'000);

enum class EvalMethod { iterative, linear_solve };

struct PolicyEvalResult {
  QTable q;
  std::string method;      // "iterative" or "linear_solve"
  int sweeps = 0;
  double residual = 0.0;   // final Bellman residual, sup norm
};

/// Fixed-point Q of a fixed policy on an induced MDP. Iterative evaluation
/// runs to sup residual <= 1e-10; the linear solve is exact up to the dense
/// solver's rounding.
PolicyEvalResult policy_evaluation(const InducedMDP& mdp, const AgentPolicy& policy,
                                   EvalMethod method = EvalMethod::iterative);

/// Per-state argmax policy; ties break to the lowest action index.
AgentPolicy greedy_policy(const QTable& q);

struct BestResponseResult {
  QTable q;
  AgentPolicy policy;
  int iterations = 0;
};

/// Best response of `agent` to the others' frozen policies: Q-iteration to a
/// successive residual of tol*(1-gamma)/(2*gamma), which certifies
/// ||Q - Q*||_inf <= tol (gamma = 0 is exact after one backup).
BestResponseResult best_response(const StochasticGame& game, int agent,
                                 const JointPolicy& others, double tol);

struct PolicyIterationResult {
  AgentPolicy policy;
  QTable q;
  int improvement_steps = 0;
};

/// Exact policy iteration on an induced MDP (linear-solve evaluation, strict
/// greedy improvement). Terminates at an optimal deterministic policy.
PolicyIterationResult policy_iteration(const InducedMDP& mdp, const AgentPolicy& start);

inline constexpr std::size_t kDefaultJointCapacity = std::size_t{1} << 24;

struct JointSolution {
  QTable joint_q;        // S x (product of action dims), agent_index = -1
  JointPolicy policy;    // per-agent decomposition of the joint argmax
  std::vector<double> value;
  int sweeps = 0;
};

/// Value iteration on the joint-action MDP, stopping at a successive residual
/// of tol*(1-gamma)/(2*gamma). Throws CapacityError if S * prod(A_i) exceeds
/// `max_entries`.
JointSolution solve_joint_optimal(const StochasticGame& game, double tol,
                                  std::size_t max_entries = kDefaultJointCapacity);

/// Exact per-state value of a joint policy (dense linear solve for small
/// state spaces, otherwise iteration to sup residual <= 1e-10).
std::vector<double> joint_policy_value(const StochasticGame& game, const JointPolicy& policy);

/// One joint Bellman application: Q(s,j) = r(s,j) + gamma * P(.|s,j) . value.
std::vector<double> joint_q_from_value(const StochasticGame& game, std::span<const double> value);

/// Exact expected sum of the first `steps` rewards (discounted by `discount`,
/// use 1 for plain episode returns) under `policy`, starting from init_dist;
/// per-state vector via backward induction.
std::vector<double> finite_horizon_value(const StochasticGame& game, const JointPolicy& policy,
                                         int steps, double discount);

}  // namespace marlab
