#include "marlab/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "marlab/errors.hpp"
#include "linsolve.hpp"

namespace marlab {

namespace {

constexpr double kStochasticRowTol = 1e-12;
constexpr double kEvalResidual = 1e-10;
constexpr double kImproveEps = 1e-11;  // above dense-solver noise
constexpr int kMaxEvalSweeps = 5'000'000;
constexpr std::size_t kLinearSolveMaxStates = 512;

int argmax_row(std::span<const double> row) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(row.size()); ++a)
    if (row[a] > row[best]) best = a;
  return best;
}

double row_max(std::span<const double> row) {
  double m = row[0];
  for (double v : row) m = std::max(m, v);
  return m;
}

void check_shapes(const InducedMDP& mdp, const QTable& q, const char* what) {
  if (q.num_states != mdp.num_states || q.num_actions != mdp.num_actions)
    throw std::invalid_argument(std::string(what) + ": QTable shape does not match the MDP");
}

// out <- r + gamma * P max_a in
void bellman_optimality_backup(const InducedMDP& mdp, const QTable& in, QTable& out,
                               std::vector<double>& scratch_max) {
  const int s_count = mdp.num_states;
  const int a_count = mdp.num_actions;
  scratch_max.resize(static_cast<std::size_t>(s_count));
  for (int s = 0; s < s_count; ++s) scratch_max[s] = row_max(in.row(s));
  for (int s = 0; s < s_count; ++s) {
    for (int a = 0; a < a_count; ++a) {
      const auto p = mdp.transition_row(s, a);
      double acc = 0.0;
      for (int k = 0; k < s_count; ++k) acc += p[k] * scratch_max[k];
      out.at(s, a) = mdp.reward_at(s, a) + mdp.gamma * acc;
    }
  }
}

// Expected next-state value of `policy` on `q`, per state.
void policy_state_values(const QTable& q, const AgentPolicy& policy, std::vector<double>& v) {
  v.resize(static_cast<std::size_t>(q.num_states));
  for (int s = 0; s < q.num_states; ++s) {
    if (policy.kind() == PolicyKind::deterministic) {
      v[s] = q.at(s, policy.action(s));
    } else {
      const auto probs = policy.prob_row(s);
      double acc = 0.0;
      for (int a = 0; a < q.num_actions; ++a) acc += probs[a] * q.at(s, a);
      v[s] = acc;
    }
  }
}

// Collapses an induced MDP and a fixed policy to state-space quantities:
// r_pi(s) and P_pi(s,s').
void policy_chain(const InducedMDP& mdp, const AgentPolicy& policy,
                  std::vector<double>& r_pi, std::vector<double>& p_pi) {
  const auto s_count = static_cast<std::size_t>(mdp.num_states);
  r_pi.assign(s_count, 0.0);
  p_pi.assign(s_count * s_count, 0.0);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      const double w = policy.prob(s, a);
      if (w == 0.0) continue;
      r_pi[s] += w * mdp.reward_at(s, a);
      const auto p = mdp.transition_row(s, a);
      for (std::size_t k = 0; k < s_count; ++k) p_pi[s * s_count + k] += w * p[k];
    }
  }
}

}  // namespace

QTable QTable::zeros(int num_states, int num_actions, int agent_index) {
  QTable q;
  q.num_states = num_states;
  q.num_actions = num_actions;
  q.agent_index = agent_index;
  q.values.assign(static_cast<std::size_t>(num_states) * num_actions, 0.0);
  return q;
}

double sup_distance(const QTable& a, const QTable& b) {
  if (a.values.size() != b.values.size())
    throw std::invalid_argument("sup_distance: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    d = std::max(d, std::abs(a.values[i] - b.values[i]));
  return d;
}

AgentPolicy AgentPolicy::deterministic(std::vector<int> actions, int num_actions) {
  if (num_actions < 1) throw std::invalid_argument("AgentPolicy: num_actions must be positive");
  for (int a : actions)
    if (a < 0 || a >= num_actions)
      throw std::invalid_argument("AgentPolicy: action out of range");
  AgentPolicy p;
  p.kind_ = PolicyKind::deterministic;
  p.num_states_ = static_cast<int>(actions.size());
  p.num_actions_ = num_actions;
  p.actions_ = std::move(actions);
  return p;
}

AgentPolicy AgentPolicy::stochastic(int num_states, int num_actions, std::vector<double> probs) {
  if (num_states < 1 || num_actions < 1)
    throw std::invalid_argument("AgentPolicy: dimensions must be positive");
  if (probs.size() != static_cast<std::size_t>(num_states) * num_actions)
    throw std::invalid_argument("AgentPolicy: probability table has wrong size");
  for (int s = 0; s < num_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < num_actions; ++a) {
      const double v = probs[static_cast<std::size_t>(s) * num_actions + a];
      if (!(v >= 0.0)) throw std::invalid_argument("AgentPolicy: negative probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticRowTol)
      throw std::invalid_argument("AgentPolicy: row " + std::to_string(s) + " is not stochastic");
  }
  AgentPolicy p;
  p.kind_ = PolicyKind::stochastic;
  p.num_states_ = num_states;
  p.num_actions_ = num_actions;
  p.probs_ = std::move(probs);
  return p;
}

AgentPolicy AgentPolicy::uniform(int num_states, int num_actions) {
  std::vector<double> probs(static_cast<std::size_t>(num_states) * num_actions,
                            1.0 / num_actions);
  return stochastic(num_states, num_actions, std::move(probs));
}

double AgentPolicy::prob(int s, int a) const {
  if (kind_ == PolicyKind::deterministic) return actions_[static_cast<std::size_t>(s)] == a ? 1.0 : 0.0;
  return probs_[static_cast<std::size_t>(s) * num_actions_ + a];
}

int AgentPolicy::sample(int s, Rng& rng) const {
  if (kind_ == PolicyKind::deterministic) return action(s);
  return sample_categorical(prob_row(s), rng);
}

JointPolicy JointPolicy::with_agent(int i, AgentPolicy p) const {
  JointPolicy out = *this;
  out.agents[static_cast<std::size_t>(i)] = std::move(p);
  return out;
}

JointPolicy JointPolicy::greedy_from(const std::vector<QTable>& tables) {
  JointPolicy joint;
  joint.agents.reserve(tables.size());
  for (const QTable& q : tables) joint.agents.push_back(greedy_policy(q));
  return joint;
}

InducedMDP induce_mdp(const StochasticGame& game, int agent, const JointPolicy& others) {
  const int n = game.num_agents();
  if (agent < 0 || agent >= n) throw std::invalid_argument("induce_mdp: agent index out of range");
  if (others.num_agents() != n)
    throw std::invalid_argument("induce_mdp: policy set does not cover all agents");
  for (int j = 0; j < n; ++j) {
    if (j == agent) continue;
    const AgentPolicy& p = others.agents[static_cast<std::size_t>(j)];
    if (p.num_states() != game.num_states() || p.num_actions() != game.action_dims()[j])
      throw std::invalid_argument("induce_mdp: policy shape mismatch for agent " + std::to_string(j));
  }

  const int s_count = game.num_states();
  const auto dims = game.action_dims();
  const int a_count = dims[agent];
  const std::size_t joint = game.num_joint_actions();

  InducedMDP mdp;
  mdp.num_states = s_count;
  mdp.num_actions = a_count;
  mdp.agent_index = agent;
  mdp.gamma = game.gamma();
  mdp.transition.assign(static_cast<std::size_t>(s_count) * a_count * s_count, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(s_count) * a_count, 0.0);
  for (int j = 0; j < n; ++j)
    if (j != agent) mdp.frozen_others.push_back(others.agents[static_cast<std::size_t>(j)]);

  // Decompose each flattened joint action once; agent 0 is most significant.
  std::vector<int> digits(static_cast<std::size_t>(n));
  for (std::size_t idx = 0; idx < joint; ++idx) {
    std::size_t rest = idx;
    for (int i = n - 1; i >= 0; --i) {
      digits[i] = static_cast<int>(rest % static_cast<std::size_t>(dims[i]));
      rest /= static_cast<std::size_t>(dims[i]);
    }
    const int a_i = digits[agent];
    for (int s = 0; s < s_count; ++s) {
      double w = 1.0;
      for (int i = 0; i < n; ++i) {
        if (i == agent) continue;
        w *= others.agents[static_cast<std::size_t>(i)].prob(s, digits[i]);
        if (w == 0.0) break;
      }
      if (w == 0.0) continue;
      mdp.reward[static_cast<std::size_t>(s) * a_count + a_i] += w * game.reward_at(s, idx);
      const auto p = game.transition_row(s, idx);
      double* out = mdp.transition.data() +
                    (static_cast<std::size_t>(s) * a_count + a_i) * s_count;
      for (int k = 0; k < s_count; ++k) out[k] += w * p[k];
    }
  }
  return mdp;
}

QTable q_iteration(const InducedMDP& mdp, QTable q_init, int iterations) {
  check_shapes(mdp, q_init, "q_iteration");
  if (iterations < 0) throw std::invalid_argument("q_iteration: iterations must be >= 0");
  if (iterations == 0) return q_init;
  QTable next = q_init;
  std::vector<double> scratch;
  for (int t = 0; t < iterations; ++t) {
    bellman_optimality_backup(mdp, q_init, next, scratch);
    std::swap(q_init, next);
  }
  return q_init;
}

ResidualRun q_iterate_to_residual(const InducedMDP& mdp, QTable q_init,
                                  double max_residual, int max_iterations) {
  check_shapes(mdp, q_init, "q_iterate_to_residual");
  if (!(max_residual > 0.0))
    throw std::invalid_argument("q_iterate_to_residual: residual must be positive");
  QTable next = q_init;
  std::vector<double> scratch;
  for (int t = 1; t <= max_iterations; ++t) {
    bellman_optimality_backup(mdp, q_init, next, scratch);
    const double residual = sup_distance(q_init, next);
    std::swap(q_init, next);
    if (residual <= max_residual || mdp.gamma == 0.0)
      return {std::move(q_init), t, residual};
  }
  throw std::runtime_error("q_iterate_to_residual: no convergence within iteration cap");
}

PolicyEvalResult policy_evaluation(const InducedMDP& mdp, const AgentPolicy& policy,
                                   EvalMethod method) {
  if (policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions)
    throw std::invalid_argument("policy_evaluation: policy shape does not match the MDP");

  const int s_count = mdp.num_states;
  const int a_count = mdp.num_actions;
  PolicyEvalResult result;
  result.q = QTable::zeros(s_count, a_count, mdp.agent_index);

  if (method == EvalMethod::iterative) {
    result.method = "iterative";
    QTable next = result.q;
    std::vector<double> v;
    for (int sweep = 1; sweep <= kMaxEvalSweeps; ++sweep) {
      policy_state_values(result.q, policy, v);
      for (int s = 0; s < s_count; ++s) {
        for (int a = 0; a < a_count; ++a) {
          const auto p = mdp.transition_row(s, a);
          double acc = 0.0;
          for (int k = 0; k < s_count; ++k) acc += p[k] * v[k];
          next.at(s, a) = mdp.reward_at(s, a) + mdp.gamma * acc;
        }
      }
      const double residual = sup_distance(result.q, next);
      std::swap(result.q, next);
      result.sweeps = sweep;
      result.residual = residual;
      if (residual <= kEvalResidual || mdp.gamma == 0.0) return result;
    }
    throw std::runtime_error("policy_evaluation: no convergence within sweep cap");
  }

  // Linear solve on the state-value system (I - gamma P_pi) v = r_pi, then
  // one backup lifts v to Q.
  result.method = "linear_solve";
  std::vector<double> r_pi, p_pi;
  policy_chain(mdp, policy, r_pi, p_pi);
  const auto sc = static_cast<std::size_t>(s_count);
  std::vector<double> a_mat(sc * sc);
  for (std::size_t r = 0; r < sc; ++r)
    for (std::size_t c = 0; c < sc; ++c)
      a_mat[r * sc + c] = (r == c ? 1.0 : 0.0) - mdp.gamma * p_pi[r * sc + c];
  const std::vector<double> v = detail::solve_dense(std::move(a_mat), r_pi);
  for (int s = 0; s < s_count; ++s) {
    for (int a = 0; a < a_count; ++a) {
      const auto p = mdp.transition_row(s, a);
      double acc = 0.0;
      for (int k = 0; k < s_count; ++k) acc += p[k] * v[k];
      result.q.at(s, a) = mdp.reward_at(s, a) + mdp.gamma * acc;
    }
  }
  result.sweeps = 1;
  // Bellman residual of the solved table, for the metadata.
  std::vector<double> qv;
  policy_state_values(result.q, policy, qv);
  double residual = 0.0;
  for (int s = 0; s < s_count; ++s) {
    for (int a = 0; a < a_count; ++a) {
      const auto p = mdp.transition_row(s, a);
      double acc = 0.0;
      for (int k = 0; k < s_count; ++k) acc += p[k] * qv[k];
      residual = std::max(residual,
                          std::abs(mdp.reward_at(s, a) + mdp.gamma * acc - result.q.at(s, a)));
    }
  }
  result.residual = residual;
  return result;
}

AgentPolicy greedy_policy(const QTable& q) {
  for (double v : q.values)
    if (!std::isfinite(v)) throw std::invalid_argument("greedy_policy: non-finite Q entry");
  std::vector<int> actions(static_cast<std::size_t>(q.num_states));
  for (int s = 0; s < q.num_states; ++s) actions[s] = argmax_row(q.row(s));
  return AgentPolicy::deterministic(std::move(actions), q.num_actions);
}

BestResponseResult best_response(const StochasticGame& game, int agent,
                                 const JointPolicy& others, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("best_response: tol must be positive");
  const InducedMDP mdp = induce_mdp(game, agent, others);
  const double gamma = mdp.gamma;
  QTable q0 = QTable::zeros(mdp.num_states, mdp.num_actions, agent);
  const double residual = gamma > 0.0 ? tol * (1.0 - gamma) / (2.0 * gamma) : tol;
  ResidualRun run = q_iterate_to_residual(mdp, std::move(q0), residual);
  BestResponseResult out;
  out.policy = greedy_policy(run.q);
  out.q = std::move(run.q);
  out.iterations = run.iterations;
  return out;
}

PolicyIterationResult policy_iteration(const InducedMDP& mdp, const AgentPolicy& start) {
  if (start.num_states() != mdp.num_states || start.num_actions() != mdp.num_actions)
    throw std::invalid_argument("policy_iteration: policy shape does not match the MDP");
  PolicyIterationResult result;
  result.policy = start;
  const long max_steps =
      static_cast<long>(mdp.num_states) * mdp.num_actions + 2;
  for (long step = 0; step < max_steps; ++step) {
    PolicyEvalResult eval = policy_evaluation(mdp, result.policy, EvalMethod::linear_solve);
    std::vector<int> improved(static_cast<std::size_t>(mdp.num_states));
    bool changed = false;
    for (int s = 0; s < mdp.num_states; ++s) {
      const int best = argmax_row(eval.q.row(s));
      if (result.policy.kind() == PolicyKind::deterministic) {
        const int cur = result.policy.action(s);
        // keep the incumbent unless strictly better: guarantees termination
        improved[s] = eval.q.at(s, best) > eval.q.at(s, cur) + kImproveEps ? best : cur;
        changed |= improved[s] != cur;
      } else {
        improved[s] = best;
        changed = true;
      }
    }
    result.q = std::move(eval.q);
    if (result.policy.kind() == PolicyKind::deterministic && !changed) return result;
    result.policy = AgentPolicy::deterministic(std::move(improved), mdp.num_actions);
    ++result.improvement_steps;
  }
  throw std::runtime_error("policy_iteration: failed to terminate (tie-break cycling?)");
}

JointSolution solve_joint_optimal(const StochasticGame& game, double tol,
                                  std::size_t max_entries) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_joint_optimal: tol must be positive");
  const auto s_count = static_cast<std::size_t>(game.num_states());
  const std::size_t joint = game.num_joint_actions();
  if (joint > max_entries / std::max<std::size_t>(s_count, 1))
    throw CapacityError("solve_joint_optimal: joint table of " +
                        std::to_string(s_count * joint) + " entries exceeds the configured limit");

  const double gamma = game.gamma();
  const double target = gamma > 0.0 ? tol * (1.0 - gamma) / (2.0 * gamma) : tol;

  std::vector<double> v(s_count, 0.0), v_next(s_count);
  int sweeps = 0;
  for (;;) {
    ++sweeps;
    for (std::size_t s = 0; s < s_count; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < joint; ++j) {
        const auto p = game.transition_row(static_cast<int>(s), j);
        double acc = 0.0;
        for (std::size_t k = 0; k < s_count; ++k) acc += p[k] * v[k];
        best = std::max(best, game.reward_at(static_cast<int>(s), j) + gamma * acc);
      }
      v_next[s] = best;
    }
    double residual = 0.0;
    for (std::size_t s = 0; s < s_count; ++s)
      residual = std::max(residual, std::abs(v_next[s] - v[s]));
    v.swap(v_next);
    if (residual <= target || gamma == 0.0) break;
    if (sweeps >= kMaxEvalSweeps)
      throw std::runtime_error("solve_joint_optimal: no convergence within sweep cap");
  }

  JointSolution out;
  out.sweeps = sweeps;
  std::vector<double> q = joint_q_from_value(game, v);
  out.joint_q.num_states = static_cast<int>(s_count);
  out.joint_q.num_actions = static_cast<int>(joint);
  out.joint_q.agent_index = -1;
  out.joint_q.values = std::move(q);
  out.value.resize(s_count);

  const int n = game.num_agents();
  std::vector<std::vector<int>> per_agent(static_cast<std::size_t>(n));
  for (auto& v_actions : per_agent) v_actions.resize(s_count);
  for (std::size_t s = 0; s < s_count; ++s) {
    const auto row = out.joint_q.row(static_cast<int>(s));
    const int best = argmax_row(row);
    out.value[s] = row[best];
    const JointAction a = unflatten_joint(static_cast<std::size_t>(best), game.action_dims());
    for (int i = 0; i < n; ++i) per_agent[static_cast<std::size_t>(i)][s] = a.actions[i];
  }
  for (int i = 0; i < n; ++i)
    out.policy.agents.push_back(
        AgentPolicy::deterministic(std::move(per_agent[static_cast<std::size_t>(i)]),
                                   game.action_dims()[i]));
  return out;
}

namespace {

// r_pi(s) and P_pi(s,s') of a joint policy on the joint-action MDP.
void joint_policy_chain(const StochasticGame& game, const JointPolicy& policy,
                        std::vector<double>& r_pi, std::vector<double>& p_pi) {
  const int n = game.num_agents();
  if (policy.num_agents() != n)
    throw std::invalid_argument("joint policy does not cover all agents");
  for (int i = 0; i < n; ++i) {
    const AgentPolicy& p = policy.agents[static_cast<std::size_t>(i)];
    if (p.num_states() != game.num_states() || p.num_actions() != game.action_dims()[i])
      throw std::invalid_argument("joint policy shape mismatch for agent " + std::to_string(i));
  }
  const auto s_count = static_cast<std::size_t>(game.num_states());
  const std::size_t joint = game.num_joint_actions();
  const auto dims = game.action_dims();
  r_pi.assign(s_count, 0.0);
  p_pi.assign(s_count * s_count, 0.0);
  std::vector<int> digits(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < joint; ++j) {
    std::size_t rest = j;
    for (int i = n - 1; i >= 0; --i) {
      digits[i] = static_cast<int>(rest % static_cast<std::size_t>(dims[i]));
      rest /= static_cast<std::size_t>(dims[i]);
    }
    for (std::size_t s = 0; s < s_count; ++s) {
      double w = 1.0;
      for (int i = 0; i < n; ++i) {
        w *= policy.agents[static_cast<std::size_t>(i)].prob(static_cast<int>(s), digits[i]);
        if (w == 0.0) break;
      }
      if (w == 0.0) continue;
      r_pi[s] += w * game.reward_at(static_cast<int>(s), j);
      const auto p = game.transition_row(static_cast<int>(s), j);
      for (std::size_t k = 0; k < s_count; ++k) p_pi[s * s_count + k] += w * p[k];
    }
  }
}

}  // namespace

std::vector<double> joint_policy_value(const StochasticGame& game, const JointPolicy& policy) {
  std::vector<double> r_pi, p_pi;
  joint_policy_chain(game, policy, r_pi, p_pi);
  const auto s_count = static_cast<std::size_t>(game.num_states());
  const double gamma = game.gamma();

  if (s_count <= kLinearSolveMaxStates) {
    std::vector<double> a_mat(s_count * s_count);
    for (std::size_t r = 0; r < s_count; ++r)
      for (std::size_t c = 0; c < s_count; ++c)
        a_mat[r * s_count + c] = (r == c ? 1.0 : 0.0) - gamma * p_pi[r * s_count + c];
    return detail::solve_dense(std::move(a_mat), std::move(r_pi));
  }

  std::vector<double> v(s_count, 0.0), v_next(s_count);
  for (int sweep = 1; sweep <= kMaxEvalSweeps; ++sweep) {
    double residual = 0.0;
    for (std::size_t s = 0; s < s_count; ++s) {
      double acc = r_pi[s];
      const double* row = p_pi.data() + s * s_count;
      for (std::size_t k = 0; k < s_count; ++k) acc += gamma * row[k] * v[k];
      v_next[s] = acc;
      residual = std::max(residual, std::abs(v_next[s] - v[s]));
    }
    v.swap(v_next);
    if (residual <= kEvalResidual || gamma == 0.0) return v;
  }
  throw std::runtime_error("joint_policy_value: no convergence within sweep cap");
}

std::vector<double> joint_q_from_value(const StochasticGame& game, std::span<const double> value) {
  const auto s_count = static_cast<std::size_t>(game.num_states());
  if (value.size() != s_count)
    throw std::invalid_argument("joint_q_from_value: value vector has wrong size");
  const std::size_t joint = game.num_joint_actions();
  std::vector<double> q(s_count * joint);
  for (std::size_t s = 0; s < s_count; ++s) {
    for (std::size_t j = 0; j < joint; ++j) {
      const auto p = game.transition_row(static_cast<int>(s), j);
      double acc = 0.0;
      for (std::size_t k = 0; k < s_count; ++k) acc += p[k] * value[k];
      q[s * joint + j] = game.reward_at(static_cast<int>(s), j) + game.gamma() * acc;
    }
  }
  return q;
}

std::vector<double> finite_horizon_value(const StochasticGame& game, const JointPolicy& policy,
                                         int steps, double discount) {
  if (steps < 0) throw std::invalid_argument("finite_horizon_value: steps must be >= 0");
  std::vector<double> r_pi, p_pi;
  joint_policy_chain(game, policy, r_pi, p_pi);
  const auto s_count = static_cast<std::size_t>(game.num_states());
  std::vector<double> u(s_count, 0.0), u_next(s_count);
  for (int h = 0; h < steps; ++h) {
    for (std::size_t s = 0; s < s_count; ++s) {
      double acc = r_pi[s];
      const double* row = p_pi.data() + s * s_count;
      for (std::size_t k = 0; k < s_count; ++k) acc += discount * row[k] * u[k];
      u_next[s] = acc;
    }
    u.swap(u_next);
  }
  return u;
}

}  // namespace marlab
