#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "marlab/rng.hpp"

namespace marlab {

/// One action per agent, in agent order.
struct JointAction {
  std::vector<int> actions;
  bool operator==(const JointAction&) const = default;
};

/// A single environment step. `done` marks the last step of a fixed-horizon
/// episode and is set by the rollout bookkeeping, not by `step` itself.
struct Transition {
  int state = 0;
  JointAction actions;
  double reward = 0.0;
  int next_state = 0;
  bool done = false;
};

/// Number of joint actions, i.e. the product of action_dims.
/// Throws CapacityError if the product overflows size_t.
std::size_t joint_action_count(std::span<const int> action_dims);

/// Mixed-radix encoding of a joint action, agent 0 most significant.
std::size_t flatten_joint(const JointAction& action, std::span<const int> action_dims);
JointAction unflatten_joint(std::size_t index, std::span<const int> action_dims);

/// A cooperative stochastic game with a shared reward: transition tensor
/// P[s][j][s'], reward tensor r[s][j] (j = flattened joint action), discount,
/// a fixed evaluation horizon, and an initial state distribution.
///
/// Immutable after construction; safe to share across threads.
class StochasticGame {
 public:
  /// Validates all invariants (row-stochastic transitions, finite rewards,
  /// consistent shapes); throws std::invalid_argument on violation.
  StochasticGame(int num_states, std::vector<int> action_dims, double gamma,
                 std::vector<double> transition, std::vector<double> reward,
                 std::vector<double> init_dist, double noise_delta, int horizon,
                 std::uint64_t seed);

  int num_states() const { return num_states_; }
  int num_agents() const { return static_cast<int>(action_dims_.size()); }
  std::span<const int> action_dims() const { return action_dims_; }
  std::size_t num_joint_actions() const { return num_joint_; }
  double gamma() const { return gamma_; }
  double noise_delta() const { return noise_delta_; }
  int horizon() const { return horizon_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const double> transition_row(int state, std::size_t joint) const {
    return {transition_.data() + (static_cast<std::size_t>(state) * num_joint_ + joint) * num_states_,
            static_cast<std::size_t>(num_states_)};
  }
  double reward_at(int state, std::size_t joint) const {
    return reward_[static_cast<std::size_t>(state) * num_joint_ + joint];
  }
  std::span<const double> init_dist() const { return init_dist_; }
  std::span<const double> rewards() const { return reward_; }
  std::span<const double> transitions() const { return transition_; }

  /// max |r(s,a)| over the whole tensor (the r_max used in the bounds).
  double max_abs_reward() const { return r_max_; }

  bool operator==(const StochasticGame&) const = default;

 private:
  int num_states_;
  std::vector<int> action_dims_;
  std::size_t num_joint_;
  double gamma_;
  std::vector<double> transition_;  // S x J x S, row-major
  std::vector<double> reward_;      // S x J
  std::vector<double> init_dist_;   // S
  double noise_delta_;
  int horizon_;
  std::uint64_t seed_;
  double r_max_;
};

/// Randomly generates a game: rewards i.i.d. uniform on the unit interval,
/// transition rows normalized i.i.d. uniform-(0,1] vectors (strictly positive,
/// so the chain is irreducible), uniform initial distribution. If
/// noise_delta > 0, an independent draw in (0, noise_delta] is added to every
/// reward entry, making all entries pairwise distinct almost surely.
///
/// Pure function of (seed, parameters); draw order is fixed as rewards, then
/// transition rows, then noise, so the same seed with noise_delta = 0 yields
/// the identical pre-noise game.
StochasticGame generate_game(std::uint64_t seed, int num_states, int num_agents,
                             int actions_per_agent, double gamma,
                             double noise_delta, int horizon);

/// Samples one environment transition. Leaves `done` false; episode horizon
/// accounting belongs to the caller.
Transition step(const StochasticGame& game, int state, const JointAction& action,
                Rng& rng);

}  // namespace marlab
