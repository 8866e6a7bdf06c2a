#include "marlab/game.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "marlab/errors.hpp"

namespace marlab {

namespace {

constexpr double kRowSumTol = 1e-12;

std::size_t checked_mul(std::size_t a, std::size_t b, const char* what) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a)
    throw CapacityError(std::string(what) + ": size overflows the index type");
  return a * b;
}

}  // namespace

std::size_t joint_action_count(std::span<const int> action_dims) {
  if (action_dims.empty())
    throw std::invalid_argument("joint_action_count: no agents");
  std::size_t n = 1;
  for (int d : action_dims) {
    if (d < 1) throw std::invalid_argument("joint_action_count: action dim must be positive");
    n = checked_mul(n, static_cast<std::size_t>(d), "joint action space");
  }
  return n;
}

std::size_t flatten_joint(const JointAction& action, std::span<const int> action_dims) {
  if (action.actions.size() != action_dims.size())
    throw std::invalid_argument("flatten_joint: agent count mismatch");
  std::size_t index = 0;
  for (std::size_t i = 0; i < action_dims.size(); ++i) {
    const int a = action.actions[i];
    if (a < 0 || a >= action_dims[i])
      throw std::invalid_argument("flatten_joint: action out of range for agent " + std::to_string(i));
    index = index * static_cast<std::size_t>(action_dims[i]) + static_cast<std::size_t>(a);
  }
  return index;
}

JointAction unflatten_joint(std::size_t index, std::span<const int> action_dims) {
  if (index >= joint_action_count(action_dims))
    throw std::invalid_argument("unflatten_joint: index out of range");
  JointAction action;
  action.actions.resize(action_dims.size());
  for (std::size_t i = action_dims.size(); i-- > 0;) {
    const auto d = static_cast<std::size_t>(action_dims[i]);
    action.actions[i] = static_cast<int>(index % d);
    index /= d;
  }
  return action;
}

StochasticGame::StochasticGame(int num_states, std::vector<int> action_dims,
                               double gamma, std::vector<double> transition,
                               std::vector<double> reward,
                               std::vector<double> init_dist, double noise_delta,
                               int horizon, std::uint64_t seed)
    : num_states_(num_states),
      action_dims_(std::move(action_dims)),
      num_joint_(0),
      gamma_(gamma),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      init_dist_(std::move(init_dist)),
      noise_delta_(noise_delta),
      horizon_(horizon),
      seed_(seed),
      r_max_(0.0) {
  if (num_states_ < 1) throw std::invalid_argument("StochasticGame: num_states must be positive");
  if (action_dims_.empty()) throw std::invalid_argument("StochasticGame: need at least one agent");
  num_joint_ = joint_action_count(action_dims_);
  if (!(gamma_ >= 0.0 && gamma_ < 1.0))
    throw std::invalid_argument("StochasticGame: gamma must lie in [0, 1)");
  if (noise_delta_ < 0.0) throw std::invalid_argument("StochasticGame: noise_delta must be >= 0");
  if (horizon_ < 1) throw std::invalid_argument("StochasticGame: horizon must be positive");

  const auto s = static_cast<std::size_t>(num_states_);
  const std::size_t sj = checked_mul(s, num_joint_, "reward tensor");
  if (reward_.size() != sj)
    throw std::invalid_argument("StochasticGame: reward tensor has wrong size");
  if (transition_.size() != checked_mul(sj, s, "transition tensor"))
    throw std::invalid_argument("StochasticGame: transition tensor has wrong size");
  if (init_dist_.size() != s)
    throw std::invalid_argument("StochasticGame: init distribution has wrong size");

  for (double r : reward_) {
    if (!std::isfinite(r)) throw std::invalid_argument("StochasticGame: non-finite reward entry");
    r_max_ = std::max(r_max_, std::abs(r));
  }
  for (std::size_t row = 0; row < sj; ++row) {
    double sum = 0.0;
    for (std::size_t k = 0; k < s; ++k) {
      const double p = transition_[row * s + k];
      if (!(p >= 0.0))
        throw std::invalid_argument("StochasticGame: negative transition probability in row " + std::to_string(row));
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw std::invalid_argument("StochasticGame: transition row " + std::to_string(row) +
                                  " sums to " + std::to_string(sum) + ", expected 1");
  }
  double isum = 0.0;
  for (double p : init_dist_) {
    if (!(p >= 0.0)) throw std::invalid_argument("StochasticGame: negative init probability");
    isum += p;
  }
  if (std::abs(isum - 1.0) > kRowSumTol)
    throw std::invalid_argument("StochasticGame: init distribution does not sum to 1");
}

StochasticGame generate_game(std::uint64_t seed, int num_states, int num_agents,
                             int actions_per_agent, double gamma,
                             double noise_delta, int horizon) {
  if (num_states < 1) throw std::invalid_argument("generate_game: num_states must be >= 1");
  if (num_agents < 1) throw std::invalid_argument("generate_game: num_agents must be >= 1");
  if (actions_per_agent < 1) throw std::invalid_argument("generate_game: actions_per_agent must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("generate_game: gamma must lie in [0, 1)");
  if (noise_delta < 0.0) throw std::invalid_argument("generate_game: noise_delta must be >= 0");
  if (horizon < 1) throw std::invalid_argument("generate_game: horizon must be >= 1");

  std::vector<int> dims(static_cast<std::size_t>(num_agents), actions_per_agent);
  const std::size_t joint = joint_action_count(dims);
  const auto s = static_cast<std::size_t>(num_states);
  const std::size_t sj = checked_mul(s, joint, "reward tensor");
  const std::size_t sjs = checked_mul(sj, s, "transition tensor");

  Rng rng(seed);

  std::vector<double> reward(sj);
  for (double& r : reward) r = rng.uniform01();

  std::vector<double> transition(sjs);
  for (std::size_t row = 0; row < sj; ++row) {
    double* p = transition.data() + row * s;
    double sum = 0.0;
    for (std::size_t k = 0; k < s; ++k) {
      p[k] = rng.uniform_pos();
      sum += p[k];
    }
    for (std::size_t k = 0; k < s; ++k) p[k] /= sum;
  }

  if (noise_delta > 0.0) {
    for (double& r : reward) r += rng.uniform_pos() * noise_delta;
  }

  std::vector<double> init(s, 1.0 / static_cast<double>(num_states));

  return StochasticGame(num_states, std::move(dims), gamma, std::move(transition),
                        std::move(reward), std::move(init), noise_delta, horizon, seed);
}

Transition step(const StochasticGame& game, int state, const JointAction& action,
                Rng& rng) {
  if (state < 0 || state >= game.num_states())
    throw std::invalid_argument("step: state out of range");
  const std::size_t j = flatten_joint(action, game.action_dims());
  Transition tr;
  tr.state = state;
  tr.actions = action;
  tr.reward = game.reward_at(state, j);
  tr.next_state = sample_categorical(game.transition_row(state, j), rng);
  tr.done = false;
  return tr;
}

}  // namespace marlab
