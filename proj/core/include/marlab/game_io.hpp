#pragma once

#include <filesystem>

#include "marlab/game.hpp"

namespace marlab {

/// Self-describing binary game container, version 1. Little-endian
/// throughout; all floats stored as raw IEEE-754 bits, so save/load
/// round-trips are bit-exact. Layout:
///
///   magic "MRLGAMEF" | u32 version | u32 len + rng algorithm name |
///   u64 seed | i32 num_states | i32 num_agents | i32 action_dims[n] |
///   f64 gamma | f64 noise_delta | i32 horizon |
///   (u64 count, f64 data[count]) for init_dist, reward, transition
///
/// Written atomically (temp file + rename).
void save_game(const StochasticGame& game, const std::filesystem::path& path);

/// Loads and fully validates a game file. Throws FormatError on malformed,
/// truncated, or invariant-violating input; never returns a partial game.
StochasticGame load_game(const std::filesystem::path& path);

}  // namespace marlab
