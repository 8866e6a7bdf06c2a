#include "marlab/game_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "marlab/errors.hpp"

namespace marlab {

namespace {

constexpr char kMagic[8] = {'M', 'R', 'L', 'G', 'A', 'M', 'E', 'F'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64_block(std::span<const double> data) {
    u64(data.size());
    for (double v : data) f64(v);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

  void bytes(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      fail(std::string("truncated while reading ") + what);
    offset_ += n;
  }
  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(b, 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    unsigned char b[8];
    bytes(b, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  std::vector<double> f64_block(std::size_t expected_count, const char* what) {
    const std::uint64_t count = u64(what);
    if (count != expected_count)
      fail(std::string(what) + ": dimension record says " + std::to_string(count) +
           ", header implies " + std::to_string(expected_count));
    std::vector<double> data(expected_count);
    for (double& v : data) v = f64(what);
    return data;
  }

  void expect_eof() {
    in_.peek();
    if (!in_.eof()) fail("trailing bytes after the transition tensor");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(path_.string() + " (offset " + std::to_string(offset_) + "): " + msg);
  }

 private:
  std::istream& in_;
  std::filesystem::path path_;
  std::size_t offset_ = 0;
};

}  // namespace

void save_game(const StochasticGame& game, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("save_game: cannot open " + tmp.string());
    Writer w(out);
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(Rng::kAlgorithm.size()));
    w.bytes(Rng::kAlgorithm.data(), Rng::kAlgorithm.size());
    w.u64(game.seed());
    w.i32(game.num_states());
    w.i32(game.num_agents());
    for (int d : game.action_dims()) w.i32(d);
    w.f64(game.gamma());
    w.f64(game.noise_delta());
    w.i32(game.horizon());
    w.f64_block(game.init_dist());
    w.f64_block(game.rewards());
    w.f64_block(game.transitions());
    if (!out) throw FormatError("save_game: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

StochasticGame load_game(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_game: cannot open " + path.string());
  Reader r(in, path);

  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    r.fail("bad magic, not a game file");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion)
    r.fail("unsupported format version " + std::to_string(version));
  const std::uint32_t alg_len = r.u32("rng algorithm length");
  if (alg_len > 256) r.fail("implausible rng algorithm name length");
  std::string algorithm(alg_len, '\0');
  if (alg_len > 0) r.bytes(algorithm.data(), alg_len, "rng algorithm name");
  if (algorithm != Rng::kAlgorithm)
    r.fail("unsupported rng algorithm '" + algorithm + "'");

  const std::uint64_t seed = r.u64("seed");
  const std::int32_t num_states = r.i32("num_states");
  const std::int32_t num_agents = r.i32("num_agents");
  if (num_states < 1 || num_states > (1 << 24)) r.fail("implausible num_states");
  if (num_agents < 1 || num_agents > (1 << 16)) r.fail("implausible num_agents");
  std::vector<int> dims(static_cast<std::size_t>(num_agents));
  for (int& d : dims) {
    d = r.i32("action dim");
    if (d < 1) r.fail("non-positive action dim");
  }
  const double gamma = r.f64("gamma");
  const double noise_delta = r.f64("noise_delta");
  const std::int32_t horizon = r.i32("horizon");

  std::size_t joint = 0;
  try {
    joint = joint_action_count(dims);
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
  const auto s = static_cast<std::size_t>(num_states);

  std::vector<double> init = r.f64_block(s, "init distribution");
  std::vector<double> reward = r.f64_block(s * joint, "reward tensor");
  std::vector<double> transition = r.f64_block(s * joint * s, "transition tensor");
  r.expect_eof();

  try {
    return StochasticGame(num_states, std::move(dims), gamma, std::move(transition),
                          std::move(reward), std::move(init), noise_delta, horizon, seed);
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": invariant violation: " + e.what());
  }
}

}  // namespace marlab
