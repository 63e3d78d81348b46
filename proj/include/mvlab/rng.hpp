#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace mvlab {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Stateless: a pure
/// function of (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key);
};

/// Identifies one independent random stream. Lanes are compared exactly;
/// particle, step and replicate must fit in 32 bits.
struct StreamKey {
  std::uint64_t master_seed = 0;
  std::uint64_t experiment = 0;
  std::uint64_t replicate = 0;
  std::uint64_t particle = 0;
  std::uint64_t step = 0;

  StreamKey with_replicate(std::uint64_t r) const {
    StreamKey k = *this;
    k.replicate = r;
    return k;
  }
  StreamKey with_particle(std::uint64_t p) const {
    StreamKey k = *this;
    k.particle = p;
    return k;
  }
  StreamKey with_step(std::uint64_t s) const {
    StreamKey k = *this;
    k.step = s;
    return k;
  }
};

/// Stable 64-bit lane id for a named experiment / purpose.
std::uint64_t lane_id(const char* name);

/// Mixes a parent seed with a child index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t child);

/// Counter-mode stream over a StreamKey. Cheap to construct.
class CounterStream {
 public:
  explicit CounterStream(const StreamKey& key);

  std::uint32_t next_u32();
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double next_uniform();
  /// Standard normal via Box-Muller; pairs are cached.
  double next_normal();

 private:
  void refill();

  Philox4x32::Key key_{};
  Philox4x32::Counter base_{};
  std::uint32_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Deterministic standard normals for `key`. The same key always yields the
/// same sequence; a prefix of a longer draw equals a shorter draw.
std::vector<double> normal_draws(const StreamKey& key, std::size_t count);

/// Fills `out` with standard normals from `key` (same sequence as
/// normal_draws).
void fill_normals(const StreamKey& key, Eigen::Ref<Eigen::VectorXd> out);

}  // namespace mvlab
