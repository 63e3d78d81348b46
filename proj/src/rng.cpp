#include "mvlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace mvlab {

namespace {

constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;
constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kPhiloxM0, ctr[0], lo0, hi0);
    mulhilo(kPhiloxM1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

std::uint64_t lane_id(const char* name) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char* p = name; *p != '\0'; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t child) {
  return splitmix64(splitmix64(parent) ^ (child * 0xD1B54A32D192ED03ull + 1));
}

CounterStream::CounterStream(const StreamKey& k) {
  // Lanes that fit in 32 bits map injectively into the counter; the high
  // halves are folded into the key together with seed and experiment.
  const std::uint64_t high = (k.replicate >> 32) ^ ((k.particle >> 32) << 21) ^ ((k.step >> 32) << 42);
  const std::uint64_t key64 = splitmix64(splitmix64(k.master_seed) ^ splitmix64(k.experiment + 0x632BE59BD9B4E019ull) ^ high);
  key_ = {static_cast<std::uint32_t>(key64), static_cast<std::uint32_t>(key64 >> 32)};
  base_ = {0u, static_cast<std::uint32_t>(k.step), static_cast<std::uint32_t>(k.particle),
           static_cast<std::uint32_t>(k.replicate)};
}

void CounterStream::refill() {
  Philox4x32::Counter ctr = base_;
  ctr[0] = block_++;
  buffer_ = Philox4x32::generate(ctr, key_);
  used_ = 0;
}

std::uint32_t CounterStream::next_u32() {
  if (used_ == 4) refill();
  return buffer_[used_++];
}

double CounterStream::next_uniform() {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  const std::uint64_t bits = ((hi << 32) | lo) >> 11;  // 53 bits
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double CounterStream::next_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::vector<double> normal_draws(const StreamKey& key, std::size_t count) {
  std::vector<double> out(count);
  CounterStream stream(key);
  for (auto& z : out) z = stream.next_normal();
  return out;
}

void fill_normals(const StreamKey& key, Eigen::Ref<Eigen::VectorXd> out) {
  CounterStream stream(key);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = stream.next_normal();
}

}  // namespace mvlab
