#include "mvlab/io.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

namespace mvlab {

namespace {

constexpr std::uint32_t kEnsembleVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    u64(v);
  }
  void raw(const char* s, std::size_t n) { out_.append(s, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  double f64() {
    const std::uint64_t v = uint(8);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw UsageError("ensemble file is truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

std::string encode_ensemble(const Ensemble& e) {
  if (e.paths.empty()) throw UsageError("cannot encode an empty ensemble");
  const auto J = static_cast<std::uint32_t>(e.init_x.size());
  const auto M = static_cast<std::uint32_t>(e.steps());
  const auto K = static_cast<std::uint32_t>(e.paths.front().control.actions());
  Writer w;
  w.raw("MVLE", 4);
  w.u32(kEnsembleVersion);
  w.u32(J);
  w.u32(M);
  w.u32(K);
  w.u32(static_cast<std::uint32_t>(e.size()));
  w.u64(e.seed);
  for (double t : e.times()) w.f64(t);
  for (Eigen::Index j = 0; j < e.init_x.size(); ++j) w.f64(e.init_x[j]);
  for (const auto& p : e.paths) {
    for (Eigen::Index m = 0; m <= M; ++m)
      for (Eigen::Index j = 0; j < J; ++j) w.f64(p.path.states(j, m));
    for (Eigen::Index m = 0; m < M; ++m)
      for (Eigen::Index k = 0; k < K; ++k) w.f64(p.control.cell_probs(m, k));
  }
  return w.take();
}

Ensemble decode_ensemble(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(4) != "MVLE") throw UsageError("not an ensemble file");
  const auto version = r.uint(4);
  if (version != kEnsembleVersion) throw UsageError("unsupported ensemble version " + std::to_string(version));
  const auto J = static_cast<Eigen::Index>(r.uint(4));
  const auto M = static_cast<Eigen::Index>(r.uint(4));
  const auto K = static_cast<Eigen::Index>(r.uint(4));
  const auto n = static_cast<std::size_t>(r.uint(4));
  Ensemble e;
  e.seed = r.uint(8);
  std::vector<double> times(static_cast<std::size_t>(M + 1));
  for (auto& t : times) t = r.f64();
  e.init_x.resize(J);
  for (Eigen::Index j = 0; j < J; ++j) e.init_x[j] = r.f64();
  e.paths.resize(n);
  for (auto& p : e.paths) {
    p.path.times = times;
    p.control.times = times;
    p.path.states.resize(J, M + 1);
    p.control.cell_probs.resize(M, K);
    for (Eigen::Index m = 0; m <= M; ++m)
      for (Eigen::Index j = 0; j < J; ++j) p.path.states(j, m) = r.f64();
    for (Eigen::Index m = 0; m < M; ++m)
      for (Eigen::Index k = 0; k < K; ++k) p.control.cell_probs(m, k) = r.f64();
  }
  if (!r.done()) throw UsageError("trailing bytes in ensemble file");
  return e;
}

}  // namespace mvlab
