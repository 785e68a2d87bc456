#pragma once

// Text checkpoint container for NetworkParams.
//
//   BLOWUP_PINN_CHECKPOINT 1
//   layer_sizes <L> <n_0> ... <n_{L-1}>
//   seed <u64>
//   iteration <i64>
//   parameters <P>
//   <P lines, one value each, flat ordering>
//
// Values are written in shortest round-trip form and reload exactly.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "blowup_pinn/diffnet.hpp"

namespace blowup_pinn {

inline constexpr const char* kCheckpointMagic = "BLOWUP_PINN_CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  NetworkParams params;
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
};

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_checkpoint(const Checkpoint& ck, std::ostream& os) {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  os << "layer_sizes " << ck.params.layer_sizes.size();
  for (int s : ck.params.layer_sizes) os << ' ' << s;
  os << "\nseed " << ck.seed << "\niteration " << ck.iteration << '\n';
  const Vector theta = ck.params.flat();
  os << "parameters " << theta.size() << '\n';
  for (Eigen::Index i = 0; i < theta.size(); ++i) os << format_double(theta[i]) << '\n';
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  auto fail = [](const std::string& what) { throw std::runtime_error("checkpoint: " + what); };
  auto expect_key = [&](const char* key) {
    std::string k;
    if (!(is >> k) || k != key) fail(std::string("expected '") + key + "'");
  };
  std::string magic;
  int version = 0;
  if (!(is >> magic) || magic != kCheckpointMagic) fail("missing magic header");
  if (!(is >> version) || version != kCheckpointVersion) fail("unsupported version " + std::to_string(version));

  expect_key("layer_sizes");
  std::size_t count = 0;
  if (!(is >> count) || count < 2 || count > 1024) fail("bad layer count");
  std::vector<int> sizes(count);
  for (auto& s : sizes)
    if (!(is >> s) || s <= 0) fail("bad layer size");

  Checkpoint ck;
  expect_key("seed");
  if (!(is >> ck.seed)) fail("bad seed");
  expect_key("iteration");
  if (!(is >> ck.iteration)) fail("bad iteration");

  ck.params = NetworkParams::zeros(sizes);
  expect_key("parameters");
  std::size_t n = 0;
  if (!(is >> n) || n != ck.params.parameter_count()) fail("parameter count does not match layer sizes");
  Vector theta(static_cast<Eigen::Index>(n));
  std::string token;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(is >> token)) fail("truncated parameter block");
    char* end = nullptr;
    theta[static_cast<Eigen::Index>(i)] = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) fail("malformed parameter '" + token + "'");
  }
  ck.params.assign_flat(theta);
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  write_checkpoint(ck, os);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  return read_checkpoint(is);
}

}  // namespace blowup_pinn
