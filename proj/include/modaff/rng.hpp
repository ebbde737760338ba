#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace modaff {

/// One reproducible random stream. Stream ids index independent sequences
/// derived from a single run seed, so path i always sees the same numbers no
/// matter which thread simulates it.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                      0x6d6f6461u};
    engine_.seed(seq);
  }

  double uniform() { return uniform_(engine_); }
  /// Uniform on (0, 1], safe for logarithms.
  double uniform_pos() { return 1.0 - uniform_(engine_); }
  double normal() { return normal_(engine_); }
  double exponential() { return -std::log(uniform_pos()); }
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(engine_);
  }

  std::uint64_t id() const { return stream_id_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace modaff
