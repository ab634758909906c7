#pragma once

// Counter-based random numbers (Philox4x32-10) and Brownian increment paths.
//
// A stream is identified by (seed, stream id); block b of a stream is
// philox(counter = (b, stream id), key = seed), so any path of any run can be
// regenerated independently of every other.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace folilab {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

enum class StreamPurpose : std::uint64_t { noise = 0, init = 1, resample = 2, bootstrap = 3 };

/// Stream id for (purpose, index); the purpose occupies the top byte.
std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index);

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal by the Box-Muller transform.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  void refill();

  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Brownian increments dB for `steps` steps of size dt in R^dim, row-major.
class NoisePath {
 public:
  NoisePath() = default;
  NoisePath(double dt, int dim, std::vector<double> increments);

  /// Draws steps * dim normals from the stream, in step order.
  static NoisePath generate(RandomStream& stream, long steps, int dim, double dt);
  static NoisePath zeros(long steps, int dim, double dt);

  double dt() const { return dt_; }
  int dim() const { return dim_; }
  long steps() const { return dim_ == 0 ? 0 : static_cast<long>(data_.size()) / dim_; }
  const double* step(long k) const { return data_.data() + k * dim_; }

  /// Sums consecutive groups of `factor` increments: the same Brownian path at step dt * factor.
  NoisePath coarsen(int factor) const;
  /// Steps [first, first + count).
  NoisePath segment(long first, long count) const;

  void write_csv(std::ostream& out) const;
  static NoisePath read_csv(std::istream& in);

  bool operator==(const NoisePath&) const = default;

 private:
  double dt_ = 0.0;
  int dim_ = 0;
  std::vector<double> data_;
};

}  // namespace folilab
