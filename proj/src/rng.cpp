#include "folilab/rng.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "folilab/errors.hpp"
#include "folilab/io.hpp"

namespace folilab {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter c, PhiloxKey k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index) {
  if (index >> 56) throw Error(ErrorKind::invalid_params, "stream index too large");
  return (static_cast<std::uint64_t>(purpose) << 56) | index;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

void RandomStream::refill() {
  const PhiloxCounter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  buffer_ = philox4x32_10(ctr, key_);
  ++block_;
  used_ = 0;
}

std::uint32_t RandomStream::next_u32() {
  if (used_ == 4) refill();
  return buffer_[used_++];
}

std::uint64_t RandomStream::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double RandomStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t RandomStream::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::invalid_params, "below(0)");
  // rejection keeps the result exactly uniform
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

NoisePath::NoisePath(double dt, int dim, std::vector<double> increments)
    : dt_(dt), dim_(dim), data_(std::move(increments)) {
  if (!(dt > 0.0) || dim < 1 || data_.size() % dim != 0) {
    throw Error(ErrorKind::invalid_params, "noise path needs dt > 0 and whole steps");
  }
}

NoisePath NoisePath::generate(RandomStream& stream, long steps, int dim, double dt) {
  std::vector<double> data(static_cast<std::size_t>(steps) * dim);
  const double scale = std::sqrt(dt);
  for (double& v : data) v = scale * stream.normal();
  return NoisePath(dt, dim, std::move(data));
}

NoisePath NoisePath::zeros(long steps, int dim, double dt) {
  return NoisePath(dt, dim, std::vector<double>(static_cast<std::size_t>(steps) * dim, 0.0));
}

NoisePath NoisePath::coarsen(int factor) const {
  if (factor < 1 || steps() % factor != 0) {
    throw Error(ErrorKind::invalid_params, "coarsening factor must divide the step count");
  }
  const long out_steps = steps() / factor;
  std::vector<double> out(static_cast<std::size_t>(out_steps) * dim_, 0.0);
  for (long k = 0; k < steps(); ++k) {
    for (int i = 0; i < dim_; ++i) out[(k / factor) * dim_ + i] += data_[k * dim_ + i];
  }
  return NoisePath(dt_ * factor, dim_, std::move(out));
}

NoisePath NoisePath::segment(long first, long count) const {
  if (first < 0 || count < 0 || first + count > steps()) {
    throw Error(ErrorKind::invalid_params, "noise segment out of range");
  }
  return NoisePath(dt_, dim_,
                   std::vector<double>(data_.begin() + first * dim_, data_.begin() + (first + count) * dim_));
}

void NoisePath::write_csv(std::ostream& out) const {
  out << "dt";
  for (int i = 1; i <= dim_; ++i) out << ",dB_" << i;
  out << '\n';
  for (long k = 0; k < steps(); ++k) {
    out << format_double(dt_);
    for (int i = 0; i < dim_; ++i) out << ',' << format_double(data_[k * dim_ + i]);
    out << '\n';
  }
}

NoisePath NoisePath::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::config, "empty noise file");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "dt") throw Error(ErrorKind::config, "noise header must start with dt");
  const int dim = static_cast<int>(header.size()) - 1;
  double dt = 0.0;
  std::vector<double> data;
  long row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != dim + 1) {
      throw Error(ErrorKind::config, "noise row " + std::to_string(row) + " has the wrong width");
    }
    const double row_dt = parse_double(cells[0]);
    if (row == 0) dt = row_dt;
    if (row_dt != dt) throw Error(ErrorKind::config, "noise file mixes step sizes");
    for (int i = 0; i < dim; ++i) data.push_back(parse_double(cells[i + 1]));
    ++row;
  }
  if (row == 0) throw Error(ErrorKind::config, "noise file has no steps");
  return NoisePath(dt, dim, std::move(data));
}

}  // namespace folilab
