#include <cmath>
#include <sstream>

#include "doctest.h"
#include "folilab/errors.hpp"
#include "folilab/rng.hpp"

using namespace folilab;

TEST_CASE("philox4x32-10 known-answer vectors") {
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
  RandomStream a(42, stream_id(StreamPurpose::noise, 3));
  RandomStream b(42, stream_id(StreamPurpose::noise, 3));
  RandomStream c(42, stream_id(StreamPurpose::noise, 4));
  RandomStream d(42, stream_id(StreamPurpose::init, 3));
  RandomStream e(43, stream_id(StreamPurpose::noise, 3));
  int same_c = 0, same_d = 0, same_e = 0;
  for (int i = 0; i < 100; ++i) {
    const std::uint32_t va = a.next_u32();
    CHECK(va == b.next_u32());
    same_c += va == c.next_u32();
    same_d += va == d.next_u32();
    same_e += va == e.next_u32();
  }
  CHECK(same_c < 3);
  CHECK(same_d < 3);
  CHECK(same_e < 3);
  CHECK_THROWS_AS(stream_id(StreamPurpose::noise, std::uint64_t{1} << 56), Error);
}

TEST_CASE("uniform and normal moments") {
  RandomStream s(7, 0);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0, sum4 = 0.0, umin = 1.0, umax = 0.0, usum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    usum += u;
    const double z = s.normal();
    sum += z;
    sum2 += z * z;
    sum4 += z * z * z * z;
  }
  CHECK(umin >= 0.0);
  CHECK(umax < 1.0);
  CHECK(std::abs(usum / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(sum / n) < 5 / std::sqrt(n));
  CHECK(std::abs(sum2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
  CHECK(std::abs(sum4 / n - 3.0) < 5 * std::sqrt(96.0 / n));
}

TEST_CASE("bounded integers cover the range evenly") {
  RandomStream s(1, 9);
  int counts[6] = {};
  for (int i = 0; i < 60000; ++i) ++counts[s.below(6)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  CHECK_THROWS_AS(s.below(0), Error);
}

TEST_CASE("noise paths: generation, coarsening, segments, csv replay") {
  RandomStream s(5, 0);
  const NoisePath fine = NoisePath::generate(s, 12, 3, 0.25);
  CHECK(fine.steps() == 12);
  CHECK(fine.dim() == 3);

  const NoisePath coarse = fine.coarsen(4);
  CHECK(coarse.steps() == 3);
  CHECK(coarse.dt() == 1.0);
  for (int i = 0; i < 3; ++i) {
    const double expected = fine.step(4)[i] + fine.step(5)[i] + fine.step(6)[i] + fine.step(7)[i];
    CHECK(coarse.step(1)[i] == doctest::Approx(expected).epsilon(1e-15));
  }
  CHECK(fine.coarsen(1) == fine);
  CHECK_THROWS_AS(fine.coarsen(5), Error);

  const NoisePath seg = fine.segment(2, 3);
  CHECK(seg.steps() == 3);
  CHECK(seg.step(0)[1] == fine.step(2)[1]);
  CHECK_THROWS_AS(fine.segment(10, 3), Error);

  std::stringstream ss;
  fine.write_csv(ss);
  CHECK(NoisePath::read_csv(ss) == fine);

  std::stringstream bad("dt,dB_1\n0.1,0.2\n0.2,0.3\n");
  CHECK_THROWS_AS(NoisePath::read_csv(bad), Error);
}

TEST_CASE("increments have variance dt") {
  RandomStream s(11, 0);
  const NoisePath p = NoisePath::generate(s, 50000, 2, 0.01);
  double sum2 = 0.0;
  for (long k = 0; k < p.steps(); ++k) sum2 += p.step(k)[0] * p.step(k)[0] + p.step(k)[1] * p.step(k)[1];
  CHECK(sum2 / (2.0 * p.steps()) == doctest::Approx(0.01).epsilon(0.03));
}
