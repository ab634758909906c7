#include <cmath>

#include "doctest.h"
#include "folilab/errors.hpp"
#include "folilab/sde.hpp"

using namespace folilab;

namespace {

ChartVector pt(double a) {
  ChartVector x(1);
  x << a;
  return x;
}

ChartVector pt(double a, double b) {
  ChartVector x(2);
  x << a, b;
  return x;
}

}  // namespace

TEST_CASE("pullback fields") {
  const FoliatedModel c = circle_model();
  const PulledBackFields f0 = pullback_fields(c, pt(0.0));
  CHECK(f0.a(0, 0) == doctest::Approx(0.0));
  CHECK(f0.a(0, 1) == doctest::Approx(1.0));
  CHECK(f0.b.norm() == 0.0);
  const PulledBackFields f1 = pullback_fields(c, pt(0.9));
  CHECK(f1.a(0, 0) == doctest::Approx(-std::sin(0.9)));
  CHECK(f1.a(0, 1) == doctest::Approx(std::cos(0.9)));

  for (const FoliatedModel& m : {clifford_torus(1.0), torus_revolution(2.0, 1.0), clifford_torus(std::sqrt(2.0))}) {
    for (double s : {0.0, 1.1, 4.2}) {
      const ChartVector x = pt(s, 0.7);
      const PulledBackFields f = pullback_fields(m, x, {DriftSpec::Kind::leaf_constant, 0.8});
      const Jacobian j = jacobian(m, x);
      const auto je = j.leftCols(1);
      const AmbientMatrix leaf = projections(j, 1).leaf;
      for (int i = 0; i < m.ambient_dim(); ++i) CHECK((je * f.a.col(i) - leaf.col(i)).norm() <= 1e-8);
      const ChartMatrix gram = je.transpose() * je;
      CHECK((f.a * f.a.transpose() - gram.inverse()).norm() <= 1e-12);
      CHECK((je * f.b - DriftField(m, {DriftSpec::Kind::leaf_constant, 0.8}).ambient(x)).norm() <= 1e-12);
    }
  }
  const PulledBackFields fc = pullback_fields(clifford_torus(1.0), pt(2.0, 1.0));
  CHECK((fc.a * fc.a.transpose())(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("heun steps: fixed points and exact leaf preservation") {
  const FoliatedModel m = torus_revolution(2.0, 1.0);
  const LeafDynamics dyn(m, {});
  const PathState s0 = PathState::start(m, pt(1.0, 2.5));
  const PathState same = step_stratonovich(dyn, s0, 0.01, AmbientVector::Zero(3));
  CHECK(same.x == s0.x);
  CHECK(same.t == 0.01);

  const LeafDynamics drifted(m, {DriftSpec::Kind::leaf_constant, 1.3});
  RandomStream rng(3, 0);
  PathState s = s0;
  for (int k = 0; k < 2000; ++k) {
    AmbientVector z(3);
    for (int i = 0; i < 3; ++i) z[i] = rng.normal();
    s = step_stratonovich(drifted, s, 0.01, z);
    REQUIRE(s.x[1] == s0.w0[0]);
    REQUIRE(s.x[0] >= 0.0);
    REQUIRE(s.x[0] < kTwoPi);
  }
}

TEST_CASE("circle: strong error drops by at least 1.8 when dt is quartered") {
  // the frame fields -sin, cos do not commute, so the scheme has strong order 1/2
  const FoliatedModel c = circle_model();
  const LeafDynamics dyn(c, {});
  const long fine_steps = 6400;  // reference dt = 1e-2 / 64 over T = 1
  const int paths = 2048;
  double err_coarse = 0.0, err_quarter = 0.0;
  for (int p = 0; p < paths; ++p) {
    const NoisePath fine = path_noise(99, p, fine_steps, 2, 1.0 / fine_steps);
    const ChartVector x0 = pt(kTwoPi * p / paths);
    auto end_point = [&](int factor) {
      PathState s = PathState::start(c, x0);
      return c.embed(advance(dyn, s, fine.coarsen(factor), false).x);
    };
    const AmbientVector ref = end_point(1);
    err_coarse += (end_point(64) - ref).squaredNorm();
    err_quarter += (end_point(16) - ref).squaredNorm();
  }
  const double ratio = std::sqrt(err_coarse / err_quarter);
  MESSAGE("rms error ratio " << ratio);
  CHECK(ratio >= 1.8);
}

TEST_CASE("log-determinant increment") {
  const FoliatedModel c = circle_model();
  const LeafDynamics dyn(c, {});
  const double dB0[2] = {0.0, 0.0};
  const LogdetIntegrands in = dyn.integrands(pt(0.4));
  const LogdetIncrement inc = logdet_increment(dyn, pt(0.4), 0.01, dB0);
  CHECK(inc.full == doctest::Approx(0.5 * in.flux * 0.01).epsilon(1e-14));
  // circle: div X_i = -psi_i, sum_i X_i div X_i = -1
  CHECK(in.flux == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(in.div_frame[0] == doctest::Approx(-std::cos(0.4)).epsilon(1e-8));
  CHECK(in.div_frame[1] == doctest::Approx(-std::sin(0.4)).epsilon(1e-8));
  CHECK(inc.leaf == doctest::Approx(inc.full).epsilon(1e-12));

  const double dB[2] = {0.03, -0.02};
  const LogdetIncrement noisy = logdet_increment(dyn, pt(0.4), 0.01, dB);
  CHECK(noisy.full == doctest::Approx(in.div_frame[0] * 0.03 - in.div_frame[1] * 0.02 + 0.5 * in.flux * 0.01));
}

TEST_CASE("zero-noise run accumulates only the dt term") {
  const FoliatedModel m = torus_revolution(2.0, 1.0);
  const LeafDynamics dyn(m, {DriftSpec::Kind::leaf_constant, 1.0});
  const NoisePath zero = NoisePath::zeros(200, 3, 0.01);
  const PathRecord rec = simulate_path(dyn, pt(0.3, 1.0), zero, 1, true);
  double expected = 0.0;
  ChartVector x = pt(0.3, 1.0);
  for (const PathSample& s : rec.samples) {
    const LogdetIntegrands in = dyn.integrands(x);
    expected += (in.drift_div + 0.5 * in.flux) * 0.01;
    x = s.x;
  }
  CHECK(rec.final_state.logdet_full == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("flow oracle") {
  const FoliatedModel m = torus_revolution(2.0, 1.0);
  const LeafDynamics dyn(m, {DriftSpec::Kind::leaf_constant, 1.0});

  SUBCASE("empty path is the identity") {
    const FlowOracle o = jacobian_flow_oracle(dyn, pt(0.3, 1.0), NoisePath::zeros(0, 3, 0.01));
    CHECK(o.jacobian == ChartMatrix::Identity(2, 2));
    CHECK(o.logdet == 0.0);
    CHECK(leaf_det(o) == 1.0);
  }

  SUBCASE("deterministic drift: Liouville") {
    // V = d_theta / r is a rotation of the meridian: ln det = ln(rho_T / rho_0), leaf block is a translation
    const double theta0 = 0.3;
    const FlowOracle o = jacobian_flow_oracle(dyn, pt(theta0, 1.0), NoisePath::zeros(250, 3, 0.01));
    const double thetaT = theta0 + 2.5;
    CHECK(o.x_T[0] == doctest::Approx(thetaT).epsilon(1e-10));
    CHECK(o.logdet == doctest::Approx(std::log((2.0 + std::cos(thetaT)) / (2.0 + std::cos(theta0)))).epsilon(1e-6));
    CHECK(o.leaf_logdet == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  }

  SUBCASE("cocycle") {
    const NoisePath noise = path_noise(4, 0, 300, 3, 0.01);
    const ChartVector x0 = pt(0.3, 1.0);
    const FlowOracle whole = jacobian_flow_oracle(dyn, x0, noise);
    const FlowOracle first = jacobian_flow_oracle(dyn, x0, noise.segment(0, 100));
    const FlowOracle second = jacobian_flow_oracle(dyn, first.x_T, noise.segment(100, 200));
    CHECK((second.jacobian * first.jacobian - whole.jacobian).norm() <= 1e-6 * whole.jacobian.norm());
    CHECK(first.logdet + second.logdet == doctest::Approx(whole.logdet).epsilon(1e-6));
    CHECK(std::exp(first.chart_logdet + second.chart_logdet) ==
          doctest::Approx(std::exp(whole.chart_logdet)).epsilon(1e-6));
  }

  SUBCASE("leaf-only bumping gives the same leaf determinant") {
    const NoisePath noise = path_noise(4, 1, 150, 3, 0.01);
    OracleOptions leaf;
    leaf.leaf_only = true;
    const FlowOracle a = jacobian_flow_oracle(dyn, pt(2.0, 0.5), noise);
    const FlowOracle b = jacobian_flow_oracle(dyn, pt(2.0, 0.5), noise, leaf);
    CHECK(a.leaf_logdet == doctest::Approx(b.leaf_logdet).epsilon(1e-7));
    CHECK(leaf_det(b) > 0.0);
  }

  SUBCASE("bumps outside the linear regime are rejected") {
    OracleOptions huge;
    huge.bump = 1e-2;
    CHECK_THROWS_AS(jacobian_flow_oracle(dyn, pt(0.3, 1.0), path_noise(4, 2, 10, 3, 0.01), huge), Error);
  }
}

TEST_CASE("circle: leaf determinant equals the full determinant") {
  const FoliatedModel c = circle_model();
  const LeafDynamics dyn(c, {});
  const FlowOracle o = jacobian_flow_oracle(dyn, pt(1.0), path_noise(8, 0, 500, 2, 0.01));
  CHECK(leaf_det(o) == doctest::Approx(o.leaf_sign * std::exp(o.logdet)).epsilon(1e-12));
}

TEST_CASE("formula and oracle agree pathwise on a short circle run") {
  const FoliatedModel c = circle_model();
  const LeafDynamics dyn(c, {});
  const NoisePath noise = path_noise(21, 0, 2000, 2, 1e-3);
  const PathState end = advance(dyn, PathState::start(c, pt(0.5)), noise);
  const FlowOracle o = jacobian_flow_oracle(dyn, pt(0.5), noise);
  CHECK(std::abs(end.logdet_full - o.logdet) <= 0.05);
}

TEST_CASE("ensembles") {
  const FoliatedModel m = clifford_torus(1.0);
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.T = 0.5;
  cfg.n_paths = 3;
  cfg.seed = 17;
  cfg.record_every = 7;
  const Ensemble a = simulate_ensemble(m, cfg);
  const Ensemble b = simulate_ensemble(m, cfg);
  REQUIRE(a.paths.size() == 3);
  for (std::size_t p = 0; p < 3; ++p) {
    REQUIRE(a.paths[p].samples.size() == b.paths[p].samples.size());
    CHECK(a.paths[p].samples.size() == 8);  // steps 7, 14, ..., 49 and the final step 50
    for (std::size_t k = 0; k < a.paths[p].samples.size(); ++k) {
      CHECK(a.paths[p].samples[k].x == b.paths[p].samples[k].x);
      CHECK(a.paths[p].samples[k].logdet_full == b.paths[p].samples[k].logdet_full);
    }
    CHECK(a.paths[p].samples.back().t == doctest::Approx(0.5).epsilon(1e-15));
  }
  CHECK(a.paths[0].x0 != a.paths[1].x0);

  cfg.n_paths = 1;
  cfg.T = cfg.dt;
  cfg.record_every = 1;
  CHECK(simulate_ensemble(m, cfg).paths[0].samples.size() == 1);

  cfg.dt = -1.0;
  CHECK_THROWS_AS(simulate_ensemble(m, cfg), Error);
}

TEST_CASE("volume sampling follows sqrt(det g)") {
  // torus of revolution: density proportional to 2 + cos(theta)
  const FoliatedModel m = torus_revolution(2.0, 1.0);
  RandomStream s(2, 0);
  const double bound = volume_density_bound(m);
  const int n = 40000;
  double mean_cos = 0.0;
  for (int i = 0; i < n; ++i) mean_cos += std::cos(sample_volume(m, s, bound)[0]);
  mean_cos /= n;
  // E[cos] = (1/2) / 2 = 0.25 under the weight (2 + cos)
  CHECK(std::abs(mean_cos - 0.25) < 5 * 0.72 / std::sqrt(n));
}

TEST_CASE("parallel_for reports failures") {
  std::vector<int> out(50, 0);
  parallel_for(50, [&](std::size_t i) { out[i] = static_cast<int>(i) * 2; }, 3);
  for (int i = 0; i < 50; ++i) CHECK(out[i] == 2 * i);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 4) throw Error(ErrorKind::config, "boom");
                  }, 2),
                  Error);
}
