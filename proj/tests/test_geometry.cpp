#include <cmath>
#include <random>

#include "doctest.h"
#include "folilab/errors.hpp"
#include "folilab/geometry.hpp"
#include "folilab/model.hpp"

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

AmbientVector amb(std::initializer_list<double> v) {
  AmbientVector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double c : v) out[i++] = c;
  return out;
}

std::vector<ChartVector> grid(const FoliatedModel& m, int per_axis) {
  std::vector<ChartVector> out;
  const int d = m.chart_dim();
  int total = 1;
  for (int k = 0; k < d; ++k) total *= per_axis;
  for (int idx = 0; idx < total; ++idx) {
    ChartVector a(d);
    int rest = idx;
    for (int k = 0; k < d; ++k) {
      a[k] = kTwoPi * (rest % per_axis + 0.5) / per_axis;
      rest /= per_axis;
    }
    out.push_back(m.from_angles(a));
  }
  return out;
}

std::vector<FoliatedModel> builtins() {
  return {circle_model(), clifford_torus(0.0), clifford_torus(1.0), clifford_torus(std::sqrt(2.0)),
          torus_revolution(2.0, 1.0)};
}

// Independent directional derivative of a scalar field along a leaf vector v in E.
double scalar_along(const FoliatedModel& m, const ScalarField& f, const ChartVector& x, const AmbientVector& v) {
  const Pullback lp = detail::leaf_pullback(m.analytic_jacobian(x), m.leaf_dim());
  ChartVector a = ChartVector::Zero(m.chart_dim());
  a.head(m.leaf_dim()) = lp * v;
  const double h = 1e-5;
  return (f(x + h * a) - f(x - h * a)) / (2 * h);
}

}  // namespace

TEST_CASE("jacobian: analytic values and finite-difference agreement") {
  const Jacobian jc = jacobian(circle_model(), pt(0.0));
  CHECK(jc(0, 0) == doctest::Approx(0.0));
  CHECK(jc(1, 0) == doctest::Approx(1.0));

  const Jacobian jt = jacobian(clifford_torus(1.0), pt(0.0, 0.0));
  CHECK((AmbientVector(jt.col(0)) - amb({0, 1, 0, 1})).norm() < 1e-15);
  CHECK((AmbientVector(jt.col(1)) - amb({0, 0, 0, 1})).norm() < 1e-15);

  for (const FoliatedModel& m : builtins()) {
    for (const ChartVector& x : grid(m, 9)) {
      const Jacobian a = jacobian(m, x, JacobianMode::analytic);
      const Jacobian f = jacobian(m, x, JacobianMode::finite_difference, 1e-5);
      CHECK((a - f).norm() <= 1e-8);
    }
  }
}

TEST_CASE("jacobian rejects degenerate chart points") {
  ModelDefinition def;
  def.name = "cusp";
  def.leaf_dim = 1;
  def.ambient_dim = 2;
  def.embedding = [](const ChartVector& x) {
    AmbientVector y(2);
    y << x[0] * x[0], x[0] * x[0] * x[0];
    return y;
  };
  def.angle_map = ChartMatrix::Identity(1, 1);
  def.leaf_periods = {std::nullopt};
  const FoliatedModel cusp(std::move(def));
  CHECK_THROWS_AS(jacobian(cusp, pt(0.0), JacobianMode::finite_difference), Error);
  try {
    jacobian(cusp, pt(0.0), JacobianMode::finite_difference);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::non_immersion);
  }
  CHECK_NOTHROW(jacobian(cusp, pt(1.0), JacobianMode::finite_difference));
}

TEST_CASE("projections and gradient frame") {
  const Projections pc = projections(jacobian(circle_model(), pt(0.0)), 1);
  AmbientMatrix expected_circle(2, 2);
  expected_circle << 0, 0, 0, 1;
  CHECK((pc.tangent - expected_circle).norm() < 1e-15);

  const Projections pt_ = projections(jacobian(clifford_torus(1.0), pt(0.0, 0.0)), 1);
  const AmbientVector v = amb({0, 1, 0, 1});
  CHECK((pt_.leaf - AmbientMatrix(v * v.transpose() / 2.0)).norm() < 1e-15);

  const auto frame_c = gradient_frame(pc.leaf);
  CHECK(frame_c[0].norm() < 1e-15);
  CHECK((frame_c[1] - amb({0, 1})).norm() < 1e-15);
  const auto frame_t = gradient_frame(pt_.leaf);
  CHECK((frame_t[1] - amb({0, 0.5, 0, 0.5})).norm() < 1e-15);

  CHECK_THROWS_AS(projections(Jacobian::Zero(2, 1), 1), Error);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  for (const FoliatedModel& m : builtins()) {
    for (int trial = 0; trial < 25; ++trial) {
      ChartVector x(m.chart_dim());
      for (int k = 0; k < m.chart_dim(); ++k) x[k] = angle(rng);
      const TangentData t = tangent_data(m, x);
      const AmbientMatrix& P = t.proj_tangent;
      const AmbientMatrix& Pl = t.proj_leaf;
      CHECK((P * P - P).norm() <= 1e-10);
      CHECK((Pl * Pl - Pl).norm() <= 1e-10);
      CHECK((P - P.transpose()).norm() <= 1e-10);
      CHECK((Pl - Pl.transpose()).norm() <= 1e-10);
      CHECK((Pl * P - Pl).norm() <= 1e-10);
      CHECK((P * Pl - Pl).norm() <= 1e-10);

      Eigen::SelfAdjointEigenSolver<AmbientMatrix> ep(P), el(Pl);
      CHECK((ep.eigenvalues().array() > 0.5).count() == m.chart_dim());
      CHECK((el.eigenvalues().array() > 0.5).count() == m.leaf_dim());

      AmbientMatrix outer = AmbientMatrix::Zero(m.ambient_dim(), m.ambient_dim());
      double leaf_trace = 0.0, tangent_trace = 0.0;
      for (const auto& xi : t.frame) {
        outer += xi * xi.transpose();
        leaf_trace += xi.squaredNorm();
      }
      for (Eigen::Index i = 0; i < P.cols(); ++i) tangent_trace += P.col(i).squaredNorm();
      CHECK((outer - Pl).norm() <= 1e-10);
      CHECK(leaf_trace == doctest::Approx(m.leaf_dim()).epsilon(1e-12));
      CHECK(tangent_trace == doctest::Approx(m.chart_dim()).epsilon(1e-12));
    }
  }
}

TEST_CASE("directional derivative") {
  const FoliatedModel c = circle_model();
  const double th = 0.8;
  const VectorField tangent = [](const ChartVector& x) { return AmbientVector(amb({-std::sin(x[0]), std::cos(x[0])})); };
  const VectorField constant = [](const ChartVector&) { return AmbientVector(amb({3.0, -1.0})); };
  const VectorField position = [&c](const ChartVector& x) { return c.embed(x); };
  const AmbientVector v = tangent(pt(th));

  CHECK(directional_derivative(c, pt(th), constant, v).norm() == 0.0);
  CHECK((directional_derivative(c, pt(th), position, v) - v).norm() < 1e-9);
  CHECK((directional_derivative(c, pt(th), tangent, v) + c.embed(pt(th))).norm() < 1e-9);

  const FoliatedModel t = torus_revolution(2.0, 1.0);
  const ChartVector x = pt(0.4, 1.1);
  const AmbientVector w = jacobian(t, x) * pt(0.3, -0.2);
  const VectorField pos_t = [&t](const ChartVector& y) { return t.embed(y); };
  CHECK((directional_derivative(t, x, pos_t, w) - w).norm() < 1e-9);

  // normal direction to the unit circle
  CHECK_THROWS_AS(directional_derivative(c, pt(th), position, c.embed(pt(th))), Error);
}

TEST_CASE("leaf and ambient divergence") {
  const FoliatedModel c = circle_model();
  const VectorField unit_tangent = [](const ChartVector& x) {
    return AmbientVector(amb({-std::sin(x[0]), std::cos(x[0])}));
  };
  CHECK(std::abs(leaf_divergence(c, pt(1.3), unit_tangent)) < 1e-9);
  CHECK(std::abs(ambient_divergence(c, pt(1.3), unit_tangent)) < 1e-9);

  // constant chart coefficients on the flat torus: divergence-free
  const FoliatedModel cl = clifford_torus(1.0);
  const VectorField leaf_const = [&cl](const ChartVector& x) { return AmbientVector(2.5 * cl.analytic_jacobian(x).col(0)); };
  const VectorField unit_leaf = drift_field(cl, {DriftSpec::Kind::leaf_constant, 1.0});
  for (const ChartVector& x : grid(cl, 4)) {
    CHECK(std::abs(leaf_divergence(cl, x, leaf_const)) < 1e-9);
    CHECK(std::abs(ambient_divergence(cl, x, unit_leaf)) < 1e-9);
  }

  // values outside E are rejected
  const VectorField transverse = [&cl](const ChartVector& x) { return AmbientVector(cl.analytic_jacobian(x).col(1)); };
  CHECK_THROWS_AS(leaf_divergence(cl, pt(0.2, 0.3), transverse), Error);

  // Leibniz rule against an independent scalar derivative
  const FoliatedModel tr = torus_revolution(2.0, 1.0);
  const ScalarField f = [](const ChartVector& x) { return 0.3 + std::sin(x[0] + 2.0 * x[1]) * std::cos(x[1]); };
  for (int i = 0; i < 3; ++i) {
    const VectorField frame_i = [&tr, i](const ChartVector& x) {
      return AmbientVector(projections(jacobian(tr, x), 1).leaf.col(i));
    };
    const VectorField scaled = [&](const ChartVector& x) { return AmbientVector(f(x) * frame_i(x)); };
    for (const ChartVector& x : grid(tr, 4)) {
      const double lhs = leaf_divergence(tr, x, scaled);
      const double rhs = f(x) * leaf_divergence(tr, x, frame_i) + scalar_along(tr, f, x, frame_i(x));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8).scale(1.0));
    }
  }
}

TEST_CASE("tension matches the coordinate divergence difference on the torus of revolution") {
  const double R = 2.0, r = 1.0;
  const FoliatedModel tr = torus_revolution(R, r);
  const VectorField d_theta = [&tr](const ChartVector& x) { return AmbientVector(tr.analytic_jacobian(x).col(0)); };
  for (const ChartVector& x : grid(tr, 6)) {
    const double rho = R + r * std::cos(x[0]);
    // sqrt(det g) = r rho: div d_theta = -r sin(theta) / rho, leaf metric is constant
    const double expected = r * std::sin(x[0]) / rho;
    const double diff = leaf_divergence(tr, x, d_theta) - ambient_divergence(tr, x, d_theta);
    CHECK(diff == doctest::Approx(expected).epsilon(1e-8).scale(1.0));
    const AmbientVector kappa = tension(tr, x);
    CHECK(kappa.dot(d_theta(x)) == doctest::Approx(expected).epsilon(1e-8).scale(1.0));
    CHECK(kappa.norm() == doctest::Approx(std::abs(std::sin(x[0])) / rho).epsilon(1e-8).scale(1.0));
  }
  CHECK(tension(tr, pt(M_PI / 2, 0.3)).norm() == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(tension(tr, pt(0.0, 1.0)).norm() < 1e-9);
  for (const ChartVector& x : grid(clifford_torus(std::sqrt(2.0)), 5)) {
    CHECK(tension(clifford_torus(std::sqrt(2.0)), x).norm() < 1e-9);
  }
}

TEST_CASE("tension equals +nabla_N N and kappa + nabla_N N = 2 kappa") {
  // g(kappa, X) = div_E X - div X forces kappa = nabla_N N; kappa + nabla_N N = 2 kappa.
  const FoliatedModel tr = torus_revolution(2.0, 1.0);
  const ChartVector x = pt(M_PI / 2, 0.0);
  const auto report = geometry_identities(tr, x, trig_test_functions(tr));
  CHECK(report.residuals.at("r4") < 1e-6);
  const double rho = 2.0;
  // inward pointing: the curvature of the latitude circle through x
  const AmbientVector toward_axis = -tr.embed(x).cwiseProduct(amb({1, 1, 0})) / rho;
  CHECK(report.tension.dot(toward_axis) > 0.0);
}

TEST_CASE("mean curvature against analytic leaf curvature") {
  const FoliatedModel c = circle_model();
  for (double th : {0.0, 0.7, 2.5, 4.0}) {
    // <H, v> = -div_E(P~ v): for the unit circle div_E(P~ e_j) = -psi_j
    const AmbientVector h = mean_curvature(c, pt(th));
    CHECK((h - c.embed(pt(th))).norm() < 1e-9);
  }
  for (double alpha : {0.0, 0.5, 1.0, std::sqrt(2.0), 3.0}) {
    const FoliatedModel m = clifford_torus(alpha);
    const double a2 = alpha * alpha;
    const double expected = (1 + a2 * a2) / ((1 + a2) * (1 + a2));
    for (const ChartVector& x : grid(m, 4)) {
      CHECK(mean_curvature(m, x).squaredNorm() == doctest::Approx(expected).epsilon(1e-9));
    }
  }
  const FoliatedModel tr = torus_revolution(3.0, 0.5);
  for (const ChartVector& x : grid(tr, 5)) CHECK(mean_curvature(tr, x).norm() == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("H is normal to E, kappa lies in E, and the trace route matches the literal route") {
  for (const FoliatedModel& m : builtins()) {
    for (const ChartVector& x : grid(m, 5)) {
      const AmbientMatrix leaf = projections(jacobian(m, x), m.leaf_dim()).leaf;
      const AmbientVector h = mean_curvature(m, x);
      const AmbientVector kappa = tension(m, x);
      CHECK((leaf * h).norm() <= 1e-6 * (1 + h.norm()));
      CHECK((kappa - leaf * kappa).norm() <= 1e-6 * (1 + kappa.norm()));

      const FrameDivergences fd = frame_divergences(m, x);
      for (int i = 0; i < m.ambient_dim(); ++i) {
        const VectorField xi = [&m, i](const ChartVector& y) {
          return AmbientVector(projections(jacobian(m, y), m.leaf_dim()).leaf.col(i));
        };
        CHECK(fd.leaf[i] == doctest::Approx(leaf_divergence(m, x, xi)).epsilon(1e-7).scale(1.0));
        CHECK(fd.full[i] == doctest::Approx(ambient_divergence(m, x, xi)).epsilon(1e-7).scale(1.0));
      }
    }
  }
}

TEST_CASE("div_E - div is function-linear on leaf fields") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const FoliatedModel tr = torus_revolution(2.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng);
    const ScalarField f = [=](const ChartVector& x) { return a + b * std::sin(x[0]) + c * std::cos(x[0] - x[1]); };
    const VectorField leaf_field = [&tr](const ChartVector& x) {
      return AmbientVector((1.0 + 0.5 * std::cos(x[1])) * tr.analytic_jacobian(x).col(0));
    };
    const VectorField scaled = [&](const ChartVector& x) { return AmbientVector(f(x) * leaf_field(x)); };
    ChartVector x(2);
    x << kTwoPi * (u(rng) + 1) / 2, kTwoPi * (u(rng) + 1) / 2;
    const double lhs = leaf_divergence(tr, x, scaled) - ambient_divergence(tr, x, scaled);
    const double rhs = f(x) * (leaf_divergence(tr, x, leaf_field) - ambient_divergence(tr, x, leaf_field));
    CHECK(std::abs(lhs - rhs) <= 1e-5);
  }
}

TEST_CASE("geometry identities hold on built-in grids") {
  for (const FoliatedModel& m : builtins()) {
    CAPTURE(m.name());
    const auto tests = trig_test_functions(m);
    const int per_axis = m.chart_dim() == 1 ? 100 : 10;
    for (const ChartVector& x : grid(m, per_axis)) {
      const GeometryReport rep = geometry_identities(m, x, tests);
      CHECK(rep.residuals.count("r4") == (m.transverse_dim() == 1 ? 1u : 0u));
      for (const auto& [name, value] : rep.residuals) {
        CAPTURE(name);
        CHECK(value <= 1e-5);
      }
    }
  }
}

TEST_CASE("constant test function contributes exactly zero to r5") {
  const FoliatedModel m = clifford_torus(1.0);
  const std::vector<NamedScalarField> constant{{"one", [](const ChartVector&) { return 1.0; }}};
  CHECK(geometry_identities(m, pt(0.3, 0.9), constant).residuals.at("r5") == 0.0);
  CHECK_THROWS_AS(geometry_identities(m, pt(0.3, 0.9), {}), Error);
}

TEST_CASE("halving the difference steps shrinks truncation-dominated residuals") {
  DifferenceSteps coarse;
  coarse.first = 2e-3;
  coarse.nested = 2e-2;
  coarse.directional = 2e-3;
  const DifferenceSteps fine = coarse.scaled(0.5);
  for (const FoliatedModel& m : {torus_revolution(2.0, 1.0), clifford_torus(std::sqrt(2.0)), circle_model()}) {
    const auto tests = trig_test_functions(m);
    for (const ChartVector& x : grid(m, 3)) {
      const auto a = geometry_identities(m, x, tests, coarse).residuals;
      const auto b = geometry_identities(m, x, tests, fine).residuals;
      for (const auto& [name, value] : a) {
        if (value < 1e-9) continue;  // already at the rounding floor
        CAPTURE(m.name());
        CAPTURE(name);
        CHECK(value / b.at(name) >= 2.0);
      }
    }
  }
}
