#include "folilab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "folilab/errors.hpp"

namespace folilab {

namespace {

constexpr double kMinSingularValue = 1e-8;
constexpr double kMaxGramCondition = 1e8;
constexpr double kTangentTolerance = 1e-8;
constexpr double kLeafValueTolerance = 1e-6;
constexpr double kZeroFrameVector = 1e-14;

ChartVector unit(int d, int k) {
  ChartVector e = ChartVector::Zero(d);
  e[k] = 1.0;
  return e;
}

template <typename Fn>
auto central_difference(const Fn& fn, const ChartVector& x, const ChartVector& direction, double h) {
  using Result = std::invoke_result_t<const Fn&, const ChartVector&>;
  const ChartVector plus = x + h * direction;
  const ChartVector minus = x - h * direction;
  return Result((fn(plus) - fn(minus)) / (2.0 * h));
}

void require_immersion(const ChartMatrix& gram) {
  // cheap rank test for the hot path; jacobian() runs the full singular-value check
  const int d = static_cast<int>(gram.rows());
  const double scale = std::pow(gram.trace() / d, d);
  if (!(small_determinant(gram) > 1e-16 * scale)) {
    throw Error(ErrorKind::non_immersion, "Gram matrix is singular");
  }
}

}  // namespace

DifferenceSteps DifferenceSteps::scaled(double factor) const {
  DifferenceSteps out = *this;
  out.jacobian *= factor;
  out.first *= factor;
  out.nested *= factor;
  out.directional *= factor;
  return out;
}

namespace detail {

Jacobian evaluate_jacobian(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps) {
  if (steps.mode == JacobianMode::analytic && model.has_analytic_jacobian()) return model.analytic_jacobian(x);
  const int d = model.chart_dim();
  Jacobian j(model.ambient_dim(), d);
  auto psi = [&model](const ChartVector& y) { return model.embed(y); };
  for (int k = 0; k < d; ++k) j.col(k) = central_difference(psi, x, unit(d, k), steps.jacobian);
  return j;
}

Pullback leaf_pullback(const Jacobian& jac, int leaf_dim) {
  if (leaf_dim == 1) return jac.col(0).transpose() / jac.col(0).squaredNorm();
  const auto je = jac.leftCols(leaf_dim);
  const ChartMatrix gram_leaf = je.transpose() * je;
  return small_inverse(gram_leaf) * je.transpose();
}

LocalFrame local_frame(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps) {
  const int p = model.leaf_dim();
  LocalFrame f;
  f.jac = evaluate_jacobian(model, x, steps);
  const ChartMatrix gram = f.jac.transpose() * f.jac;
  require_immersion(gram);
  f.pinv = small_inverse(gram) * f.jac.transpose();
  f.tangent = f.jac * f.pinv;
  f.leaf_pinv = small_inverse(gram.topLeftCorner(p, p)) * f.jac.leftCols(p).transpose();
  f.leaf = f.jac.leftCols(p) * f.leaf_pinv;
  return f;
}

AmbientMatrix leaf_projector(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps) {
  const int p = model.leaf_dim();
  const Jacobian jac = evaluate_jacobian(model, x, steps);
  return jac.leftCols(p) * leaf_pullback(jac, p);
}

}  // namespace detail

Jacobian jacobian(const FoliatedModel& model, const ChartVector& x, JacobianMode mode, double h) {
  if (mode == JacobianMode::analytic && !model.has_analytic_jacobian()) {
    throw Error(ErrorKind::invalid_params, model.name() + " has no analytic Jacobian");
  }
  DifferenceSteps steps;
  steps.mode = mode;
  steps.jacobian = h;
  Jacobian j = detail::evaluate_jacobian(model, x, steps);
  const ChartMatrix gram = j.transpose() * j;
  Eigen::SelfAdjointEigenSolver<ChartMatrix> eig(gram, Eigen::EigenvaluesOnly);
  const double smallest = std::sqrt(std::max(0.0, eig.eigenvalues().minCoeff()));
  if (smallest < kMinSingularValue) {
    throw Error(ErrorKind::non_immersion, "smallest singular value " + std::to_string(smallest));
  }
  return j;
}

Projections projections(const Jacobian& jac, int leaf_dim) {
  if (leaf_dim < 1 || leaf_dim > jac.cols()) {
    throw Error(ErrorKind::invalid_params, "leaf dimension out of range");
  }
  const ChartMatrix gram = jac.transpose() * jac;
  Eigen::SelfAdjointEigenSolver<ChartMatrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxGramCondition) {
    throw Error(ErrorKind::ill_conditioned, "Gram condition number above 1e8");
  }
  Projections out;
  out.tangent = jac * (small_inverse(gram) * jac.transpose());
  out.leaf = jac.leftCols(leaf_dim) * detail::leaf_pullback(jac, leaf_dim);
  return out;
}

std::vector<AmbientVector> gradient_frame(const AmbientMatrix& leaf_projector) {
  std::vector<AmbientVector> frame;
  frame.reserve(leaf_projector.cols());
  for (Eigen::Index i = 0; i < leaf_projector.cols(); ++i) frame.emplace_back(leaf_projector.col(i));
  return frame;
}

TangentData tangent_data(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps) {
  TangentData t;
  t.point_coords = x;
  t.ambient_point = model.embed(x);
  t.jac = jacobian(model, x, steps.mode, steps.jacobian);
  t.jac_leaf = t.jac.leftCols(model.leaf_dim());
  const Projections proj = projections(t.jac, model.leaf_dim());
  t.proj_tangent = proj.tangent;
  t.proj_leaf = proj.leaf;
  t.frame = gradient_frame(proj.leaf);
  return t;
}

AmbientVector directional_derivative(const FoliatedModel& model, const ChartVector& x, const VectorField& field,
                                     const AmbientVector& v, const DifferenceSteps& steps) {
  const detail::LocalFrame f = detail::local_frame(model, x, steps);
  const double normal_part = (v - f.tangent * v).norm();
  if (normal_part > kTangentTolerance * std::max(v.norm(), 1e-300) && normal_part > 0.0) {
    throw Error(ErrorKind::not_tangent, "direction is not tangent to M");
  }
  const ChartVector a = f.pinv * v;
  return central_difference(field, x, a, steps.directional);
}

double leaf_divergence(const FoliatedModel& model, const ChartVector& x, const VectorField& field,
                       const DifferenceSteps& steps) {
  const detail::LocalFrame f = detail::local_frame(model, x, steps);
  const AmbientVector value = field(x);
  if ((value - f.leaf * value).norm() > kLeafValueTolerance * (1.0 + value.norm())) {
    throw Error(ErrorKind::not_tangent, "field value is not in E");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f.leaf.cols(); ++i) {
    const AmbientVector xi = f.leaf.col(i);
    if (xi.norm() < kZeroFrameVector) continue;
    sum += xi.dot(f.leaf * directional_derivative(model, x, field, xi, steps));
  }
  return sum;
}

double ambient_divergence(const FoliatedModel& model, const ChartVector& x, const VectorField& field,
                          const DifferenceSteps& steps) {
  const detail::LocalFrame f = detail::local_frame(model, x, steps);
  const AmbientVector value = field(x);
  if ((value - f.tangent * value).norm() > kLeafValueTolerance * (1.0 + value.norm())) {
    throw Error(ErrorKind::not_tangent, "field value is not in TM");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f.tangent.cols(); ++i) {
    const AmbientVector xi = f.tangent.col(i);
    if (xi.norm() < kZeroFrameVector) continue;
    sum += xi.dot(f.tangent * directional_derivative(model, x, field, xi, steps));
  }
  return sum;
}

FrameDivergences frame_divergences(const FoliatedModel& model, const ChartVector& x,
                                   const DifferenceSteps& steps) {
  const int d = model.chart_dim();
  const int p = model.leaf_dim();
  const int n = model.ambient_dim();
  const detail::LocalFrame f = detail::local_frame(model, x, steps);
  // d X_i (v) = (dP~)(v) e_i, and J+ P~ = [J_E+; 0], so only leaf rows enter div_E.
  FrameDivergences out{AmbientVector::Zero(n), AmbientVector::Zero(n)};
  const double h = steps.first;
  for (int k = 0; k < d; ++k) {
    const ChartVector e = unit(d, k);
    const AmbientMatrix dleaf =
        (detail::leaf_projector(model, x + h * e, steps) - detail::leaf_projector(model, x - h * e, steps)) /
        (2.0 * h);
    out.full += (f.pinv.row(k) * dleaf).transpose();
    if (k < p) out.leaf += (f.leaf_pinv.row(k) * dleaf).transpose();
  }
  return out;
}

FrameFlux frame_flux(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps) {
  const int d = model.chart_dim();
  const int p = model.leaf_dim();
  const Pullback leaf_pinv = detail::leaf_pullback(detail::evaluate_jacobian(model, x, steps), p);
  // X_i(g_i) = dg_i(J+ X_i); summed over i this is sum_k (J_E+)_k . d_k g.
  FrameFlux out;
  const double h = steps.nested;
  for (int k = 0; k < p; ++k) {
    const ChartVector e = unit(d, k);
    const FrameDivergences plus = frame_divergences(model, x + h * e, steps);
    const FrameDivergences minus = frame_divergences(model, x - h * e, steps);
    out.leaf += leaf_pinv.row(k).dot((plus.leaf - minus.leaf) / (2.0 * h));
    out.full += leaf_pinv.row(k).dot((plus.full - minus.full) / (2.0 * h));
  }
  return out;
}

FieldDivergence field_divergence(const FoliatedModel& model, const ChartVector& x, const VectorField& field,
                                 const DifferenceSteps& steps) {
  const int d = model.chart_dim();
  const int p = model.leaf_dim();
  const detail::LocalFrame f = detail::local_frame(model, x, steps);
  FieldDivergence out;
  for (int k = 0; k < d; ++k) {
    const AmbientVector dk = central_difference(field, x, unit(d, k), steps.first);
    out.full += f.pinv.row(k).dot(dk);
    if (k < p) out.leaf += f.leaf_pinv.row(k).dot(dk);
  }
  return out;
}

AmbientVector mean_curvature(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps) {
  return -frame_divergences(model, x, steps).leaf;
}

AmbientVector tension(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps) {
  const FrameDivergences fd = frame_divergences(model, x, steps);
  return detail::leaf_projector(model, x, steps) * (fd.leaf - fd.full);
}

GeometryReport geometry_identities(const FoliatedModel& model, const ChartVector& x,
                                   const std::vector<NamedScalarField>& test_functions,
                                   const DifferenceSteps& steps) {
  if (test_functions.empty()) {
    throw Error(ErrorKind::invalid_params, "geometry_identities needs at least one test function");
  }
  const int d = model.chart_dim();
  const int p = model.leaf_dim();
  const int n = model.ambient_dim();
  const detail::LocalFrame f = detail::local_frame(model, x, steps);
  const FrameDivergences fd = frame_divergences(model, x, steps);

  GeometryReport report;
  report.divE_frame = fd.leaf;
  report.div_frame = fd.full;
  report.mean_curvature = -fd.leaf;
  report.tension = f.leaf * (fd.leaf - fd.full);

  report.residuals["r1"] = (f.leaf * fd.leaf).norm();
  report.residuals["r2"] =
      std::abs(report.mean_curvature.squaredNorm() + frame_flux(model, x, steps).leaf);

  // sum_i nabla^E_{X_i} X_i, each term a directional derivative of the frame field
  AmbientVector frame_sum = AmbientVector::Zero(n);
  for (int i = 0; i < n; ++i) {
    const AmbientVector xi = f.leaf.col(i);
    if (xi.norm() < kZeroFrameVector) continue;
    VectorField frame_field = [&model, &steps, i](const ChartVector& y) -> AmbientVector {
      return detail::leaf_projector(model, y, steps).col(i);
    };
    frame_sum += f.leaf * directional_derivative(model, x, frame_field, xi, steps);
  }
  report.residuals["r3"] = frame_sum.norm();

  if (model.transverse_dim() == 1) {
    // unit field in TM orthogonal to E, built from the transverse coordinate direction
    VectorField normal_field = [&model, &steps, p](const ChartVector& y) -> AmbientVector {
      const detail::LocalFrame fy = detail::local_frame(model, y, steps);
      const AmbientVector t = fy.jac.col(p);
      const AmbientVector nu = t - fy.leaf * t;
      return nu / nu.norm();
    };
    const AmbientVector nu = normal_field(x);
    const AmbientVector nabla_nu = f.tangent * directional_derivative(model, x, normal_field, nu, steps);
    report.residuals["r4"] = (report.tension - nabla_nu).norm();
  }

  // Delta_E f two ways: div_E(grad_E f) and sum_i X_i(X_i f)
  DifferenceSteps outer = steps;
  outer.directional = steps.nested;
  double worst = 0.0;
  for (const auto& test : test_functions) {
    const ScalarField& fn = test.f;
    VectorField grad_leaf = [&model, &steps, &fn, d, p](const ChartVector& y) -> AmbientVector {
      ChartVector du(p);
      for (int k = 0; k < p; ++k) du[k] = central_difference(fn, y, unit(d, k), steps.first);
      const Pullback lp = detail::leaf_pullback(detail::evaluate_jacobian(model, y, steps), p);
      return lp.transpose() * du;
    };
    const double via_divergence = leaf_divergence(model, x, grad_leaf, outer);

    double via_frame = 0.0;
    for (int i = 0; i < n; ++i) {
      auto chart_dir = [&model, &steps, p, d, i](const ChartVector& y) {
        const Pullback lp = detail::leaf_pullback(detail::evaluate_jacobian(model, y, steps), p);
        ChartVector a = ChartVector::Zero(d);
        a.head(p) = lp.col(i);
        return a;
      };
      const ChartVector a0 = chart_dir(x);
      if (a0.norm() < kZeroFrameVector) continue;
      auto xi_f = [&](const ChartVector& y) {
        return central_difference(fn, y, chart_dir(y), steps.first);
      };
      via_frame += central_difference(xi_f, x, a0, steps.nested);
    }
    worst = std::max(worst, std::abs(via_divergence - via_frame));
  }
  report.residuals["r5"] = worst;
  return report;
}

}  // namespace folilab
