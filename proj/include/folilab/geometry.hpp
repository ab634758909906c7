#pragma once

// Pointwise foliated geometry of an embedded model, computed from the embedding
// map alone: ambient orthogonal projections, the gradient frame X_i = P~ e_i,
// leafwise and ambient divergences by frame traces, mean curvature H and the
// tension kappa.
//
// All functions are pure in (model, point) and safe to call concurrently.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "folilab/linalg.hpp"
#include "folilab/model.hpp"

namespace folilab {

enum class JacobianMode { analytic, finite_difference };

/// Central-difference step sizes.
struct DifferenceSteps {
  double jacobian = 1e-5;     // finite-difference Jacobian
  double first = 1e-5;        // first derivatives of frame quantities
  double nested = 1e-4;       // outer step of second-derivative quantities
  double directional = 1e-5;  // directional_derivative
  JacobianMode mode = JacobianMode::analytic;

  DifferenceSteps scaled(double factor) const;
};

struct TangentData {
  ChartVector point_coords;
  AmbientVector ambient_point;
  Jacobian jac;
  Jacobian jac_leaf;
  AmbientMatrix proj_tangent;  // P
  AmbientMatrix proj_leaf;     // P~ = pi o P
  std::vector<AmbientVector> frame;  // X_i = P~ e_i
};

struct Projections {
  AmbientMatrix tangent;
  AmbientMatrix leaf;
};

Jacobian jacobian(const FoliatedModel& model, const ChartVector& x,
                  JacobianMode mode = JacobianMode::analytic, double h = 1e-5);

Projections projections(const Jacobian& jac, int leaf_dim);

std::vector<AmbientVector> gradient_frame(const AmbientMatrix& leaf_projector);

TangentData tangent_data(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps = {});

/// Raw ambient derivative dF(v) along a tangent vector v.
AmbientVector directional_derivative(const FoliatedModel& model, const ChartVector& x, const VectorField& field,
                                     const AmbientVector& v, const DifferenceSteps& steps = {});

/// div_E F = sum_i <P~ dF(X_i), X_i> for a field with values in E.
double leaf_divergence(const FoliatedModel& model, const ChartVector& x, const VectorField& field,
                       const DifferenceSteps& steps = {});

/// div F = sum_i <P dF(X~_i), X~_i> for a field with values in TM.
double ambient_divergence(const FoliatedModel& model, const ChartVector& x, const VectorField& field,
                          const DifferenceSteps& steps = {});

AmbientVector mean_curvature(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps = {});

/// kappa = sum_i (div_E X_i - div X_i) X_i, so g(kappa, X) = div_E X - div X for X in E.
AmbientVector tension(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps = {});

/// div_E(X_i) and div(X_i) for every frame field, by traces of the chart derivative of P~.
struct FrameDivergences {
  AmbientVector leaf;
  AmbientVector full;
};
FrameDivergences frame_divergences(const FoliatedModel& model, const ChartVector& x,
                                   const DifferenceSteps& steps = {});

/// sum_i X_i(div_E X_i) and sum_i X_i(div X_i), nested central differences.
struct FrameFlux {
  double leaf = 0.0;
  double full = 0.0;
};
FrameFlux frame_flux(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps = {});

struct FieldDivergence {
  double leaf = 0.0;
  double full = 0.0;
};
/// div_E and div of a leafwise field through the chart-derivative trace.
FieldDivergence field_divergence(const FoliatedModel& model, const ChartVector& x, const VectorField& field,
                                 const DifferenceSteps& steps = {});

struct GeometryReport {
  AmbientVector mean_curvature;
  AmbientVector tension;
  AmbientVector divE_frame;
  AmbientVector div_frame;
  /// r1..r5; r4 is present only for codimension-one foliations.
  std::map<std::string, double> residuals;
};

GeometryReport geometry_identities(const FoliatedModel& model, const ChartVector& x,
                                   const std::vector<NamedScalarField>& test_functions,
                                   const DifferenceSteps& steps = {});

namespace detail {

/// Linear algebra at one chart point, without conditioning diagnostics.
struct LocalFrame {
  Jacobian jac;
  Pullback pinv;       // J+ = (J^T J)^-1 J^T, d x N
  Pullback leaf_pinv;  // J_E+, p x N
  AmbientMatrix tangent;
  AmbientMatrix leaf;
};

Jacobian evaluate_jacobian(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps);
LocalFrame local_frame(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps);
AmbientMatrix leaf_projector(const FoliatedModel& model, const ChartVector& x, const DifferenceSteps& steps);
/// J_E+ only; the cheapest quantity, used by the integrator.
Pullback leaf_pullback(const Jacobian& jac, int leaf_dim);

}  // namespace detail

}  // namespace folilab
