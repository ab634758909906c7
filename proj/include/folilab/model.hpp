#pragma once

// Embedded foliated manifolds described by a single periodic chart.
//
// Chart coordinates are x = (leaf coordinates, transverse coordinates); a leaf is
// a set {transverse coordinates = const}. Each model also carries a linear
// "angle map" A: the point psi(x) depends on x only through the angles A x
// (mod 2 pi), which gives a canonical fundamental domain [0, 2 pi)^d for
// histograms and test functions.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "folilab/linalg.hpp"

namespace folilab {

using Embedding = std::function<AmbientVector(const ChartVector&)>;
using JacobianFn = std::function<Jacobian(const ChartVector&)>;
using ScalarField = std::function<double(const ChartVector&)>;
using VectorField = std::function<AmbientVector(const ChartVector&)>;
using ModelParams = std::map<std::string, double>;

/// Closed-form geometry used as an independent check of the numerics.
struct GeometricOracle {
  ScalarField mean_curvature_sq;  // ||H||^2
  ScalarField tension_norm;       // ||kappa||
  std::optional<double> lyapunov_sum;  // lambda_Sigma for the harmonic measure, V = 0
};

struct ModelDefinition {
  std::string name;
  int leaf_dim = 0;
  int transverse_dim = 0;
  int ambient_dim = 0;
  ModelParams params;
  Embedding embedding;
  JacobianFn jacobian;  // empty when no analytic derivative is available
  ChartMatrix angle_map;
  /// Period of each leaf coordinate under a deck transformation that fixes the
  /// transverse coordinates; nullopt if no such period exists.
  std::vector<std::optional<double>> leaf_periods;
  GeometricOracle oracle;
};

class FoliatedModel {
 public:
  explicit FoliatedModel(ModelDefinition def);

  const std::string& name() const { return def_.name; }
  int leaf_dim() const { return def_.leaf_dim; }
  int transverse_dim() const { return def_.transverse_dim; }
  int chart_dim() const { return def_.leaf_dim + def_.transverse_dim; }
  int ambient_dim() const { return def_.ambient_dim; }
  const ModelParams& params() const { return def_.params; }
  double param(const std::string& key) const;

  AmbientVector embed(const ChartVector& x) const { return def_.embedding(x); }
  bool has_analytic_jacobian() const { return static_cast<bool>(def_.jacobian); }
  Jacobian analytic_jacobian(const ChartVector& x) const;

  /// Angles A x reduced to [0, 2 pi).
  ChartVector angles(const ChartVector& x) const;
  ChartVector unreduced_angles(const ChartVector& x) const;
  const ChartMatrix& angle_map() const { return def_.angle_map; }
  /// Chart point with the given angles (inverse of the angle map, no reduction).
  ChartVector from_angles(const ChartVector& angles) const;
  /// Reduces leaf coordinates by their leaf period; transverse coordinates are untouched.
  ChartVector wrap(const ChartVector& x) const;
  /// Generators of the deck lattice in chart coordinates: psi(x + g) = psi(x).
  std::vector<ChartVector> deck_vectors() const;

  const GeometricOracle& oracle() const { return def_.oracle; }

 private:
  ModelDefinition def_;
  ChartMatrix angle_inverse_;
};

/// Flat torus in R^4 foliated by lines of slope alpha; chart (s, w) with leaves w = const.
FoliatedModel clifford_torus(double alpha);

/// Torus of revolution in R^3 foliated by meridian circles; chart (theta, phi).
FoliatedModel torus_revolution(double major_radius, double minor_radius);

/// Unit circle in R^2, a single leaf.
FoliatedModel circle_model();

/// Builds a built-in model by name ("circle", "clifford", "torus_revolution").
FoliatedModel make_model(const std::string& name, const ModelParams& params);

struct DriftSpec {
  enum class Kind { none, leaf_constant };
  Kind kind = Kind::none;
  double c = 0.0;

  bool operator==(const DriftSpec&) const = default;
};

/// A leafwise drift V. leaf_constant: c times the g-normalized first leaf coordinate field.
class DriftField {
 public:
  DriftField(const FoliatedModel& model, DriftSpec spec);

  bool is_zero() const { return spec_.kind == DriftSpec::Kind::none || spec_.c == 0.0; }
  const DriftSpec& spec() const { return spec_; }

  AmbientVector ambient(const ChartVector& x) const;
  /// Chart velocity b with J_E b = V, given the Jacobian at the same point.
  ChartVector chart_velocity(const Jacobian& jac) const;
  VectorField as_field() const;

 private:
  const FoliatedModel* model_;
  DriftSpec spec_;
};

VectorField drift_field(const FoliatedModel& model, const DriftSpec& spec);

struct NamedScalarField {
  std::string name;
  ScalarField f;
};

/// Five smooth periodic test functions built from the model's angles.
std::vector<NamedScalarField> trig_test_functions(const FoliatedModel& model);

/// Test function set by name; only "trig" is defined.
std::vector<NamedScalarField> test_function_set(const FoliatedModel& model, const std::string& name);

}  // namespace folilab
