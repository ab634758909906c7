#include "folilab/model.hpp"

#include <cmath>

#include "folilab/errors.hpp"

namespace folilab {

namespace {

double reduce_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2 pi
  return r >= kTwoPi ? 0.0 : r;
}

}  // namespace

FoliatedModel::FoliatedModel(ModelDefinition def) : def_(std::move(def)) {
  const int d = chart_dim();
  if (def_.leaf_dim < 1 || def_.transverse_dim < 0 || d > kMaxChart || def_.ambient_dim > kMaxAmbient ||
      def_.ambient_dim < d) {
    throw Error(ErrorKind::invalid_params, "model dimensions out of range for " + def_.name);
  }
  if (def_.angle_map.rows() != d || def_.angle_map.cols() != d) {
    throw Error(ErrorKind::invalid_params, "angle map must be d x d");
  }
  if (static_cast<int>(def_.leaf_periods.size()) != def_.leaf_dim) {
    throw Error(ErrorKind::invalid_params, "one leaf period entry per leaf coordinate");
  }
  angle_inverse_ = def_.angle_map.inverse();
}

double FoliatedModel::param(const std::string& key) const {
  auto it = def_.params.find(key);
  if (it == def_.params.end()) {
    throw Error(ErrorKind::invalid_params, def_.name + " has no parameter " + key);
  }
  return it->second;
}

Jacobian FoliatedModel::analytic_jacobian(const ChartVector& x) const {
  if (!def_.jacobian) {
    throw Error(ErrorKind::invalid_params, def_.name + " has no analytic Jacobian");
  }
  return def_.jacobian(x);
}

ChartVector FoliatedModel::angles(const ChartVector& x) const {
  ChartVector a = def_.angle_map * x;
  for (Eigen::Index k = 0; k < a.size(); ++k) a[k] = reduce_angle(a[k]);
  return a;
}

ChartVector FoliatedModel::unreduced_angles(const ChartVector& x) const { return def_.angle_map * x; }

ChartVector FoliatedModel::from_angles(const ChartVector& angles) const {
  return angle_inverse_ * angles;
}

ChartVector FoliatedModel::wrap(const ChartVector& x) const {
  ChartVector out = x;
  for (int k = 0; k < def_.leaf_dim; ++k) {
    if (const auto& period = def_.leaf_periods[k]) {
      out[k] = x[k] - *period * std::floor(x[k] / *period);
      if (out[k] >= *period) out[k] = 0.0;
    }
  }
  return out;
}

std::vector<ChartVector> FoliatedModel::deck_vectors() const {
  const int d = chart_dim();
  std::vector<ChartVector> out;
  for (int k = 0; k < d; ++k) {
    ChartVector e = ChartVector::Zero(d);
    e[k] = kTwoPi;
    out.push_back(angle_inverse_ * e);
  }
  return out;
}

FoliatedModel clifford_torus(double alpha) {
  if (!std::isfinite(alpha)) {
    throw Error(ErrorKind::invalid_params, "clifford slope must be finite");
  }
  ModelDefinition def;
  def.name = "clifford";
  def.leaf_dim = 1;
  def.transverse_dim = 1;
  def.ambient_dim = 4;
  def.params = {{"alpha", alpha}};
  def.embedding = [alpha](const ChartVector& x) {
    const double v = alpha * x[0] + x[1];
    AmbientVector y(4);
    y << std::cos(x[0]), std::sin(x[0]), std::cos(v), std::sin(v);
    return y;
  };
  def.jacobian = [alpha](const ChartVector& x) {
    const double v = alpha * x[0] + x[1];
    const double sv = std::sin(v), cv = std::cos(v);
    Jacobian j(4, 2);
    j << -std::sin(x[0]), 0.0,
          std::cos(x[0]), 0.0,
         -alpha * sv,     -sv,
          alpha * cv,      cv;
    return j;
  };
  def.angle_map.resize(2, 2);
  def.angle_map << 1.0, 0.0, alpha, 1.0;
  // s -> s + 2 pi is a deck transformation fixing w only for integer slopes
  if (std::floor(alpha) == alpha) {
    def.leaf_periods = {kTwoPi};
  } else {
    def.leaf_periods = {std::nullopt};
  }
  const double a2 = alpha * alpha;
  const double h2 = (1.0 + a2 * a2) / ((1.0 + a2) * (1.0 + a2));
  def.oracle.mean_curvature_sq = [h2](const ChartVector&) { return h2; };
  def.oracle.tension_norm = [](const ChartVector&) { return 0.0; };
  def.oracle.lyapunov_sum = -0.5 * h2;
  return FoliatedModel(std::move(def));
}

FoliatedModel torus_revolution(double major_radius, double minor_radius) {
  const double R = major_radius, r = minor_radius;
  if (!(r > 0.0) || !(R > r) || !std::isfinite(R)) {
    throw Error(ErrorKind::invalid_params, "torus_revolution needs R > r > 0");
  }
  ModelDefinition def;
  def.name = "torus_revolution";
  def.leaf_dim = 1;
  def.transverse_dim = 1;
  def.ambient_dim = 3;
  def.params = {{"R", R}, {"r", r}};
  def.embedding = [R, r](const ChartVector& x) {
    const double rho = R + r * std::cos(x[0]);
    AmbientVector y(3);
    y << rho * std::cos(x[1]), rho * std::sin(x[1]), r * std::sin(x[0]);
    return y;
  };
  def.jacobian = [R, r](const ChartVector& x) {
    const double st = std::sin(x[0]), ct = std::cos(x[0]);
    const double sp = std::sin(x[1]), cp = std::cos(x[1]);
    const double rho = R + r * ct;
    Jacobian j(3, 2);
    j << -r * st * cp, -rho * sp,
         -r * st * sp,  rho * cp,
          r * ct,       0.0;
    return j;
  };
  def.angle_map = ChartMatrix::Identity(2, 2);
  def.leaf_periods = {kTwoPi};
  def.oracle.mean_curvature_sq = [r](const ChartVector&) { return 1.0 / (r * r); };
  def.oracle.tension_norm = [R, r](const ChartVector& x) {
    return std::abs(std::sin(x[0])) / (R + r * std::cos(x[0]));
  };
  return FoliatedModel(std::move(def));
}

FoliatedModel circle_model() {
  ModelDefinition def;
  def.name = "circle";
  def.leaf_dim = 1;
  def.transverse_dim = 0;
  def.ambient_dim = 2;
  def.embedding = [](const ChartVector& x) {
    AmbientVector y(2);
    y << std::cos(x[0]), std::sin(x[0]);
    return y;
  };
  def.jacobian = [](const ChartVector& x) {
    Jacobian j(2, 1);
    j << -std::sin(x[0]), std::cos(x[0]);
    return j;
  };
  def.angle_map = ChartMatrix::Identity(1, 1);
  def.leaf_periods = {kTwoPi};
  def.oracle.mean_curvature_sq = [](const ChartVector&) { return 1.0; };
  def.oracle.tension_norm = [](const ChartVector&) { return 0.0; };
  def.oracle.lyapunov_sum = -0.5;
  return FoliatedModel(std::move(def));
}

FoliatedModel make_model(const std::string& name, const ModelParams& params) {
  auto get = [&](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  auto allow_only = [&](std::initializer_list<const char*> keys) {
    for (const auto& [key, value] : params) {
      bool ok = false;
      for (const char* k : keys) ok = ok || key == k;
      if (!ok) throw Error(ErrorKind::invalid_params, "model " + name + " has no parameter " + key);
    }
  };
  if (name == "circle") {
    allow_only({});
    return circle_model();
  }
  if (name == "clifford") {
    allow_only({"alpha"});
    return clifford_torus(get("alpha", 1.0));
  }
  if (name == "torus_revolution") {
    allow_only({"R", "r"});
    return torus_revolution(get("R", 2.0), get("r", 1.0));
  }
  throw Error(ErrorKind::invalid_params, "unknown model " + name);
}

DriftField::DriftField(const FoliatedModel& model, DriftSpec spec) : model_(&model), spec_(spec) {
  if (spec_.kind == DriftSpec::Kind::leaf_constant && !std::isfinite(spec_.c)) {
    throw Error(ErrorKind::unsupported_drift, "leaf_constant drift needs a finite c");
  }
  if (spec_.kind == DriftSpec::Kind::leaf_constant && !model.has_analytic_jacobian()) {
    throw Error(ErrorKind::unsupported_drift, "leaf_constant drift needs an analytic Jacobian");
  }
}

AmbientVector DriftField::ambient(const ChartVector& x) const {
  if (spec_.kind == DriftSpec::Kind::none) return AmbientVector::Zero(model_->ambient_dim());
  const AmbientVector t = model_->analytic_jacobian(x).col(0);
  return spec_.c * t / t.norm();
}

ChartVector DriftField::chart_velocity(const Jacobian& jac) const {
  ChartVector b = ChartVector::Zero(model_->leaf_dim());
  if (spec_.kind == DriftSpec::Kind::leaf_constant) b[0] = spec_.c / jac.col(0).norm();
  return b;
}

VectorField DriftField::as_field() const {
  DriftField copy = *this;
  return [copy](const ChartVector& x) { return copy.ambient(x); };
}

VectorField drift_field(const FoliatedModel& model, const DriftSpec& spec) {
  return DriftField(model, spec).as_field();
}

std::vector<NamedScalarField> trig_test_functions(const FoliatedModel& model) {
  // Unreduced angles keep the functions smooth across the fundamental-domain boundary.
  const int last = model.chart_dim() - 1;
  auto a = [A = model.angle_map()](const ChartVector& x) -> ChartVector { return A * x; };
  return {
      {"cos(a1)", [a](const ChartVector& x) { return std::cos(a(x)[0]); }},
      {"sin(a1+ad)", [a, last](const ChartVector& x) {
         const ChartVector t = a(x);
         return std::sin(t[0] + t[last]);
       }},
      {"cos(a1)cos(ad)", [a, last](const ChartVector& x) {
         const ChartVector t = a(x);
         return std::cos(t[0]) * std::cos(t[last]);
       }},
      {"sin(2ad-a1)", [a, last](const ChartVector& x) {
         const ChartVector t = a(x);
         return std::sin(2.0 * t[last] - t[0]);
       }},
      {"cos(2a1+3ad)", [a, last](const ChartVector& x) {
         const ChartVector t = a(x);
         return std::cos(2.0 * t[0] + 3.0 * t[last]);
       }},
  };
}

std::vector<NamedScalarField> test_function_set(const FoliatedModel& model, const std::string& name) {
  if (name == "trig") return trig_test_functions(model);
  throw Error(ErrorKind::config, "unknown test function set " + name);
}

}  // namespace folilab
