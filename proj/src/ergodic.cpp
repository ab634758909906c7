#include "folilab/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "folilab/errors.hpp"

namespace folilab {

namespace {

constexpr double kMinEffectiveFraction = 0.1;

int total_cells(const std::vector<int>& dims) {
  long cells = 1;
  for (int n : dims) cells *= n;
  return static_cast<int>(cells);
}

void check_dims(const FoliatedModel& model, const std::vector<int>& dims) {
  if (static_cast<int>(dims.size()) != model.chart_dim()) {
    throw Error(ErrorKind::config, "grid needs one size per chart coordinate");
  }
  long cells = 1;
  for (int n : dims) {
    if (n < 1) throw Error(ErrorKind::config, "grid sizes must be positive");
    cells *= n;
    if (cells > (1L << 24)) throw Error(ErrorKind::config, "grid too large");
  }
}

void require_same_grid(const OccupationHistogram& a, const OccupationHistogram& b) {
  if (a.dims() != b.dims()) throw Error(ErrorKind::invalid_params, "histograms on different grids");
  if (!a.finalized() || !b.finalized()) throw Error(ErrorKind::invalid_params, "histograms must be finalized");
}

}  // namespace

OccupationHistogram::OccupationHistogram(const FoliatedModel& model, std::vector<int> dims)
    : model_(&model), dims_(std::move(dims)) {
  check_dims(model, dims_);
  mass_.assign(total_cells(dims_), 0.0);
}

int OccupationHistogram::cell_of(const ChartVector& x) const {
  const ChartVector a = model_->angles(x);
  int cell = 0;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    const int n = dims_[k];
    const int i = std::min(n - 1, static_cast<int>(a[k] / kTwoPi * n));
    cell = cell * n + i;
  }
  return cell;
}

ChartVector OccupationHistogram::cell_center_angles(int cell) const {
  const int d = static_cast<int>(dims_.size());
  ChartVector a(d);
  for (int k = d - 1; k >= 0; --k) {
    a[k] = kTwoPi * ((cell % dims_[k]) + 0.5) / dims_[k];
    cell /= dims_[k];
  }
  return a;
}

ChartVector OccupationHistogram::cell_center(int cell) const {
  return model_->from_angles(cell_center_angles(cell));
}

ChartVector OccupationHistogram::cell_widths() const {
  ChartVector w(static_cast<int>(dims_.size()));
  for (std::size_t k = 0; k < dims_.size(); ++k) w[k] = kTwoPi / dims_[k];
  return w;
}

void OccupationHistogram::add(const ChartVector& x, double weight) { add_to_cell(cell_of(x), weight); }

void OccupationHistogram::add_to_cell(int cell, double weight) {
  if (finalized_) throw Error(ErrorKind::invalid_params, "histogram already finalized");
  if (!(weight >= 0.0)) throw Error(ErrorKind::weight_degeneracy, "negative or undefined weight");
  mass_[cell] += weight;
}

void OccupationHistogram::finalize() {
  total_ = std::accumulate(mass_.begin(), mass_.end(), 0.0);
  if (!(total_ > 0.0)) throw Error(ErrorKind::empty_ensemble, "no mass in histogram");
  for (double& m : mass_) m /= total_;
  finalized_ = true;
}

OccupationHistogram volume_histogram(const FoliatedModel& model, const std::vector<int>& dims) {
  OccupationHistogram h(model, dims);
  for (int c = 0; c < h.cells(); ++c) {
    const Jacobian j = jacobian(model, h.cell_center(c));
    const ChartMatrix g = j.transpose() * j;
    h.add_to_cell(c, std::sqrt(small_determinant(g)));
  }
  h.finalize();
  return h;
}

OccupationHistogram uniform_histogram(const FoliatedModel& model, const std::vector<int>& dims) {
  OccupationHistogram h(model, dims);
  for (int c = 0; c < h.cells(); ++c) h.add_to_cell(c, 1.0);
  h.finalize();
  return h;
}

double tv_distance(const OccupationHistogram& a, const OccupationHistogram& b) {
  require_same_grid(a, b);
  double sum = 0.0;
  for (int c = 0; c < a.cells(); ++c) sum += std::abs(a.mass(c) - b.mass(c));
  return 0.5 * sum;
}

PathOccupation path_occupation(const FoliatedModel& model, const Ensemble& ensemble, const std::vector<int>& dims,
                               double burn_in_fraction) {
  if (ensemble.paths.empty()) throw Error(ErrorKind::empty_ensemble, "ensemble has no paths");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw Error(ErrorKind::config, "burn-in fraction must lie in [0, 1)");
  }
  const OccupationHistogram grid(model, dims);
  const double cutoff = burn_in_fraction * ensemble.config.T;
  PathOccupation occ;
  occ.dims = dims;
  occ.counts.assign(ensemble.paths.size(), std::vector<double>(grid.cells(), 0.0));
  bool any = false;
  for (std::size_t p = 0; p < ensemble.paths.size(); ++p) {
    for (const PathSample& s : ensemble.paths[p].samples) {
      if (s.t <= cutoff && burn_in_fraction > 0.0) continue;
      occ.counts[p][grid.cell_of(s.x)] += 1.0;
      any = true;
    }
  }
  if (!any) throw Error(ErrorKind::empty_ensemble, "no samples after burn-in");
  return occ;
}

OccupationHistogram pooled_histogram(const FoliatedModel& model, const PathOccupation& occupation) {
  OccupationHistogram h(model, occupation.dims);
  for (const auto& counts : occupation.counts) {
    for (int c = 0; c < h.cells(); ++c) {
      if (counts[c] > 0.0) h.add_to_cell(c, counts[c]);
    }
  }
  h.finalize();
  return h;
}

OccupationHistogram occupation_measure(const FoliatedModel& model, const Ensemble& ensemble,
                                       const std::vector<int>& dims, double burn_in_fraction) {
  return pooled_histogram(model, path_occupation(model, ensemble, dims, burn_in_fraction));
}

double bootstrap_stderr(const PathOccupation& occupation, const std::vector<double>& cell_values,
                        const BootstrapOptions& options) {
  const std::size_t n = occupation.counts.size();
  if (n < 2 || options.resamples < 2) return 0.0;
  std::vector<double> sums(n, 0.0), weights(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t c = 0; c < cell_values.size(); ++c) {
      const double k = occupation.counts[p][c];
      if (k == 0.0) continue;
      sums[p] += k * cell_values[c];
      weights[p] += k;
    }
  }
  RandomStream stream(options.seed, stream_id(StreamPurpose::bootstrap, 0));
  double mean = 0.0, m2 = 0.0;
  int used = 0;
  for (int b = 0; b < options.resamples; ++b) {
    double s = 0.0, w = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t p = stream.below(n);
      s += sums[p];
      w += weights[p];
    }
    if (w == 0.0) continue;
    const double est = s / w;
    ++used;
    const double delta = est - mean;
    mean += delta / used;
    m2 += delta * (est - mean);
  }
  return used > 1 ? std::sqrt(m2 / (used - 1)) : 0.0;
}

PathwiseEstimate lyapunov_pathwise(const Ensemble& ensemble) {
  const std::size_t n = ensemble.paths.size();
  if (n == 0) throw Error(ErrorKind::empty_ensemble, "ensemble has no paths");
  std::vector<double> rates;
  rates.reserve(n);
  for (const PathRecord& p : ensemble.paths) {
    if (!(p.final_state.t > 0.0)) throw Error(ErrorKind::empty_ensemble, "path has no steps");
    rates.push_back(p.final_state.logdet_full / p.final_state.t);
  }
  PathwiseEstimate est;
  est.mean = std::accumulate(rates.begin(), rates.end(), 0.0) / n;
  if (n > 1) {
    double ss = 0.0;
    for (double r : rates) ss += (r - est.mean) * (r - est.mean);
    est.std_error = std::sqrt(ss / (n - 1) / n);
  }
  return est;
}

double baxendale_integrand(const LeafDynamics& dyn, const ChartVector& x) {
  const LogdetIntegrands in = dyn.integrands(x);
  return in.drift_div + 0.5 * in.flux;
}

double geometric_integrand(const LeafDynamics& dyn, const ChartVector& x) {
  const FoliatedModel& model = dyn.model();
  const DifferenceSteps& steps = dyn.steps();
  const int d = model.chart_dim();
  const int p = model.leaf_dim();
  const AmbientVector h = mean_curvature(model, x, steps);
  const AmbientVector kappa = tension(model, x, steps);
  const AmbientVector v = dyn.drift().ambient(x);

  auto field = [&](const ChartVector& y) -> AmbientVector {
    AmbientVector f = -tension(model, y, steps);
    if (!dyn.drift().is_zero()) f += 2.0 * dyn.drift().ambient(y);
    return f;
  };
  const Pullback leaf_pinv = detail::leaf_pullback(detail::evaluate_jacobian(model, x, steps), p);
  double div = 0.0;
  for (int k = 0; k < p; ++k) {
    ChartVector e = ChartVector::Zero(d);
    e[k] = steps.nested;
    div += leaf_pinv.row(k).dot((field(x + e) - field(x - e)) / (2.0 * steps.nested));
  }
  return -0.5 * (h.squaredNorm() - div + 2.0 * kappa.dot(v));
}

QuadratureEstimate quadrature(const OccupationHistogram& histogram,
                              const std::function<double(const ChartVector&, const DifferenceSteps&)>& integrand,
                              const DifferenceSteps& steps, const PathOccupation* paths,
                              const BootstrapOptions& bootstrap) {
  if (!histogram.finalized()) throw Error(ErrorKind::invalid_params, "histogram must be finalized");
  const FoliatedModel& model = histogram.model();
  const int d = model.chart_dim();
  const DifferenceSteps half = steps.scaled(0.5);
  const ChartVector widths = histogram.cell_widths();
  std::vector<double> values(histogram.cells(), 0.0);
  double value = 0.0, value_half = 0.0, variation = 0.0;
  for (int c = 0; c < histogram.cells(); ++c) {
    const double m = histogram.mass(c);
    if (m == 0.0) continue;
    const ChartVector center = histogram.cell_center_angles(c);
    const double f = integrand(model.from_angles(center), steps);
    values[c] = f;
    value += m * f;
    value_half += m * integrand(model.from_angles(center), half);
    for (int k = 0; k < d; ++k) {
      for (double side : {-0.5, 0.5}) {
        ChartVector face = center;
        face[k] += side * widths[k];
        variation = std::max(variation, std::abs(integrand(model.from_angles(face), steps) - f));
      }
    }
  }
  QuadratureEstimate est;
  est.value = value;
  est.error = variation + std::abs(value - value_half);
  if (paths) est.std_error = bootstrap_stderr(*paths, values, bootstrap);
  return est;
}

QuadratureEstimate lyapunov_baxendale(const FoliatedModel& model, const OccupationHistogram& histogram,
                                      const DriftSpec& drift, const PathOccupation* paths,
                                      const DifferenceSteps& steps) {
  return quadrature(
      histogram,
      [&](const ChartVector& x, const DifferenceSteps& s) { return baxendale_integrand(LeafDynamics(model, drift, s), x); },
      steps, paths);
}

QuadratureEstimate lyapunov_geometric(const FoliatedModel& model, const OccupationHistogram& histogram,
                                      const DriftSpec& drift, const PathOccupation* paths,
                                      const DifferenceSteps& steps) {
  return quadrature(
      histogram,
      [&](const ChartVector& x, const DifferenceSteps& s) { return geometric_integrand(LeafDynamics(model, drift, s), x); },
      steps, paths);
}

double generator(const FoliatedModel& model, const DriftField& drift, const ScalarField& f, const ChartVector& x,
                 const DifferenceSteps& steps) {
  const int d = model.chart_dim();
  const int p = model.leaf_dim();
  auto leaf_partials = [&](const ChartVector& y) {
    ChartVector g(p);
    for (int k = 0; k < p; ++k) {
      ChartVector e = ChartVector::Zero(d);
      e[k] = steps.first;
      g[k] = (f(y + e) - f(y - e)) / (2.0 * steps.first);
    }
    return g;
  };
  // grad_E f = (J_E+)^T d_E f as an ambient field
  auto gradient = [&](const ChartVector& y) -> AmbientVector {
    const Pullback lp = detail::leaf_pullback(detail::evaluate_jacobian(model, y, steps), p);
    return lp.transpose() * leaf_partials(y);
  };
  const Jacobian jac = detail::evaluate_jacobian(model, x, steps);
  const Pullback leaf_pinv = detail::leaf_pullback(jac, p);
  double laplacian = 0.0;
  for (int k = 0; k < p; ++k) {
    ChartVector e = ChartVector::Zero(d);
    e[k] = steps.nested;
    laplacian += leaf_pinv.row(k).dot((gradient(x + e) - gradient(x - e)) / (2.0 * steps.nested));
  }
  const double drift_term = drift.is_zero() ? 0.0 : drift.chart_velocity(jac).dot(leaf_partials(x));
  return drift_term + 0.5 * laplacian;
}

std::vector<HarmonicResidual> harmonic_residuals(const FoliatedModel& model, const OccupationHistogram& histogram,
                                                 const DriftSpec& drift,
                                                 const std::vector<NamedScalarField>& test_functions,
                                                 const PathOccupation* paths, const BootstrapOptions& bootstrap) {
  if (!histogram.finalized()) throw Error(ErrorKind::invalid_params, "histogram must be finalized");
  const DriftField v(model, drift);
  std::vector<HarmonicResidual> out;
  for (const NamedScalarField& t : test_functions) {
    std::vector<double> values(histogram.cells(), 0.0);
    HarmonicResidual r;
    r.name = t.name;
    for (int c = 0; c < histogram.cells(); ++c) {
      if (histogram.mass(c) == 0.0) continue;
      values[c] = generator(model, v, t.f, histogram.cell_center(c));
      r.value += histogram.mass(c) * values[c];
    }
    if (paths) r.std_error = bootstrap_stderr(*paths, values, bootstrap);
    out.push_back(r);
  }
  return out;
}

WeightedParticles sample_candidate(const FoliatedModel& model, const MeasureActionConfig& config) {
  const int d = model.chart_dim();
  WeightedParticles out;
  out.x.resize(config.particles);
  out.w.assign(config.particles, 1.0);
  const double bound = config.candidate == CandidateMeasure::lebesgue ? volume_density_bound(model) : 0.0;
  const ChartVector center = config.bump_center.value_or(ChartVector::Constant(d, M_PI));
  parallel_for(
      config.particles,
      [&](std::size_t i) {
        RandomStream stream(config.seed, stream_id(StreamPurpose::init, i));
        if (config.candidate == CandidateMeasure::lebesgue) {
          out.x[i] = sample_volume(model, stream, bound);
        } else {
          ChartVector a(d);
          for (int k = 0; k < d; ++k) a[k] = center[k] + config.bump_width * stream.normal();
          out.x[i] = model.from_angles(a);
        }
      },
      config.threads);
  return out;
}

WeightedParticles push_forward(const LeafDynamics& dyn, const WeightedParticles& particles, const NoisePath& noise,
                               int threads) {
  WeightedParticles out;
  out.x.resize(particles.x.size());
  out.w.resize(particles.x.size());
  OracleOptions options;
  options.leaf_only = true;
  parallel_for(
      particles.x.size(),
      [&](std::size_t i) {
        const FlowOracle o = jacobian_flow_oracle(dyn, particles.x[i], noise, options);
        out.x[i] = o.x_T;
        out.w[i] = particles.w[i] * leaf_det(o);
      },
      threads);
  return out;
}

double effective_sample_fraction(const std::vector<double>& weights) {
  if (weights.empty()) return 0.0;
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / (s2 * weights.size()) : 0.0;
}

namespace {

OccupationHistogram histogram_of(const FoliatedModel& model, const std::vector<int>& dims,
                                 const WeightedParticles& particles) {
  OccupationHistogram h(model, dims);
  for (std::size_t i = 0; i < particles.x.size(); ++i) h.add(particles.x[i], particles.w[i]);
  h.finalize();
  return h;
}

void require_spread(const WeightedParticles& particles) {
  for (double w : particles.w) {
    if (!(w > 0.0)) throw Error(ErrorKind::weight_degeneracy, "non-positive transport weight");
  }
  const double ess = effective_sample_fraction(particles.w);
  if (ess < kMinEffectiveFraction) {
    throw Error(ErrorKind::weight_degeneracy, "effective sample size " + std::to_string(ess) + " of particles");
  }
}

WeightedParticles resample(const WeightedParticles& particles, RandomStream& stream) {
  const std::size_t n = particles.x.size();
  std::vector<double> cumulative(n);
  std::partial_sum(particles.w.begin(), particles.w.end(), cumulative.begin());
  WeightedParticles out;
  out.x.reserve(n);
  out.w.assign(n, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double u = stream.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    out.x.push_back(particles.x[std::min<std::size_t>(it - cumulative.begin(), n - 1)]);
  }
  return out;
}

}  // namespace

MeasureActionResult measure_action_test(const FoliatedModel& model, const MeasureActionConfig& config) {
  if (config.particles < 1) throw Error(ErrorKind::config, "need at least one particle");
  if (!(config.dt > 0.0) || !(config.t >= 0.0) || !(config.s >= 0.0)) {
    throw Error(ErrorKind::config, "measure action needs dt > 0 and t, s >= 0");
  }
  if (!(config.bump_width > 0.0)) throw Error(ErrorKind::config, "bump width must be positive");
  const long steps_t = std::llround(config.t / config.dt);
  const long steps_s = std::llround(config.s / config.dt);
  if (std::abs(steps_t * config.dt - config.t) > 1e-9 * std::max(1.0, config.t) ||
      std::abs(steps_s * config.dt - config.s) > 1e-9 * std::max(1.0, config.s)) {
    throw Error(ErrorKind::config, "t and s must be multiples of dt");
  }
  check_dims(model, config.dims);

  const LeafDynamics dyn(model, config.drift);
  const NoisePath noise = path_noise(config.seed, 0, steps_t + steps_s, model.ambient_dim(), config.dt);
  const WeightedParticles mu = sample_candidate(model, config);
  const WeightedParticles mu_t = push_forward(dyn, mu, noise.segment(0, steps_t), config.threads);
  require_spread(mu_t);

  MeasureActionResult result{histogram_of(model, config.dims, mu),
                             histogram_of(model, config.dims, mu_t),
                             0.0,
                             std::nullopt,
                             effective_sample_fraction(mu_t.w),
                             *std::min_element(mu_t.w.begin(), mu_t.w.end()),
                             *std::max_element(mu_t.w.begin(), mu_t.w.end())};
  result.tv = tv_distance(result.original, result.pushed);

  if (steps_s > 0) {
    // phi_s(theta_t omega) * mu_t against mu_{t+s}, with mu_t resampled to equal weights
    const WeightedParticles mu_ts = push_forward(dyn, mu, noise, config.threads);
    require_spread(mu_ts);
    RandomStream stream(config.seed, stream_id(StreamPurpose::resample, 0));
    const WeightedParticles composed =
        push_forward(dyn, resample(mu_t, stream), noise.segment(steps_t, steps_s), config.threads);
    require_spread(composed);
    result.cocycle_defect =
        tv_distance(histogram_of(model, config.dims, composed), histogram_of(model, config.dims, mu_ts));
  }
  return result;
}

}  // namespace folilab
