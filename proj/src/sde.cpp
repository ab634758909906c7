#include "folilab/sde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "folilab/errors.hpp"

namespace folilab {

namespace {

constexpr double kMinLeafGramDet = 1e-12;

double log_sqrt_gram_det(const Jacobian& jac, int cols) {
  const auto j = jac.leftCols(cols);
  const ChartMatrix g = j.transpose() * j;
  return 0.5 * std::log(small_determinant(g));
}

}  // namespace

PathState PathState::start(const FoliatedModel& model, const ChartVector& x0, std::uint64_t stream) {
  if (x0.size() != model.chart_dim()) throw Error(ErrorKind::invalid_params, "start point has wrong dimension");
  PathState s;
  s.x = x0;
  s.rng_stream = stream;
  s.w0 = x0.tail(model.transverse_dim());
  return s;
}

long SimConfig::steps() const { return std::llround(T / dt); }

void SimConfig::validate(const FoliatedModel& model) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::config, "dt must be positive");
  if (!(T >= dt) || !std::isfinite(T)) throw Error(ErrorKind::config, "T must be at least dt");
  if (std::abs(steps() * dt - T) > 1e-9 * T) throw Error(ErrorKind::config, "T must be a multiple of dt");
  if (n_paths < 1) throw Error(ErrorKind::config, "n_paths must be at least 1");
  if (record_every < 1) throw Error(ErrorKind::config, "record_every must be at least 1");
  if (init == InitKind::point && x0.size() != model.chart_dim()) {
    throw Error(ErrorKind::config, "x0 needs one value per chart coordinate");
  }
  if (drift.kind != DriftSpec::Kind::none && !std::isfinite(drift.c)) {
    throw Error(ErrorKind::config, "drift constant must be finite");
  }
}

LeafDynamics::LeafDynamics(const FoliatedModel& model, const DriftSpec& drift, const DifferenceSteps& steps)
    : model_(&model), drift_(model, drift), steps_(steps) {}

PulledBackFields LeafDynamics::fields(const ChartVector& x) const {
  const int p = model_->leaf_dim();
  const Jacobian jac = detail::evaluate_jacobian(*model_, x, steps_);
  PulledBackFields f;
  if (p == 1) {
    const double norm2 = jac.col(0).squaredNorm();
    if (!(norm2 > 0.0)) throw Error(ErrorKind::ill_conditioned, "leaf tangent vanishes");
    f.a = jac.col(0).transpose() / norm2;
  } else {
    const auto je = jac.leftCols(p);
    const ChartMatrix gram = je.transpose() * je;
    double det = 0.0;
    const ChartMatrix inv = small_inverse(gram, &det);
    if (!(det > kMinLeafGramDet * std::pow(gram.trace(), p))) {
      throw Error(ErrorKind::ill_conditioned, "leaf Gram matrix is singular");
    }
    f.a = inv * je.transpose();
  }
  f.b = drift_.is_zero() ? ChartVector(ChartVector::Zero(p)) : drift_.chart_velocity(jac);
  return f;
}

LogdetIntegrands LeafDynamics::integrands(const ChartVector& x) const {
  LogdetIntegrands out;
  const FrameDivergences fd = frame_divergences(*model_, x, steps_);
  const FrameFlux flux = frame_flux(*model_, x, steps_);
  out.div_frame = fd.full;
  out.div_leaf_frame = fd.leaf;
  out.flux = flux.full;
  out.flux_leaf = flux.leaf;
  if (!drift_.is_zero()) {
    const FieldDivergence dv = field_divergence(*model_, x, drift_.as_field(), steps_);
    out.drift_div = dv.full;
    out.drift_div_leaf = dv.leaf;
  }
  return out;
}

PulledBackFields pullback_fields(const FoliatedModel& model, const ChartVector& x, const DriftSpec& drift) {
  return LeafDynamics(model, drift).fields(x);
}

ChartVector heun_step(const LeafDynamics& dyn, const ChartVector& x, double dt, const double* dB, bool wrap) {
  const int p = dyn.model().leaf_dim();
  const int n = dyn.model().ambient_dim();
  const Eigen::Map<const Eigen::VectorXd> noise(dB, n);
  auto increment = [&](const ChartVector& y) -> ChartVector {
    const PulledBackFields f = dyn.fields(y);
    return f.b * dt + f.a * noise;
  };
  const ChartVector k1 = increment(x);
  ChartVector predictor = x;
  predictor.head(p) += k1;
  const ChartVector k2 = increment(predictor);
  ChartVector out = x;
  out.head(p) += 0.5 * (k1 + k2);
  return wrap ? dyn.model().wrap(out) : out;
}

PathState step_stratonovich(const LeafDynamics& dyn, const PathState& state, double dt, const AmbientVector& z) {
  const AmbientVector dB = std::sqrt(dt) * z;
  PathState next = state;
  next.x = heun_step(dyn, state.x, dt, dB.data());
  next.t = state.t + dt;
  return next;
}

LogdetIncrement logdet_increment(const LeafDynamics& dyn, const ChartVector& x, double dt, const double* dB) {
  const LogdetIntegrands in = dyn.integrands(x);
  const Eigen::Map<const Eigen::VectorXd> noise(dB, dyn.model().ambient_dim());
  LogdetIncrement inc;
  inc.full = in.div_frame.dot(noise) + (in.drift_div + 0.5 * in.flux) * dt;
  inc.leaf = in.div_leaf_frame.dot(noise) + (in.drift_div_leaf + 0.5 * in.flux_leaf) * dt;
  return inc;
}

PathState advance(const LeafDynamics& dyn, PathState state, const NoisePath& noise, bool track_logdet) {
  const double t0 = state.t;
  for (long k = 0; k < noise.steps(); ++k) {
    if (track_logdet) {
      const LogdetIncrement inc = logdet_increment(dyn, state.x, noise.dt(), noise.step(k));
      state.logdet_full += inc.full;
      state.logdet_leaf += inc.leaf;
    }
    state.x = heun_step(dyn, state.x, noise.dt(), noise.step(k));
    state.t = t0 + (k + 1) * noise.dt();
  }
  return state;
}

FlowOracle jacobian_flow_oracle(const LeafDynamics& dyn, const ChartVector& x0, const NoisePath& noise,
                                const OracleOptions& options) {
  const FoliatedModel& model = dyn.model();
  const int d = model.chart_dim();
  const int p = model.leaf_dim();
  const int k = options.leaf_only ? p : d;
  const double eps = options.bump;
  const double dt = noise.dt();
  const long window = std::max(1L, std::lround(options.renormalize_every / dt));

  ChartMatrix basis = ChartMatrix::Identity(k, k);
  ChartMatrix triangular = ChartMatrix::Identity(k, k);
  double log_abs = 0.0;
  ChartVector base = x0;
  std::vector<ChartVector> plus(k), minus(k);

  for (long start = 0; start < noise.steps(); start += window) {
    const long end = std::min(noise.steps(), start + window);
    for (int j = 0; j < k; ++j) {
      ChartVector dir = ChartVector::Zero(d);
      dir.head(k) = basis.col(j);
      plus[j] = base + eps * dir;
      minus[j] = base - eps * dir;
    }
    for (long s = start; s < end; ++s) {
      const double* dB = noise.step(s);
      base = heun_step(dyn, base, dt, dB, false);
      for (int j = 0; j < k; ++j) {
        plus[j] = heun_step(dyn, plus[j], dt, dB, false);
        minus[j] = heun_step(dyn, minus[j], dt, dB, false);
      }
    }
    ChartMatrix w(k, k);
    double displacement = 0.0;
    for (int j = 0; j < k; ++j) {
      w.col(j) = (plus[j] - minus[j]).head(k) / (2.0 * eps);
      displacement = std::max({displacement, (plus[j] - base).norm(), (minus[j] - base).norm()});
    }
    if (!(displacement <= options.max_displacement)) {
      throw Error(ErrorKind::bump_too_large, "bumped path moved " + std::to_string(displacement));
    }
    Eigen::HouseholderQR<ChartMatrix> qr(w);
    ChartMatrix q = qr.householderQ();
    ChartMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < k; ++i) {
      if (r(i, i) < 0.0) {
        r.row(i) *= -1.0;
        q.col(i) *= -1.0;
      }
      log_abs += std::log(r(i, i));
    }
    basis = q;
    triangular = r * triangular;
  }

  FlowOracle out;
  out.x_T = base;
  out.jacobian = basis * triangular;
  out.chart_logdet = log_abs;
  // transverse coordinates are copied by every step, so D = [[D_EE, *], [0, I]] and det D = det D_EE
  out.leaf_sign = small_determinant(basis) < 0.0 ? -1.0 : 1.0;
  const Jacobian j0 = detail::evaluate_jacobian(model, x0, dyn.steps());
  const Jacobian jT = detail::evaluate_jacobian(model, base, dyn.steps());
  out.logdet = log_abs + log_sqrt_gram_det(jT, d) - log_sqrt_gram_det(j0, d);
  out.leaf_logdet = log_abs + log_sqrt_gram_det(jT, p) - log_sqrt_gram_det(j0, p);
  return out;
}

double leaf_det(const FlowOracle& oracle) { return oracle.leaf_sign * std::exp(oracle.leaf_logdet); }

NoisePath path_noise(std::uint64_t seed, std::uint64_t index, long steps, int dim, double dt) {
  RandomStream stream(seed, stream_id(StreamPurpose::noise, index));
  return NoisePath::generate(stream, steps, dim, dt);
}

double volume_density_bound(const FoliatedModel& model) {
  const int d = model.chart_dim();
  const int per_axis = 24;
  int total = 1;
  for (int k = 0; k < d; ++k) total *= per_axis;
  double best = 0.0;
  for (int idx = 0; idx < total; ++idx) {
    ChartVector a(d);
    int rest = idx;
    for (int k = 0; k < d; ++k) {
      a[k] = kTwoPi * (rest % per_axis) / per_axis;
      rest /= per_axis;
    }
    const Jacobian j = detail::evaluate_jacobian(model, model.from_angles(a), DifferenceSteps{});
    best = std::max(best, std::exp(log_sqrt_gram_det(j, d)));
  }
  return 1.1 * best;
}

ChartVector sample_volume(const FoliatedModel& model, RandomStream& stream, double density_bound) {
  const int d = model.chart_dim();
  for (int attempt = 0; attempt < 100000; ++attempt) {
    ChartVector a(d);
    for (int k = 0; k < d; ++k) a[k] = kTwoPi * stream.uniform();
    const ChartVector x = model.from_angles(a);
    const Jacobian j = detail::evaluate_jacobian(model, x, DifferenceSteps{});
    if (stream.uniform() * density_bound < std::exp(log_sqrt_gram_det(j, d))) return x;
  }
  throw Error(ErrorKind::invalid_params, "volume sampling did not accept a point");
}

ChartVector initial_point(const FoliatedModel& model, const SimConfig& config, std::uint64_t index,
                          double density_bound) {
  if (config.init == InitKind::point) return config.x0;
  RandomStream stream(config.seed, stream_id(StreamPurpose::init, index));
  return sample_volume(model, stream, density_bound);
}

PathRecord simulate_path(const LeafDynamics& dyn, const ChartVector& x0, const NoisePath& noise, int record_every,
                         bool track_logdet, std::uint64_t stream) {
  PathRecord rec;
  rec.stream = stream;
  rec.x0 = x0;
  PathState state = PathState::start(dyn.model(), x0, stream);
  const long steps = noise.steps();
  rec.samples.reserve(static_cast<std::size_t>(steps / record_every + 1));
  for (long k = 0; k < steps; ++k) {
    if (track_logdet) {
      const LogdetIncrement inc = logdet_increment(dyn, state.x, noise.dt(), noise.step(k));
      state.logdet_full += inc.full;
      state.logdet_leaf += inc.leaf;
    }
    state.x = heun_step(dyn, state.x, noise.dt(), noise.step(k));
    state.t = (k + 1) * noise.dt();
    if ((k + 1) % record_every == 0 || k + 1 == steps) {
      rec.samples.push_back({state.t, state.x, state.logdet_full, state.logdet_leaf});
    }
  }
  rec.final_state = state;
  return rec;
}

Ensemble simulate_ensemble(const FoliatedModel& model, const SimConfig& config) {
  config.validate(model);
  const LeafDynamics dyn(model, config.drift);
  const double bound = config.init == InitKind::uniform ? volume_density_bound(model) : 0.0;
  Ensemble ens;
  ens.model_name = model.name();
  ens.config = config;
  ens.paths.resize(config.n_paths);
  parallel_for(
      config.n_paths,
      [&](std::size_t i) {
        const ChartVector x0 = initial_point(model, config, i, bound);
        const NoisePath noise = path_noise(config.seed, i, config.steps(), model.ambient_dim(), config.dt);
        ens.paths[i] = simulate_path(dyn, x0, noise, config.record_every, config.track_logdet,
                                     stream_id(StreamPurpose::noise, i));
      },
      config.threads);
  return ens;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, int threads) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace folilab
