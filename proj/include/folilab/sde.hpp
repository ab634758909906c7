#pragma once

// Foliated Brownian motion dX = V dt + sum_i X_i(X) o dB^i, integrated in chart
// coordinates. Only leaf coordinates move, so leaves are preserved exactly.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "folilab/geometry.hpp"
#include "folilab/linalg.hpp"
#include "folilab/model.hpp"
#include "folilab/rng.hpp"

namespace folilab {

struct PathState {
  ChartVector x;
  double t = 0.0;
  double logdet_full = 0.0;  // ln |det phi_t*| on TM
  double logdet_leaf = 0.0;  // ln det_E(phi_t*)
  std::uint64_t rng_stream = 0;
  ChartVector w0;  // transverse coordinates at t = 0

  static PathState start(const FoliatedModel& model, const ChartVector& x0, std::uint64_t stream = 0);
};

enum class InitKind { uniform, point };

struct SimConfig {
  double dt = 1e-2;
  double T = 1.0;
  int n_paths = 1;
  std::uint64_t seed = 0;
  DriftSpec drift;
  int record_every = 1;
  bool track_logdet = true;
  InitKind init = InitKind::uniform;
  ChartVector x0;  // start point when init == point
  int threads = 0;  // 0: one per hardware thread

  long steps() const;
  void validate(const FoliatedModel& model) const;
};

/// Chart representation of V and of the frame: J_E b = V, J_E a_i = X_i.
struct PulledBackFields {
  ChartVector b;  // p
  Pullback a;     // p x N, column i is a_i
};

/// Pointwise integrands of the log-determinant formula.
struct LogdetIntegrands {
  AmbientVector div_frame;       // div X_i
  AmbientVector div_leaf_frame;  // div_E X_i
  double drift_div = 0.0;        // div V
  double drift_div_leaf = 0.0;   // div_E V
  double flux = 0.0;             // sum_i X_i div X_i
  double flux_leaf = 0.0;        // sum_i X_i div_E X_i
};

struct LogdetIncrement {
  double full = 0.0;
  double leaf = 0.0;
};

/// Model, drift and difference steps bundled for repeated evaluation along paths.
class LeafDynamics {
 public:
  LeafDynamics(const FoliatedModel& model, const DriftSpec& drift, const DifferenceSteps& steps = {});

  const FoliatedModel& model() const { return *model_; }
  const DriftField& drift() const { return drift_; }
  const DifferenceSteps& steps() const { return steps_; }

  PulledBackFields fields(const ChartVector& x) const;
  LogdetIntegrands integrands(const ChartVector& x) const;

 private:
  const FoliatedModel* model_;
  DriftField drift_;
  DifferenceSteps steps_;
};

PulledBackFields pullback_fields(const FoliatedModel& model, const ChartVector& x, const DriftSpec& drift = {});

/// Heun step driven by Brownian increments dB (length N); wraps leaf coordinates if asked.
ChartVector heun_step(const LeafDynamics& dyn, const ChartVector& x, double dt, const double* dB, bool wrap = true);

/// Heun step from standard normals z (dB = sqrt(dt) z); log-determinants are left untouched.
PathState step_stratonovich(const LeafDynamics& dyn, const PathState& state, double dt, const AmbientVector& z);

/// Ito increment of both log-determinants over one step, integrands at the pre-step point.
LogdetIncrement logdet_increment(const LeafDynamics& dyn, const ChartVector& x, double dt, const double* dB);

/// Advances state over every step of the noise path, updating the log-determinants.
PathState advance(const LeafDynamics& dyn, PathState state, const NoisePath& noise, bool track_logdet = true);

struct FlowOracle {
  ChartVector x_T;
  ChartMatrix jacobian;        // chart Jacobian of the discrete flow (leaf block only if leaf_only)
  double chart_logdet = 0.0;   // ln |det D|
  double logdet = 0.0;         // ln |det phi_t*| w.r.t. g
  double leaf_logdet = 0.0;    // ln |det_E phi_t*|
  double leaf_sign = 1.0;
};

struct OracleOptions {
  double bump = 1e-6;
  double renormalize_every = 1.0;
  double max_displacement = 1e-3;
  bool leaf_only = false;  // bump leaf coordinates only (enough for det_E)
};

/// Flow Jacobian by central bumping of the initial chart point through the same noise,
/// with QR renormalization every renormalize_every time units.
FlowOracle jacobian_flow_oracle(const LeafDynamics& dyn, const ChartVector& x0, const NoisePath& noise,
                                const OracleOptions& options = {});

/// det_E(phi_t*) from an oracle run.
double leaf_det(const FlowOracle& oracle);

struct PathSample {
  double t = 0.0;
  ChartVector x;
  double logdet_full = 0.0;
  double logdet_leaf = 0.0;
};

struct PathRecord {
  std::uint64_t stream = 0;
  ChartVector x0;
  std::vector<PathSample> samples;  // after steps k with k % record_every == 0, and the last step
  PathState final_state;
};

struct Ensemble {
  std::string model_name;
  SimConfig config;
  std::vector<PathRecord> paths;
};

/// Brownian noise of path `index` for the given seed.
NoisePath path_noise(std::uint64_t seed, std::uint64_t index, long steps, int dim, double dt);

/// Initial point of path `index`: the configured point, or a draw from the Riemannian volume.
ChartVector initial_point(const FoliatedModel& model, const SimConfig& config, std::uint64_t index,
                          double density_bound);

/// Upper bound of sqrt(det G) used by volume rejection sampling.
double volume_density_bound(const FoliatedModel& model);
ChartVector sample_volume(const FoliatedModel& model, RandomStream& stream, double density_bound);

PathRecord simulate_path(const LeafDynamics& dyn, const ChartVector& x0, const NoisePath& noise, int record_every,
                         bool track_logdet, std::uint64_t stream = 0);

Ensemble simulate_ensemble(const FoliatedModel& model, const SimConfig& config);

/// Runs fn(i) for i in [0, count) on worker threads; fn must only write to slot i.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, int threads = 0);

}  // namespace folilab
