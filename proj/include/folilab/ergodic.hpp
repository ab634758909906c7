#pragma once

// Occupation measures and the three estimators of the Lyapunov sum, harmonic
// measure diagnostics, and the det_E-weighted measure action of the flow.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "folilab/geometry.hpp"
#include "folilab/model.hpp"
#include "folilab/sde.hpp"

namespace folilab {

/// Cell masses on the angle torus [0, 2 pi)^d, one axis per chart coordinate.
class OccupationHistogram {
 public:
  OccupationHistogram(const FoliatedModel& model, std::vector<int> dims);

  const std::vector<int>& dims() const { return dims_; }
  int cells() const { return static_cast<int>(mass_.size()); }

  int cell_of(const ChartVector& x) const;
  ChartVector cell_center_angles(int cell) const;
  /// A chart point at the cell center.
  ChartVector cell_center(int cell) const;
  ChartVector cell_widths() const;

  void add(const ChartVector& x, double weight = 1.0);
  void add_to_cell(int cell, double weight);
  /// Normalizes the masses to sum 1; throws EmptyEnsemble if nothing was added.
  void finalize();

  bool finalized() const { return finalized_; }
  double total_weight() const { return total_; }
  double mass(int cell) const { return mass_[cell]; }
  const std::vector<double>& masses() const { return mass_; }
  const FoliatedModel& model() const { return *model_; }

 private:
  const FoliatedModel* model_;
  std::vector<int> dims_;
  std::vector<double> mass_;
  double total_ = 0.0;
  bool finalized_ = false;
};

/// Normalized histogram of the Riemannian volume (cell mass from sqrt(det g) at the cell center).
OccupationHistogram volume_histogram(const FoliatedModel& model, const std::vector<int>& dims);
/// Every cell with mass 1 / cells.
OccupationHistogram uniform_histogram(const FoliatedModel& model, const std::vector<int>& dims);

/// (1/2) sum |p - q| over cells of two normalized histograms on the same grid.
double tv_distance(const OccupationHistogram& a, const OccupationHistogram& b);

/// Per-path cell counts of post-burn-in samples, the raw material for pooled
/// histograms and bootstrap-over-paths error bars.
struct PathOccupation {
  std::vector<int> dims;
  std::vector<std::vector<double>> counts;  // [path][cell]
};

PathOccupation path_occupation(const FoliatedModel& model, const Ensemble& ensemble, const std::vector<int>& dims,
                               double burn_in_fraction = 0.1);
OccupationHistogram pooled_histogram(const FoliatedModel& model, const PathOccupation& occupation);

OccupationHistogram occupation_measure(const FoliatedModel& model, const Ensemble& ensemble,
                                       const std::vector<int>& dims, double burn_in_fraction = 0.1);

struct BootstrapOptions {
  int resamples = 200;
  std::uint64_t seed = 0;
};

/// Standard deviation over path resamples of the pooled average of per-cell values.
double bootstrap_stderr(const PathOccupation& occupation, const std::vector<double>& cell_values,
                        const BootstrapOptions& options = {});

struct PathwiseEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean over paths of logdet_full(T) / T with its standard error.
PathwiseEstimate lyapunov_pathwise(const Ensemble& ensemble);

struct QuadratureEstimate {
  double value = 0.0;
  double error = 0.0;      // midpoint-rule and difference-step error bound
  double std_error = 0.0;  // Monte Carlo error of the histogram, when path data were supplied
};

/// div V + (1/2) sum_i X_i div X_i at a chart point.
double baxendale_integrand(const LeafDynamics& dyn, const ChartVector& x);
/// -(1/2) (|H|^2 - div_E(2V - kappa) + 2 g(kappa, V)) at a chart point.
double geometric_integrand(const LeafDynamics& dyn, const ChartVector& x);

/// sum_c mass_c F(center_c), with error = max cell variation of F plus the change under halved steps.
QuadratureEstimate quadrature(const OccupationHistogram& histogram,
                              const std::function<double(const ChartVector&, const DifferenceSteps&)>& integrand,
                              const DifferenceSteps& steps = {}, const PathOccupation* paths = nullptr,
                              const BootstrapOptions& bootstrap = {});

QuadratureEstimate lyapunov_baxendale(const FoliatedModel& model, const OccupationHistogram& histogram,
                                      const DriftSpec& drift, const PathOccupation* paths = nullptr,
                                      const DifferenceSteps& steps = {});
QuadratureEstimate lyapunov_geometric(const FoliatedModel& model, const OccupationHistogram& histogram,
                                      const DriftSpec& drift, const PathOccupation* paths = nullptr,
                                      const DifferenceSteps& steps = {});

/// (V + (1/2) Delta_E) f at a chart point.
double generator(const FoliatedModel& model, const DriftField& drift, const ScalarField& f, const ChartVector& x,
                 const DifferenceSteps& steps = {});

struct HarmonicResidual {
  std::string name;
  double value = 0.0;
  double std_error = 0.0;
};

/// Quadrature of L f against the histogram for each test function; error bars by
/// bootstrap over paths when path data are supplied.
std::vector<HarmonicResidual> harmonic_residuals(const FoliatedModel& model, const OccupationHistogram& histogram,
                                                 const DriftSpec& drift,
                                                 const std::vector<NamedScalarField>& test_functions,
                                                 const PathOccupation* paths = nullptr,
                                                 const BootstrapOptions& bootstrap = {});

enum class CandidateMeasure { lebesgue, bump };

struct MeasureActionConfig {
  CandidateMeasure candidate = CandidateMeasure::lebesgue;
  long particles = 100000;
  double t = 1.0;
  double s = 1.0;  // second interval of the cocycle check; 0 skips it
  double dt = 1e-2;
  std::uint64_t seed = 0;
  std::vector<int> dims{16, 16};
  double bump_width = 0.2;
  std::optional<ChartVector> bump_center;  // angles; default pi in every coordinate
  DriftSpec drift;
  int threads = 0;
};

struct WeightedParticles {
  std::vector<ChartVector> x;
  std::vector<double> w;
};

struct MeasureActionResult {
  OccupationHistogram original;
  OccupationHistogram pushed;  // phi_t * mu
  double tv = 0.0;
  std::optional<double> cocycle_defect;
  double ess_fraction = 1.0;
  double min_weight = 1.0;
  double max_weight = 1.0;
};

WeightedParticles sample_candidate(const FoliatedModel& model, const MeasureActionConfig& config);

/// phi * (det_E(phi*) mu) for the flow of one noise realization.
WeightedParticles push_forward(const LeafDynamics& dyn, const WeightedParticles& particles, const NoisePath& noise,
                               int threads = 0);

double effective_sample_fraction(const std::vector<double>& weights);

MeasureActionResult measure_action_test(const FoliatedModel& model, const MeasureActionConfig& config);

}  // namespace folilab
