#ifndef DYNOGRAPH_SIMULATE_HPP
#define DYNOGRAPH_SIMULATE_HPP

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynograph/system.hpp"

namespace dynograph {

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  int replicates = 1;
  std::uint64_t masterSeed = 0;
};

struct SimulationError : std::runtime_error {
  int replicate = -1;
  long step = -1;
  std::string component;
  SimulationError(const std::string& what, int replicate, long step, std::string component)
      : std::runtime_error(what), replicate(replicate), step(step),
        component(std::move(component)) {}
};

struct ReplicatePath {
  // (name, realized value) in declaration order
  std::vector<std::pair<std::string, double>> attributeDraws;
  // rows = grid points, cols = channels; counting channels hold cumulative counts
  Eigen::MatrixXd states;
};

struct TrajectoryBundle {
  std::vector<double> timeGrid;
  std::vector<std::string> channels;  // component names plus any derived channels
  std::vector<ReplicatePath> replicates;
  // run-level warning counters
  long negativeIntensityClamps = 0;
  long coarseIntensitySteps = 0;  // steps where intensity*dt exceeded 0.1

  int channel_index(const std::string& name) const;
  // Largest grid index i with timeGrid[i] <= time (left-limit sampling).
  std::size_t grid_index_at(double time) const;
};

// Euler-Maruyama for diffusions, per-step Bernoulli thinning for counting
// intensities (clamped at zero with a warning counter when negative), and
// classical RK4 over the coupled ODE block. Bit-exact reproducible: every
// draw is a pure function of (masterSeed, replicate, component, step), so
// thread count and replicate order never change the output.
TrajectoryBundle simulate(const SystemSpec& spec, const SimConfig& cfg, int threads = 1);

struct ObservationRecord {
  std::string channel;
  double time = 0.0;
  int detected = 1;
  std::optional<double> value;  // present iff detected
  double errorSd = 0.0;
  std::optional<double> detectionLimit;
};

// Measurement scheme: raw = state + N(0, errorSd^2) sampled at the nearest
// grid point at or before each requested time; with a detection limit eta,
// detected = 1 iff raw > eta and the value is reported only when detected.
std::vector<std::vector<ObservationRecord>> observe(
    const TrajectoryBundle& bundle, const std::string& channel,
    const std::vector<double>& times, double errorSd, std::optional<double> etaDet,
    std::uint64_t seed);

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased
  Eigen::VectorXd standardError;  // of the mean
};

Moments empirical_moments(const TrajectoryBundle& bundle,
                          const std::vector<std::string>& components, double time);

struct Lemma4Report {
  double corr = 0.0;
  double se = 0.0;
  bool consistent = false;
  bool expectedIndependent = false;
  std::string note;
};

// Monte Carlo check of the conditional-independence lemma: when j and k are
// dynamically independent in the derived graph (and initial values are
// independent), their empirical correlation at `time` must sit within 3 SE
// of zero. Random attributes are fixed at their means (a single stratum of
// the conditioning).
Lemma4Report lemma4_mc_check(const SystemSpec& spec, const std::string& j,
                             const std::string& k, const SimConfig& cfg, double time,
                             int threads = 1);

// Deterministic CSV exports (17 significant digits).
void write_trajectory_csv(const TrajectoryBundle& bundle, std::ostream& out);
void write_observations_csv(const std::vector<std::vector<ObservationRecord>>& records,
                            std::ostream& out);

}  // namespace dynograph

#endif  // DYNOGRAPH_SIMULATE_HPP
