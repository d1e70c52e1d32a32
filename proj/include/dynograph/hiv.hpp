#ifndef DYNOGRAPH_HIV_HPP
#define DYNOGRAPH_HIV_HPP

#include <optional>

#include <Eigen/Dense>

#include "dynograph/graph.hpp"
#include "dynograph/simulate.hpp"
#include "dynograph/system.hpp"

namespace dynograph {

// Two-slope mixed model for a marker trajectory after treatment start.
// Population parameters carry independent Gaussian random effects on the
// intercept and both slopes. All defaults are illustrative, not fitted.
struct TwoSlopeParams {
  double beta0 = 4.5;   // population intercept (e.g. log10 copies/mL)
  double beta1 = -1.5;  // first slope, t <= tStar
  double beta2 = -0.15; // second slope, t > tStar
  double sdA0 = 0.5;
  double sdA1 = 0.3;
  double sdA2 = 0.1;
  double gamma1 = -0.3;  // treatment effects on the slopes
  double gamma2 = 0.0;
  double tStar = 2.0;    // slope-change time
  double sigmaW = 0.2;   // driving martingale intensity
  double errorSd = 0.25; // observation error (used at observation time)
  double etaDet = 1.7;   // detection limit for the viral channel
};

// Five-compartment within-host model: quiescent and activated CD4 cells,
// infected cells, infectious and non-infectious virions, plus a survival
// hazard on the marker levels. Defaults are illustrative and scaled so the
// uninfected CD4 total sits near 1000 cells/uL.
struct MechanisticParams {
  double lambdaProd = 40.0;  // thymic production, cells per unit time
  double rho = 0.01;         // reversion of activated to quiescent
  double alpha = 0.03;       // activation rate
  double muQ = 0.02;
  double muT = 0.15;
  double muTstar = 0.7;
  double muV = 3.0;
  double gammaInf = 1e-3;  // infectivity
  double etaRT = 0.85;     // RT-inhibitor efficacy in [0, 1]
  double omega = 0.55;     // infectious fraction of produced virions
  double piProd = 100.0;   // virions per infected cell
  double hazardBase = 1e-3;
  double betaQ = -0.001;
  double betaT = -0.002;
  double betaZ = 0.3;
  double zCovariate = 1.0;
};

// One diffusion V with drift (b1 + gamma1 A) 1{t<=t*} + (b2 + gamma2 A)
// 1{t>t*}, random intercept as the initial value.
SystemSpec build_two_slope(const TwoSlopeParams& p, int treatmentA);

// Two diffusions V and Tbar with jointly Gaussian random effects (six of
// them, V's intercept/slopes first) and independent driving noises. The
// derived influence graph has no edges for any parameter values.
SystemSpec build_bivariate_descriptive(const TwoSlopeParams& p1, const TwoSlopeParams& p2,
                                       const Eigen::MatrixXd& effectCorr);

// Five ODE compartments, a counting component D with a proportional hazard
// on Q and T, and (when treatmentStart is set) the randomized treatment
// schedule IRT as an exogenous input.
SystemSpec build_mechanistic(const MechanisticParams& p,
                             std::optional<double> treatmentStart);

// Derived marker channels VL = VI + VNI and CD4 = Q + T + Tstar appended to
// the bundle, ready for observe(). With log10Scale the VL channel carries
// log10 of the sum, so a detection limit applies on the log scale.
TrajectoryBundle observed_markers(const TrajectoryBundle& bundle, bool log10Scale = false);

// The four-node chain I -> T -> A -> D (infection, CD4 level, AIDS, death),
// a fixture for blocking queries.
InfluenceGraph influence_chain_demo();

}  // namespace dynograph

#endif  // DYNOGRAPH_HIV_HPP
