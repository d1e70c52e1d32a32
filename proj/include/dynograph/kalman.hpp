#ifndef DYNOGRAPH_KALMAN_HPP
#define DYNOGRAPH_KALMAN_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace dynograph {

// Scalar coefficient of the linear system: a constant or a smooth time
// function (with derivative where the construction needs one).
class Coefficient {
 public:
  Coefficient() = default;
  Coefficient(double c) : constant_(true), value_(c) {}  // implicit on purpose

  static Coefficient time_varying(std::function<double(double)> f,
                                  std::function<double(double)> df = {}) {
    Coefficient c;
    c.constant_ = false;
    c.fn_ = std::move(f);
    c.dfn_ = std::move(df);
    return c;
  }

  double operator()(double t) const { return constant_ ? value_ : fn_(t); }
  double derivative(double t) const {
    if (constant_) return 0.0;
    if (!dfn_) throw std::runtime_error("coefficient has no derivative");
    return dfn_(t);
  }
  bool is_constant() const { return constant_; }
  double constant_value() const {
    if (!constant_) throw std::runtime_error("coefficient is time-varying");
    return value_;
  }

 private:
  bool constant_ = true;
  double value_ = 0.0;
  std::function<double(double)> fn_, dfn_;
};

// Three-component linear diffusion with unit driving noise and zero initial
// conditions:
//   dX_i = (a_i X1 + b_i X2 + c_i X3) dt + dW_i,  i = 1..3.
// X3 is the latent component marginalized out below.
struct LinearSystem3 {
  Coefficient a1, b1, c1;
  Coefficient a2, b2, c2;
  Coefficient a3, b3, c3;

  bool constant_coefficients() const;
  Eigen::Matrix3d drift_matrix(double t) const;
};

// Conditional variance R_t of X3 given the history of (X1, X2), from
//   dR = (2 c3 R + 1 - R^2 (c1^2 + c2^2)) dt,  R(0) = 0.
struct RiccatiSolution {
  std::vector<double> timeGrid;
  std::vector<double> R;
  std::optional<double> steadyState;
  std::string note;

  double at(double t) const;          // linear interpolation on the grid
  double derivative_at(double t, const LinearSystem3& sys) const;
};

RiccatiSolution riccati_solve(const LinearSystem3& sys, double horizon, double dt);

// Innovation decomposition of (X1, X2) in its own filtration: the latent
// estimate follows
//   dXhat3 = (coefX1 X1 + coefX2 X2 + coefXhat3 Xhat3) dt
//            + gainX1 dX1 + gainX2 dX2,
// and the marginal drift of X_i stays a_i X1 + b_i X2 + c_i Xhat3.
struct MarginalDecomposition {
  std::vector<double> timeGrid;
  std::vector<double> R;
  std::vector<double> coefX1, coefX2, coefXhat3;
  std::vector<double> gainX1, gainX2;
  // marginal drift coefficients of the observed pair
  std::vector<double> m1OnX1, m1OnX2, m1OnXhat3;
  std::vector<double> m2OnX1, m2OnX2, m2OnXhat3;

  // Euler discretization of the recursion over an observed path
  // (rows = grid points, columns = X1, X2); returns the Xhat3 path.
  std::vector<double> filter_path(const Eigen::MatrixXd& observed) const;
};

MarginalDecomposition marginal_decomposition(const LinearSystem3& sys, double horizon,
                                             double dt);

struct FaithfulnessVerdict {
  bool moot = false;      // b1 = 0: the marginal already omits X2
  bool faithful = false;  // only meaningful when !moot
  double margin = 0.0;    // min over the grid of |b1 + R c1 c2|
  double tol = 0.0;
  std::string detail;
};

// Default tolerance is 1e-6 * (1 + max|b1|), far below any non-degenerate
// margin. Time-varying systems are accepted; the constant-coefficient
// guarantee is cited in the detail text when it applies.
FaithfulnessVerdict faithfulness_verdict(const LinearSystem3& sys, double horizon,
                                         double dt, std::optional<double> tol = {});

nlohmann::ordered_json verdict_to_json(const FaithfulnessVerdict& v);

struct UnfaithfulConstruction {
  LinearSystem3 system;
  RiccatiSolution riccati;
  double maxDx2Coefficient = 0.0;  // max |b1 + R c1 c2| on the grid
  double identityResidual = 0.0;   // max |c1*beta - b1*gamma| on the grid
  bool degenerate = false;         // c1 identically zero
  std::string note;
};

// Counterexample family: solves the Riccati equation for the given c's,
// then sets b1(t) = -R_t c1(t) c2(t) and the matching b3(t) so that the dX2
// part of the marginal X1 dynamics cancels identically. The cancellation is
// verified numerically and reported, never assumed.
UnfaithfulConstruction construct_unfaithful(const Coefficient& c1, const Coefficient& c2,
                                            const Coefficient& c3, const Coefficient& b2,
                                            double horizon, double dt);

struct KalmanOracleReport {
  double rms = 0.0;
  bool pass = false;
};

// Independent check of the filtering recursion: simulates one joint path on
// the exact Gaussian discretization (matrix-exponential transition), runs a
// discrete-time Kalman filter with (X1, X2) observed exactly, and compares
// its latent estimate with the continuous recursion. pass = rms < 10 dt.
KalmanOracleReport kalman_oracle_check(const LinearSystem3& sys, double horizon, double dt,
                                       std::uint64_t seed = 0);

void write_riccati_csv(const RiccatiSolution& sol, std::ostream& out);
void write_marginal_coeff_csv(const MarginalDecomposition& dec, std::ostream& out);

}  // namespace dynograph

#endif  // DYNOGRAPH_KALMAN_HPP
