#include "dynograph/kalman.hpp"

#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "dynograph/rng.hpp"
#include "dynograph/serialize.hpp"

namespace dynograph {

bool LinearSystem3::constant_coefficients() const {
  return a1.is_constant() && b1.is_constant() && c1.is_constant() && a2.is_constant() &&
         b2.is_constant() && c2.is_constant() && a3.is_constant() && b3.is_constant() &&
         c3.is_constant();
}

Eigen::Matrix3d LinearSystem3::drift_matrix(double t) const {
  Eigen::Matrix3d A;
  A << a1(t), b1(t), c1(t), a2(t), b2(t), c2(t), a3(t), b3(t), c3(t);
  return A;
}

double RiccatiSolution::at(double t) const {
  if (timeGrid.empty()) return 0.0;
  if (t <= timeGrid.front()) return R.front();
  if (t >= timeGrid.back()) return R.back();
  const double dt = timeGrid[1] - timeGrid[0];
  const auto i = static_cast<size_t>(std::floor(t / dt));
  const size_t j = std::min(i + 1, R.size() - 1);
  const double w = (t - timeGrid[i]) / dt;
  return (1.0 - w) * R[i] + w * R[j];
}

double RiccatiSolution::derivative_at(double t, const LinearSystem3& sys) const {
  const double r = at(t);
  const double c1 = sys.c1(t), c2 = sys.c2(t), c3 = sys.c3(t);
  return 2.0 * c3 * r + 1.0 - r * r * (c1 * c1 + c2 * c2);
}

namespace {

long step_count(double horizon, double dt) {
  if (!(dt > 0.0) || !(horizon > 0.0))
    throw std::invalid_argument("horizon and dt must be positive");
  return static_cast<long>(std::ceil(horizon / dt - 1e-9));
}

}  // namespace

RiccatiSolution riccati_solve(const LinearSystem3& sys, double horizon, double dt) {
  const long nSteps = step_count(horizon, dt);
  RiccatiSolution sol;
  sol.timeGrid.resize(static_cast<size_t>(nSteps) + 1);
  sol.R.resize(static_cast<size_t>(nSteps) + 1);

  auto rhs = [&sys](double t, double r) {
    const double c1 = sys.c1(t), c2 = sys.c2(t), c3 = sys.c3(t);
    return 2.0 * c3 * r + 1.0 - r * r * (c1 * c1 + c2 * c2);
  };

  double r = 0.0;
  sol.timeGrid[0] = 0.0;
  sol.R[0] = 0.0;
  for (long i = 0; i < nSteps; ++i) {
    const double t = static_cast<double>(i) * dt;

    if (!sol.steadyState && std::abs(rhs(t, r)) < 1e-10) {
      const double s = sys.c1(t) * sys.c1(t) + sys.c2(t) * sys.c2(t);
      const double c3 = sys.c3(t);
      if (sys.constant_coefficients() && s > 0.0)
        sol.steadyState = (c3 + std::sqrt(c3 * c3 + s)) / s;
      else if (sys.constant_coefficients() && c3 < 0.0)
        sol.steadyState = -1.0 / (2.0 * c3);
      else
        sol.steadyState = r;
    }

    const double k1 = rhs(t, r);
    const double k2 = rhs(t + 0.5 * dt, r + 0.5 * dt * k1);
    const double k3 = rhs(t + 0.5 * dt, r + 0.5 * dt * k2);
    const double k4 = rhs(t + dt, r + dt * k3);
    r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(r))
      throw std::runtime_error("Riccati solution became non-finite at t = " +
                               format_real(t + dt));
    sol.timeGrid[static_cast<size_t>(i) + 1] = static_cast<double>(i + 1) * dt;
    sol.R[static_cast<size_t>(i) + 1] = r;
  }

  if (!sol.steadyState) {
    const double tEnd = static_cast<double>(nSteps) * dt;
    if (std::abs(rhs(tEnd, r)) < 1e-10) {
      const double s = sys.c1(tEnd) * sys.c1(tEnd) + sys.c2(tEnd) * sys.c2(tEnd);
      const double c3 = sys.c3(tEnd);
      if (sys.constant_coefficients() && s > 0.0)
        sol.steadyState = (c3 + std::sqrt(c3 * c3 + s)) / s;
      else if (sys.constant_coefficients() && c3 < 0.0)
        sol.steadyState = -1.0 / (2.0 * c3);
      else
        sol.steadyState = r;
    } else {
      sol.note = "no steady state reached before the horizon; R is still moving";
    }
  }
  return sol;
}

MarginalDecomposition marginal_decomposition(const LinearSystem3& sys, double horizon,
                                             double dt) {
  RiccatiSolution ric = riccati_solve(sys, horizon, dt);
  MarginalDecomposition dec;
  dec.timeGrid = ric.timeGrid;
  dec.R = ric.R;
  const size_t n = ric.R.size();
  dec.coefX1.resize(n);
  dec.coefX2.resize(n);
  dec.coefXhat3.resize(n);
  dec.gainX1.resize(n);
  dec.gainX2.resize(n);
  dec.m1OnX1.resize(n);
  dec.m1OnX2.resize(n);
  dec.m1OnXhat3.resize(n);
  dec.m2OnX1.resize(n);
  dec.m2OnX2.resize(n);
  dec.m2OnXhat3.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const double t = dec.timeGrid[i];
    const double r = dec.R[i];
    const double a1 = sys.a1(t), b1 = sys.b1(t), c1 = sys.c1(t);
    const double a2 = sys.a2(t), b2 = sys.b2(t), c2 = sys.c2(t);
    const double a3 = sys.a3(t), b3 = sys.b3(t), c3 = sys.c3(t);
    dec.coefX1[i] = a3 - r * (a1 * c1 + a2 * c2);
    dec.coefX2[i] = b3 - r * (b1 * c1 + b2 * c2);
    dec.coefXhat3[i] = c3 - r * (c1 * c1 + c2 * c2);
    dec.gainX1[i] = r * c1;
    dec.gainX2[i] = r * c2;
    dec.m1OnX1[i] = a1;
    dec.m1OnX2[i] = b1;
    dec.m1OnXhat3[i] = c1;
    dec.m2OnX1[i] = a2;
    dec.m2OnX2[i] = b2;
    dec.m2OnXhat3[i] = c2;
  }
  return dec;
}

std::vector<double> MarginalDecomposition::filter_path(const Eigen::MatrixXd& observed) const {
  const size_t n = timeGrid.size();
  if (static_cast<size_t>(observed.rows()) != n || observed.cols() != 2)
    throw std::invalid_argument("observed path must be (grid points) x 2");
  std::vector<double> xhat(n, 0.0);
  for (size_t i = 0; i + 1 < n; ++i) {
    const double dt = timeGrid[i + 1] - timeGrid[i];
    const double x1 = observed(static_cast<Eigen::Index>(i), 0);
    const double x2 = observed(static_cast<Eigen::Index>(i), 1);
    const double dx1 = observed(static_cast<Eigen::Index>(i) + 1, 0) - x1;
    const double dx2 = observed(static_cast<Eigen::Index>(i) + 1, 1) - x2;
    xhat[i + 1] = xhat[i] +
                  (coefX1[i] * x1 + coefX2[i] * x2 + coefXhat3[i] * xhat[i]) * dt +
                  gainX1[i] * dx1 + gainX2[i] * dx2;
  }
  return xhat;
}

FaithfulnessVerdict faithfulness_verdict(const LinearSystem3& sys, double horizon,
                                         double dt, std::optional<double> tol) {
  const long nSteps = step_count(horizon, dt);
  FaithfulnessVerdict v;

  double b1max = 0.0;
  for (long i = 0; i <= nSteps; ++i)
    b1max = std::max(b1max, std::abs(sys.b1(static_cast<double>(i) * dt)));
  v.tol = tol ? *tol : 1e-6 * (1.0 + b1max);

  if (b1max == 0.0) {
    v.moot = true;
    v.detail =
        "moot: b1 = 0, so X2 is already weakly locally independent of X1 in the "
        "marginal system";
    return v;
  }

  RiccatiSolution ric = riccati_solve(sys, horizon, dt);
  double margin = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < ric.R.size(); ++i) {
    const double t = ric.timeGrid[i];
    margin = std::min(margin, std::abs(sys.b1(t) + ric.R[i] * sys.c1(t) * sys.c2(t)));
  }
  v.margin = margin;
  v.faithful = margin > v.tol;

  const bool constant = sys.constant_coefficients();
  if (constant && (sys.c1.constant_value() == 0.0 || sys.c2.constant_value() == 0.0)) {
    v.detail = sys.c1.constant_value() == 0.0
                   ? "c1 = 0: Xhat3 does not enter X1's marginal drift, which keeps the "
                     "explicit b1*X2 term"
                   : "c2 = 0: the filter gain on dX2 vanishes, so no cancellation of "
                     "b1*X2 is possible";
  } else if (constant) {
    v.detail = v.faithful
                   ? "constant coefficients: R_t increases from 0 and cannot be constant, "
                     "so b1 = -R_t c1 c2 cannot hold identically"
                   : "margin below tolerance despite constant coefficients";
  } else {
    v.detail = v.faithful ? "time-varying coefficients: no cancellation detected on the grid"
                          : "the dX2 coefficient of X1's marginal dynamics vanishes on the "
                            "grid: b1(t) = -R_t c1(t) c2(t)";
  }
  return v;
}

nlohmann::ordered_json verdict_to_json(const FaithfulnessVerdict& v) {
  nlohmann::ordered_json j;
  j["faithful"] = v.faithful;
  j["moot"] = v.moot;
  j["margin"] = v.margin;
  j["tol"] = v.tol;
  j["detail"] = v.detail;
  return j;
}

UnfaithfulConstruction construct_unfaithful(const Coefficient& c1, const Coefficient& c2,
                                            const Coefficient& c3, const Coefficient& b2,
                                            double horizon, double dt) {
  UnfaithfulConstruction out;

  LinearSystem3 base;
  base.c1 = c1;
  base.c2 = c2;
  base.c3 = c3;
  out.riccati = riccati_solve(base, horizon, dt);

  double c1max = 0.0;
  for (double t : out.riccati.timeGrid) c1max = std::max(c1max, std::abs(c1(t)));
  if (c1max == 0.0) {
    out.degenerate = true;
    out.note = "degenerate: c1 = 0 forces b1 = 0, so there is no X2 dependence to cancel";
  }

  // R and R' as callables; R' comes from the Riccati right-hand side itself.
  auto ric = std::make_shared<RiccatiSolution>(out.riccati);
  auto sysC = std::make_shared<LinearSystem3>(base);
  auto Rof = [ric](double t) { return ric->at(t); };
  auto Rprime = [ric, sysC](double t) { return ric->derivative_at(t, *sysC); };

  auto b1fn = [Rof, c1, c2](double t) { return -Rof(t) * c1(t) * c2(t); };
  auto db1fn = [Rof, Rprime, c1, c2](double t) {
    return -(Rprime(t) * c1(t) * c2(t) + Rof(t) * (c1.derivative(t) * c2(t) +
                                                   c1(t) * c2.derivative(t)));
  };
  // b3 relation making the drift of Z = b1 X2 + c1 Xhat3 proportional to
  // (b1, c1) again; equivalent closed form of
  //   b3 = R(b2 c2 + c2' - c2 c3) + R' c2 + R^2 c2^3.
  auto b3fn = [Rof, c1, c2, c3, b2](double t) {
    const double r = Rof(t);
    return r * (b2(t) * c2(t) + c2.derivative(t) + c2(t) * c3(t)) + c2(t) -
           r * r * c1(t) * c1(t) * c2(t);
  };

  out.system.a1 = 0.0;
  out.system.a2 = 0.0;
  out.system.a3 = 0.0;
  out.system.b1 = Coefficient::time_varying(b1fn, db1fn);
  out.system.b2 = b2;
  out.system.b3 = Coefficient::time_varying(b3fn);
  out.system.c1 = c1;
  out.system.c2 = c2;
  out.system.c3 = c3;

  // Verify numerically instead of trusting the algebra: the dX2 coefficient
  // of the marginal X1 dynamics and the proportionality identity behind b3.
  double maxDx2 = 0.0, maxResidual = 0.0;
  for (size_t i = 0; i < out.riccati.timeGrid.size(); ++i) {
    const double t = out.riccati.timeGrid[i];
    const double r = out.riccati.R[i];
    const double b1v = b1fn(t);
    maxDx2 = std::max(maxDx2, std::abs(b1v + r * c1(t) * c2(t)));

    const double beta = c1(t) * (b3fn(t) - r * (b1v * c1(t) + b2(t) * c2(t))) + db1fn(t);
    const double gamma = c1(t) * (c3(t) - r * (c1(t) * c1(t) + c2(t) * c2(t))) +
                         c1.derivative(t);
    maxResidual = std::max(maxResidual, std::abs(c1(t) * beta - b1v * gamma));
  }
  out.maxDx2Coefficient = maxDx2;
  out.identityResidual = maxResidual;
  if (!out.degenerate && maxResidual > 1e-6)
    out.note = "cancellation identity residual " + format_real(maxResidual) +
               " exceeds 1e-6; the constructed system may not be exactly unfaithful";
  return out;
}

KalmanOracleReport kalman_oracle_check(const LinearSystem3& sys, double horizon, double dt,
                                       std::uint64_t seed) {
  if (!sys.constant_coefficients())
    throw std::invalid_argument("kalman_oracle_check expects constant coefficients");
  const long nSteps = step_count(horizon, dt);

  // Exact Gaussian discretization via Van Loan: Phi = e^{A dt} and
  // Q = int_0^dt e^{As} e^{A's} ds from one 6x6 matrix exponential.
  const Eigen::Matrix3d A = sys.drift_matrix(0.0);
  Eigen::Matrix<double, 6, 6> M = Eigen::Matrix<double, 6, 6>::Zero();
  M.topLeftCorner<3, 3>() = -A * dt;
  M.topRightCorner<3, 3>() = Eigen::Matrix3d::Identity() * dt;
  M.bottomRightCorner<3, 3>() = A.transpose() * dt;
  const Eigen::Matrix<double, 6, 6> F = M.exp();
  const Eigen::Matrix3d Phi = F.bottomRightCorner<3, 3>().transpose();
  const Eigen::Matrix3d Q = Phi * F.topRightCorner<3, 3>();

  Eigen::LLT<Eigen::Matrix3d> llt(Q);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("process covariance is not positive definite");
  const Eigen::Matrix3d LQ = llt.matrixL();

  // one joint path, exact at the grid points
  Eigen::MatrixXd path(nSteps + 1, 3);
  path.row(0).setZero();
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  for (long i = 0; i < nSteps; ++i) {
    Eigen::Vector3d xi;
    for (int d = 0; d < 3; ++d)
      xi(d) = rng::gauss(
          rng::key(seed, {5, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(d), 0}),
          rng::key(seed, {5, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(d), 1}));
    x = Phi * x + LQ * xi;
    path.row(i + 1) = x.transpose();
  }

  // Discrete-time Kalman filter with (X1, X2) observed without noise.
  Eigen::Matrix<double, 2, 3> H = Eigen::Matrix<double, 2, 3>::Zero();
  H(0, 0) = 1.0;
  H(1, 1) = 1.0;
  Eigen::Vector3d xhat = Eigen::Vector3d::Zero();
  Eigen::Matrix3d P = Eigen::Matrix3d::Zero();
  std::vector<double> kfLatent(static_cast<size_t>(nSteps) + 1, 0.0);
  for (long i = 0; i < nSteps; ++i) {
    xhat = Phi * xhat;
    P = Phi * P * Phi.transpose() + Q;
    const Eigen::Matrix2d S = H * P * H.transpose();
    const Eigen::Matrix<double, 3, 2> K = P * H.transpose() * S.inverse();
    const Eigen::Vector2d z = path.row(i + 1).head<2>().transpose();
    xhat = xhat + K * (z - H * xhat);
    P = (Eigen::Matrix3d::Identity() - K * H) * P;
    kfLatent[static_cast<size_t>(i) + 1] = xhat(2);
  }

  MarginalDecomposition dec = marginal_decomposition(sys, horizon, dt);
  std::vector<double> marginalLatent = dec.filter_path(path.leftCols<2>());

  double sumSq = 0.0;
  for (size_t i = 0; i < marginalLatent.size(); ++i) {
    const double d = marginalLatent[i] - kfLatent[i];
    sumSq += d * d;
  }
  KalmanOracleReport report;
  report.rms = std::sqrt(sumSq / static_cast<double>(marginalLatent.size()));
  report.pass = report.rms < 10.0 * dt;
  return report;
}

void write_riccati_csv(const RiccatiSolution& sol, std::ostream& out) {
  out << "t,R\n";
  for (size_t i = 0; i < sol.timeGrid.size(); ++i)
    out << format_real_17(sol.timeGrid[i]) << ',' << format_real_17(sol.R[i]) << '\n';
}

void write_marginal_coeff_csv(const MarginalDecomposition& dec, std::ostream& out) {
  out << "t,R,xhat3_on_x1,xhat3_on_x2,xhat3_on_xhat3,gain_dx1,gain_dx2,"
         "x1_on_x1,x1_on_x2,x1_on_xhat3,x2_on_x1,x2_on_x2,x2_on_xhat3\n";
  for (size_t i = 0; i < dec.timeGrid.size(); ++i) {
    out << format_real_17(dec.timeGrid[i]) << ',' << format_real_17(dec.R[i]) << ','
        << format_real_17(dec.coefX1[i]) << ',' << format_real_17(dec.coefX2[i]) << ','
        << format_real_17(dec.coefXhat3[i]) << ',' << format_real_17(dec.gainX1[i]) << ','
        << format_real_17(dec.gainX2[i]) << ',' << format_real_17(dec.m1OnX1[i]) << ','
        << format_real_17(dec.m1OnX2[i]) << ',' << format_real_17(dec.m1OnXhat3[i]) << ','
        << format_real_17(dec.m2OnX1[i]) << ',' << format_real_17(dec.m2OnX2[i]) << ','
        << format_real_17(dec.m2OnXhat3[i]) << '\n';
  }
}

}  // namespace dynograph
