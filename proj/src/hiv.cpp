#include "dynograph/hiv.hpp"

#include <cmath>

namespace dynograph {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_two_slope(const TwoSlopeParams& p) {
  require(p.sdA0 >= 0.0 && p.sdA1 >= 0.0 && p.sdA2 >= 0.0, "random-effect sds must be >= 0");
  require(p.tStar > 0.0, "tStar must be positive");
  require(p.sigmaW >= 0.0, "sigmaW must be >= 0");
  require(p.errorSd >= 0.0, "errorSd must be >= 0");
}

void check_mechanistic(const MechanisticParams& p) {
  require(p.lambdaProd >= 0.0 && p.rho >= 0.0 && p.alpha >= 0.0, "rates must be >= 0");
  require(p.muQ >= 0.0 && p.muT >= 0.0 && p.muTstar >= 0.0 && p.muV >= 0.0,
          "death/clearance rates must be >= 0");
  require(p.gammaInf >= 0.0, "infectivity must be >= 0");
  require(p.etaRT >= 0.0 && p.etaRT <= 1.0, "etaRT must lie in [0, 1]");
  require(p.omega >= 0.0 && p.omega <= 1.0, "omega must lie in [0, 1]");
  require(p.piProd >= 0.0 && p.hazardBase >= 0.0, "production and hazard must be >= 0");
}

// slope expression (b + gamma * trtA) for one phase
ExprPtr phase_slope(const std::string& b, const std::string& gamma, const std::string& trt) {
  return eb::add(eb::attr(b), eb::mul(eb::attr(gamma), eb::attr(trt)));
}

}  // namespace

SystemSpec build_two_slope(const TwoSlopeParams& p, int treatmentA) {
  check_two_slope(p);
  require(treatmentA == 0 || treatmentA == 1, "treatmentA must be 0 or 1");

  SystemSpec spec;
  spec.name = "two_slope";
  spec.attributes = {
      AttributeDecl::gaussian("b0", p.beta0, p.sdA0),
      AttributeDecl::gaussian("b1", p.beta1, p.sdA1),
      AttributeDecl::gaussian("b2", p.beta2, p.sdA2),
      AttributeDecl::fixed("gamma1", p.gamma1),
      AttributeDecl::fixed("gamma2", p.gamma2),
      AttributeDecl::fixed("trtA", static_cast<double>(treatmentA)),
      AttributeDecl::fixed("tstar", p.tStar),
  };

  ComponentSpec v;
  v.name = "V";
  v.kind = ComponentKind::Diffusion;
  v.drift = eb::add(
      eb::mul(phase_slope("b1", "gamma1", "trtA"), eb::ind(Cmp::Le, eb::time(), eb::attr("tstar"))),
      eb::mul(phase_slope("b2", "gamma2", "trtA"), eb::ind(Cmp::Gt, eb::time(), eb::attr("tstar"))));
  v.diffusionCoeff = eb::constant(p.sigmaW);
  v.init = InitValue::attr("b0");
  spec.components.push_back(std::move(v));
  return spec;
}

SystemSpec build_bivariate_descriptive(const TwoSlopeParams& p1, const TwoSlopeParams& p2,
                                       const Eigen::MatrixXd& effectCorr) {
  check_two_slope(p1);
  check_two_slope(p2);
  require(effectCorr.rows() == 6 && effectCorr.cols() == 6,
          "effect correlation must be 6x6 (V intercept/slopes, then Tbar's)");
  for (Eigen::Index i = 0; i < 6; ++i) {
    require(std::abs(effectCorr(i, i) - 1.0) <= 1e-9,
            "correlation matrix needs a unit diagonal");
    for (Eigen::Index j = 0; j < 6; ++j)
      require(std::abs(effectCorr(i, j) - effectCorr(j, i)) <= 1e-12,
              "correlation matrix must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(effectCorr);
  if (es.eigenvalues().minCoeff() < -1e-9)
    throw std::invalid_argument("effect correlation matrix is not positive semidefinite");

  SystemSpec spec;
  spec.name = "bivariate_descriptive";
  spec.attributes = {
      AttributeDecl::gaussian("vB0", p1.beta0, p1.sdA0),
      AttributeDecl::gaussian("vB1", p1.beta1, p1.sdA1),
      AttributeDecl::gaussian("vB2", p1.beta2, p1.sdA2),
      AttributeDecl::gaussian("tB0", p2.beta0, p2.sdA0),
      AttributeDecl::gaussian("tB1", p2.beta1, p2.sdA1),
      AttributeDecl::gaussian("tB2", p2.beta2, p2.sdA2),
      AttributeDecl::fixed("vTstar", p1.tStar),
      AttributeDecl::fixed("tTstar", p2.tStar),
  };
  if (!effectCorr.isIdentity(1e-12)) spec.attributeCorr = effectCorr;

  auto marker = [](const std::string& name, const std::string& b1, const std::string& b2,
                   const std::string& tstar, const std::string& b0, double sigma) {
    ComponentSpec c;
    c.name = name;
    c.kind = ComponentKind::Diffusion;
    c.drift = eb::add(eb::mul(eb::attr(b1), eb::ind(Cmp::Le, eb::time(), eb::attr(tstar))),
                      eb::mul(eb::attr(b2), eb::ind(Cmp::Gt, eb::time(), eb::attr(tstar))));
    c.diffusionCoeff = eb::constant(sigma);
    c.init = InitValue::attr(b0);
    return c;
  };
  spec.components.push_back(marker("V", "vB1", "vB2", "vTstar", "vB0", p1.sigmaW));
  spec.components.push_back(marker("Tbar", "tB1", "tB2", "tTstar", "tB0", p2.sigmaW));
  return spec;
}

SystemSpec build_mechanistic(const MechanisticParams& p,
                             std::optional<double> treatmentStart) {
  check_mechanistic(p);
  if (treatmentStart) require(*treatmentStart >= 0.0, "treatmentStart must be >= 0");

  SystemSpec spec;
  spec.name = "hiv_mechanistic";
  spec.attributes = {
      AttributeDecl::fixed("lambda", p.lambdaProd),
      AttributeDecl::fixed("rho", p.rho),
      AttributeDecl::fixed("alpha", p.alpha),
      AttributeDecl::fixed("muQ", p.muQ),
      AttributeDecl::fixed("muT", p.muT),
      AttributeDecl::fixed("muTstar", p.muTstar),
      AttributeDecl::fixed("muV", p.muV),
      AttributeDecl::fixed("gammaInf", p.gammaInf),
      AttributeDecl::fixed("omega", p.omega),
      AttributeDecl::fixed("piProd", p.piProd),
      AttributeDecl::fixed("hazardBase", p.hazardBase),
      AttributeDecl::fixed("betaQ", p.betaQ),
      AttributeDecl::fixed("betaT", p.betaT),
      AttributeDecl::fixed("betaZ", p.betaZ),
      AttributeDecl::fixed("Z", p.zCovariate),
  };
  if (treatmentStart) {
    spec.attributes.push_back(AttributeDecl::fixed("etaRT", p.etaRT));
    InputSchedule irt;
    irt.name = "IRT";
    if (*treatmentStart == 0.0) {
      irt.times = {0.0};
      irt.values = {1.0};
    } else {
      irt.times = {0.0, *treatmentStart};
      irt.values = {0.0, 1.0};
    }
    spec.inputs.push_back(std::move(irt));
  }

  // infection term (1 - etaRT 1{IRT=1}) gammaInf T VI, without the treatment
  // factor when no treatment schedule exists
  ExprPtr infection;
  if (treatmentStart) {
    ExprPtr factor = eb::sub(eb::constant(1.0),
                             eb::mul(eb::attr("etaRT"),
                                     eb::ind(Cmp::Eq, eb::input("IRT"), eb::constant(1.0))));
    infection = eb::mul(eb::mul(eb::mul(factor, eb::attr("gammaInf")), eb::comp("T")),
                        eb::comp("VI"));
  } else {
    infection = eb::mul(eb::mul(eb::attr("gammaInf"), eb::comp("T")), eb::comp("VI"));
  }

  auto ode = [](const std::string& name, ExprPtr drift, double init) {
    ComponentSpec c;
    c.name = name;
    c.kind = ComponentKind::DeterministicOde;
    c.drift = std::move(drift);
    c.init = InitValue::fixed(init);
    return c;
  };

  spec.components.push_back(ode(
      "Q",
      eb::sub(eb::sub(eb::add(eb::attr("lambda"), eb::mul(eb::attr("rho"), eb::comp("T"))),
                      eb::mul(eb::attr("alpha"), eb::comp("Q"))),
              eb::mul(eb::attr("muQ"), eb::comp("Q"))),
      800.0));
  spec.components.push_back(ode(
      "T",
      eb::sub(eb::sub(eb::sub(eb::mul(eb::attr("alpha"), eb::comp("Q")), infection),
                      eb::mul(eb::attr("rho"), eb::comp("T"))),
              eb::mul(eb::attr("muT"), eb::comp("T"))),
      150.0));
  spec.components.push_back(
      ode("Tstar", eb::sub(infection, eb::mul(eb::attr("muTstar"), eb::comp("Tstar"))), 1.0));
  spec.components.push_back(ode(
      "VI",
      eb::sub(eb::mul(eb::mul(eb::mul(eb::attr("omega"), eb::attr("muTstar")),
                              eb::attr("piProd")),
                      eb::comp("Tstar")),
              eb::mul(eb::attr("muV"), eb::comp("VI"))),
      10.0));
  spec.components.push_back(ode(
      "VNI",
      eb::sub(eb::mul(eb::mul(eb::mul(eb::sub(eb::constant(1.0), eb::attr("omega")),
                                      eb::attr("muTstar")),
                              eb::attr("piProd")),
                      eb::comp("Tstar")),
              eb::mul(eb::attr("muV"), eb::comp("VNI"))),
      10.0));

  ComponentSpec death;
  death.name = "D";
  death.kind = ComponentKind::Counting;
  death.drift = eb::mul(
      eb::mul(eb::ind(Cmp::Eq, eb::comp("D"), eb::constant(0.0)), eb::attr("hazardBase")),
      eb::exp(eb::add(eb::add(eb::mul(eb::attr("betaQ"), eb::comp("Q")),
                              eb::mul(eb::attr("betaT"), eb::comp("T"))),
                      eb::mul(eb::attr("betaZ"), eb::attr("Z")))));
  death.init = InitValue::fixed(0.0);
  spec.components.push_back(std::move(death));
  return spec;
}

TrajectoryBundle observed_markers(const TrajectoryBundle& bundle, bool log10Scale) {
  for (const char* needed : {"Q", "T", "Tstar", "VI", "VNI"})
    if (bundle.channel_index(needed) < 0)
      throw UnknownNameError(std::string("bundle is missing component '") + needed + "'");

  TrajectoryBundle out = bundle;
  const int q = out.channel_index("Q"), t = out.channel_index("T"),
            ts = out.channel_index("Tstar"), vi = out.channel_index("VI"),
            vni = out.channel_index("VNI");
  out.channels.push_back("VL");
  out.channels.push_back("CD4");
  for (auto& rep : out.replicates) {
    const Eigen::Index rows = rep.states.rows();
    Eigen::MatrixXd extended(rows, rep.states.cols() + 2);
    extended.leftCols(rep.states.cols()) = rep.states;
    for (Eigen::Index i = 0; i < rows; ++i) {
      double vl = rep.states(i, vi) + rep.states(i, vni);
      if (log10Scale) vl = std::log10(std::max(vl, 1e-300));
      extended(i, rep.states.cols()) = vl;
      extended(i, rep.states.cols() + 1) =
          rep.states(i, q) + rep.states(i, t) + rep.states(i, ts);
    }
    rep.states = std::move(extended);
  }
  return out;
}

InfluenceGraph influence_chain_demo() {
  return InfluenceGraph::make({"I", "T", "A", "D"},
                              {{"I", "T"}, {"T", "A"}, {"A", "D"}});
}

}  // namespace dynograph
