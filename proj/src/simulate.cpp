#include "dynograph/simulate.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "dynograph/graph.hpp"
#include "dynograph/rng.hpp"
#include "dynograph/serialize.hpp"
#include "dynograph/validate.hpp"

namespace dynograph {

namespace {

// Stream purposes keep attribute draws, state noise and observation noise on
// disjoint counter ranges.
constexpr std::uint64_t kAttrStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kObsStream = 3;

double gauss_at(std::uint64_t seed, std::uint64_t purpose, std::uint64_t r,
                std::uint64_t idx, std::uint64_t step) {
  return rng::gauss(rng::key(seed, {purpose, r, idx, step, 0}),
                    rng::key(seed, {purpose, r, idx, step, 1}));
}

struct CompiledComponent {
  ComponentKind kind;
  CompiledExpr drift;
  CompiledExpr sigma;  // diffusion only
};

// Square root of diag(sd) * corr * diag(sd) over the random attributes,
// via eigendecomposition so semidefinite matrices are accepted.
Eigen::MatrixXd correlation_transform(const SystemSpec& spec) {
  std::vector<double> sds;
  for (const auto& a : spec.attributes)
    if (a.random) sds.push_back(a.sd);
  const Eigen::Index n = static_cast<Eigen::Index>(sds.size());
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      cov(i, j) = (*spec.attributeCorr)(i, j) * sds[static_cast<size_t>(i)] *
                  sds[static_cast<size_t>(j)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd lambda = es.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda(i) < -1e-9 * scale)
      throw std::invalid_argument("attribute correlation matrix is not positive semidefinite");
    lambda(i) = std::max(lambda(i), 0.0);
  }
  return es.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
}

}  // namespace

int TrajectoryBundle::channel_index(const std::string& name) const {
  for (size_t i = 0; i < channels.size(); ++i)
    if (channels[i] == name) return static_cast<int>(i);
  return -1;
}

std::size_t TrajectoryBundle::grid_index_at(double time) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < timeGrid.size(); ++i) {
    if (timeGrid[i] <= time + 1e-12)
      idx = i;
    else
      break;
  }
  return idx;
}

TrajectoryBundle simulate(const SystemSpec& spec, const SimConfig& cfg, int threads) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(cfg.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (cfg.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (cfg.horizon / cfg.dt > 1e8) throw std::invalid_argument("horizon/dt exceeds 1e8");
  {
    ValidationReport report = validate(spec);
    if (!report.ok())
      throw std::invalid_argument("spec does not validate: " +
                                  report.violations.front().message);
  }

  const long nSteps = static_cast<long>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
  const size_t m = spec.components.size();
  const size_t nAttrs = spec.attributes.size();
  const size_t nInputs = spec.inputs.size();
  const double dt = cfg.dt;
  const double sqrtDt = std::sqrt(dt);

  NameIndex names = spec.name_index();
  std::vector<CompiledComponent> comps(m);
  std::vector<size_t> odeSlots;
  for (size_t c = 0; c < m; ++c) {
    comps[c].kind = spec.components[c].kind;
    comps[c].drift = CompiledExpr::compile(spec.components[c].drift, names);
    if (comps[c].kind == ComponentKind::Diffusion)
      comps[c].sigma = CompiledExpr::compile(spec.components[c].diffusionCoeff, names);
    if (comps[c].kind == ComponentKind::DeterministicOde) odeSlots.push_back(c);
  }

  const bool correlated = spec.attributeCorr.has_value();
  Eigen::MatrixXd corrTransform;
  std::vector<size_t> randomAttrSlots;
  if (correlated) {
    corrTransform = correlation_transform(spec);
    for (size_t a = 0; a < nAttrs; ++a)
      if (spec.attributes[a].random) randomAttrSlots.push_back(a);
  }

  TrajectoryBundle bundle;
  bundle.timeGrid.resize(static_cast<size_t>(nSteps) + 1);
  for (long i = 0; i <= nSteps; ++i)
    bundle.timeGrid[static_cast<size_t>(i)] = static_cast<double>(i) * dt;
  for (const auto& c : spec.components) bundle.channels.push_back(c.name);
  bundle.replicates.resize(static_cast<size_t>(cfg.replicates));

  struct WorkerResult {
    long negClamps = 0;
    long coarse = 0;
  };
  std::vector<WorkerResult> perReplicate(static_cast<size_t>(cfg.replicates));
  std::vector<std::unique_ptr<SimulationError>> errors(static_cast<size_t>(cfg.replicates));

  auto run_replicate = [&](int r) {
    const auto ur = static_cast<std::uint64_t>(r);
    ReplicatePath path;

    // attribute draws happen once per replicate
    std::vector<double> attrs(nAttrs);
    for (size_t a = 0; a < nAttrs; ++a) attrs[a] = spec.attributes[a].mean;
    if (correlated) {
      const Eigen::Index nr = corrTransform.rows();
      Eigen::VectorXd xi(nr);
      for (Eigen::Index i = 0; i < nr; ++i)
        xi(i) = gauss_at(cfg.masterSeed, kAttrStream, ur,
                         static_cast<std::uint64_t>(randomAttrSlots[static_cast<size_t>(i)]), 0);
      Eigen::VectorXd shift = corrTransform * xi;
      for (Eigen::Index i = 0; i < nr; ++i)
        attrs[randomAttrSlots[static_cast<size_t>(i)]] += shift(i);
    } else {
      for (size_t a = 0; a < nAttrs; ++a)
        if (spec.attributes[a].random)
          attrs[a] += spec.attributes[a].sd *
                      gauss_at(cfg.masterSeed, kAttrStream, ur, a, 0);
    }
    for (size_t a = 0; a < nAttrs; ++a)
      path.attributeDraws.emplace_back(spec.attributes[a].name, attrs[a]);

    path.states.resize(nSteps + 1, static_cast<Eigen::Index>(m));
    for (size_t c = 0; c < m; ++c) {
      const InitValue& init = spec.components[c].init;
      path.states(0, static_cast<Eigen::Index>(c)) =
          init.fromAttr ? attrs[static_cast<size_t>(names.attrs.at(init.attrName))]
                        : init.value;
    }

    std::vector<double> snapshot(m), inputs(nInputs), next(m);
    std::vector<double> odeState(m), k1(m), k2(m), k3(m), k4(m);

    auto eval_inputs = [&](double t, std::vector<double>& dst) {
      for (size_t i = 0; i < nInputs; ++i) dst[i] = spec.inputs[i].left_limit_at(t);
    };

    for (long step = 0; step < nSteps; ++step) {
      const double t = static_cast<double>(step) * dt;
      for (size_t c = 0; c < m; ++c)
        snapshot[c] = path.states(step, static_cast<Eigen::Index>(c));
      eval_inputs(t, inputs);
      next = snapshot;

      try {
        // coupled ODE block first: classical RK4 with non-ODE components
        // frozen at their left limits
        if (!odeSlots.empty()) {
          auto ode_rhs = [&](double tt, const std::vector<double>& state,
                             std::vector<double>& out) {
            std::vector<double> in(nInputs);
            eval_inputs(tt, in);
            for (size_t c : odeSlots)
              out[c] = comps[c].drift.eval(tt, state.data(), attrs.data(), in.data());
          };
          odeState = snapshot;
          ode_rhs(t, odeState, k1);
          for (size_t c : odeSlots) odeState[c] = snapshot[c] + 0.5 * dt * k1[c];
          ode_rhs(t + 0.5 * dt, odeState, k2);
          for (size_t c : odeSlots) odeState[c] = snapshot[c] + 0.5 * dt * k2[c];
          ode_rhs(t + 0.5 * dt, odeState, k3);
          for (size_t c : odeSlots) odeState[c] = snapshot[c] + dt * k3[c];
          ode_rhs(t + dt, odeState, k4);
          for (size_t c : odeSlots)
            next[c] = snapshot[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }

        for (size_t c = 0; c < m; ++c) {
          const auto uc = static_cast<std::uint64_t>(c);
          const auto us = static_cast<std::uint64_t>(step);
          switch (comps[c].kind) {
            case ComponentKind::Diffusion: {
              const double drift =
                  comps[c].drift.eval(t, snapshot.data(), attrs.data(), inputs.data());
              const double sigma =
                  comps[c].sigma.eval(t, snapshot.data(), attrs.data(), inputs.data());
              const double z = gauss_at(cfg.masterSeed, kNoiseStream, ur, uc, us);
              next[c] = snapshot[c] + drift * dt + sigma * sqrtDt * z;
              break;
            }
            case ComponentKind::Counting: {
              double intensity =
                  comps[c].drift.eval(t, snapshot.data(), attrs.data(), inputs.data());
              if (intensity < 0.0) {
                intensity = 0.0;
                ++perReplicate[static_cast<size_t>(r)].negClamps;
              }
              if (intensity * dt > 0.1) ++perReplicate[static_cast<size_t>(r)].coarse;
              const double p = std::min(intensity * dt, 1.0);
              const double u = rng::uniform01(
                  rng::key(cfg.masterSeed, {kNoiseStream, ur, uc, us, 0}));
              next[c] = snapshot[c] + (u < p ? 1.0 : 0.0);
              break;
            }
            case ComponentKind::DeterministicOde:
              break;  // already advanced
          }
        }
      } catch (const EvalError& e) {
        throw SimulationError(std::string("evaluation failed: ") + e.what(), r, step,
                              "(drift)");
      }

      for (size_t c = 0; c < m; ++c) {
        if (!std::isfinite(next[c]))
          throw SimulationError("non-finite state", r, step + 1, spec.components[c].name);
        path.states(step + 1, static_cast<Eigen::Index>(c)) = next[c];
      }
    }
    bundle.replicates[static_cast<size_t>(r)] = std::move(path);
  };

  int nThreads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (nThreads < 1) nThreads = 1;
  nThreads = std::min(nThreads, cfg.replicates);

  if (nThreads == 1) {
    for (int r = 0; r < cfg.replicates; ++r) run_replicate(r);
  } else {
    std::atomic<int> counter{0};
    auto worker = [&]() {
      while (true) {
        int r = counter.fetch_add(1);
        if (r >= cfg.replicates) return;
        try {
          run_replicate(r);
        } catch (const SimulationError& e) {
          errors[static_cast<size_t>(r)] = std::make_unique<SimulationError>(e);
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nThreads));
    for (int i = 0; i < nThreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) throw *e;  // lowest replicate index wins, deterministically
  }

  for (const auto& w : perReplicate) {
    bundle.negativeIntensityClamps += w.negClamps;
    bundle.coarseIntensitySteps += w.coarse;
  }
  return bundle;
}

std::vector<std::vector<ObservationRecord>> observe(
    const TrajectoryBundle& bundle, const std::string& channel,
    const std::vector<double>& times, double errorSd, std::optional<double> etaDet,
    std::uint64_t seed) {
  const int ch = bundle.channel_index(channel);
  if (ch < 0) throw UnknownNameError("unknown channel '" + channel + "'");
  if (errorSd < 0.0) throw std::invalid_argument("errorSd must be >= 0");
  const double horizon = bundle.timeGrid.empty() ? 0.0 : bundle.timeGrid.back();
  for (double t : times)
    if (t < 0.0 || t > horizon + 1e-12)
      throw std::invalid_argument("observation time " + format_real(t) +
                                  " outside [0, horizon]");

  std::vector<std::vector<ObservationRecord>> out(bundle.replicates.size());
  for (size_t r = 0; r < bundle.replicates.size(); ++r) {
    out[r].reserve(times.size());
    for (size_t ti = 0; ti < times.size(); ++ti) {
      const std::size_t gi = bundle.grid_index_at(times[ti]);
      const double state =
          bundle.replicates[r].states(static_cast<Eigen::Index>(gi), ch);
      const double noise =
          errorSd == 0.0
              ? 0.0
              : errorSd * gauss_at(seed, kObsStream, static_cast<std::uint64_t>(r),
                                   static_cast<std::uint64_t>(ch),
                                   static_cast<std::uint64_t>(ti));
      const double raw = state + noise;
      ObservationRecord rec;
      rec.channel = channel;
      rec.time = times[ti];
      rec.errorSd = errorSd;
      rec.detectionLimit = etaDet;
      rec.detected = (!etaDet || raw > *etaDet) ? 1 : 0;
      if (rec.detected) rec.value = raw;
      out[r].push_back(std::move(rec));
    }
  }
  return out;
}

Moments empirical_moments(const TrajectoryBundle& bundle,
                          const std::vector<std::string>& components, double time) {
  const size_t n = bundle.replicates.size();
  if (n < 2) throw std::invalid_argument("empirical_moments needs at least 2 replicates");

  std::size_t gi = bundle.grid_index_at(time);
  if (std::abs(bundle.timeGrid[gi] - time) > 1e-9 * std::max(1.0, std::abs(time)))
    throw std::invalid_argument("time " + format_real(time) + " is not on the grid");

  std::vector<int> cols;
  for (const auto& name : components) {
    int c = bundle.channel_index(name);
    if (c < 0) throw UnknownNameError("unknown channel '" + name + "'");
    cols.push_back(c);
  }
  const Eigen::Index d = static_cast<Eigen::Index>(cols.size());

  Eigen::MatrixXd samples(static_cast<Eigen::Index>(n), d);
  for (size_t r = 0; r < n; ++r)
    for (Eigen::Index j = 0; j < d; ++j)
      samples(static_cast<Eigen::Index>(r), j) =
          bundle.replicates[r].states(static_cast<Eigen::Index>(gi), cols[static_cast<size_t>(j)]);

  Moments mom;
  mom.mean = samples.colwise().mean();
  Eigen::MatrixXd centered = samples.rowwise() - mom.mean.transpose();
  mom.covariance = centered.transpose() * centered / static_cast<double>(n - 1);
  mom.standardError =
      (mom.covariance.diagonal() / static_cast<double>(n)).cwiseMax(0.0).cwiseSqrt();
  return mom;
}

Lemma4Report lemma4_mc_check(const SystemSpec& spec, const std::string& j,
                             const std::string& k, const SimConfig& cfg, double time,
                             int threads) {
  const ComponentSpec* cj = spec.find_component(j);
  const ComponentSpec* ck = spec.find_component(k);
  if (!cj || !ck) throw UnknownNameError("unknown component in lemma4_mc_check");
  if (cj->kind != ComponentKind::Diffusion || ck->kind != ComponentKind::Diffusion)
    throw std::invalid_argument("lemma4_mc_check expects diffusion components");

  // Condition on the attributes by fixing every random attribute at its mean
  // (a single stratum).
  SystemSpec fixed = spec;
  bool hadRandom = false;
  for (auto& a : fixed.attributes)
    if (a.random) {
      a.random = false;
      a.sd = 0.0;
      hadRandom = true;
    }
  fixed.attributeCorr.reset();

  Lemma4Report report;
  report.expectedIndependent = dynamical_independence(derive_graph(fixed), j, k).holds;

  TrajectoryBundle bundle = simulate(fixed, cfg, threads);
  Moments mom = empirical_moments(bundle, {j, k}, time);
  const double v0 = mom.covariance(0, 0);
  const double v1 = mom.covariance(1, 1);
  if (v0 <= 0.0 || v1 <= 0.0) {
    report.corr = 0.0;
    report.note = "degenerate: a component has zero variance";
  } else {
    report.corr = mom.covariance(0, 1) / std::sqrt(v0 * v1);
  }
  const double n = static_cast<double>(cfg.replicates);
  report.se = (1.0 - report.corr * report.corr) / std::sqrt(n);
  report.consistent = report.expectedIndependent ? std::abs(report.corr) <= 3.0 * report.se
                                                 : std::abs(report.corr) > 3.0 * report.se;
  if (hadRandom)
    report.note += std::string(report.note.empty() ? "" : "; ") +
                   "random attributes fixed at their means";
  return report;
}

void write_trajectory_csv(const TrajectoryBundle& bundle, std::ostream& out) {
  out << "replicate,time";
  for (const auto& c : bundle.channels) out << ',' << c;
  out << '\n';
  for (size_t r = 0; r < bundle.replicates.size(); ++r) {
    const auto& states = bundle.replicates[r].states;
    for (size_t i = 0; i < bundle.timeGrid.size(); ++i) {
      out << r << ',' << format_real_17(bundle.timeGrid[i]);
      for (Eigen::Index c = 0; c < states.cols(); ++c)
        out << ',' << format_real_17(states(static_cast<Eigen::Index>(i), c));
      out << '\n';
    }
  }
}

void write_observations_csv(const std::vector<std::vector<ObservationRecord>>& records,
                            std::ostream& out) {
  out << "replicate,channel,time,detected,value\n";
  for (size_t r = 0; r < records.size(); ++r) {
    for (const auto& rec : records[r]) {
      out << r << ',' << rec.channel << ',' << format_real_17(rec.time) << ','
          << rec.detected << ',';
      if (rec.value) out << format_real_17(*rec.value);
      out << '\n';
    }
  }
}

}  // namespace dynograph
