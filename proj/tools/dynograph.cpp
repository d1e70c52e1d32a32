#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynograph/graph.hpp"
#include "dynograph/hiv.hpp"
#include "dynograph/kalman.hpp"
#include "dynograph/parser.hpp"
#include "dynograph/rng.hpp"
#include "dynograph/serialize.hpp"
#include "dynograph/simulate.hpp"
#include "dynograph/validate.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

// exit codes: 0 success, 1 validation failure, 2 query usage error,
// 3 runtime simulation failure
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitSimulation = 3;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = UINT64_C(0xcbf29ce484222325);
  for (unsigned char b : bytes) {
    h ^= b;
    h *= UINT64_C(0x100000001b3);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Manifest {
  std::vector<std::string> command;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, hash
  std::optional<std::uint64_t> masterSeed;
  int threads = 1;
  std::string startedAt;

  void add_input(const std::string& path, const std::string& contents) {
    inputs.emplace_back(path, "fnv1a64:" + hex64(fnv1a64(contents)));
  }

  void write(const std::string& primaryOutput) const {
    nlohmann::ordered_json j;
    j["tool"] = "dynograph";
    j["version"] = kVersion;
    j["command"] = command;
    j["inputs"] = nlohmann::ordered_json::object();
    for (const auto& [path, hash] : inputs) j["inputs"][path] = hash;
    if (masterSeed)
      j["masterSeed"] = *masterSeed;
    else
      j["masterSeed"] = nullptr;
    j["threads"] = threads;
    j["startedAt"] = startedAt;
    j["finishedAt"] = iso8601_now();
    std::ofstream out(primaryOutput + ".manifest.json");
    out << j.dump(2) << '\n';
  }
};

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << contents;
  return out.good();
}

// Parses and validates a model file; on failure prints diagnostics and
// returns nullopt (caller exits with kExitValidation).
std::optional<dynograph::SystemSpec> load_model(const std::string& path, Manifest* manifest) {
  std::string source;
  if (!read_file(path, source)) {
    std::cerr << path << ": cannot read file\n";
    return std::nullopt;
  }
  if (manifest) manifest->add_input(path, source);
  dynograph::ParseResult parsed = dynograph::parse_model(source);
  if (!parsed.ok()) {
    for (const auto& d : parsed.diagnostics)
      std::cout << dynograph::format_diagnostic(d, path) << '\n';
    return std::nullopt;
  }
  dynograph::ValidationReport report = dynograph::validate(*parsed.spec);
  if (!report.ok()) {
    for (const auto& v : report.violations)
      std::cout << path << ": " << v.component << ": " << dynograph::to_string(v.rule)
                << ": " << v.message << '\n';
    return std::nullopt;
  }
  return parsed.spec;
}

int resolve_threads(int cliThreads) {
  if (cliThreads > 0) return cliThreads;
  if (const char* env = std::getenv("DYNOGRAPH_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 0;  // all cores
}

struct ObserveRequest {
  std::string channel;
  std::vector<double> times;
  double errorSd = 0.0;
  std::optional<double> eta;
};

// channel:comma-separated-times:sd:eta, eta may be "none"
std::optional<ObserveRequest> parse_observe(const std::string& arg) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : arg) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 4) return std::nullopt;
  ObserveRequest req;
  req.channel = parts[0];
  std::stringstream times(parts[1]);
  std::string tok;
  while (std::getline(times, tok, ',')) {
    try {
      req.times.push_back(std::stod(tok));
    } catch (...) {
      return std::nullopt;
    }
  }
  if (req.times.empty()) return std::nullopt;
  try {
    req.errorSd = std::stod(parts[2]);
    if (parts[3] != "none") req.eta = std::stod(parts[3]);
  } catch (...) {
    return std::nullopt;
  }
  return req;
}

int cmd_check(const std::string& file) {
  auto spec = load_model(file, nullptr);
  if (!spec) return kExitValidation;
  std::cout << file << ": ok (" << spec->components.size() << " components, "
            << spec->attributes.size() << " attributes, " << spec->inputs.size()
            << " inputs)\n";
  return 0;
}

int cmd_graph(const std::string& file, const std::string& dotPath,
              const std::string& jsonPath, Manifest manifest) {
  auto spec = load_model(file, &manifest);
  if (!spec) return kExitValidation;
  dynograph::InfluenceGraph g = dynograph::derive_graph(*spec);
  const std::string dot = dynograph::export_dot(g);
  if (dotPath.empty() && jsonPath.empty()) {
    std::cout << dot;
    return 0;
  }
  if (!dotPath.empty() && !write_file(dotPath, dot)) {
    std::cerr << dotPath << ": cannot write\n";
    return kExitValidation;
  }
  if (!jsonPath.empty() &&
      !write_file(jsonPath, dynograph::graph_to_json(g).dump(2) + "\n")) {
    std::cerr << jsonPath << ": cannot write\n";
    return kExitValidation;
  }
  manifest.write(!dotPath.empty() ? dotPath : jsonPath);
  return 0;
}

int cmd_query(const std::string& file, const std::string& relation, const std::string& from,
              const std::string& to, const std::vector<std::string>& blockList,
              const std::vector<std::string>& groupList, const std::string& jsonPath) {
  auto spec = load_model(file, nullptr);
  if (!spec) return kExitValidation;
  dynograph::InfluenceGraph g = dynograph::derive_graph(*spec);

  nlohmann::ordered_json j;
  j["relation"] = relation;
  try {
    dynograph::QueryVerdict v;
    if (relation == "noninfluenced") {
      std::set<std::string> group(groupList.begin(), groupList.end());
      if (group.empty()) {
        std::cerr << "noninfluenced needs --group node[,node...]\n";
        return kExitUsage;
      }
      v = dynograph::non_influenced(g, group);
      j["group"] = groupList;
    } else if (relation == "blocks") {
      if (from.empty() || to.empty()) {
        std::cerr << "blocks needs --from and --to\n";
        return kExitUsage;
      }
      std::set<std::string> blockers(blockList.begin(), blockList.end());
      v = dynograph::blocks(g, blockers, from, to);
      j["from"] = from;
      j["to"] = to;
      j["block"] = blockList;
    } else {
      if (from.empty() || to.empty()) {
        std::cerr << "relation '" << relation << "' needs --from and --to\n";
        return kExitUsage;
      }
      j["from"] = from;
      j["to"] = to;
      if (relation == "wcli")
        v = dynograph::wcli(g, from, to);
      else if (relation == "direct")
        v = dynograph::direct_influence(g, from, to);
      else if (relation == "influence")
        v = dynograph::influence(g, from, to);
      else if (relation == "scli-literal")
        v = dynograph::scli_literal(g, from, to);
      else if (relation == "dynindep")
        v = dynograph::dynamical_independence(g, from, to);
      else {
        std::cerr << "unknown relation '" << relation
                  << "' (wcli, direct, influence, scli-literal, blocks, dynindep, "
                     "noninfluenced)\n";
        return kExitUsage;
      }
    }
    j["holds"] = v.holds;
    j["witness"] = v.witness;
    j["note"] = v.note;
  } catch (const dynograph::GraphError& e) {
    std::cerr << "query error: " << e.what() << '\n';
    return kExitUsage;
  }
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!jsonPath.empty() && !write_file(jsonPath, text)) {
    std::cerr << jsonPath << ": cannot write\n";
    return kExitValidation;
  }
  return 0;
}

int cmd_simulate(const std::string& file, double dt, double horizon, int reps,
                 std::uint64_t seed, const std::string& outPath,
                 const std::vector<std::string>& observeArgs, bool deriveMarkers,
                 bool log10Vl, int threads, Manifest manifest) {
  auto spec = load_model(file, &manifest);
  if (!spec) return kExitValidation;

  std::vector<ObserveRequest> requests;
  for (const auto& arg : observeArgs) {
    auto req = parse_observe(arg);
    if (!req) {
      std::cerr << "bad --observe '" << arg << "' (want channel:t1,t2:sd:eta|none)\n";
      return kExitUsage;
    }
    requests.push_back(std::move(*req));
  }

  dynograph::SimConfig cfg;
  cfg.dt = dt;
  cfg.horizon = horizon;
  cfg.replicates = reps;
  cfg.masterSeed = seed;

  try {
    dynograph::TrajectoryBundle bundle = dynograph::simulate(*spec, cfg, threads);
    if (deriveMarkers) bundle = dynograph::observed_markers(bundle, log10Vl);

    std::ostringstream traj;
    dynograph::write_trajectory_csv(bundle, traj);
    if (!write_file(outPath, traj.str())) {
      std::cerr << outPath << ": cannot write\n";
      return kExitValidation;
    }

    if (!requests.empty()) {
      std::vector<std::vector<dynograph::ObservationRecord>> all;
      const std::uint64_t obsSeed = dynograph::rng::key(seed, {0xB5});
      for (const auto& req : requests) {
        auto recs = dynograph::observe(bundle, req.channel, req.times, req.errorSd,
                                       req.eta, obsSeed);
        if (all.empty()) {
          all = std::move(recs);
        } else {
          for (size_t r = 0; r < all.size(); ++r)
            all[r].insert(all[r].end(), recs[r].begin(), recs[r].end());
        }
      }
      std::filesystem::path p(outPath);
      const std::string obsPath =
          (p.parent_path() / (p.stem().string() + "_obs" + p.extension().string()))
              .string();
      std::ostringstream obs;
      dynograph::write_observations_csv(all, obs);
      if (!write_file(obsPath, obs.str())) {
        std::cerr << obsPath << ": cannot write\n";
        return kExitValidation;
      }
    }

    if (bundle.negativeIntensityClamps > 0)
      std::cerr << "warning: clamped negative intensity at " << bundle.negativeIntensityClamps
                << " steps\n";
    if (bundle.coarseIntensitySteps > 0)
      std::cerr << "warning: intensity*dt exceeded 0.1 at " << bundle.coarseIntensitySteps
                << " steps; consider a smaller dt\n";
  } catch (const dynograph::SimulationError& e) {
    std::cerr << "simulation failed: " << e.what() << " (replicate " << e.replicate
              << ", step " << e.step << ", component " << e.component << ")\n";
    return kExitSimulation;
  } catch (const dynograph::UnknownNameError& e) {
    std::cerr << "observation error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "simulation setup error: " << e.what() << '\n';
    return kExitUsage;
  }
  manifest.write(outPath);
  return 0;
}

int cmd_faithfulness(std::vector<double> coeffs, const std::string& coeffsFile,
                     double horizon, double dt, bool constructUnfaithful,
                     const std::string& jsonPath, const std::string& rcsvPath,
                     const std::string& coefcsvPath, Manifest manifest) {
  if (!coeffsFile.empty()) {
    std::string text;
    if (!read_file(coeffsFile, text)) {
      std::cerr << coeffsFile << ": cannot read\n";
      return kExitUsage;
    }
    manifest.add_input(coeffsFile, text);
    coeffs.clear();
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream in(text);
    double v;
    while (in >> v) coeffs.push_back(v);
  }
  if (coeffs.size() != 9) {
    std::cerr << "need 9 coefficients a1,b1,c1,a2,b2,c2,a3,b3,c3 (got " << coeffs.size()
              << ")\n";
    return kExitUsage;
  }

  dynograph::LinearSystem3 sys;
  sys.a1 = coeffs[0];
  sys.b1 = coeffs[1];
  sys.c1 = coeffs[2];
  sys.a2 = coeffs[3];
  sys.b2 = coeffs[4];
  sys.c2 = coeffs[5];
  sys.a3 = coeffs[6];
  sys.b3 = coeffs[7];
  sys.c3 = coeffs[8];

  nlohmann::ordered_json j;
  dynograph::RiccatiSolution ric;
  try {
    if (constructUnfaithful) {
      dynograph::UnfaithfulConstruction built = dynograph::construct_unfaithful(
          sys.c1, sys.c2, sys.c3, sys.b2, horizon, dt);
      dynograph::FaithfulnessVerdict v =
          dynograph::faithfulness_verdict(built.system, horizon, dt);
      j = dynograph::verdict_to_json(v);
      j["constructed"] = true;
      j["maxDx2Coefficient"] = built.maxDx2Coefficient;
      j["identityResidual"] = built.identityResidual;
      j["degenerate"] = built.degenerate;
      if (!built.note.empty()) j["note"] = built.note;
      ric = std::move(built.riccati);
      if (!coefcsvPath.empty()) {
        std::ostringstream csv;
        dynograph::write_marginal_coeff_csv(
            dynograph::marginal_decomposition(built.system, horizon, dt), csv);
        if (!write_file(coefcsvPath, csv.str())) {
          std::cerr << coefcsvPath << ": cannot write\n";
          return kExitValidation;
        }
      }
    } else {
      dynograph::FaithfulnessVerdict v = dynograph::faithfulness_verdict(sys, horizon, dt);
      j = dynograph::verdict_to_json(v);
      j["constructed"] = false;
      ric = dynograph::riccati_solve(sys, horizon, dt);
      if (!coefcsvPath.empty()) {
        std::ostringstream csv;
        dynograph::write_marginal_coeff_csv(
            dynograph::marginal_decomposition(sys, horizon, dt), csv);
        if (!write_file(coefcsvPath, csv.str())) {
          std::cerr << coefcsvPath << ": cannot write\n";
          return kExitValidation;
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "faithfulness analysis failed: " << e.what() << '\n';
    return kExitSimulation;
  }

  if (ric.steadyState) j["riccatiSteadyState"] = *ric.steadyState;
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!jsonPath.empty() && !write_file(jsonPath, text)) {
    std::cerr << jsonPath << ": cannot write\n";
    return kExitValidation;
  }
  if (!rcsvPath.empty()) {
    std::ostringstream csv;
    dynograph::write_riccati_csv(ric, csv);
    if (!write_file(rcsvPath, csv.str())) {
      std::cerr << rcsvPath << ": cannot write\n";
      return kExitValidation;
    }
  }
  if (!jsonPath.empty())
    manifest.write(jsonPath);
  else if (!rcsvPath.empty())
    manifest.write(rcsvPath);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"influence graphs, simulation and marginalization analysis for "
               "declared dynamical systems"};
  app.require_subcommand(1);

  Manifest manifest;
  manifest.startedAt = iso8601_now();
  for (int i = 0; i < argc; ++i) manifest.command.emplace_back(argv[i]);

  // check
  auto* check = app.add_subcommand("check", "parse a model file and validate A1/A2");
  std::string checkFile;
  check->add_option("file", checkFile, "model file (.dym)")->required();

  // graph
  auto* graph = app.add_subcommand("graph", "derive the influence graph");
  std::string graphFile, dotPath, graphJsonPath;
  graph->add_option("file", graphFile, "model file (.dym)")->required();
  graph->add_option("--dot", dotPath, "write DOT here");
  graph->add_option("--json", graphJsonPath, "write the JSON graph dump here");

  // query
  auto* query = app.add_subcommand("query", "ask a graph-level influence question");
  std::string queryFile, relation, from, to, queryJsonPath;
  std::vector<std::string> blockList, groupList;
  query->add_option("file", queryFile, "model file (.dym)")->required();
  query->add_option("--relation", relation,
                    "wcli|direct|influence|scli-literal|blocks|dynindep|noninfluenced")
      ->required();
  query->add_option("--from", from, "source node");
  query->add_option("--to", to, "target node");
  query->add_option("--block", blockList, "blocker nodes (blocks)")->delimiter(',');
  query->add_option("--group", groupList, "node group (noninfluenced)")->delimiter(',');
  query->add_option("--json", queryJsonPath, "also write the verdict here");

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate trajectories and observations");
  std::string simFile, outPath;
  double dt = 1e-3, horizon = 1.0;
  int reps = 1, threads = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> observeArgs;
  bool deriveMarkers = false, log10Vl = false;
  sim->add_option("file", simFile, "model file (.dym)")->required();
  sim->add_option("--dt", dt, "time step")->required();
  sim->add_option("--horizon", horizon, "simulation horizon")->required();
  sim->add_option("--reps", reps, "number of replicates")->required();
  sim->add_option("--seed", seed, "master seed (required for reproducibility)")->required();
  sim->add_option("--out", outPath, "trajectory CSV path")->required();
  sim->add_option("--observe", observeArgs,
                  "observation scheme channel:t1,t2,...:sd:eta (eta or 'none'); repeatable");
  sim->add_flag("--derive-markers", deriveMarkers, "append VL and CD4 marker channels");
  sim->add_flag("--log10-vl", log10Vl, "log10-transform the VL channel");
  sim->add_option("--threads", threads, "worker threads (default: DYNOGRAPH_THREADS or all)");

  // faithfulness
  auto* faith = app.add_subcommand("faithfulness",
                                   "Riccati marginalization and faithfulness verdict");
  std::vector<double> coeffs;
  std::string coeffsFile, faithJsonPath, rcsvPath, coefcsvPath;
  double fHorizon = 10.0, fDt = 1e-3;
  bool constructUnfaithful = false;
  faith->add_option("--coeffs", coeffs, "a1,b1,c1,a2,b2,c2,a3,b3,c3")->delimiter(',');
  faith->add_option("--coeffs-file", coeffsFile, "file with the 9 coefficients");
  faith->add_option("--horizon", fHorizon, "analysis horizon");
  faith->add_option("--dt", fDt, "integration step");
  faith->add_flag("--construct-unfaithful", constructUnfaithful,
                  "build the time-varying counterexample from c1,c2,c3,b2");
  faith->add_option("--json", faithJsonPath, "write the verdict JSON here");
  faith->add_option("--rcsv", rcsvPath, "write the (t, R_t) trace here");
  faith->add_option("--coefcsv", coefcsvPath, "write marginal coefficient traces here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check(checkFile);
    if (graph->parsed()) return cmd_graph(graphFile, dotPath, graphJsonPath, manifest);
    if (query->parsed())
      return cmd_query(queryFile, relation, from, to, blockList, groupList, queryJsonPath);
    if (sim->parsed()) {
      manifest.masterSeed = seed;
      manifest.threads = resolve_threads(threads);
      return cmd_simulate(simFile, dt, horizon, reps, seed, outPath, observeArgs,
                          deriveMarkers, log10Vl, resolve_threads(threads), manifest);
    }
    if (faith->parsed())
      return cmd_faithfulness(coeffs, coeffsFile, fHorizon, fDt, constructUnfaithful,
                              faithJsonPath, rcsvPath, coefcsvPath, manifest);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
