// modstruct: optimize, enumerate, eval, simulate, compare.
//
// Exit codes: 0 ok, 1 input error, 2 not converged, 3 rank-deficient,
// 4 diverged.

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "modstruct/config.hpp"

#ifndef MODSTRUCT_VERSION
#define MODSTRUCT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace modstruct;

namespace {

enum Exit { kOk = 0, kInput = 1, kNotConverged = 2, kRankDeficient = 3, kDiverged = 4 };

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::RankDeficient:
      return kRankDeficient;
    case ErrorCode::Diverged:
      return kDiverged;
    case ErrorCode::Stalled:
      return kNotConverged;
    default:
      return kInput;
  }
}

std::string sha256_file(const std::string& path) {
  const std::string data = detail::slurp(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

fs::path output_dir(const Common& c, const std::string& command, std::uint64_t seed) {
  fs::path dir;
  if (!c.out.empty()) {
    dir = c.out;
  } else {
    const char* root = std::getenv("MODSTRUCT_OUT_ROOT");
    dir = fs::path(root && *root ? root : "runs") / (command + "-seed" + std::to_string(seed));
  }
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  MODSTRUCT_REQUIRE(out.good(), ErrorCode::InvalidInput, "cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed), started_(utc_now()) {}

  void add_input(const std::string& path) {
    inputs_.push_back({{"path", path}, {"sha256", sha256_file(path)}});
  }

  void write(const fs::path& dir, const json& config, int n, int exit_code) const {
    json j;
    j["command"] = command_;
    j["version"] = MODSTRUCT_VERSION;
    j["seed"] = seed_;
    j["n"] = n;
    j["config"] = config;
    j["inputs"] = inputs_;
    j["started"] = started_;
    j["finished"] = utc_now();
    j["exit_code"] = exit_code;
    write_json(dir / "manifest.json", j);
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  std::string started_;
  json inputs_ = json::array();
};

json aim_json(const Aim& aim) {
  json rows = json::array();
  for (const auto& r : aim.rows()) rows.push_back(json::array({r[0], r[1], r[2], r[3]}));
  return rows;
}

Aim aim_from_json(const json& j) {
  Aim aim(static_cast<int>(j.size()));
  for (int i = 1; i <= aim.size(); ++i) {
    for (int p = 0; p < kFaces; ++p) aim.at(i, p) = j.at(static_cast<std::size_t>(i - 1)).at(static_cast<std::size_t>(p)).get<int>();
  }
  return aim;
}

// ---- optimize ---------------------------------------------------------------

int cmd_optimize(const Common& common) {
  RunConfig cfg = load_run_config(common.config);
  if (common.seed) cfg.seed = cfg.ga.seed = *common.seed;
  cfg.ga.threads = common.threads;
  Manifest manifest("optimize", cfg.seed);
  manifest.add_input(common.config);
  for (const auto& f : cfg.input_files) manifest.add_input(f);
  const fs::path dir = output_dir(common, "optimize", cfg.seed);

  const EvalContext ctx{cfg.roster, cfg.edge_length, cfg.fitness};
  const auto t0 = std::chrono::steady_clock::now();
  const GaResult res = evolve(ctx, cfg.ga);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ofstream trace(dir / "trace.csv", std::ios::binary);
  std::ofstream timing(dir / "timing.csv", std::ios::binary);
  trace << "gen,best_fitness,mean_fitness,retries\n";
  timing << "gen,millis\n";
  for (const auto& g : res.trace.generations) {
    trace << g.gen << ',' << format_double(g.best_fitness) << ',' << format_double(g.mean_fitness) << ',' << g.retries << '\n';
    timing << g.gen << ',' << format_double(g.millis) << '\n';
  }
  write_text(dir / "best.aim", aim_to_string(res.best.aim, cfg.edge_length));

  json report = evaluation_report(res.best.aim, cfg.roster, cfg.edge_length, cfg.fitness);
  report["generations"] = static_cast<int>(res.trace.generations.size()) - 1;
  report["converged"] = res.trace.converged;
  report["seconds"] = seconds;
  report["aim"] = aim_json(res.best.aim);
  write_json(dir / "report.json", report);

  const int code = res.trace.converged ? kOk : kNotConverged;
  manifest.write(dir, cfg.snapshot(), static_cast<int>(cfg.roster.size()), code);
  std::cout << "best fitness " << format_double(res.best.fitness.value) << " after " << report["generations"].get<int>()
            << " generations" << (res.trace.converged ? " (converged)" : " (generation budget exhausted)") << "\n"
            << "wrote " << dir.string() << "\n";
  return code;
}

// ---- enumerate --------------------------------------------------------------

int cmd_enumerate(const Common& common) {
  RunConfig cfg = load_run_config(common.config);
  if (common.seed) cfg.seed = cfg.ga.seed = *common.seed;
  Manifest manifest("enumerate", cfg.seed);
  manifest.add_input(common.config);
  for (const auto& f : cfg.input_files) manifest.add_input(f);
  const int n = static_cast<int>(cfg.roster.size());
  MODSTRUCT_REQUIRE(n <= cfg.n_cap, ErrorCode::TooLarge,
                    "n = " + std::to_string(n) + " exceeds the enumeration cap n_cap = " + std::to_string(cfg.n_cap));
  const fs::path dir = output_dir(common, "enumerate", cfg.seed);

  const EnumerationResult res = enumerate_all(cfg.roster, cfg.edge_length, cfg.fitness, cfg.n_cap, common.threads);

  std::ofstream speed(dir / "speed.csv", std::ios::binary);
  speed << "n,count_raw,count_canonical,best_fitness,seconds\n"
        << n << ',' << res.count_raw << ',' << res.count_canonical << ',' << format_double(res.best.fitness.value) << ','
        << format_double(res.wall_time) << '\n';
  write_text(dir / "best.aim", aim_to_string(res.best.aim, cfg.edge_length));

  json report = evaluation_report(res.best.aim, cfg.roster, cfg.edge_length, cfg.fitness);
  report["count_raw"] = res.count_raw;
  report["count_canonical"] = res.count_canonical;
  report["shapes"] = res.shapes;
  report["seconds"] = res.wall_time;
  report["aim"] = aim_json(res.best.aim);
  write_json(dir / "report.json", report);

  manifest.write(dir, cfg.snapshot(), n, kOk);
  std::cout << res.count_canonical << " canonical classes (" << res.count_raw << " placements), best fitness "
            << format_double(res.best.fitness.value) << "\nwrote " << dir.string() << "\n";
  return kOk;
}

// ---- eval -------------------------------------------------------------------

int cmd_eval(const std::string& aim_path, const std::string& roster_path, const std::string& config_path) {
  const AimFile file = read_aim_file(aim_path);
  const Roster roster = read_roster_file(roster_path);
  FitnessParams params;
  if (!config_path.empty()) {
    const json j = parse_json_file(config_path);
    const json& c = j.contains("config") && j.contains("command") ? j.at("config") : j;
    if (c.contains("fitness")) params = fitness_params_from_json(c.at("fitness"));
  }
  const auto report = validate_aim(file.aim);
  MODSTRUCT_REQUIRE(report.ok(), ErrorCode::InvalidAim, aim_path + ": " + report.summary());
  MODSTRUCT_REQUIRE(file.aim.size() == static_cast<int>(roster.size()), ErrorCode::InvalidInput,
                    aim_path + " has " + std::to_string(file.aim.size()) + " modules but " + roster_path + " has " +
                        std::to_string(roster.size()));
  std::cout << evaluation_report(file.aim, roster, file.edge_length, params).dump(2) << "\n";
  return kOk;
}

// ---- simulate ---------------------------------------------------------------

int cmd_simulate(const Common& common, const std::string& aim_path, const std::string& roster_path) {
  Manifest manifest("simulate", 0);
  std::vector<std::string> inputs{common.config};
  const SimConfig sim = load_sim_config(common.config, &inputs);

  // A simulate manifest carries its own structure and roster.
  const json raw = parse_json_file(common.config);
  AimFile structure;
  Roster roster;
  if (raw.contains("command") && raw.contains("config") && raw.at("config").contains("aim")) {
    const json& c = raw.at("config");
    structure.aim = aim_from_json(c.at("aim"));
    structure.edge_length = c.at("edge_length").get<double>();
    roster = roster_from_json(c.at("roster"));
  } else {
    MODSTRUCT_REQUIRE(!aim_path.empty() && !roster_path.empty(), ErrorCode::InvalidInput,
                      "simulate needs --aim and --roster (or a simulate manifest as --config)");
    structure = read_aim_file(aim_path);
    roster = read_roster_file(roster_path);
    inputs.push_back(aim_path);
    inputs.push_back(roster_path);
  }
  for (const auto& f : inputs) manifest.add_input(f);
  const auto check = validate_aim(structure.aim);
  MODSTRUCT_REQUIRE(check.ok(), ErrorCode::InvalidAim, "structure: " + check.summary());
  MODSTRUCT_REQUIRE(structure.aim.size() == static_cast<int>(roster.size()), ErrorCode::InvalidInput,
                    "structure and roster sizes differ");

  const json snapshot = {{"aim", aim_json(structure.aim)},
                         {"edge_length", structure.edge_length},
                         {"roster", roster_json(roster)},
                         {"sim", sim_config_json(sim)}};
  const fs::path dir = output_dir(common, "simulate", common.seed.value_or(0));
  const int n = structure.aim.size();

  const auto layout = pos_tree_search(structure.aim, roster, structure.edge_length);
  int code = kOk;
  try {
    const SimResult res = track(layout, sim);
    std::ofstream ts(dir / "timeseries.csv", std::ios::binary);
    ts << "t,x,y,z,roll,pitch,yaw,x_ref,y_ref,z_ref,roll_ref,pitch_ref,yaw_ref,thrust_sq\n";
    for (const auto& s : res.samples) {
      ts << format_double(s.t);
      for (const auto* v : {&s.position, &s.attitude, &s.position_ref, &s.attitude_ref}) {
        for (int k = 0; k < 3; ++k) ts << ',' << format_double((*v)[k]);
      }
      ts << ',' << format_double(s.thrust_sq) << '\n';
    }
    const double fit = fitness(layout, FitnessParams{}).value;
    write_json(dir / "summary.json", {{"n", n},
                                      {"fitness", json_number(fit)},
                                      {"pos_rms", res.pos_rms},
                                      {"att_rms", res.att_rms},
                                      {"energy", res.energy},
                                      {"steps", res.steps},
                                      {"gimbal_warnings", res.gimbal_warnings},
                                      {"max_ik_error", res.max_ik_error}});
    std::cout << "pos_rms " << format_double(res.pos_rms) << " m, att_rms " << format_double(res.att_rms)
              << " rad, energy " << format_double(res.energy) << "\nwrote " << dir.string() << "\n";
  } catch (const Error& e) {
    code = exit_code_for(e.code());
    manifest.write(dir, snapshot, n, code);
    throw;
  }
  manifest.write(dir, snapshot, n, code);
  return code;
}

// ---- compare ----------------------------------------------------------------

std::string csv_field(const json& j, const char* key) {
  if (!j.contains(key)) return "";
  const json& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_double(v.get<double>());
  return "";
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out) {
  MODSTRUCT_REQUIRE(!dirs.empty(), ErrorCode::InvalidInput, "compare needs at least one run directory");
  std::vector<std::string> sorted = dirs;
  std::sort(sorted.begin(), sorted.end());

  // Per n, the optimize, enumerate and simulate entries in directory order.
  struct Entries {
    std::vector<json> ga, en, sim;
  };
  std::map<int, Entries> by_n;
  for (const auto& d : sorted) {
    const fs::path m = fs::path(d) / "manifest.json";
    MODSTRUCT_REQUIRE(fs::exists(m), ErrorCode::InvalidInput, "missing manifest: " + m.string());
    const json manifest = parse_json_file(m.string());
    const std::string command = manifest.at("command").get<std::string>();
    const int n = manifest.at("n").get<int>();
    if (command == "optimize") {
      by_n[n].ga.push_back(parse_json_file((fs::path(d) / "report.json").string()));
    } else if (command == "enumerate") {
      by_n[n].en.push_back(parse_json_file((fs::path(d) / "report.json").string()));
    } else if (command == "simulate") {
      const fs::path s = fs::path(d) / "summary.json";
      if (fs::exists(s)) by_n[n].sim.push_back(parse_json_file(s.string()));
    } else {
      throw Error(ErrorCode::InvalidInput, m.string() + ": cannot compare '" + command + "' runs");
    }
  }

  std::ostringstream csv;
  csv << "n,ga_seconds,ga_best_fitness,ga_generations,enum_seconds,enum_best_fitness,count_canonical,sim_fitness,pos_rms,"
         "att_rms,energy\n";
  const json none = json::object();
  for (const auto& [n, e] : by_n) {
    const std::size_t rows = std::max({e.ga.size(), e.en.size(), e.sim.size()});
    for (std::size_t i = 0; i < rows; ++i) {
      const json& g = i < e.ga.size() ? e.ga[i] : none;
      const json& en = i < e.en.size() ? e.en[i] : none;
      const json& s = i < e.sim.size() ? e.sim[i] : none;
      csv << n << ',' << csv_field(g, "seconds") << ',' << csv_field(g, "fitness") << ',' << csv_field(g, "generations")
          << ',' << csv_field(en, "seconds") << ',' << csv_field(en, "fitness") << ',' << csv_field(en, "count_canonical")
          << ',' << csv_field(s, "fitness") << ',' << csv_field(s, "pos_rms") << ',' << csv_field(s, "att_rms") << ','
          << csv_field(s, "energy") << '\n';
    }
  }
  std::cout << csv.str();
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(fs::path(out) / "compare.csv", csv.str());
    Manifest manifest("compare", 0);
    for (const auto& d : sorted) manifest.add_input((fs::path(d) / "manifest.json").string());
    manifest.write(out, {{"dirs", sorted}}, by_n.empty() ? 0 : by_n.rbegin()->first, kOk);
  }
  return kOk;
}

void add_common(CLI::App* sub, Common& c, bool config_required) {
  auto* opt = sub->add_option("--config", c.config, "run config (JSON) or a manifest from an earlier run")->check(CLI::ExistingFile);
  if (config_required) opt->required();
  sub->add_option("--seed", c.seed, "override the config seed");
  sub->add_option("--out", c.out, "output directory (default $MODSTRUCT_OUT_ROOT/<command>-seed<seed>)");
  sub->add_option("--threads", c.threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flight-structure optimisation for modular aerial robots"};
  app.set_version_flag("--version", std::string(MODSTRUCT_VERSION));
  app.require_subcommand(1);

  Common common;
  std::string aim_path;
  std::string roster_path;
  std::vector<std::string> dirs;

  auto* optimize = app.add_subcommand("optimize", "run the genetic algorithm");
  add_common(optimize, common, true);
  auto* enumerate = app.add_subcommand("enumerate", "exhaustive search over all structures (small n)");
  add_common(enumerate, common, true);
  auto* eval = app.add_subcommand("eval", "print the evaluation report of one structure");
  eval->add_option("--aim", aim_path, "structure file")->required()->check(CLI::ExistingFile);
  eval->add_option("--roster", roster_path, "roster file")->required()->check(CLI::ExistingFile);
  eval->add_option("--config", common.config, "optional run config for fitness weights")->check(CLI::ExistingFile);
  auto* simulate = app.add_subcommand("simulate", "closed-loop trajectory tracking");
  add_common(simulate, common, true);
  simulate->add_option("--aim", aim_path, "structure file")->check(CLI::ExistingFile);
  simulate->add_option("--roster", roster_path, "roster file")->check(CLI::ExistingFile);
  auto* compare = app.add_subcommand("compare", "merge run directories into one CSV");
  compare->add_option("dirs", dirs, "run directories")->required();
  compare->add_option("--out", common.out, "also write compare.csv and a manifest here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInput;
  }

  try {
    if (*optimize) return cmd_optimize(common);
    if (*enumerate) return cmd_enumerate(common);
    if (*eval) return cmd_eval(aim_path, roster_path, common.config);
    if (*simulate) return cmd_simulate(common, aim_path, roster_path);
    if (*compare) return cmd_compare(dirs, common.out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}
