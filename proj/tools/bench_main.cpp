#include <sys/wait.h>
#include <unistd.h>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absim/models.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

// Fixed CSV schema; every subcommand that emits rows uses exactly this.
const char* kCsvHeader =
    "model,agents,iterations,threads,domain_count,env,allocator,sorting_freq,"
    "static_detect,wall_ms_total,wall_ms_agent_ops,wall_ms_env_update,"
    "wall_ms_sorting,wall_ms_setup_teardown,peak_rss_bytes,force_evals,"
    "repetition";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string model = "clustering";
  std::uint64_t agents = 1000;
  std::uint64_t iterations = 10;
  int threads = 0;
  int domains = 0;
  std::string env = "uniform_grid";
  std::string allocator = "pool";
  std::uint64_t sorting_frequency = 0;
  bool static_detection = false;
  std::uint64_t seed = 42;
  int repetitions = 1;
  std::string out;
  std::string config_path;
};

// Engine knobs reachable only through the config file.
struct EngineOverrides {
  std::optional<double> time_step;
  std::optional<double> repulsion_coefficient;
  std::optional<double> max_displacement;
  std::optional<double> force_threshold;
  std::optional<double> fixed_box_length;
  std::optional<double> mem_mgr_growth_rate;
  std::optional<unsigned> mem_mgr_aligned_pages_shift;
  std::optional<std::uint64_t> mem_mgr_migration_threshold;
  std::optional<std::uint32_t> agent_block_size;
  std::optional<bool> use_extra_memory_during_sort;
};

// --- config file ------------------------------------------------------------

struct ConfigEntry {
  std::string value;
  int line = 0;
};
using ConfigMap = std::map<std::string, ConfigEntry>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void config_fail(const std::string& path, int line,
                              const std::string& msg) {
  throw ConfigError(path + ":" + std::to_string(line) + ": " + msg);
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "model", "agents", "iterations", "threads", "domains", "env",
      "allocator", "sorting_frequency", "static_detection", "seed",
      "repetitions", "out", "time_step", "repulsion_coefficient",
      "max_displacement", "force_threshold", "fixed_box_length",
      "use_extra_memory_during_sort", "mem_mgr_growth_rate",
      "mem_mgr_aligned_pages_shift", "mem_mgr_migration_threshold",
      "agent_block_size"};
  return keys;
}

ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ":0: cannot open config file");
  ConfigMap cfg;
  std::string raw;
  int no = 0;
  while (std::getline(in, raw)) {
    ++no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) config_fail(path, no, "expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) config_fail(path, no, "empty key");
    const auto& known = known_config_keys();
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      config_fail(path, no, "unknown key '" + key + "'");
    }
    if (cfg.count(key)) config_fail(path, no, "duplicate key '" + key + "'");
    cfg[key] = ConfigEntry{value, no};
  }
  return cfg;
}

std::uint64_t to_u64(const std::string& path, const ConfigEntry& e,
                     const std::string& key) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    config_fail(path, e.line, key + ": expected a non-negative integer, got '" +
                                  e.value + "'");
  }
}

double to_double(const std::string& path, const ConfigEntry& e,
                 const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    config_fail(path, e.line,
                key + ": expected a number, got '" + e.value + "'");
  }
}

bool to_bool(const std::string& path, const ConfigEntry& e,
             const std::string& key) {
  if (e.value == "1" || e.value == "true" || e.value == "on") return true;
  if (e.value == "0" || e.value == "false" || e.value == "off") return false;
  config_fail(path, e.line,
              key + ": expected a boolean (1/0/true/false), got '" + e.value +
                  "'");
}

// Fills every option the command line did not set explicitly, then lets
// ABSIM_THREADS override a config-file thread count (flags > env > file).
void layer_config_and_env(CLI::App* sub, Options& o, EngineOverrides& eo) {
  ConfigMap cfg;
  const std::string& path = o.config_path;
  if (!path.empty()) cfg = load_config(path);

  const auto has = [&](const char* key) { return cfg.count(key) > 0; };
  const auto flag_given = [&](const char* name) {
    return sub->count(name) > 0;
  };

  if (!flag_given("--model") && has("model")) o.model = cfg["model"].value;
  if (!flag_given("--agents") && has("agents")) {
    o.agents = to_u64(path, cfg["agents"], "agents");
  }
  if (!flag_given("--iterations") && has("iterations")) {
    o.iterations = to_u64(path, cfg["iterations"], "iterations");
  }
  if (!flag_given("--threads") && has("threads")) {
    o.threads = static_cast<int>(to_u64(path, cfg["threads"], "threads"));
  }
  if (!flag_given("--domains") && has("domains")) {
    o.domains = static_cast<int>(to_u64(path, cfg["domains"], "domains"));
  }
  if (!flag_given("--env") && has("env")) o.env = cfg["env"].value;
  if (!flag_given("--allocator") && has("allocator")) {
    o.allocator = cfg["allocator"].value;
  }
  if (!flag_given("--sorting-frequency") && has("sorting_frequency")) {
    o.sorting_frequency =
        to_u64(path, cfg["sorting_frequency"], "sorting_frequency");
  }
  if (!flag_given("--static-detection") && has("static_detection")) {
    o.static_detection = to_bool(path, cfg["static_detection"],
                                 "static_detection");
  }
  if (!flag_given("--seed") && has("seed")) {
    o.seed = to_u64(path, cfg["seed"], "seed");
  }
  if (!flag_given("--repetitions") && has("repetitions")) {
    o.repetitions =
        static_cast<int>(to_u64(path, cfg["repetitions"], "repetitions"));
  }
  if (!flag_given("--out") && has("out")) o.out = cfg["out"].value;

  if (has("time_step")) eo.time_step = to_double(path, cfg["time_step"], "time_step");
  if (has("repulsion_coefficient")) {
    eo.repulsion_coefficient =
        to_double(path, cfg["repulsion_coefficient"], "repulsion_coefficient");
  }
  if (has("max_displacement")) {
    eo.max_displacement = to_double(path, cfg["max_displacement"], "max_displacement");
  }
  if (has("force_threshold")) {
    eo.force_threshold = to_double(path, cfg["force_threshold"], "force_threshold");
  }
  if (has("fixed_box_length")) {
    eo.fixed_box_length = to_double(path, cfg["fixed_box_length"], "fixed_box_length");
  }
  if (has("use_extra_memory_during_sort")) {
    eo.use_extra_memory_during_sort = to_bool(
        path, cfg["use_extra_memory_during_sort"], "use_extra_memory_during_sort");
  }
  if (has("mem_mgr_growth_rate")) {
    eo.mem_mgr_growth_rate =
        to_double(path, cfg["mem_mgr_growth_rate"], "mem_mgr_growth_rate");
  }
  if (has("mem_mgr_aligned_pages_shift")) {
    eo.mem_mgr_aligned_pages_shift = static_cast<unsigned>(to_u64(
        path, cfg["mem_mgr_aligned_pages_shift"], "mem_mgr_aligned_pages_shift"));
  }
  if (has("mem_mgr_migration_threshold")) {
    eo.mem_mgr_migration_threshold = to_u64(
        path, cfg["mem_mgr_migration_threshold"], "mem_mgr_migration_threshold");
  }
  if (has("agent_block_size")) {
    eo.agent_block_size = static_cast<std::uint32_t>(
        to_u64(path, cfg["agent_block_size"], "agent_block_size"));
  }

  if (!flag_given("--threads")) {
    if (const char* env = std::getenv("ABSIM_THREADS")) {
      try {
        std::size_t pos = 0;
        const int v = std::stoi(env, &pos);
        if (pos != std::string(env).size() || v < 0) {
          throw std::invalid_argument("");
        }
        o.threads = v;
      } catch (...) {
        throw std::runtime_error(
            std::string("ABSIM_THREADS: expected a non-negative integer, got '") +
            env + "'");
      }
    }
  }
}

// --- execution --------------------------------------------------------------

struct ModelHooks {
  void (*tune)(absim::SimulationParams&);
  void (*build)(absim::Simulation&, std::uint64_t);
};

const std::map<std::string, ModelHooks>& model_registry() {
  static const std::map<std::string, ModelHooks> registry = {
      {"proliferation",
       {+[](absim::SimulationParams&) {},
        +[](absim::Simulation& s, std::uint64_t n) {
          absim::models::build_proliferation(s, n);
        }}},
      {"clustering",
       {+[](absim::SimulationParams& p) {
          absim::models::tune_clustering_params(p);
        },
        +[](absim::Simulation& s, std::uint64_t n) {
          absim::models::build_clustering(s, n);
        }}},
      {"static_front",
       {+[](absim::SimulationParams&) {},
        +[](absim::Simulation& s, std::uint64_t n) {
          absim::models::build_static_front(s, n);
        }}},
  };
  return registry;
}

absim::SimulationParams make_params(const Options& o,
                                    const EngineOverrides& eo) {
  absim::SimulationParams p;
  p.seed = o.seed;
  p.thread_count = o.threads;
  p.domain_count = o.domains;
  if (!absim::parse_environment_kind(o.env, p.environment_kind)) {
    throw std::runtime_error("unknown environment '" + o.env +
                             "' (use uniform_grid, brute_force or kdtree)");
  }
  if (!absim::parse_allocator_kind(o.allocator, p.allocator_kind)) {
    throw std::runtime_error("unknown allocator '" + o.allocator +
                             "' (use pool or system)");
  }
  p.sorting_frequency = o.sorting_frequency;
  p.detect_static_agents = o.static_detection;
  if (eo.time_step) p.simulation_time_step = *eo.time_step;
  if (eo.repulsion_coefficient) p.repulsion_coefficient = *eo.repulsion_coefficient;
  if (eo.max_displacement) p.max_displacement = *eo.max_displacement;
  if (eo.force_threshold) p.force_threshold = *eo.force_threshold;
  if (eo.fixed_box_length) p.fixed_box_length = *eo.fixed_box_length;
  if (eo.use_extra_memory_during_sort) {
    p.use_extra_memory_during_sort = *eo.use_extra_memory_during_sort;
  }
  if (eo.mem_mgr_growth_rate) p.mem_mgr_growth_rate = *eo.mem_mgr_growth_rate;
  if (eo.mem_mgr_aligned_pages_shift) {
    p.mem_mgr_aligned_pages_shift = *eo.mem_mgr_aligned_pages_shift;
  }
  if (eo.mem_mgr_migration_threshold) {
    p.mem_mgr_migration_threshold = *eo.mem_mgr_migration_threshold;
  }
  if (eo.agent_block_size) p.agent_block_size = *eo.agent_block_size;
  return p;
}

struct RunResult {
  absim::SimulationReport report;
  int threads = 0;
  int domains = 0;
};

RunResult run_once(const Options& o, const EngineOverrides& eo) {
  const auto it = model_registry().find(o.model);
  if (it == model_registry().end()) {
    std::string names;
    for (const auto& [name, hooks] : model_registry()) {
      (void)hooks;
      names += names.empty() ? name : ", " + name;
    }
    throw std::runtime_error("unknown model '" + o.model + "' (have: " + names +
                             ")");
  }
  absim::SimulationParams p = make_params(o, eo);
  it->second.tune(p);
  absim::Simulation sim(p);
  it->second.build(sim, o.agents);
  sim.simulate(o.iterations);
  return {sim.report(), sim.topology().total_threads(),
          sim.topology().domain_count()};
}

// --- output -----------------------------------------------------------------

class CsvSink {
 public:
  explicit CsvSink(const std::string& path) {
    if (path.empty()) {
      out_ = &std::cout;
      need_header_ = true;
      return;
    }
    // Append so sweeps can share a file; the header is written only when the
    // file starts empty.
    std::ifstream probe(path, std::ios::ate | std::ios::binary);
    need_header_ = !probe || probe.tellg() == 0;
    file_.open(path, std::ios::app);
    if (!file_) throw std::runtime_error(path + ": cannot open for writing");
    out_ = &file_;
  }

  void row(const std::string& line) {
    if (need_header_) {
      *out_ << kCsvHeader << "\n";
      need_header_ = false;
    }
    *out_ << line << "\n";
    out_->flush();
  }

 private:
  std::ofstream file_;
  std::ostream* out_ = nullptr;
  bool need_header_ = false;
};

std::string csv_row(const Options& o, const RunResult& r, int repetition) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(3);
  s << o.model << ',' << o.agents << ',' << o.iterations << ',' << r.threads
    << ',' << r.domains << ',' << o.env << ',' << o.allocator << ','
    << o.sorting_frequency << ',' << (o.static_detection ? 1 : 0) << ','
    << r.report.total_wall_ms << ',' << r.report.agent_ops_ms << ','
    << r.report.env_update_ms << ',' << r.report.sorting_ms << ','
    << r.report.setup_teardown_ms << ',' << r.report.peak_rss_bytes << ','
    << r.report.force_evaluations << ',' << repetition;
  return s.str();
}

json report_to_json(const Options& o, const RunResult& r) {
  json rep;
  rep["iterations"] = r.report.iterations;
  rep["final_agent_count"] = r.report.final_agent_count;
  rep["wall_ms_total"] = r.report.total_wall_ms;
  rep["wall_ms_agent_ops"] = r.report.agent_ops_ms;
  rep["wall_ms_env_update"] = r.report.env_update_ms;
  rep["wall_ms_sorting"] = r.report.sorting_ms;
  rep["wall_ms_setup_teardown"] = r.report.setup_teardown_ms;
  rep["peak_rss_bytes"] = r.report.peak_rss_bytes;
  rep["force_evaluations"] = r.report.force_evaluations;
  rep["force_skips"] = r.report.force_skips;
  rep["agents_added"] = r.report.agents_added;
  rep["agents_removed"] = r.report.agents_removed;
  rep["agents_sorted"] = r.report.agents_sorted;
  rep["same_domain_steals"] = r.report.same_domain_steals;
  rep["cross_domain_steals"] = r.report.cross_domain_steals;
  rep["allocator_batch_migrations"] = r.report.allocator_batch_migrations;
  json ops = json::object();
  for (const auto& [name, ms] : r.report.per_operation_ms) ops[name] = ms;
  rep["per_operation_ms"] = ops;
  rep["per_iteration_ms"] = r.report.per_iteration_ms;

  json j;
  j["model"] = o.model;
  j["agents"] = o.agents;
  j["iterations"] = o.iterations;
  j["threads"] = r.threads;
  j["domain_count"] = r.domains;
  j["env"] = o.env;
  j["allocator"] = o.allocator;
  j["sorting_frequency"] = o.sorting_frequency;
  j["static_detection"] = o.static_detection;
  j["seed"] = o.seed;
  j["report"] = rep;
  return j;
}

// --- subcommand bodies -------------------------------------------------------

int cmd_run(const Options& o, const EngineOverrides& eo) {
  const RunResult r = run_once(o, eo);
  const json j = report_to_json(o, r);
  if (o.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error(o.out + ": cannot open for writing");
    out << j.dump(2) << "\n";
  }
  return 0;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::uint64_t parse_list_u64(const std::string& item, const char* what) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(item, &pos);
    if (pos != item.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::runtime_error(std::string(what) + ": '" + item +
                             "' is not a non-negative integer");
  }
}

// Runs the cross product of the given axes; every cell inherits `base` and
// overrides one value per axis. Continues past failed cells so a long sweep
// still yields the healthy rows; returns nonzero if anything failed.
int run_sweep(const Options& base, const EngineOverrides& eo,
              const std::vector<int>& threads_axis,
              const std::vector<std::uint64_t>& sorting_axis,
              const std::vector<std::string>& env_axis,
              const std::vector<std::string>& alloc_axis,
              const std::vector<bool>& static_axis) {
  CsvSink sink(base.out);
  bool failed = false;
  for (const int threads : threads_axis) {
    for (const std::uint64_t freq : sorting_axis) {
      for (const std::string& env : env_axis) {
        for (const std::string& alloc : alloc_axis) {
          for (const bool detect : static_axis) {
            Options cell = base;
            cell.threads = threads;
            cell.sorting_frequency = freq;
            cell.env = env;
            cell.allocator = alloc;
            cell.static_detection = detect;
            for (int rep = 0; rep < base.repetitions; ++rep) {
              try {
                const RunResult r = run_once(cell, eo);
                sink.row(csv_row(cell, r, rep));
              } catch (const std::exception& e) {
                failed = true;
                std::cerr << "cell model=" << cell.model
                          << " threads=" << threads << " sorting=" << freq
                          << " env=" << env << " allocator=" << alloc
                          << " static=" << detect << " rep=" << rep
                          << " failed: " << e.what() << "\n";
              }
            }
          }
        }
      }
    }
  }
  return failed ? 1 : 0;
}

int cmd_bench(const Options& o, const EngineOverrides& eo,
              const std::string& threads_list, const std::string& sorting_list,
              const std::string& env_list, const std::string& alloc_list,
              const std::string& static_list) {
  std::vector<int> threads_axis{o.threads};
  if (!threads_list.empty()) {
    threads_axis.clear();
    for (const auto& s : split_list(threads_list)) {
      threads_axis.push_back(
          static_cast<int>(parse_list_u64(s, "--threads-list")));
    }
  }
  std::vector<std::uint64_t> sorting_axis{o.sorting_frequency};
  if (!sorting_list.empty()) {
    sorting_axis.clear();
    for (const auto& s : split_list(sorting_list)) {
      sorting_axis.push_back(parse_list_u64(s, "--sorting-list"));
    }
  }
  std::vector<std::string> env_axis{o.env};
  if (!env_list.empty()) env_axis = split_list(env_list);
  std::vector<std::string> alloc_axis{o.allocator};
  if (!alloc_list.empty()) alloc_axis = split_list(alloc_list);
  std::vector<bool> static_axis{o.static_detection};
  if (!static_list.empty()) {
    static_axis.clear();
    for (const auto& s : split_list(static_list)) {
      static_axis.push_back(parse_list_u64(s, "--static-list") != 0);
    }
  }
  return run_sweep(o, eo, threads_axis, sorting_axis, env_axis, alloc_axis,
                   static_axis);
}

// Re-runs this executable for one configuration so the child's peak RSS
// covers exactly one simulation.
RunResult run_in_child(const Options& o) {
  char exe[4096];
  const ssize_t len = readlink("/proc/self/exe", exe, sizeof(exe) - 1);
  if (len <= 0) throw std::runtime_error("cannot resolve own executable path");
  exe[len] = '\0';

  const std::string tmp = "/tmp/absim-point-" + std::to_string(getpid()) +
                          "-" + std::to_string(o.agents) + ".json";
  std::vector<std::string> args = {
      exe, "run",
      "--model", o.model,
      "--agents", std::to_string(o.agents),
      "--iterations", std::to_string(o.iterations),
      "--threads", std::to_string(o.threads),
      "--domains", std::to_string(o.domains),
      "--env", o.env,
      "--allocator", o.allocator,
      "--sorting-frequency", std::to_string(o.sorting_frequency),
      "--seed", std::to_string(o.seed),
      "--out", tmp};
  if (o.static_detection) args.push_back("--static-detection");

  std::vector<char*> argv;
  argv.reserve(args.size() + 1);
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    execv(exe, argv.data());
    _exit(127);
  }
  int status = 0;
  if (waitpid(pid, &status, 0) != pid) {
    throw std::runtime_error("waitpid failed");
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("child run for " + std::to_string(o.agents) +
                             " agents failed");
  }

  std::ifstream in(tmp);
  if (!in) throw std::runtime_error(tmp + ": child produced no report");
  json j = json::parse(in);
  std::remove(tmp.c_str());

  RunResult r;
  r.threads = j["threads"];
  r.domains = j["domain_count"];
  const json& rep = j["report"];
  r.report.iterations = rep["iterations"];
  r.report.final_agent_count = rep["final_agent_count"];
  r.report.total_wall_ms = rep["wall_ms_total"];
  r.report.agent_ops_ms = rep["wall_ms_agent_ops"];
  r.report.env_update_ms = rep["wall_ms_env_update"];
  r.report.sorting_ms = rep["wall_ms_sorting"];
  r.report.setup_teardown_ms = rep["wall_ms_setup_teardown"];
  r.report.peak_rss_bytes = rep["peak_rss_bytes"];
  r.report.force_evaluations = rep["force_evaluations"];
  return r;
}

int cmd_complexity(const Options& base, const std::string& agents_list) {
  std::vector<std::uint64_t> points = {1000, 10000, 100000, 1000000};
  if (!agents_list.empty()) {
    points.clear();
    for (const auto& s : split_list(agents_list)) {
      points.push_back(parse_list_u64(s, "--agents-list"));
    }
  }
  CsvSink sink(base.out);
  bool failed = false;
  for (const std::uint64_t n : points) {
    Options cell = base;
    cell.agents = n;
    for (int rep = 0; rep < base.repetitions; ++rep) {
      try {
        const RunResult r = run_in_child(cell);
        sink.row(csv_row(cell, r, rep));
      } catch (const std::exception& e) {
        failed = true;
        std::cerr << "point agents=" << n << " rep=" << rep
                  << " failed: " << e.what() << "\n";
      }
    }
  }
  return failed ? 1 : 0;
}

void add_common_flags(CLI::App* sub, Options& o) {
  sub->add_option("--model", o.model,
                  "model name: proliferation, clustering, static_front");
  sub->add_option("--agents", o.agents, "target agent count");
  sub->add_option("--iterations", o.iterations, "iterations to simulate");
  sub->add_option("--threads", o.threads, "worker threads (0 = hardware)");
  sub->add_option("--domains", o.domains,
                  "memory domains (0 = detect from the OS)");
  sub->add_option("--env", o.env,
                  "neighbor search: uniform_grid, brute_force, kdtree");
  sub->add_option("--allocator", o.allocator, "agent allocator: pool, system");
  sub->add_option("--sorting-frequency", o.sorting_frequency,
                  "re-sort period in iterations (0 = never)");
  sub->add_flag("--static-detection", o.static_detection,
                "skip force computation for settled agents");
  sub->add_option("--seed", o.seed, "root random seed");
  sub->add_option("--repetitions", o.repetitions, "repetitions per cell")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", o.out, "output path (default: stdout)");
  sub->add_option("--config", o.config_path, "key=value config file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agent-based simulation benchmark driver"};
  app.require_subcommand(1);

  Options o;
  EngineOverrides eo;

  auto* run = app.add_subcommand(
      "run", "execute one configuration and emit a JSON report");
  add_common_flags(run, o);

  auto* bench = app.add_subcommand(
      "bench", "run a sweep cross-product and append CSV rows");
  add_common_flags(bench, o);
  std::string threads_list, sorting_list, env_list, alloc_list, static_list;
  bench->add_option("--threads-list", threads_list,
                    "comma list overriding --threads as a sweep axis");
  bench->add_option("--sorting-list", sorting_list,
                    "comma list overriding --sorting-frequency");
  bench->add_option("--env-list", env_list, "comma list overriding --env");
  bench->add_option("--alloc-list", alloc_list,
                    "comma list overriding --allocator");
  bench->add_option("--static-list", static_list,
                    "comma list of 0/1 overriding --static-detection");

  auto* sweep_sorting = app.add_subcommand(
      "sweep-sorting", "vary the sorting frequency on one configuration");
  add_common_flags(sweep_sorting, o);
  std::string frequencies = "0,1,5,10,50,100";
  sweep_sorting->add_option("--frequencies", frequencies,
                            "comma list of sorting frequencies");

  auto* sweep_env = app.add_subcommand(
      "sweep-env", "compare neighbor-search environments");
  add_common_flags(sweep_env, o);
  std::string envs = "uniform_grid,kdtree";
  sweep_env->add_option("--envs", envs, "comma list of environments");

  auto* sweep_alloc =
      app.add_subcommand("sweep-alloc", "compare agent allocators");
  add_common_flags(sweep_alloc, o);
  std::string allocators = "pool,system";
  sweep_alloc->add_option("--allocators", allocators,
                          "comma list of allocators");

  auto* complexity = app.add_subcommand(
      "complexity",
      "wall time and peak memory vs agent count, one child process per point");
  add_common_flags(complexity, o);
  std::string agents_list;
  complexity->add_option("--agents-list", agents_list,
                         "comma list of agent counts");

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    layer_config_and_env(sub, o, eo);

    if (sub == run) return cmd_run(o, eo);
    if (sub == bench) {
      return cmd_bench(o, eo, threads_list, sorting_list, env_list, alloc_list,
                       static_list);
    }
    if (sub == sweep_sorting) {
      return cmd_bench(o, eo, "", frequencies, "", "", "");
    }
    if (sub == sweep_env) return cmd_bench(o, eo, "", "", envs, "", "");
    if (sub == sweep_alloc) return cmd_bench(o, eo, "", "", "", allocators, "");
    if (sub == complexity) return cmd_complexity(o, agents_list);
    throw std::logic_error("unhandled subcommand");
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
