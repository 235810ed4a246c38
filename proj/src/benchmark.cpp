#include "bsr/benchmark.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bsr/log.hpp"

namespace bsr {

using nlohmann::json;

std::string Ablation::name() const {
  if (constrain && defer) return "both";
  if (constrain) return "constraints";
  if (defer) return "deferred";
  return "neither";
}

const std::vector<Ablation>& all_ablations() {
  static const std::vector<Ablation> all{{false, false}, {true, false}, {false, true}, {true, true}};
  return all;
}

namespace {

Ablation ablation_from_name(const std::string& name) {
  for (const auto& a : all_ablations())
    if (a.name() == name) return a;
  throw std::invalid_argument("unknown ablation '" + name + "'");
}

std::vector<std::string> tasks_of(const BenchmarkConfig& c) {
  return c.tasks.empty() ? task_names() : c.tasks;
}

std::vector<Ablation> ablations_of(const BenchmarkConfig& c) {
  return c.ablations.empty() ? all_ablations() : c.ablations;
}

}  // namespace

json to_json(const BenchmarkConfig& c) {
  json ablations = json::array();
  for (const auto& a : ablations_of(c)) ablations.push_back(a.name());
  return {
      {"tasks", tasks_of(c)},
      {"ablations", ablations},
      {"trials", c.trials},
      {"seed", c.seed},
      {"particles", c.particles},
      {"budget", c.policy.budget},
      {"max_cost", c.domain.max_cost},
      {"max_steps", c.policy.max_steps},
      {"constrained_fraction", c.policy.constrained_fraction},
      {"sensor", {{"p_fn", c.domain.sensor.p_fn},
                  {"sigma", {c.domain.sensor.sigma.xx, c.domain.sensor.sigma.xy, c.domain.sensor.sigma.yy}}}},
      {"env", {{"base_sigma", c.env.base_sigma},
               {"arm_sigma", c.env.arm_sigma},
               {"manipulation_success", c.env.manipulation_success}}},
      {"scene", scene_to_json(c.scene)},
  };
}

BenchmarkConfig benchmark_config_from_json(const json& j) {
  BenchmarkConfig c;
  c.scene = j.contains("scene") ? scene_from_json(j.at("scene")) : make_kitchen_scene();
  c.tasks = j.value("tasks", std::vector<std::string>{});
  for (const auto& name : j.value("ablations", std::vector<std::string>{}))
    c.ablations.push_back(ablation_from_name(name));
  c.trials = j.value("trials", c.trials);
  c.seed = j.value("seed", c.seed);
  c.particles = j.value("particles", c.particles);
  c.policy.budget = j.value("budget", c.policy.budget);
  c.domain.max_cost = j.value("max_cost", c.domain.max_cost);
  c.policy.max_steps = j.value("max_steps", c.policy.max_steps);
  c.policy.constrained_fraction = j.value("constrained_fraction", c.policy.constrained_fraction);
  if (j.contains("sensor")) {
    const json& s = j.at("sensor");
    c.domain.sensor.p_fn = s.value("p_fn", c.domain.sensor.p_fn);
    if (s.contains("sigma")) {
      const auto v = s.at("sigma").get<std::vector<double>>();
      if (v.size() != 3) throw std::invalid_argument("sensor sigma needs 3 entries (xx, xy, yy)");
      c.domain.sensor.sigma = Cov2{v[0], v[1], v[2]};
    }
  }
  if (j.contains("env")) {
    const json& e = j.at("env");
    c.env.base_sigma = e.value("base_sigma", c.env.base_sigma);
    c.env.arm_sigma = e.value("arm_sigma", c.env.arm_sigma);
    c.env.manipulation_success = e.value("manipulation_success", c.env.manipulation_success);
  }
  return c;
}

json to_json(const TrialRecord& r) {
  return {
      {"task", r.task},
      {"ablation", r.ablation},
      {"trial", r.trial},
      {"seed", r.seed},
      {"success", r.success},
      {"reason", r.reason},
      {"planning_time", r.planning_time},
      {"replans", r.replans},
      {"actions_executed", r.actions_executed},
      {"constrained_attempts", r.constrained_attempts},
      {"constrained_solved", r.constrained_solved},
  };
}

const CellSummary& BenchmarkResult::cell(const std::string& task, const std::string& ablation) const {
  for (const auto& c : cells)
    if (c.task == task && c.ablation == ablation) return c;
  throw std::out_of_range("no cell for " + task + "/" + ablation);
}

TrialRecord run_trial(const BenchmarkConfig& config, const std::string& task, const Ablation& ablation,
                      int trial) {
  TrialRecord r;
  r.task = task;
  r.ablation = ablation.name();
  r.trial = trial;
  r.seed = config.seed + static_cast<std::uint64_t>(trial);
  const auto start = std::chrono::steady_clock::now();
  try {
    const domain::KitchenDomain dom(config.scene, config.domain);
    const TaskInstance instance = make_task(task, config.scene, config.particles, r.seed);
    EnvSimulator env(config.scene, config.domain.sensor, config.env, instance.latent,
                     domain::fnv1a("env/" + task, r.seed));
    PolicyOptions options = config.policy;
    options.constrain = ablation.constrain;
    options.defer = ablation.defer;
    r.detail = run_policy(dom, instance, env, options, r.seed);
    r.success = r.detail.success;
    r.reason = r.detail.reason;
    r.planning_time = std::min(r.detail.modeled, config.policy.budget);
    r.actions_executed = r.detail.steps;
    r.replans = std::max(0, static_cast<int>(r.detail.episodes.size()) - 1);
    r.constrained_attempts = static_cast<int>(r.detail.attempts.size());
    for (const auto& a : r.detail.attempts) r.constrained_solved += a.solved ? 1 : 0;
  } catch (const std::exception& e) {
    r.success = false;
    r.reason = std::string("fault: ") + e.what();
    log::warn(task, "/", r.ablation, "/", trial, " fault: ", e.what());
  }
  r.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log::info(task, " ", r.ablation, " trial ", trial, ": ", r.success ? "success" : "failure", " (",
            r.reason, ", ", r.planning_time, " s)");
  return r;
}

std::vector<CellSummary> summarize(const std::vector<TrialRecord>& trials) {
  std::vector<CellSummary> cells;
  for (const auto& t : trials) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const CellSummary& c) {
      return c.task == t.task && c.ablation == t.ablation;
    });
    if (it == cells.end()) {
      cells.push_back({t.task, t.ablation, 0, 0, 0.0, 0.0});
      it = cells.end() - 1;
    }
    ++it->trials;
    if (t.success) {
      ++it->successes;
      it->mean_success_time += t.planning_time;
    }
  }
  for (auto& c : cells) {
    c.success_rate = c.trials ? 100.0 * c.successes / c.trials : 0.0;
    c.mean_success_time = c.successes ? c.mean_success_time / c.successes : 0.0;
  }
  return cells;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  struct Job {
    std::string task;
    Ablation ablation;
    int trial;
  };
  std::vector<Job> jobs;
  for (const auto& task : tasks_of(config))
    for (const auto& ablation : ablations_of(config))
      for (int i = 0; i < config.trials; ++i) jobs.push_back({task, ablation, i});

  BenchmarkResult result;
  result.trials.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++)
      result.trials[k] = run_trial(config, jobs[k].task, jobs[k].ablation, jobs[k].trial);
  };
  const int workers = std::max(1, std::min<int>(config.jobs, static_cast<int>(jobs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.cells = summarize(result.trials);
  return result;
}

void write_results(const BenchmarkResult& result, const BenchmarkConfig& config,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("trials.jsonl");
    for (const auto& t : result.trials) out << to_json(t).dump() << "\n";
  }
  {
    auto out = open("table.csv");
    out << "task,ablation,trials,successes,success_pct,mean_success_time\n";
    out << std::setprecision(10);
    for (const auto& c : result.cells)
      out << c.task << "," << c.ablation << "," << c.trials << "," << c.successes << ","
          << c.success_rate << "," << c.mean_success_time << "\n";
  }
  {
    auto out = open("config.json");
    out << to_json(config).dump(2) << "\n";
  }
  {
    auto out = open("wall_times.csv");
    out << "task,ablation,trial,seed,wall_seconds\n";
    for (const auto& t : result.trials)
      out << t.task << "," << t.ablation << "," << t.trial << "," << t.seed << "," << t.wall << "\n";
  }
}

std::string format_table(const BenchmarkResult& result) {
  std::vector<std::string> tasks, ablations;
  for (const auto& c : result.cells) {
    if (std::find(tasks.begin(), tasks.end(), c.task) == tasks.end()) tasks.push_back(c.task);
    if (std::find(ablations.begin(), ablations.end(), c.ablation) == ablations.end())
      ablations.push_back(c.ablation);
  }
  std::ostringstream os;
  os << std::left << std::setw(10) << "task";
  for (const auto& a : ablations) os << std::right << std::setw(20) << (a + " %/t");
  os << "\n";
  for (const auto& t : tasks) {
    os << std::left << std::setw(10) << t;
    for (const auto& a : ablations) {
      const CellSummary& c = result.cell(t, a);
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(0) << c.success_rate << " / " << std::setprecision(1)
           << c.mean_success_time;
      os << std::right << std::setw(20) << cell.str();
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace bsr
