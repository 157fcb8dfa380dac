#include "atena/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "atena/errors.hpp"
#include "atena/rng.hpp"

namespace atena::harness {

using Json = nlohmann::ordered_json;

std::string_view to_string(Sampling s) {
  switch (s) {
    case Sampling::uncertainty: return "uncertainty";
    case Sampling::random_k: return "random_k";
    case Sampling::consecutive_k: return "consecutive_k";
    case Sampling::all: return "all";
  }
  return "unknown";
}

Sampling sampling_from_string(std::string_view name) {
  for (auto s : {Sampling::uncertainty, Sampling::random_k, Sampling::consecutive_k, Sampling::all})
    if (name == to_string(s)) return s;
  throw ConfigError("unknown sampling '" + std::string(name) + "'");
}

void validate(const ExperimentConfig& c) {
  if (c.n_nodes < 4) throw ConfigError("n_nodes must be >= 4");
  if (c.feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (!(c.connectivity > 0.0 && c.connectivity <= 1.0))
    throw ConfigError("connectivity must be in (0, 1]");
  if (c.n_seen_worlds < 1 || c.n_test_worlds < 1 || c.episodes_per_world < 1 ||
      c.tasks_per_seen_world < 1)
    throw ConfigError("world and episode counts must be positive");
  if (c.max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (!(c.success_radius >= 0.0)) throw ConfigError("success_radius must be >= 0");
  if (c.min_hops < 1 || c.max_hops < c.min_hops) throw ConfigError("need 1 <= min_hops <= max_hops");
  if (c.hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (c.bc_epochs < 0) throw ConfigError("bc_epochs must be >= 0");
  if (!(c.shift.edge_dropout >= 0.0 && c.shift.edge_dropout < 1.0))
    throw ConfigError("edge_dropout must be in [0, 1)");
  if (c.shift.feature_noise_std < 0.0 || c.shift.feature_drift < 0.0)
    throw ConfigError("shift magnitudes must be >= 0");
  sal::validate(c.hyper);
  if (c.sampling != Sampling::uncertainty && !sal::uses_feedback(c.method))
    throw ConfigError("sampling '" + std::string(to_string(c.sampling)) +
                      "' only applies to feedback-using methods");
  if (c.sample_k < -1) throw ConfigError("sample_k must be >= 0, or -1 for the matched budget");
  if (c.oracle != "ground_truth" && c.oracle != "interactive")
    throw ConfigError("oracle must be ground_truth or interactive");
  if (!(c.noise_rate >= 0.0 && c.noise_rate <= 1.0)) throw ConfigError("noise_rate must be in [0, 1]");
  if (c.seeds.empty()) throw ConfigError("at least one seed is required");
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["n_nodes"] = c.n_nodes;
  j["feature_dim"] = c.feature_dim;
  j["connectivity"] = c.connectivity;
  j["code_width"] = c.code_width;
  j["node_feature_noise"] = c.node_feature_noise;
  j["landmark_weight"] = c.landmark_weight;
  j["n_seen_worlds"] = c.n_seen_worlds;
  j["n_test_worlds"] = c.n_test_worlds;
  j["tasks_per_seen_world"] = c.tasks_per_seen_world;
  j["episodes_per_world"] = c.episodes_per_world;
  j["success_radius"] = c.success_radius;
  j["min_hops"] = c.min_hops;
  j["max_hops"] = c.max_hops;
  j["max_steps"] = c.max_steps;
  j["feature_noise_std"] = c.shift.feature_noise_std;
  j["edge_dropout"] = c.shift.edge_dropout;
  j["feature_drift"] = c.shift.feature_drift;
  j["drift_fraction"] = c.shift.drift_fraction;
  j["drift_radius"] = c.shift.drift_radius;
  j["hidden_dim"] = c.hidden_dim;
  j["bc_epochs"] = c.bc_epochs;
  j["bc_learning_rate"] = c.bc_learning_rate;
  j["bc_momentum"] = c.bc_momentum;
  j["bc_weight_decay"] = c.bc_weight_decay;
  j["policy_checkpoint"] = c.policy_checkpoint;
  j["method"] = std::string(sal::to_string(c.method));
  j["sampling"] = std::string(to_string(c.sampling));
  j["sample_k"] = c.sample_k;
  j["lambda"] = c.hyper.lambda;
  j["delta"] = c.hyper.delta;
  j["gamma"] = c.hyper.gamma;
  j["eta"] = c.hyper.eta;
  j["self_loss_to_policy"] = c.self_loss_to_policy;
  j["oracle"] = c.oracle;
  j["noise_rate"] = c.noise_rate;
  j["interactive_timeout_s"] = c.interactive_timeout_s;
  j["seeds"] = c.seeds;
  j["out_dir"] = c.out_dir;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const Json defaults = to_json(ExperimentConfig{});
  for (const auto& [key, _] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config field '" + key + "'");
  }
  ExperimentConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n_nodes", c.n_nodes);
    get("feature_dim", c.feature_dim);
    get("connectivity", c.connectivity);
    get("code_width", c.code_width);
    get("node_feature_noise", c.node_feature_noise);
    get("landmark_weight", c.landmark_weight);
    get("n_seen_worlds", c.n_seen_worlds);
    get("n_test_worlds", c.n_test_worlds);
    get("tasks_per_seen_world", c.tasks_per_seen_world);
    get("episodes_per_world", c.episodes_per_world);
    get("success_radius", c.success_radius);
    get("min_hops", c.min_hops);
    get("max_hops", c.max_hops);
    get("max_steps", c.max_steps);
    get("feature_noise_std", c.shift.feature_noise_std);
    get("edge_dropout", c.shift.edge_dropout);
    get("feature_drift", c.shift.feature_drift);
    get("drift_fraction", c.shift.drift_fraction);
    get("drift_radius", c.shift.drift_radius);
    get("hidden_dim", c.hidden_dim);
    get("bc_epochs", c.bc_epochs);
    get("bc_learning_rate", c.bc_learning_rate);
    get("bc_momentum", c.bc_momentum);
    get("bc_weight_decay", c.bc_weight_decay);
    get("policy_checkpoint", c.policy_checkpoint);
    if (j.contains("method")) c.method = sal::method_from_string(j.at("method").get<std::string>());
    if (j.contains("sampling")) c.sampling = sampling_from_string(j.at("sampling").get<std::string>());
    get("sample_k", c.sample_k);
    get("lambda", c.hyper.lambda);
    get("delta", c.hyper.delta);
    get("gamma", c.hyper.gamma);
    get("eta", c.hyper.eta);
    get("self_loss_to_policy", c.self_loss_to_policy);
    get("oracle", c.oracle);
    get("noise_rate", c.noise_rate);
    get("interactive_timeout_s", c.interactive_timeout_s);
    get("seeds", c.seeds);
    get("out_dir", c.out_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion)
    throw ConfigError("unsupported config schema_version");
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
}

bool has_field(const std::string& key) {
  return key != "schema_version" && to_json(ExperimentConfig{}).contains(key);
}

void set_field(ExperimentConfig& config, const std::string& key, const nlohmann::json& value) {
  if (!has_field(key)) throw ConfigError("unknown config field '" + key + "'");
  nlohmann::json j = to_json(config);
  j[key] = value;
  config = config_from_json(j);
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like key=value: '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  set_field(config, key, value);
}

Suite build_suite(const ExperimentConfig& c, std::uint64_t seed) {
  env::WorldStyle world_style;
  world_style.code_width = c.code_width;
  world_style.feature_noise = c.node_feature_noise;
  env::TaskStyle style;
  style.success_radius = c.success_radius;
  style.max_steps = c.max_steps;
  style.landmark_weight = c.landmark_weight;
  style.min_hops = c.min_hops;
  style.max_hops = c.max_hops;
  Suite s;
  for (int i = 0; i < c.n_seen_worlds; ++i) {
    s.seen_worlds.push_back(env::generate_world(derive_seed(seed, "suite/seen", i), c.n_nodes,
                                                c.feature_dim, c.connectivity, world_style));
    s.seen_tasks.push_back(env::generate_tasks(s.seen_worlds.back(), c.tasks_per_seen_world,
                                               derive_seed(seed, "suite/seen-tasks", i), style));
  }
  const auto shift_seed = derive_seed(seed, "suite/shift");
  for (int i = 0; i < c.n_test_worlds; ++i) {
    auto base = env::generate_world(derive_seed(seed, "suite/test", i), c.n_nodes, c.feature_dim,
                                    c.connectivity, world_style);
    s.test_worlds.push_back(env::apply_shift(base, c.shift, shift_seed));
    s.test_tasks.push_back(env::generate_tasks(s.test_worlds.back(), c.episodes_per_world,
                                               derive_seed(seed, "suite/test-tasks", i), style));
  }
  return s;
}

policy::PolicyParams pretrained_policy(const ExperimentConfig& c, std::uint64_t seed,
                                       const Suite& suite) {
  if (!c.policy_checkpoint.empty()) {
    std::string path = c.policy_checkpoint;
    if (const auto at = path.find("{seed}"); at != std::string::npos)
      path.replace(at, 6, std::to_string(seed));
    auto p = policy::load_checkpoint(path);
    if (p.feature_dim() != static_cast<std::size_t>(c.feature_dim))
      throw ConfigError("checkpoint feature_dim does not match config");
    return p;
  }
  static std::mutex mu;
  static std::map<std::string, policy::PolicyParams> cache;
  // Everything that shapes the seen worlds or the trainer; adaptation fields are dropped.
  Json key = to_json(c);
  for (const char* field : {"method", "sampling", "sample_k", "lambda", "delta", "gamma", "eta",
                            "self_loss_to_policy", "oracle", "noise_rate", "interactive_timeout_s",
                            "seeds", "out_dir", "n_test_worlds", "episodes_per_world",
                            "feature_noise_std", "edge_dropout", "feature_drift", "drift_fraction", "drift_radius"})
    key.erase(field);
  key["seed"] = seed;
  const auto k = key.dump();
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(k); it != cache.end()) return it->second;
  }
  policy::BcOptions opt;
  opt.hidden_dim = c.hidden_dim;
  opt.epochs = c.bc_epochs;
  opt.learning_rate = c.bc_learning_rate;
  opt.momentum = c.bc_momentum;
  opt.weight_decay = c.bc_weight_decay;
  opt.seed = derive_seed(seed, "policy");
  auto params = policy::pretrain_bc(suite.seen_worlds, suite.seen_tasks, opt);
  std::lock_guard lock(mu);
  cache.emplace(k, params);
  return params;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RunResult run(const ExperimentConfig& config, std::uint64_t seed, oracle::HumanOracle* human,
              const EpisodeObserver& observer) {
  validate(config);
  RunResult result;
  result.config = config;
  result.seed = seed;

  const auto t0 = std::chrono::steady_clock::now();
  const auto suite = build_suite(config, seed);
  auto params = pretrained_policy(config, seed, suite);
  result.timing.pretrain_s = seconds_since(t0);

  const std::size_t total =
      static_cast<std::size_t>(config.n_test_worlds) * static_cast<std::size_t>(config.episodes_per_world);

  // Human routing plan for the non-entropy sampling rules.
  std::vector<std::optional<bool>> plan(total);
  if (sal::uses_feedback(config.method) && config.sampling != Sampling::uncertainty) {
    std::size_t k = total;
    if (config.sampling != Sampling::all) {
      if (config.sample_k >= 0) {
        k = std::min<std::size_t>(static_cast<std::size_t>(config.sample_k), total);
      } else {
        auto reference = config;
        reference.sampling = Sampling::uncertainty;
        k = run(reference, seed).report.human_episodes;
      }
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.sampling == Sampling::random_k) {
      Rng rng(derive_seed(seed, "sampling/random"));
      rng.shuffle(order.begin(), order.end());
    }
    for (std::size_t i = 0; i < total; ++i) plan[i] = false;
    for (std::size_t i = 0; i < k; ++i) plan[order[i]] = true;
    result.sample_k = k;
  }

  oracle::GroundTruthOracle truth(config.noise_rate, derive_seed(seed, "oracle"));
  oracle::HumanOracle& backend = human ? *human : truth;
  auto state = sal::make_state(std::move(params), config.hyper);
  sal::AdaptOptions options;
  options.method = config.method;
  options.self_loss_to_policy = config.self_loss_to_policy;

  const auto t1 = std::chrono::steady_clock::now();
  std::uint64_t episode = 0;
  for (int w = 0; w < config.n_test_worlds; ++w) {
    const auto& world = suite.test_worlds[w];
    for (const auto& task : suite.test_tasks[w]) {
      sal::EpisodeInfo info;
      info.episode_id = episode;
      info.seed = seed;
      info.world_index = w;
      info.force_human = plan[episode];
      result.records.push_back(sal::adapt_episode(state, world, task, backend, info, options));
      if (observer) observer(result.records.back(), world);
      ++episode;
    }
  }
  result.timing.adapt_s = seconds_since(t1);
  result.timing.per_episode_ms = 1000.0 * result.timing.adapt_s / static_cast<double>(total);
  result.report = metrics::aggregate(result.records);
  return result;
}

std::string episodes_jsonl(const RunResult& result) {
  std::string out;
  for (const auto& r : result.records) {
    out += metrics::to_json(r).dump();
    out += '\n';
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_run(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "episodes.jsonl", episodes_jsonl(result));

  Json report = metrics::to_json(result.report);
  report["method"] = std::string(sal::to_string(result.config.method));
  report["sampling"] = std::string(to_string(result.config.sampling));
  report["seed"] = result.seed;
  report["sample_k"] = result.sample_k;
  write_text(dir / "report.json", report.dump(2) + "\n");

  Json snapshot;
  snapshot["schema_version"] = kSchemaVersion;
  snapshot["code_version"] = kCodeVersion;
  snapshot["seed"] = result.seed;
  snapshot["config"] = to_json(result.config);
  write_text(dir / "config.json", snapshot.dump(2) + "\n");

  Json timing;
  timing["schema_version"] = kSchemaVersion;
  timing["pretrain_s"] = result.timing.pretrain_s;
  timing["adapt_s"] = result.timing.adapt_s;
  timing["per_episode_ms"] = result.timing.per_episode_ms;
  write_text(dir / "timing.json", timing.dump(2) + "\n");
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd m;
  if (values.empty()) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

std::vector<SweepCell> sweep(const ExperimentConfig& config, const SweepGrid& grid,
                             unsigned threads) {
  for (const auto& [key, values] : grid) {
    if (!has_field(key)) throw ConfigError("sweep grid field '" + key + "' is not a config field");
    if (values.empty()) throw ConfigError("sweep grid field '" + key + "' has no values");
  }
  // Cartesian product, last key varying fastest.
  std::vector<SweepCell> cells(1);
  for (const auto& [key, values] : grid) {
    std::vector<SweepCell> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        auto c = cell;
        c.assignment[key] = v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  std::vector<ExperimentConfig> configs;
  for (auto& cell : cells) {
    auto c = config;
    for (const auto& [key, value] : cell.assignment) set_field(c, key, value);
    cell.flagged = c.hyper.lambda >= 1.0 && (c.method == sal::Method::meo_al || c.method == sal::Method::atena);
    cell.reports.resize(c.seeds.size());
    configs.push_back(std::move(c));
  }

  struct Job {
    std::size_t cell;
    std::size_t seed_index;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t s = 0; s < configs[i].seeds.size(); ++s) jobs.push_back({i, s});

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& job = jobs[j];
      const auto& c = configs[job.cell];
      cells[job.cell].reports[job.seed_index] = run(c, c.seeds[job.seed_index]).report;
    }
  };
  std::vector<std::future<void>> pool;
  for (unsigned t = 1; t < threads; ++t) pool.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pool) f.get();
  return cells;
}

std::string sweep_csv(const SweepGrid& grid, const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  for (const auto& [key, _] : grid) out << key << ',';
  out << "flagged,seeds,sr_mean,sr_std,spl_mean,spl_std,osr_mean,osr_std,ne_mean,ne_std,"
         "tl_mean,tl_std,active_mean,active_std,self_accuracy_mean\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  for (const auto& cell : cells) {
    for (const auto& [key, _] : grid) {
      const auto& v = cell.assignment.at(key);
      out << (v.is_string() ? v.get<std::string>() : v.dump()) << ',';
    }
    std::vector<double> sr, spl, osr, ne, tl, active, acc;
    for (const auto& r : cell.reports) {
      sr.push_back(r.sr);
      spl.push_back(r.spl);
      osr.push_back(r.osr);
      ne.push_back(r.ne);
      tl.push_back(r.tl);
      active.push_back(r.active_episode_ratio);
      acc.push_back(r.confusion.accuracy());
    }
    const auto msr = mean_std(sr), mspl = mean_std(spl), mosr = mean_std(osr), mne = mean_std(ne),
               mtl = mean_std(tl), mact = mean_std(active);
    out << (cell.flagged ? 1 : 0) << ',' << cell.reports.size() << ',' << num(msr.mean) << ','
        << num(msr.stddev) << ',' << num(mspl.mean) << ',' << num(mspl.stddev) << ','
        << num(mosr.mean) << ',' << num(mosr.stddev) << ',' << num(mne.mean) << ','
        << num(mne.stddev) << ',' << num(mtl.mean) << ',' << num(mtl.stddev) << ','
        << num(mact.mean) << ',' << num(mact.stddev) << ',' << num(mean_std(acc).mean) << '\n';
  }
  return out.str();
}

std::string report(const std::vector<std::filesystem::path>& run_paths,
                   const std::filesystem::path& out_dir) {
  struct Entry {
    Json report;
    std::string label;
  };
  std::vector<Entry> entries;
  std::set<std::filesystem::path> seen;
  auto add = [&](const std::filesystem::path& report_path) {
    if (!seen.insert(std::filesystem::weakly_canonical(report_path)).second) return;
    std::ifstream in(report_path);
    Json r = Json::parse(in);
    std::string label = r.value("method", std::string("unknown"));
    const auto sampling = r.value("sampling", std::string("uncertainty"));
    if (sampling != "uncertainty") label += "/" + sampling;
    entries.push_back({std::move(r), std::move(label)});
  };
  for (const auto& p : run_paths) {
    if (std::filesystem::is_regular_file(p)) {
      add(p);
    } else if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> found;
      for (const auto& e : std::filesystem::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().filename() == "report.json") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      for (const auto& f : found) add(f);
    } else {
      throw std::runtime_error("report: no such path " + p.string());
    }
  }
  if (entries.empty()) throw std::runtime_error("report: no report.json found");

  std::map<std::string, std::vector<const Json*>> groups;
  std::vector<std::string> order;
  for (const auto& e : entries) {
    if (!groups.count(e.label)) order.push_back(e.label);
    groups[e.label].push_back(&e.report);
  }

  const std::vector<std::pair<std::string, double>> columns = {
      {"sr", 1.0}, {"osr", 1.0}, {"spl", 1.0}, {"tl", 1.0}, {"ne", 1.0}, {"active_episode_ratio", 100.0}};
  std::ostringstream text;
  std::ostringstream csv;
  Json summary = Json::array();
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-26s %5s %15s %15s %15s %13s %13s %15s\n", "method", "runs",
                "SR", "OSR", "SPL", "TL", "NE", "Active%");
  text << buf;
  csv << "method,runs";
  for (const auto& [name, _] : columns) csv << ',' << name << "_mean," << name << "_std";
  csv << ",self_accuracy_mean\n";
  for (const auto& label : order) {
    const auto& rs = groups[label];
    std::snprintf(buf, sizeof buf, "%-26s %5zu", label.c_str(), rs.size());
    text << buf;
    csv << label << ',' << rs.size();
    Json row;
    row["method"] = label;
    row["runs"] = rs.size();
    for (const auto& [name, scale] : columns) {
      std::vector<double> v;
      for (const auto* r : rs) v.push_back(r->at(name).get<double>() * scale);
      const auto ms = mean_std(v);
      std::snprintf(buf, sizeof buf, " %7.2f ± %5.2f", ms.mean, ms.stddev);
      text << buf;
      std::snprintf(buf, sizeof buf, ",%.4f,%.4f", ms.mean, ms.stddev);
      csv << buf;
      row[name + "_mean"] = ms.mean;
      row[name + "_std"] = ms.stddev;
    }
    std::vector<double> acc;
    Json confusion = {{"tp", 0}, {"fp", 0}, {"tn", 0}, {"fn", 0}};
    for (const auto* r : rs) {
      const auto& c = r->at("self_confusion");
      acc.push_back(c.at("accuracy").get<double>());
      for (const char* k : {"tp", "fp", "tn", "fn"})
        confusion[k] = confusion[k].get<std::size_t>() + c.at(k).get<std::size_t>();
    }
    std::snprintf(buf, sizeof buf, ",%.4f\n", mean_std(acc).mean);
    csv << buf;
    row["self_confusion_total"] = confusion;
    summary.push_back(row);
    text << '\n';
  }

  text << "\nself-prediction confusion (summed over runs)\n";
  std::snprintf(buf, sizeof buf, "%-26s %6s %6s %6s %6s %9s\n", "method", "TP", "FP", "TN", "FN",
                "accuracy");
  text << buf;
  for (const auto& row : summary) {
    const auto& c = row.at("self_confusion_total");
    const auto tp = c.at("tp").get<std::size_t>(), fp = c.at("fp").get<std::size_t>(),
               tn = c.at("tn").get<std::size_t>(), fn = c.at("fn").get<std::size_t>();
    if (tp + fp + tn + fn == 0) continue;
    std::snprintf(buf, sizeof buf, "%-26s %6zu %6zu %6zu %6zu %8.2f%%\n",
                  row.at("method").get<std::string>().c_str(), tp, fp, tn, fn,
                  100.0 * static_cast<double>(tp + tn) / static_cast<double>(tp + fp + tn + fn));
    text << buf;
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "summary.csv", csv.str());
    Json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["rows"] = summary;
    write_text(out_dir / "summary.json", doc.dump(2) + "\n");
  }
  return text.str();
}

}  // namespace atena::harness
