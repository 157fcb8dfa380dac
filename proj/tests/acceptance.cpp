// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).
//
//   acceptance [out_dir]   out_dir receives lambda_sweep.csv (default: acceptance_out)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "atena/adapt.hpp"
#include "atena/harness.hpp"
#include "atena/meo.hpp"
#include "support.hpp"

using namespace atena;
namespace fs = std::filesystem;
namespace ref = atena::oracle_ref;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const char* id, const char* name, double budget_s, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0.0 && s > budget_s) {
    o.pass = false;
    o.detail += " [over time budget " + std::to_string(budget_s) + " s]";
  }
  if (!o.pass) ++failures;
  std::printf("%s %-4s %-44s %8.3f s  %s\n", o.pass ? "PASS" : "FAIL", id, name, s, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double entropy_ref(const std::vector<double>& p) {
  long double h = 0.0L;
  for (double v : p)
    if (v > 0.0) h -= static_cast<long double>(v) * std::log(static_cast<long double>(v));
  return static_cast<double>(h);
}

double bce_ref(double f, bool y) {
  const long double p = 1.0L / (1.0L + std::exp(-static_cast<long double>(f)));
  return static_cast<double>(y ? -std::log(p) : -std::log(1.0L - p));
}

class FixedOracle final : public oracle::HumanOracle {
 public:
  explicit FixedOracle(bool verdict) : verdict_(verdict) {}
  oracle::OracleAnswer query(const oracle::FeedbackRequest&, const oracle::FeedbackContext&) override {
    return {verdict_, oracle::Responder::human, false};
  }

 private:
  bool verdict_;
};

const std::vector<std::uint64_t> kSeeds{0, 1, 2};

// SR per seed for one method on the default suite.
std::vector<double> sr_per_seed(harness::ExperimentConfig c) {
  std::vector<double> out;
  for (auto seed : kSeeds) out.push_back(harness::run(c, seed).report.sr);
  return out;
}

double mean(const std::vector<double>& v) { return harness::mean_std(v).mean; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::create_directories(out_dir);
  const harness::ExperimentConfig defaults;

  criterion("C1", "mixture identity and strict increase", 1.0, [] {
    Rng rng(101);
    int bad = 0;
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const auto pi = ref::random_simplex(rng, 2 + rng.below(9));
      const double lambda = rng.uniform(1e-6, 1.0);
      const auto sel = policy::select_action(pi);
      const auto q = meo::mixture_distribution(pi, sel, lambda);
      const double err = std::abs(q[sel] - (lambda + (1.0 - lambda) * pi[sel]));
      worst = std::max(worst, err);
      if (err > 1e-12 || !(q[sel] > pi[sel])) ++bad;
    }
    return Outcome{bad == 0, fmt("1000 cases, %d violations, max err %.2e", bad, worst)};
  });

  criterion("C2", "argmax preserved, entropy monotone in lambda", 5.0, [] {
    Rng rng(102);
    int bad = 0;
    for (int t = 0; t < 1000; ++t) {
      const auto pi = ref::random_simplex(rng, 2 + rng.below(9));
      const auto sel = policy::select_action(pi);
      double prev = meo::entropy(pi);
      for (int g = 0; g <= 10; ++g) {
        const auto q = meo::mixture_distribution(pi, sel, 0.1 * g);
        const double h = meo::entropy(q);
        if (policy::select_action(q) != sel || h > prev + 1e-10) ++bad;
        prev = h;
      }
    }
    return Outcome{bad == 0, fmt("1000 distributions x 11 lambdas, %d violations", bad)};
  });

  criterion("C3", "MEO and self-head gradients vs finite diff", 0.0, [] {
    Rng rng(103);
    int bad = 0;
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
      const auto world = env::generate_world(1000 + c, 12, 4, 0.35);
      env::TaskStyle ts;
      ts.min_hops = 2;
      ts.success_radius = 1.0;
      ts.max_steps = 6;
      const auto task = env::generate_tasks(world, 1, 2000 + c, ts).front();
      const auto params = policy::PolicyParams::random(4, 4, 3000 + c, 0.6);
      const auto roll = policy::rollout(params, world, task);
      const double lambda = rng.uniform(0.0, 0.9);
      const double gamma = rng.uniform(0.2, 2.0);
      const bool label = rng.bernoulli(0.5);
      sal::SelfHead head = sal::SelfHead::zeros(4);
      for (auto& v : head.w) v = rng.uniform(-1.5, 1.5);
      head.b = rng.uniform(-0.5, 0.5);

      const auto memory = sal::memory_from_steps(roll.steps);
      const auto g_self = sal::self_loss_gradient(head, memory, label);
      std::vector<double> ds(4);
      for (std::size_t i = 0; i < 4; ++i) ds[i] = gamma / static_cast<double>(roll.steps.size()) * g_self.d_state_avg[i];
      const auto analytic =
          policy::backward(params, roll.steps, meo::mixture_loss_logit_grads(roll.steps, lambda, label),
                           std::vector<std::vector<double>>(roll.steps.size(), ds));
      auto loss = [&](const policy::PolicyParams& q) {
        const auto steps = policy::replay(q, world, task, roll.nodes, roll.stopped);
        double h = 0.0;
        std::vector<double> avg(4, 0.0);
        for (std::size_t t = 0; t < steps.size(); ++t) {
          auto mix = steps[t].dist.probs;
          for (auto& v : mix) v *= 1.0 - lambda;
          mix[roll.steps[t].selected] += lambda;
          h += entropy_ref(mix);
          for (std::size_t i = 0; i < 4; ++i) avg[i] += steps[t].hidden.state[i] / static_cast<double>(steps.size());
        }
        h /= static_cast<double>(steps.size());
        double f = head.b;
        for (std::size_t i = 0; i < 4; ++i) f += head.w[i] * avg[i];
        return (label ? h : -h) + gamma * bce_ref(f, label);
      };
      const auto numeric = ref::numeric_gradient(params, loss);
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        const double a = analytic.flat()[i];
        if (!ref::rel_close(a, numeric[i], 1e-6)) ++bad;
        const double scale = std::max(std::abs(a), std::abs(numeric[i]));
        if (scale > 1e-8) worst = std::max(worst, std::abs(a - numeric[i]) / scale);
      }
      // Head parameters.
      for (std::size_t i = 0; i < 4; ++i) {
        auto up = head, down = head;
        up.w[i] += 1e-4;
        down.w[i] -= 1e-4;
        const double num = (sal::self_loss(up, memory, label) - sal::self_loss(down, memory, label)) / 2e-4;
        if (!ref::rel_close(g_self.d_w[i], num, 1e-6)) ++bad;
      }
    }
    return Outcome{bad == 0, fmt("100 cases (D=4, F=4), %d mismatches, max rel err %.2e", bad, worst)};
  });

  criterion("C4", "directional update at recorded states", 30.0, [] {
    int violations = 0, states = 0;
    for (int c = 0; c < 50; ++c) {
      const auto world = env::generate_world(4000 + c, 12, 4, 0.35);
      env::TaskStyle ts;
      ts.min_hops = 2;
      ts.success_radius = 1.0;
      ts.max_steps = 6;
      const auto task = env::generate_tasks(world, 1, 5000 + c, ts).front();
      const auto params = policy::PolicyParams::random(4, 4, 6000 + c, 0.6);
      const auto roll = policy::rollout(params, world, task);
      for (bool verdict : {true, false}) {
        auto state = sal::make_state(params, {0.4, 0.0, 1.0, 1e-3});
        FixedOracle human(verdict);
        sal::adapt_episode(state, world, task, human, {}, {sal::Method::meo_al});
        const auto after = policy::replay(state.policy, world, task, roll.nodes, roll.stopped);
        for (std::size_t t = 0; t < after.size(); ++t) {
          const auto a = roll.steps[t].selected;
          const double before = roll.steps[t].dist.probs[a];
          const double now = after[t].dist.probs[a];
          ++states;
          if (verdict ? !(now > before) : !(now < before)) ++violations;
        }
      }
    }
    return Outcome{violations == 0,
                   fmt("50 episodes (D=4, F=4) x {success, failure}, %d of %d states violate", violations, states)};
  });

  criterion("C5", "routing exactness", 0.0, [&] {
    const auto r = harness::run(defaults, 0);
    int bad = 0;
    for (const auto& rec : r.records)
      if ((rec.route == "human") != (rec.mean_entropy > defaults.hyper.delta) ||
          (rec.source == "human") != (rec.mean_entropy > defaults.hyper.delta))
        ++bad;
    const bool tie = sal::route_oracle(defaults.hyper.delta, defaults.hyper.delta) == sal::Source::Agent;
    return Outcome{bad == 0 && tie && r.records.size() == 200,
                   fmt("%zu episodes, %d mismatches, tie routes to %s", r.records.size(), bad, tie ? "agent" : "human")};
  });

  // Method comparison on the default suite, filled by C6 and reused by C7.
  std::map<std::string, std::vector<double>> sr;
  double sr_none = 0.0, sr_em = 0.0, sr_emal = 0.0, sr_meo = 0.0, sr_atena = 0.0;

  criterion("C6", "method ordering on the default suite", 0.0, [&] {
    for (auto m : {sal::Method::none, sal::Method::entropy_min, sal::Method::entropy_min_al, sal::Method::meo_al,
                   sal::Method::atena}) {
      auto c = defaults;
      c.method = m;
      sr[std::string(sal::to_string(m))] = sr_per_seed(c);
    }
    sr_none = mean(sr["none"]), sr_em = mean(sr["entropy_min"]), sr_emal = mean(sr["entropy_min_al"]);
    sr_meo = mean(sr["meo_al"]), sr_atena = mean(sr["atena"]);
    const bool ok = sr_atena > sr_meo && sr_meo >= sr_emal && sr_emal > sr_none && sr_em <= sr_emal &&
                    sr_atena - sr_none >= 5.0;
    return Outcome{ok, fmt("SR atena %.2f, meo_al %.2f, entropy_min_al %.2f, none %.2f, entropy_min %.2f", sr_atena,
                           sr_meo, sr_emal, sr_none, sr_em)};
  });

  criterion("C7", "atena >= meo_al on every seed", 0.0, [&] {
    bool ok = true;
    std::string per;
    for (std::size_t i = 0; i < kSeeds.size(); ++i) {
      ok = ok && sr["atena"][i] >= sr["meo_al"][i];
      per += fmt("%s%.2f/%.2f", i ? ", " : "", sr["atena"][i], sr["meo_al"][i]);
    }
    ok = ok && sr_atena - sr_meo > 0.0;
    return Outcome{ok, "per seed atena/meo_al " + per + fmt(", mean gain %.2f", sr_atena - sr_meo)};
  });

  criterion("C8", "lambda sweep has an interior maximum", 0.0, [&] {
    harness::SweepGrid grid{{"lambda", {}}};
    for (int g = 0; g <= 10; ++g) grid[0].second.push_back(0.1 * g);
    const auto cells = harness::sweep(defaults, grid);
    const auto csv = harness::sweep_csv(grid, cells);
    std::ofstream(out_dir / "lambda_sweep.csv") << csv;
    std::vector<double> means;
    for (const auto& cell : cells) {
      std::vector<double> v;
      for (const auto& r : cell.reports) v.push_back(r.sr);
      means.push_back(mean(v));
    }
    std::size_t best = 1;
    for (std::size_t i = 1; i <= 9; ++i)
      if (means[i] > means[best]) best = i;
    const bool interior = means[best] > means[0] && means[best] > means[10];
    return Outcome{interior, fmt("SR(0) %.2f, best %.2f at lambda %.1f, SR(1) %.2f -> %s", means[0], means[best],
                                 0.1 * best, means[10], (out_dir / "lambda_sweep.csv").c_str())};
  });

  criterion("C9", "uncertainty sampling vs random_k / consecutive_k", 0.0, [&] {
    std::map<harness::Sampling, double> by;
    for (auto s : {harness::Sampling::uncertainty, harness::Sampling::random_k, harness::Sampling::consecutive_k}) {
      auto c = defaults;
      c.sampling = s;
      by[s] = mean(sr_per_seed(c));
    }
    const double u = by[harness::Sampling::uncertainty], r = by[harness::Sampling::random_k],
                 k = by[harness::Sampling::consecutive_k];
    return Outcome{u >= r && u >= k, fmt("SR uncertainty %.2f, random_k %.2f, consecutive_k %.2f", u, r, k)};
  });

  criterion("C10", "self-prediction head accuracy", 0.0, [&] {
    Rng rng(110);
    constexpr std::size_t kDim = 8;
    std::vector<double> u(kDim);
    double norm = 0.0;
    for (auto& v : u) v = rng.normal(), norm += v * v;
    for (auto& v : u) v /= std::sqrt(norm);
    sal::SelfHead head = sal::SelfHead::zeros(kDim);
    int correct = 0;
    for (int item = 0; item < 500; ++item) {
      std::vector<double> s(kDim);
      double margin = 0.0;
      do {
        margin = 0.0;
        for (std::size_t i = 0; i < kDim; ++i) s[i] = rng.uniform(-1, 1), margin += u[i] * s[i];
      } while (std::abs(margin) < 0.5);
      const bool y = margin > 0.0;
      sal::EpisodeMemory mem;
      mem.step_entropies = {0.0};
      mem.step_states = {s};
      if (item >= 400 && sal::self_predict(head, mem) == y) ++correct;
      const auto g = sal::self_loss_gradient(head, mem, y);
      for (std::size_t i = 0; i < kDim; ++i) head.w[i] -= 1e-2 * g.d_w[i];
      head.b -= 1e-2 * g.d_b;
    }
    const double stream = correct / 100.0;

    metrics::Confusion tail;
    for (auto seed : kSeeds) {
      const auto t = harness::run(defaults, seed).report.confusion_tail;
      tail.tp += t.tp, tail.fp += t.fp, tail.tn += t.tn, tail.fn += t.fn;
    }
    const double suite = tail.accuracy();
    return Outcome{stream >= 0.95 && suite >= 0.70,
                   fmt("separable stream %.1f%%, default suite last-100 %.1f%% (3 seeds pooled)", 100.0 * stream,
                       100.0 * suite)};
  });

  criterion("C11", "byte-identical logs across runs", 0.0, [&] {
    const auto a = out_dir / "determinism_a", b = out_dir / "determinism_b";
    fs::remove_all(a);
    fs::remove_all(b);
    harness::write_run(harness::run(defaults, 0), a);
    harness::write_run(harness::run(defaults, 0), b);
    int differ = 0;
    for (const char* f : {"episodes.jsonl", "report.json", "config.json"})
      if (slurp(a / f) != slurp(b / f) || slurp(a / f).empty()) ++differ;
    return Outcome{differ == 0, fmt("%d of 3 files differ (timing.json excluded)", differ)};
  });

  std::printf("%d criteria failed\n", failures);
  return failures;
}
