// Copyright 2026 The GSF Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance [--work DIR] [--e2e-config FILE] [--strict] [N ...]
//
// Exit status is non-zero when a criterion fails, except for criteria listed
// in kKnownFailures (documented deviations) unless --strict is given.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gsf/agent.h"
#include "gsf/config.h"
#include "gsf/dataset.h"
#include "gsf/evalbench.h"
#include "gsf/gradcheck.h"
#include "gsf/gvf.h"
#include "gsf/nn.h"
#include "gsf/pipeline.h"
#include "gsf/quantile.h"
#include "gsf/random.h"
#include "gsf/theory.h"
#include "tabular.h"

namespace gsf {
namespace {

namespace fs = std::filesystem;

// The printed visitation sandwich does not hold (see README).
const std::set<int> kKnownFailures = {6};

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Context {
  fs::path work;
  std::string e2e_config;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Brute force over the definition: the smallest sample g with
// #{x <= g} / n >= p.
struct BruteQuantile {
  std::vector<double> xs;
  std::vector<double> cdf;
  explicit BruteQuantile(std::vector<double> v) : xs(std::move(v)), cdf(xs.size()) {
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      std::size_t c = 0;
      for (double x : xs) c += x <= xs[i];
      cdf[i] = static_cast<double>(c) / n;
    }
  }
  double operator()(double p) const {
    bool found = false;
    double best = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (p <= cdf[i] && (!found || xs[i] < best)) {
        best = xs[i];
        found = true;
      }
    }
    return best;
  }
};

std::vector<int> brute_labels(const std::vector<double>& xs, std::size_t K) {
  const BruteQuantile q(xs);
  std::vector<double> b(K + 1);
  for (std::size_t k = 0; k <= K; ++k) b[k] = q(static_cast<double>(k) / static_cast<double>(K));
  std::vector<int> out;
  for (double g : xs) {
    int label = 0;
    for (std::size_t k = 1; k <= K; ++k) {
      if (b[k - 1] <= g && g <= b[k]) label = static_cast<int>(k);
    }
    out.push_back(label);
  }
  return out;
}

std::vector<double> random_values(Rng& rng, std::size_t n, bool ties) {
  std::vector<double> xs(n);
  if (ties) {
    std::uniform_int_distribution<int> u(0, std::max<int>(1, static_cast<int>(n) / 5));
    for (double& x : xs) x = 0.25 * u(rng);
  } else {
    std::normal_distribution<double> g(0.0, 2.0);
    for (double& x : xs) x = g(rng);
  }
  return xs;
}

Outcome criterion_1(const Context&) {
  Rng rng(101);
  std::uniform_int_distribution<std::size_t> size(1, 500), kk(1, 20);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::size_t mismatches = 0;
  double impl_seconds = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = size(rng);
    const std::size_t K = std::min(kk(rng), n);
    const auto xs = random_values(rng, n, rep % 2 == 0);
    std::vector<double> ps{0.0, 1.0, 0.5};
    for (int i = 0; i < 5; ++i) ps.push_back(u01(rng));
    for (std::size_t k = 0; k <= K; ++k) ps.push_back(static_cast<double>(k) / K);

    const auto t0 = std::chrono::steady_clock::now();
    const EmpiricalQuantile eq(xs);
    std::vector<double> got;
    for (double p : ps) got.push_back(eq.quantile(p));
    const std::vector<int> levels(n, 0);
    const auto labels = assign_labels(levels, xs, K).labels;
    impl_seconds += seconds_since(t0);

    const BruteQuantile bq(xs);
    for (std::size_t i = 0; i < ps.size(); ++i) mismatches += got[i] != bq(ps[i]);
    mismatches += labels != brute_labels(xs, K);
  }
  return {mismatches == 0 && impl_seconds < 10.0,
          fmt("1000 sets, %zu mismatches, implementation time %.3f s", mismatches, impl_seconds)};
}

Outcome criterion_2(const Context&) {
  Rng rng(202);
  std::uniform_int_distribution<int> grid(-400, 400), nlev(1, 6), per(7, 150);
  std::size_t differing = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<int> levels;
    std::vector<double> xs;
    const int m = nlev(rng);
    for (int l = 0; l < m; ++l) {
      const int count = per(rng);
      for (int i = 0; i < count; ++i) {
        levels.push_back(10 * l + 3);
        xs.push_back(grid(rng) * 0.01);
      }
    }
    const auto base = assign_labels(levels, xs, 7).labels;
    const std::vector<std::function<double(double)>> transforms{
        [](double x) { return 2.5 * x - 7.0; },
        [](double x) { return x * x * x + x; },
        [](double x) { return std::exp(x); }};
    for (const auto& t : transforms) {
      std::vector<double> ys;
      std::transform(xs.begin(), xs.end(), std::back_inserter(ys), t);
      differing += assign_labels(levels, ys, 7).labels != base;
    }
  }
  return {differing == 0, fmt("100 datasets x 3 transforms, %zu label vectors differ", differing)};
}

Outcome criterion_3(const Context&) {
  std::vector<GradCaseFactory> cases = op_grad_cases();
  const auto& losses = loss_gradient_cases();
  cases.insert(cases.end(), losses.begin(), losses.end());
  Rng rng = make_rng(303, streams::kGradcheck);
  double worst = 0.0;
  std::string worst_name;
  std::size_t failed = 0;
  for (const auto& f : cases) {
    for (int i = 0; i < 50; ++i) {
      auto c = f.make(rng);
      const auto r = gradient_check(c->loss, c->params(), 1e-5, 1e-4);
      failed += !r.passed;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_name = f.name;
      }
    }
  }
  return {failed == 0, fmt("%zu cases x 50 instances, %zu failed, max rel error %.2e (%s)",
                           cases.size(), failed, worst, worst_name.c_str())};
}

Outcome criterion_4(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const Family f = generate_family(3, 1, 1);
  const std::vector<testing::TabularChain> chains{testing::cycle_chain(7), testing::line_chain(9),
                                                  testing::grid_chain(f.mdp)};
  double worst = 0.0;
  std::string where;
  for (const auto& t : chains) {
    for (auto kind : {CumulantKind::kReward, CumulantKind::kSuccessorFeatures,
                      CumulantKind::kActionIndicator}) {
      CumulantSpec spec = make_cumulant(kind, t.size(), 4, 0, 1);
      const GvfSamples s = testing::tabular_samples(t, spec);
      const GvfHeads h = learn_all_gvfs(s, spec, testing::tabular_gvf_config(s, 3000), 1);
      const auto want = testing::tabular_oracle(t, kind, 0.99);
      Tensor obs = Tensor::matrix(s.num_rows(), s.obs_dim);
      std::copy(s.obs_table.begin(), s.obs_table.end(), obs.data().begin());
      const Tensor g = h.predict(0, obs);
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (!t.sampled[i]) continue;
        for (std::size_t d = 0; d < g.ncols(); ++d) {
          const double e = std::abs(g(i, d) - want[i][d]);
          if (e > worst) {
            worst = e;
            where = t.name + "/" + to_string(kind);
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-3 && secs < 120.0,
          fmt("cycle, chain, %zux%zu grid x 3 cumulants: max error %.2e (%s), %.1f s",
              f.mdp.width, f.mdp.height, worst, where.c_str(), secs)};
}

Outcome criterion_5(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const BinBoundReport r = verify_bin_bound(BinBoundConfig{}, 505);
  const double secs = seconds_since(t0);
  double worst_margin = -1e300;
  for (const auto& p : r.points) {
    if (!p.vacuous) worst_margin = std::max(worst_margin, p.freq_max_k - p.bound - 3.0 * p.se);
  }
  return {r.passed() && secs < 300.0,
          fmt("%zu points: %zu checked, %zu vacuous, %zu failed, worst freq-bound-3se %.4f, %.1f s",
              r.points.size(), r.checked, r.vacuous, r.failed, worst_margin, secs)};
}

Outcome criterion_6(const Context& ctx) {
  RunConfig c;
  c.out = (ctx.work / "c6").string();
  const OfflineDataset ds = stage_gen_data(c);
  const VisitationReport r =
      verify_visitation(ds, nullptr, 7, c.family.gamma, 606, c.theory.reset_at_goal);
  const bool ok = r.monotone_passed && r.printed_sandwich_passed();
  return {ok, fmt("(a) spearman %.3f p %.4f %s; (b) printed sandwich %zu/%zu states violate, "
                  "sign-corrected sandwich %zu violate",
                  r.spearman, r.p_value, r.monotone_passed ? "ok" : "not met",
                  r.printed_violations, r.rows.size(), r.violations)};
}

Tensor normal_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> n01;
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = n01(rng);
  return t;
}

Outcome criterion_7(const Context&) {
  Rng rng(707);
  const std::size_t obs_dim = 40, A = 4, B = 64;
  AgentParams p(obs_dim, A, AgentConfig{}, rng);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    QBatch b;
    b.obs = normal_matrix(rng, B, obs_dim);
    b.next_obs = normal_matrix(rng, B, obs_dim);
    b.mu = Tensor::matrix(B, A);
    std::uniform_int_distribution<std::size_t> act(0, A - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t r = 0; r < B; ++r) {
      b.actions.push_back(act(rng));
      b.rewards.push_back(u(rng) < 0.1 ? 1.0 : 0.0);
      b.not_done.push_back(u(rng) < 0.9 ? 1.0 : 0.0);
      for (std::size_t a = 0; a < A; ++a) b.mu(r, a) = 0.1 / A + (a == b.actions[r] ? 0.9 : 0.0);
    }
    auto grads = [&](const std::function<Var(Graph&)>& f) {
      zero_grads(p.all_parameters());
      Graph g;
      g.backward(f(g));
      std::vector<Tensor> out;
      for (Parameter* q : p.q_parameters()) out.push_back(q->grad);
      return out;
    };
    // Plain fitted Q written out here: mean (Q(o,a) - r - gamma max Q'(o'))^2.
    const Tensor qn = p.q_values(b.next_obs, true);
    Tensor y = Tensor::matrix(B, 1);
    for (std::size_t r = 0; r < B; ++r) {
      double best = qn(r, 0);
      for (std::size_t a = 1; a < A; ++a) best = std::max(best, qn(r, a));
      y[r] = b.rewards[r] + 0.99 * b.not_done[r] * best;
    }
    const auto fitted = grads([&](Graph& g) {
      Var q = matmul(p.encoder.forward(g, g.constant(b.obs)), g.param(p.theta_a));
      return mean(square(sub(pick(q, b.actions), g.constant(y))));
    });
    const auto cql = grads([&](Graph& g) { return loss_cql(g, p, b, 0.0, 0.99); });
    for (std::size_t k = 0; k < cql.size(); ++k) {
      for (std::size_t i = 0; i < cql[k].size(); ++i) {
        worst = std::max(worst, std::abs(cql[k][i] - fitted[k][i]));
      }
    }
  }
  return {worst <= 1e-12, fmt("10 minibatches, max |grad difference| %.2e", worst)};
}

Outcome criterion_8(const Context&) {
  Rng rng(808);
  GvfModel model(24, {0, 1, 2}, 4, GvfConfig{}, rng);
  const std::size_t B = 30;
  const Tensor obs = normal_matrix(rng, B, 24);
  std::vector<std::uint32_t> lp(B);
  for (std::size_t i = 0; i < B; ++i) lp[i] = static_cast<std::uint32_t>(i % 3);
  std::uniform_real_distribution<double> expo(-3.0, 3.0);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Tensor before = model.predict(obs, lp), before_t = model.predict(obs, lp, true);
    Tensor y = Tensor::matrix(B, 4);
    const double s = std::pow(10.0, expo(rng));
    for (double& v : y.data()) v = s * (n01(rng) + 1.0);
    popart_update(model, lp, y, 0.05);
    const Tensor after = model.predict(obs, lp), after_t = model.predict(obs, lp, true);
    for (std::size_t i = 0; i < before.size(); ++i) {
      worst = std::max({worst, std::abs(after[i] - before[i]), std::abs(after_t[i] - before_t[i])});
    }
  }
  return {worst <= 1e-10, fmt("1000 updates, max prediction change %.2e", worst)};
}

Outcome criterion_9(const Context&) {
  AgentConfig cfg;
  cfg.K = 7;
  Rng rng(909);
  AgentParams zero(30, 4, cfg, rng);
  zero.W.value.fill(0.0);
  Graph g0;
  const std::vector<int> some{1, 4, 7, 7, 2, 5};
  const double at_zero =
      loss_nce(g0, zero, zero.encode(g0, g0.constant(normal_matrix(rng, 6, 30))), some, cfg.tau)
          .value()
          .item();
  const double zero_err = std::abs(at_zero - std::log(7.0));

  std::size_t non_decreasing = 0;
  double first = 0.0, last = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng r(seed);
    AgentParams p(16, 4, cfg, r);
    const Tensor obs = normal_matrix(r, 128, 16);
    const Tensor dir = normal_matrix(r, 16, 7);
    const Tensor scores = matmul(obs, dir);
    std::vector<int> labels;
    for (std::size_t i = 0; i < 128; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < 7; ++c) best = scores(i, c) > scores(i, best) ? c : best;
      labels.push_back(static_cast<int>(best) + 1);
    }
    Optimizer opt(p.nce_parameters(), {OptimizerKind::kSgd, 0.05});
    double prev = 1e300;
    for (int step = 0; step < 100; ++step) {
      Graph g;
      opt.zero_grad();
      Var l = loss_nce(g, p, p.encode(g, g.constant(obs)), labels, cfg.tau);
      const double v = l.value().item();
      if (step == 0 && seed == 1) first = v;
      non_decreasing += !(v < prev);
      prev = last = v;
      g.backward(l);
      opt.step();
    }
  }
  return {zero_err <= 1e-10 && non_decreasing == 0,
          fmt("zeroed classifier |loss - ln 7| %.1e; 5 seeds x 100 steps, %zu non-decreasing "
              "steps (seed 1 start %.4f)",
              zero_err, non_decreasing, first)};
}

Outcome criterion_10(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig c = load_run_config(ctx.e2e_config);
  c.out = (ctx.work / "e2e").string();
  fs::remove_all(c.out);
  run_stage(c, "pipeline");
  const Comparison cmp = compare(read_eval_csv(paths::eval_csv(c)), c.experiment.baseline);
  const double secs = seconds_since(t0);
  auto med = [&](const std::string& m) {
    for (const auto& r : cmp.rows) {
      if (r.method == m && r.split == Split::kTest) return r.median_return;
    }
    return std::nan("");
  };
  const double gsf = med("gsf"), cql = med("cql"), bc = med("bc");
  return {gsf >= cql && gsf >= bc && secs < 1800.0,
          fmt("median test return gsf %.4f, cql %.4f, bc %.4f over %zu seeds, %.0f s", gsf, cql,
              bc, c.experiment.seeds.size(), secs)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome criterion_11(const Context& ctx) {
  nlohmann::json doc = nlohmann::json::parse(slurp(ctx.e2e_config));
  apply_override(doc, "family.train_levels", 4);
  apply_override(doc, "family.test_levels", 3);
  apply_override(doc, "dataset.total_steps", 8000);
  apply_override(doc, "gvf.iterations", 300);
  apply_override(doc, "agent.epochs", 3);
  apply_override(doc, "agent.steps_per_epoch", 40);
  apply_override(doc, "experiment.seeds", nlohmann::json::array({1, 2}));
  std::vector<fs::path> roots;
  for (const char* name : {"det_a", "det_b"}) {
    RunConfig c = parse_run_config(doc);
    c.out = (ctx.work / name).string();
    fs::remove_all(c.out);
    run_stage(c, "pipeline");
    roots.emplace_back(c.out);
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(roots[0])) {
    const std::string ext = e.path().extension().string();
    if (ext != ".csv") continue;
    const fs::path other = roots[1] / fs::relative(e.path(), roots[0]);
    ++compared;
    differing += !fs::exists(other) || slurp(e.path()) != slurp(other);
  }
  return {compared > 0 && differing == 0,
          fmt("%zu CSV files compared across two runs, %zu differ", compared, differing)};
}

}  // namespace
}  // namespace gsf

int main(int argc, char** argv) {
  using namespace gsf;
  CLI::App app{"acceptance checks"};
  Context ctx;
  std::string work = (fs::temp_directory_path() / "gsf_acceptance").string();
  ctx.e2e_config = GSF_E2E_CONFIG;
  bool strict = false;
  std::vector<int> only;
  app.add_option("--work", work, "scratch directory");
  app.add_option("--e2e-config", ctx.e2e_config, "config for the end-to-end run")
      ->check(CLI::ExistingFile);
  app.add_flag("--strict", strict, "known deviations also fail the run");
  app.add_option("criteria", only, "criteria to run (default: all)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  ctx.work = work;
  fs::create_directories(ctx.work);

  const std::vector<std::function<Outcome(const Context&)>> checks{
      criterion_1, criterion_2, criterion_3, criterion_4,  criterion_5, criterion_6,
      criterion_7, criterion_8, criterion_9, criterion_10, criterion_11};
  std::vector<std::string> lines;
  int blocking = 0;
  for (int n = 1; n <= 11; ++n) {
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    Outcome o;
    try {
      o = checks[static_cast<std::size_t>(n - 1)](ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const bool known = kKnownFailures.count(n) > 0;
    std::string line = fmt("%s criterion %d: ", o.passed ? "PASS" : "FAIL", n) + o.detail;
    if (!o.passed && known) line += " [known deviation]";
    if (!o.passed && (strict || !known)) ++blocking;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    lines.push_back(line);
  }
  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  return blocking == 0 ? 0 : 1;
}
