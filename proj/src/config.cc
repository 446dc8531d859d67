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

#include "gsf/config.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gsf/error.h"

namespace gsf {

namespace {

using nlohmann::json;

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

// Walks one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }
  ~Reader() = default;

  const std::string& path() const { return path_; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void count(const std::string& key, std::size_t& dst) {
    if (const json* v = find(key)) dst = as_count(*v, join(path_, key));
  }
  void u64(const std::string& key, std::uint64_t& dst) {
    if (const json* v = find(key)) dst = as_count(*v, join(path_, key));
  }
  void real(const std::string& key, double& dst) {
    if (const json* v = find(key)) dst = as_real(*v, join(path_, key));
  }
  void boolean(const std::string& key, bool& dst) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(join(path_, key), "expected true or false");
      dst = v->get<bool>();
    }
  }
  void string(const std::string& key, std::string& dst) {
    if (const json* v = find(key)) dst = as_string(*v, join(path_, key));
  }
  void counts(const std::string& key, std::vector<std::size_t>& dst) {
    if (const json* v = find(key)) {
      const std::string p = join(path_, key);
      dst.clear();
      for (std::size_t i = 0; i < array(*v, p).size(); ++i) {
        dst.push_back(as_count((*v)[i], p + "[" + std::to_string(i) + "]"));
      }
    }
  }
  void seeds(const std::string& key, std::vector<std::uint64_t>& dst) {
    if (const json* v = find(key)) {
      const std::string p = join(path_, key);
      dst.clear();
      for (std::size_t i = 0; i < array(*v, p).size(); ++i) {
        dst.push_back(as_count((*v)[i], p + "[" + std::to_string(i) + "]"));
      }
    }
  }
  void reals(const std::string& key, std::vector<double>& dst) {
    if (const json* v = find(key)) {
      const std::string p = join(path_, key);
      dst.clear();
      for (std::size_t i = 0; i < array(*v, p).size(); ++i) {
        dst.push_back(as_real((*v)[i], p + "[" + std::to_string(i) + "]"));
      }
    }
  }
  void strings(const std::string& key, std::vector<std::string>& dst) {
    if (const json* v = find(key)) {
      const std::string p = join(path_, key);
      dst.clear();
      for (std::size_t i = 0; i < array(*v, p).size(); ++i) {
        dst.push_back(as_string((*v)[i], p + "[" + std::to_string(i) + "]"));
      }
    }
  }
  // Parses a string value with `parse`, re-throwing its error at this path.
  template <class T, class F>
  void choice(const std::string& key, T& dst, F parse) {
    if (const json* v = find(key)) {
      const std::string p = join(path_, key);
      try {
        dst = parse(as_string(*v, p));
      } catch (const ConfigError& e) {
        throw ConfigError(p, e.what());
      }
    }
  }
  template <class F>
  void object(const std::string& key, F body) {
    if (const json* v = find(key)) {
      Reader r(*v, join(path_, key));
      body(r);
      r.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }
  }

 private:
  static const json& array(const json& v, const std::string& p) {
    if (!v.is_array()) throw ConfigError(p, "expected an array");
    return v;
  }
  static std::uint64_t as_count(const json& v, const std::string& p) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      if (v.get<std::int64_t>() < 0) throw ConfigError(p, "must be non-negative");
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ConfigError(p, "expected a non-negative integer");
  }
  static double as_real(const json& v, const std::string& p) {
    if (!v.is_number()) throw ConfigError(p, "expected a number");
    return v.get<double>();
  }
  static std::string as_string(const json& v, const std::string& p) {
    if (!v.is_string()) throw ConfigError(p, "expected a string");
    return v.get<std::string>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_optimizer(Reader& r, OptimizerConfig& o) {
  r.choice("kind", o.kind, parse_optimizer_kind);
  r.real("learning_rate", o.learning_rate);
  r.real("beta1", o.beta1);
  r.real("beta2", o.beta2);
  r.real("epsilon", o.epsilon);
}

json optimizer_json(const OptimizerConfig& o) {
  return {{"kind", to_string(o.kind)},
          {"learning_rate", o.learning_rate},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon}};
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

void validate_optimizer(const OptimizerConfig& o, const std::string& p) {
  require(o.learning_rate > 0.0, p + ".learning_rate", "must be positive");
  require(o.beta1 >= 0.0 && o.beta1 < 1.0, p + ".beta1", "must be in [0, 1)");
  require(o.beta2 >= 0.0 && o.beta2 < 1.0, p + ".beta2", "must be in [0, 1)");
  require(o.epsilon > 0.0, p + ".epsilon", "must be positive");
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  RunConfig c;
  Reader r(doc, "");
  r.u64("seed", c.seed);
  r.string("out", c.out);
  r.count("threads", c.threads);
  r.object("family", [&](Reader& f) {
    f.count("train_levels", c.train_levels);
    f.count("test_levels", c.test_levels);
    f.count("width", c.family.width);
    f.count("height", c.family.height);
    f.real("wall_density", c.family.wall_density);
    f.count("num_starts", c.family.num_starts);
    f.real("gamma", c.family.gamma);
    f.count("max_steps", c.family.max_steps);
    f.real("distractor_fraction", c.family.distractor_fraction);
    f.real("noise_amplitude", c.family.noise_amplitude);
    f.count("max_retries", c.family.max_retries);
  });
  r.object("behavior", [&](Reader& b) {
    b.count("episodes", c.behavior.episodes);
    b.real("learning_rate", c.behavior.learning_rate);
    b.real("epsilon", c.behavior.epsilon);
  });
  r.object("dataset", [&](Reader& d) {
    d.count("total_steps", c.dataset.total_steps);
    d.real("eps_start", c.dataset.eps_start);
    d.real("eps_end", c.dataset.eps_end);
  });
  r.object("gvf", [&](Reader& g) {
    g.choice("cumulant", c.cumulant, parse_cumulant_kind);
    g.count("sf_dim", c.sf_dim);
    g.count("iterations", c.gvf.iterations);
    g.count("batch_size", c.gvf.batch_size);
    g.boolean("full_batch", c.gvf.full_batch);
    g.object("optimizer", [&](Reader& o) { read_optimizer(o, c.gvf.optimizer); });
    g.real("ema", c.gvf.ema);
    g.real("gamma", c.gvf.gamma);
    g.real("popart_rate", c.gvf.popart_rate);
    g.counts("encoder_layers", c.gvf.encoder_layers);
    g.counts("head_hidden", c.gvf.head_hidden);
    g.boolean("head_bias", c.gvf.head_bias);
    g.count("pad", c.gvf.pad);
    g.boolean("joint", c.gvf.joint);
    g.real("divergence_limit", c.gvf.divergence_limit);
  });
  r.object("agent", [&](Reader& a) {
    a.counts("encoder_hidden", c.agent.encoder_hidden);
    a.count("latent_dim", c.agent.latent_dim);
    a.counts("projection_hidden", c.agent.projection_hidden);
    a.count("batch_size", c.agent.batch_size);
    a.count("epochs", c.agent.epochs);
    a.count("steps_per_epoch", c.agent.steps_per_epoch);
    a.object("optimizer", [&](Reader& o) { read_optimizer(o, c.agent.optimizer); });
    a.count("K", c.agent.K);
    a.real("tau", c.agent.tau);
    a.real("lambda", c.agent.lambda);
    a.real("ema", c.agent.ema);
    a.real("gamma", c.agent.gamma);
    a.count("pad", c.agent.pad);
    a.choice("loss", c.agent.loss, parse_contrastive_loss);
    a.choice("label_mode", c.agent.label_mode, parse_label_mode);
  });
  r.object("eval", [&](Reader& e) {
    e.count("episodes_per_level", c.eval.episodes_per_level);
    e.count("max_steps", c.eval.max_steps);
    if (const json* v = e.find("splits")) {
      std::vector<std::string> names;
      json holder = json::object();
      holder["splits"] = *v;
      Reader wrap(holder, e.path());
      wrap.strings("splits", names);
      c.eval.splits.clear();
      for (std::size_t i = 0; i < names.size(); ++i) {
        try {
          c.eval.splits.push_back(parse_split(names[i]));
        } catch (const Error& err) {
          throw ConfigError(join(e.path(), "splits[" + std::to_string(i) + "]"), err.what());
        }
      }
    }
  });
  r.object("theory", [&](Reader& t) {
    t.counts("n", c.theory.bin_bound.n);
    t.counts("K", c.theory.bin_bound.K);
    t.reals("eps", c.theory.bin_bound.eps);
    t.reals("delta", c.theory.bin_bound.delta);
    if (const json* v = t.find("distributions")) {
      std::vector<std::string> names;
      json holder = json::object();
      holder["distributions"] = *v;
      Reader wrap(holder, t.path());
      wrap.strings("distributions", names);
      c.theory.bin_bound.distributions.clear();
      for (std::size_t i = 0; i < names.size(); ++i) {
        try {
          c.theory.bin_bound.distributions.push_back(parse_value_distribution(names[i]));
        } catch (const ConfigError& err) {
          throw ConfigError(join(t.path(), "distributions[" + std::to_string(i) + "]"),
                            err.what());
        }
      }
    }
    t.real("n2_ratio", c.theory.bin_bound.n2_ratio);
    t.real("gamma", c.theory.bin_bound.gamma);
    t.real("bad_gap", c.theory.bin_bound.bad_gap);
    t.count("trials", c.theory.bin_bound.trials);
    t.count("visitation_K", c.theory.visitation_K);
    t.boolean("reset_at_goal", c.theory.reset_at_goal);
  });
  r.object("experiment", [&](Reader& x) {
    x.strings("methods", c.experiment.methods);
    x.seeds("seeds", c.experiment.seeds);
    x.string("baseline", c.experiment.baseline);
    x.boolean("eval_each_epoch", c.experiment.eval_each_epoch);
  });
  r.object("gradcheck", [&](Reader& g) {
    g.count("instances", c.gradcheck.instances);
    g.real("h", c.gradcheck.h);
    g.real("tol", c.gradcheck.tol);
  });
  r.finish();
  c.gvf.threads = c.threads;
  validate(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "malformed JSON in " + path + ": " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& c) {
  json splits = json::array();
  for (Split s : c.eval.splits) splits.push_back(to_string(s));
  json dists = json::array();
  for (ValueDistribution d : c.theory.bin_bound.distributions) dists.push_back(to_string(d));
  return {
      {"seed", c.seed},
      {"out", c.out},
      {"threads", c.threads},
      {"family",
       {{"train_levels", c.train_levels},
        {"test_levels", c.test_levels},
        {"width", c.family.width},
        {"height", c.family.height},
        {"wall_density", c.family.wall_density},
        {"num_starts", c.family.num_starts},
        {"gamma", c.family.gamma},
        {"max_steps", c.family.max_steps},
        {"distractor_fraction", c.family.distractor_fraction},
        {"noise_amplitude", c.family.noise_amplitude},
        {"max_retries", c.family.max_retries}}},
      {"behavior",
       {{"episodes", c.behavior.episodes},
        {"learning_rate", c.behavior.learning_rate},
        {"epsilon", c.behavior.epsilon}}},
      {"dataset",
       {{"total_steps", c.dataset.total_steps},
        {"eps_start", c.dataset.eps_start},
        {"eps_end", c.dataset.eps_end}}},
      {"gvf",
       {{"cumulant", to_string(c.cumulant)},
        {"sf_dim", c.sf_dim},
        {"iterations", c.gvf.iterations},
        {"batch_size", c.gvf.batch_size},
        {"full_batch", c.gvf.full_batch},
        {"optimizer", optimizer_json(c.gvf.optimizer)},
        {"ema", c.gvf.ema},
        {"gamma", c.gvf.gamma},
        {"popart_rate", c.gvf.popart_rate},
        {"encoder_layers", c.gvf.encoder_layers},
        {"head_hidden", c.gvf.head_hidden},
        {"head_bias", c.gvf.head_bias},
        {"pad", c.gvf.pad},
        {"joint", c.gvf.joint},
        {"divergence_limit", c.gvf.divergence_limit}}},
      {"agent",
       {{"encoder_hidden", c.agent.encoder_hidden},
        {"latent_dim", c.agent.latent_dim},
        {"projection_hidden", c.agent.projection_hidden},
        {"batch_size", c.agent.batch_size},
        {"epochs", c.agent.epochs},
        {"steps_per_epoch", c.agent.steps_per_epoch},
        {"optimizer", optimizer_json(c.agent.optimizer)},
        {"K", c.agent.K},
        {"tau", c.agent.tau},
        {"lambda", c.agent.lambda},
        {"ema", c.agent.ema},
        {"gamma", c.agent.gamma},
        {"pad", c.agent.pad},
        {"loss", to_string(c.agent.loss)},
        {"label_mode", to_string(c.agent.label_mode)}}},
      {"eval",
       {{"episodes_per_level", c.eval.episodes_per_level},
        {"max_steps", c.eval.max_steps},
        {"splits", splits}}},
      {"theory",
       {{"n", c.theory.bin_bound.n},
        {"K", c.theory.bin_bound.K},
        {"eps", c.theory.bin_bound.eps},
        {"delta", c.theory.bin_bound.delta},
        {"distributions", dists},
        {"n2_ratio", c.theory.bin_bound.n2_ratio},
        {"gamma", c.theory.bin_bound.gamma},
        {"bad_gap", c.theory.bin_bound.bad_gap},
        {"trials", c.theory.bin_bound.trials},
        {"visitation_K", c.theory.visitation_K},
        {"reset_at_goal", c.theory.reset_at_goal}}},
      {"experiment",
       {{"methods", c.experiment.methods},
        {"seeds", c.experiment.seeds},
        {"baseline", c.experiment.baseline},
        {"eval_each_epoch", c.experiment.eval_each_epoch}}},
      {"gradcheck",
       {{"instances", c.gradcheck.instances}, {"h", c.gradcheck.h}, {"tol", c.gradcheck.tol}}},
  };
}

void validate(const RunConfig& c) {
  require(!c.out.empty(), "out", "must not be empty");
  require(c.threads >= 1, "threads", "must be >= 1");
  require(c.train_levels >= 1, "family.train_levels", "must be >= 1");
  require(c.test_levels >= 1, "family.test_levels", "must be >= 1");
  require(c.family.width >= 2, "family.width", "must be >= 2");
  require(c.family.height >= 2, "family.height", "must be >= 2");
  require(c.family.wall_density >= 0.0 && c.family.wall_density < 1.0, "family.wall_density",
          "must be in [0, 1)");
  require(c.family.num_starts >= 1, "family.num_starts", "must be >= 1");
  require(c.family.gamma > 0.0 && c.family.gamma < 1.0, "family.gamma", "must be in (0, 1)");
  require(c.family.max_steps >= 1, "family.max_steps", "must be >= 1");
  require(c.family.distractor_fraction >= 0.0 && c.family.distractor_fraction <= 1.0,
          "family.distractor_fraction", "must be in [0, 1]");
  require(c.family.noise_amplitude >= 0.0, "family.noise_amplitude", "must be >= 0");
  require(c.family.max_retries >= 1, "family.max_retries", "must be >= 1");

  require(c.behavior.episodes >= 1, "behavior.episodes", "must be >= 1");
  require(c.behavior.learning_rate > 0.0 && c.behavior.learning_rate <= 1.0,
          "behavior.learning_rate", "must be in (0, 1]");
  require(c.behavior.epsilon >= 0.0 && c.behavior.epsilon <= 1.0, "behavior.epsilon",
          "must be in [0, 1]");

  require(c.dataset.total_steps >= 1, "dataset.total_steps", "must be >= 1");
  require(c.dataset.eps_start >= 0.0 && c.dataset.eps_start <= 1.0, "dataset.eps_start",
          "must be in [0, 1]");
  require(c.dataset.eps_end >= 0.0 && c.dataset.eps_end <= 1.0, "dataset.eps_end",
          "must be in [0, 1]");

  require(c.sf_dim >= 1, "gvf.sf_dim", "must be >= 1");
  require(c.gvf.iterations >= 1, "gvf.iterations", "must be >= 1");
  require(c.gvf.batch_size >= 1, "gvf.batch_size", "must be >= 1");
  validate_optimizer(c.gvf.optimizer, "gvf.optimizer");
  require(c.gvf.ema > 0.0 && c.gvf.ema <= 1.0, "gvf.ema", "must be in (0, 1]");
  require(c.gvf.gamma >= 0.0 && c.gvf.gamma < 1.0, "gvf.gamma", "must be in [0, 1)");
  require(c.gvf.popart_rate > 0.0 && c.gvf.popart_rate <= 1.0, "gvf.popart_rate",
          "must be in (0, 1]");
  for (std::size_t w : c.gvf.encoder_layers) require(w >= 1, "gvf.encoder_layers", "widths must be >= 1");
  for (std::size_t w : c.gvf.head_hidden) require(w >= 1, "gvf.head_hidden", "widths must be >= 1");
  require(c.gvf.divergence_limit > 0.0, "gvf.divergence_limit", "must be positive");

  validate(c.agent);
  validate_optimizer(c.agent.optimizer, "agent.optimizer");

  require(c.eval.episodes_per_level >= 1, "eval.episodes_per_level", "must be >= 1");
  require(!c.eval.splits.empty(), "eval.splits", "must not be empty");

  const BinBoundConfig& t = c.theory.bin_bound;
  require(!t.n.empty(), "theory.n", "must not be empty");
  require(!t.K.empty(), "theory.K", "must not be empty");
  require(!t.eps.empty(), "theory.eps", "must not be empty");
  require(!t.delta.empty(), "theory.delta", "must not be empty");
  require(!t.distributions.empty(), "theory.distributions", "must not be empty");
  for (std::size_t n : t.n) require(n >= 1, "theory.n", "entries must be >= 1");
  for (std::size_t k : t.K) {
    require(k >= 1, "theory.K", "entries must be >= 1");
    for (std::size_t n : t.n) {
      require(k <= std::min<double>(n, std::round(n * t.n2_ratio)), "theory.K",
              "K=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
    }
  }
  for (double e : t.eps) require(e > 0.0, "theory.eps", "entries must be positive");
  for (double d : t.delta) require(d >= 0.0 && d <= 1.0, "theory.delta", "entries must be in [0, 1]");
  require(t.n2_ratio > 0.0, "theory.n2_ratio", "must be positive");
  require(t.gamma > 0.0 && t.gamma < 1.0, "theory.gamma", "must be in (0, 1)");
  require(t.bad_gap > 1.0, "theory.bad_gap", "must exceed 1");
  require(t.trials >= 1, "theory.trials", "must be >= 1");
  require(c.theory.visitation_K >= 1, "theory.visitation_K", "must be >= 1");

  require(!c.experiment.methods.empty(), "experiment.methods", "must not be empty");
  for (std::size_t i = 0; i < c.experiment.methods.size(); ++i) {
    const auto& m = c.experiment.methods[i];
    const auto& known = known_methods();
    require(std::find(known.begin(), known.end(), m) != known.end(),
            "experiment.methods[" + std::to_string(i) + "]",
            "unknown method '" + m + "' (expected gsf, cql or bc)");
  }
  require(!c.experiment.seeds.empty(), "experiment.seeds", "must not be empty");
  require(std::find(known_methods().begin(), known_methods().end(), c.experiment.baseline) !=
              known_methods().end(),
          "experiment.baseline", "unknown method '" + c.experiment.baseline + "'");

  require(c.gradcheck.instances >= 1, "gradcheck.instances", "must be >= 1");
  require(c.gradcheck.h > 0.0, "gradcheck.h", "must be positive");
  require(c.gradcheck.tol > 0.0, "gradcheck.tol", "must be positive");
}

void apply_override(json& doc, const std::string& dotted_key, const json& value) {
  if (dotted_key.empty()) throw ConfigError("", "empty override key");
  if (!doc.is_object()) doc = json::object();
  json* node = &doc;
  std::stringstream ss(dotted_key);
  std::string part, prefix;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    prefix = join(prefix, parts[i]);
    json& child = (*node)[parts[i]];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw ConfigError(prefix, "expected an object");
    node = &child;
  }
  (*node)[parts.back()] = value;
}

}  // namespace gsf
