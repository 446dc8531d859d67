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

#include "gsf/gvf.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "gsf/augment.h"
#include "gsf/error.h"
#include "gsf/log.h"
#include "gsf/random.h"

namespace gsf {

CumulantKind parse_cumulant_kind(const std::string& s) {
  if (s == "reward") return CumulantKind::kReward;
  if (s == "sf") return CumulantKind::kSuccessorFeatures;
  if (s == "action") return CumulantKind::kActionIndicator;
  throw ConfigError("", "unknown cumulant '" + s + "' (expected reward, sf or action)");
}

std::string to_string(CumulantKind kind) {
  switch (kind) {
    case CumulantKind::kReward: return "reward";
    case CumulantKind::kSuccessorFeatures: return "sf";
    case CumulantKind::kActionIndicator: return "action";
  }
  return "?";
}

CumulantSpec make_cumulant(CumulantKind kind, std::size_t obs_dim, std::size_t num_actions,
                           std::size_t sf_dim, std::uint64_t seed) {
  CumulantSpec spec;
  spec.kind = kind;
  spec.num_actions = num_actions;
  switch (kind) {
    case CumulantKind::kReward:
      spec.dim = 1;
      break;
    case CumulantKind::kActionIndicator:
      spec.dim = num_actions;
      break;
    case CumulantKind::kSuccessorFeatures:
      if (sf_dim == 0) {
        spec.dim = obs_dim;
        break;
      }
      spec.dim = sf_dim;
      spec.projection = Tensor::matrix(obs_dim, sf_dim);
      Rng rng = make_rng(seed, streams::kCumulant);
      std::normal_distribution<double> n01(0.0, 1.0 / std::sqrt(static_cast<double>(obs_dim)));
      for (double& v : spec.projection.data()) v = n01(rng);
      break;
  }
  return spec;
}

std::vector<double> eval_cumulant(const CumulantSpec& spec, std::span<const double> obs,
                                  std::size_t action, double reward) {
  switch (spec.kind) {
    case CumulantKind::kReward:
      return {reward};
    case CumulantKind::kActionIndicator: {
      if (action >= spec.num_actions) {
        throw ContractError("action " + std::to_string(action) + " out of range for cumulant");
      }
      std::vector<double> v(spec.num_actions, 0.0);
      v[action] = 1.0;
      return v;
    }
    case CumulantKind::kSuccessorFeatures: {
      if (spec.projection.empty()) return {obs.begin(), obs.end()};
      if (obs.size() != spec.projection.nrows()) {
        throw ShapeError("successor-feature projection expects " +
                         std::to_string(spec.projection.nrows()) + " inputs, got " +
                         std::to_string(obs.size()));
      }
      std::vector<double> v(spec.dim, 0.0);
      for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i] == 0.0) continue;
        for (std::size_t d = 0; d < spec.dim; ++d) v[d] += obs[i] * spec.projection(i, d);
      }
      return v;
    }
  }
  return {};
}

double reduce_gvf(std::span<const double> v) {
  if (v.size() == 1) return v[0];
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

GvfSamples GvfSamples::subset_level(int level_id) const {
  const auto it = std::find(level_ids.begin(), level_ids.end(), level_id);
  if (it == level_ids.end()) {
    throw ContractError("GVF samples contain no level " + std::to_string(level_id));
  }
  const auto pos = static_cast<std::uint32_t>(it - level_ids.begin());
  GvfSamples out;
  out.obs_dim = obs_dim;
  out.obs_shape = obs_shape;
  out.level_ids = {level_id};
  out.cumulant_dim = cumulant_dim;
  std::map<std::size_t, std::size_t> remap;
  auto map_row = [&](std::size_t r) {
    auto [slot, inserted] = remap.emplace(r, remap.size());
    if (inserted) {
      const auto o = obs(r);
      out.obs_table.insert(out.obs_table.end(), o.begin(), o.end());
    }
    return slot->second;
  };
  for (std::size_t i = 0; i < size(); ++i) {
    if (level_pos[i] != pos) continue;
    out.level_pos.push_back(0);
    out.row.push_back(map_row(row[i]));
    out.next_row.push_back(next_row[i] < 0 ? -1
                                           : static_cast<long>(map_row(
                                                 static_cast<std::size_t>(next_row[i]))));
    const auto c = std::span<const double>(next_cumulant).subspan(i * cumulant_dim, cumulant_dim);
    out.next_cumulant.insert(out.next_cumulant.end(), c.begin(), c.end());
  }
  return out;
}

GvfSamples make_gvf_samples(const OfflineDataset& ds, CumulantSpec& spec) {
  GvfSamples s;
  const std::size_t cells = ds.family.mdp.num_cells();
  s.obs_dim = ds.obs_dim();
  s.obs_shape = {kNumChannels, ds.family.mdp.height, ds.family.mdp.width};
  s.obs_table = ds.obs_table;
  s.cumulant_dim = spec.dim;
  std::map<int, std::uint32_t> pos;
  for (const auto& l : ds.family.train) {
    pos[l.level_id] = static_cast<std::uint32_t>(s.level_ids.size());
    s.level_ids.push_back(l.level_id);
  }
  // Successor-feature cumulants depend only on the observation row.
  std::vector<std::vector<double>> row_cumulant;
  if (spec.kind == CumulantKind::kSuccessorFeatures) {
    row_cumulant.resize(s.num_rows());
    for (std::size_t r = 0; r < s.num_rows(); ++r) row_cumulant[r] = eval_cumulant(spec, s.obs(r), 0, 0.0);
  }
  double c_max = 0.0;
  const std::vector<double> zeros(spec.dim, 0.0);
  for (std::size_t i = 0; i < ds.transitions.size(); ++i) {
    const Transition& tr = ds.transitions[i];
    const long j = ds.successor(i);
    if (!tr.done && j < 0) continue;
    const std::uint32_t p = pos.at(tr.level_id);
    s.level_pos.push_back(p);
    s.row.push_back(p * cells + tr.state);
    if (tr.done) {
      s.next_row.push_back(-1);
      s.next_cumulant.insert(s.next_cumulant.end(), zeros.begin(), zeros.end());
      continue;
    }
    const Transition& nx = ds.transitions[static_cast<std::size_t>(j)];
    const std::size_t nrow = p * cells + nx.state;
    s.next_row.push_back(static_cast<long>(nrow));
    const std::vector<double> c = spec.kind == CumulantKind::kSuccessorFeatures
                                      ? row_cumulant[nrow]
                                      : eval_cumulant(spec, s.obs(nrow), nx.action, nx.reward);
    std::vector<double> absc(c.size());
    std::transform(c.begin(), c.end(), absc.begin(), [](double v) { return std::abs(v); });
    c_max = std::max(c_max, reduce_gvf(absc));
    s.next_cumulant.insert(s.next_cumulant.end(), c.begin(), c.end());
  }
  spec.c_max = c_max;
  return s;
}

namespace {

void rename_params(Mlp& net, const std::string& prefix) {
  for (Parameter* p : net.parameters()) {
    const auto dot = p->name.find('.');
    p->name = prefix + p->name.substr(dot);
  }
}

std::vector<std::size_t> widths(std::size_t first, const std::vector<std::size_t>& rest) {
  std::vector<std::size_t> w{first};
  w.insert(w.end(), rest.begin(), rest.end());
  return w;
}

}  // namespace

GvfModel::GvfModel(std::size_t obs_dim, std::vector<int> level_ids, std::size_t cumulant_dim,
                   const GvfConfig& config, Rng& rng)
    : obs_dim_(obs_dim),
      level_ids_(std::move(level_ids)),
      cumulant_dim_(cumulant_dim),
      encoder_layers_(config.encoder_layers),
      head_hidden_(config.head_hidden),
      head_bias_(config.head_bias) {
  if (level_ids_.empty()) throw ContractError("GVF model needs at least one level");
  const auto enc = widths(obs_dim, encoder_layers_);
  encoder_ = Mlp("gvf_enc", enc, rng, true, enc.size() > 1);
  auto head = widths(enc.back(), head_hidden_);
  head.push_back(num_levels() * cumulant_dim_);
  head_ = Mlp("gvf_head", head, rng, head_bias_);
  target_encoder_ = encoder_;
  target_head_ = head_;
  rename_params(target_encoder_, "gvf_target_enc");
  rename_params(target_head_, "gvf_target_head");
  mu = Tensor::matrix(num_levels(), cumulant_dim_, 0.0);
  nu = Tensor::matrix(num_levels(), cumulant_dim_, 1.0);
  sigma = Tensor::matrix(num_levels(), cumulant_dim_, 1.0);
}

std::size_t GvfModel::level_position(int level_id) const {
  const auto it = std::find(level_ids_.begin(), level_ids_.end(), level_id);
  if (it == level_ids_.end()) {
    throw ContractError("GVF model has no head for level " + std::to_string(level_id));
  }
  return static_cast<std::size_t>(it - level_ids_.begin());
}

Var GvfModel::forward(Graph& g, Var obs) { return head_.forward(g, encoder_.forward(g, obs)); }

Tensor GvfModel::predict_normalized(const Tensor& obs, bool target) const {
  return target ? target_head_.predict(target_encoder_.predict(obs))
                : head_.predict(encoder_.predict(obs));
}

Tensor GvfModel::predict(const Tensor& obs, std::span<const std::uint32_t> level_pos,
                         bool target) const {
  if (level_pos.size() != obs.nrows()) {
    throw ShapeError("GVF predict: " + std::to_string(level_pos.size()) + " level ids for " +
                     obs.shape_string() + " observations");
  }
  const Tensor n = predict_normalized(obs, target);
  const std::size_t dc = cumulant_dim_;
  Tensor out = Tensor::matrix(obs.nrows(), dc);
  for (std::size_t b = 0; b < obs.nrows(); ++b) {
    const std::size_t p = level_pos[b];
    for (std::size_t d = 0; d < dc; ++d) out(b, d) = sigma(p, d) * n(b, p * dc + d) + mu(p, d);
  }
  return out;
}

std::vector<Parameter*> GvfModel::online_parameters() {
  auto p = encoder_.parameters();
  auto h = head_.parameters();
  p.insert(p.end(), h.begin(), h.end());
  return p;
}

std::vector<Parameter*> GvfModel::target_parameters() {
  auto p = target_encoder_.parameters();
  auto h = target_head_.parameters();
  p.insert(p.end(), h.begin(), h.end());
  return p;
}

Linear& GvfModel::output_layer(bool target) {
  return target ? target_head_.layers().back() : head_.layers().back();
}

Checkpoint GvfModel::to_checkpoint() const {
  Checkpoint c;
  c.meta = nlohmann::json{{"kind", "gvf_model"},
                          {"obs_dim", obs_dim_},
                          {"level_ids", level_ids_},
                          {"cumulant_dim", cumulant_dim_},
                          {"encoder_layers", encoder_layers_},
                          {"head_hidden", head_hidden_},
                          {"head_bias", head_bias_}}
               .dump();
  auto& self = const_cast<GvfModel&>(*this);
  c.add(self.online_parameters());
  c.add(self.target_parameters());
  c.add("popart.mu", mu);
  c.add("popart.nu", nu);
  c.add("popart.sigma", sigma);
  return c;
}

GvfModel GvfModel::from_checkpoint(const Checkpoint& ckpt) {
  const auto meta = nlohmann::json::parse(ckpt.meta);
  if (meta.value("kind", "") != "gvf_model") throw IoError("checkpoint is not a GVF model");
  GvfConfig cfg;
  meta.at("encoder_layers").get_to(cfg.encoder_layers);
  meta.at("head_hidden").get_to(cfg.head_hidden);
  meta.at("head_bias").get_to(cfg.head_bias);
  Rng rng(0);
  GvfModel m(meta.at("obs_dim").get<std::size_t>(), meta.at("level_ids").get<std::vector<int>>(),
             meta.at("cumulant_dim").get<std::size_t>(), cfg, rng);
  ckpt.restore(m.online_parameters());
  ckpt.restore(m.target_parameters());
  m.mu = ckpt.get("popart.mu");
  m.nu = ckpt.get("popart.nu");
  m.sigma = ckpt.get("popart.sigma");
  return m;
}

void popart_update(GvfModel& model, std::span<const std::uint32_t> level_pos,
                   const Tensor& targets, double rate) {
  const std::size_t dc = model.cumulant_dim();
  if (targets.nrows() != level_pos.size() || targets.ncols() != dc) {
    throw ShapeError("popart_update: targets " + targets.shape_string() + " for " +
                     std::to_string(level_pos.size()) + " rows of dimension " +
                     std::to_string(dc));
  }
  const std::size_t m = model.num_levels();
  const bool shift = model.output_layer(false).has_bias();
  std::vector<std::size_t> count(m, 0);
  Tensor sum = Tensor::matrix(m, dc), sum_sq = Tensor::matrix(m, dc);
  for (std::size_t b = 0; b < level_pos.size(); ++b) {
    const std::size_t p = level_pos[b];
    ++count[p];
    for (std::size_t d = 0; d < dc; ++d) {
      sum(p, d) += targets(b, d);
      sum_sq(p, d) += targets(b, d) * targets(b, d);
    }
  }
  for (std::size_t p = 0; p < m; ++p) {
    if (count[p] == 0) continue;
    const double n = static_cast<double>(count[p]);
    for (std::size_t d = 0; d < dc; ++d) {
      const double mean = sum(p, d) / n;
      double var = 0.0;
      for (std::size_t b = 0; b < level_pos.size(); ++b) {
        if (level_pos[b] == p) var += (targets(b, d) - mean) * (targets(b, d) - mean);
      }
      const double mu_old = model.mu(p, d), sigma_old = model.sigma(p, d);
      const double mu_new = shift ? (1.0 - rate) * mu_old + rate * mean : 0.0;
      const double nu_new = (1.0 - rate) * model.nu(p, d) + rate * sum_sq(p, d) / n;
      double sigma_new = sigma_old;
      if (var > 0.0) sigma_new = std::max(1e-6, std::sqrt(std::max(nu_new - mu_new * mu_new, 0.0)));
      model.mu(p, d) = mu_new;
      model.nu(p, d) = nu_new;
      model.sigma(p, d) = sigma_new;
      const std::size_t col = p * dc + d;
      for (bool target : {false, true}) {
        Linear& out = model.output_layer(target);
        Tensor& w = out.weight().value;
        for (std::size_t r = 0; r < w.nrows(); ++r) w(r, col) *= sigma_old / sigma_new;
        if (!shift) continue;
        double& bias = out.bias().value[col];
        bias = (sigma_old * bias + mu_old - mu_new) / sigma_new;
      }
    }
  }
}

namespace {

Tensor gather_obs(const GvfSamples& s, std::span<const std::size_t> rows, std::size_t pad,
                  Rng* rng) {
  Tensor out = Tensor::matrix(rows.size(), s.obs_dim);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    auto dst = out.data().subspan(b * s.obs_dim, s.obs_dim);
    const auto src = s.obs(rows[b]);
    if (pad > 0 && rng != nullptr) {
      random_crop_into(src, dst, s.obs_shape, pad, *rng);
    } else {
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  return out;
}

std::string level_list(const std::vector<int>& ids) {
  std::string s;
  for (int id : ids) s += (s.empty() ? "" : ",") + std::to_string(id);
  return s;
}

}  // namespace

GvfTrainStats train_gvf_model(GvfModel& model, const GvfSamples& samples,
                              const GvfConfig& config, std::uint64_t seed) {
  if (config.iterations < 1) throw ContractError("GVF training needs >= 1 iteration");
  if (samples.size() == 0) throw ContractError("GVF training got no samples");
  if (samples.level_ids != model.level_ids()) {
    throw ContractError("GVF samples and model disagree on levels");
  }
  if (config.pad > 0 && samples.obs_shape[0] == 0) {
    throw ContractError("random crop needs image-shaped observations");
  }
  Rng rng = make_rng(derive_seed(seed, streams::kGvf), 1);
  Optimizer opt(model.online_parameters(), config.optimizer);
  const auto online = model.online_parameters();
  const auto target = model.target_parameters();
  const std::size_t dc = samples.cumulant_dim;
  const std::size_t width = model.num_levels() * dc;
  const std::size_t B = config.full_batch ? samples.size() : config.batch_size;
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  GvfTrainStats stats;
  stats.loss.reserve(config.iterations);
  std::vector<std::size_t> idx(B), rows(B), next_rows;
  std::vector<std::uint32_t> lp(B), next_lp;
  std::vector<std::size_t> next_of;  // batch position of each non-terminal row
  for (std::size_t it = 0; it < config.iterations; ++it) {
    for (std::size_t b = 0; b < B; ++b) {
      idx[b] = config.full_batch ? b : pick(rng);
      rows[b] = samples.row[idx[b]];
      lp[b] = samples.level_pos[idx[b]];
    }
    const Tensor obs = gather_obs(samples, rows, config.pad, &rng);
    next_rows.clear();
    next_lp.clear();
    next_of.clear();
    for (std::size_t b = 0; b < B; ++b) {
      if (samples.next_row[idx[b]] < 0) continue;
      next_rows.push_back(static_cast<std::size_t>(samples.next_row[idx[b]]));
      next_lp.push_back(lp[b]);
      next_of.push_back(b);
    }
    Tensor y = Tensor::matrix(B, dc, 0.0);
    if (!next_rows.empty()) {
      const Tensor g_next = model.predict(gather_obs(samples, next_rows, 0, nullptr), next_lp, true);
      for (std::size_t k = 0; k < next_of.size(); ++k) {
        const std::size_t b = next_of[k];
        for (std::size_t d = 0; d < dc; ++d) {
          y(b, d) = config.gamma * (samples.next_cumulant[idx[b] * dc + d] + g_next(k, d));
        }
      }
    }
    popart_update(model, lp, y, config.popart_rate);
    Tensor t_norm = Tensor::matrix(1, B * dc);
    std::vector<std::size_t> sel(B * dc);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t d = 0; d < dc; ++d) {
        t_norm[b * dc + d] = (y(b, d) - model.mu(lp[b], d)) / model.sigma(lp[b], d);
        sel[b * dc + d] = b * width + lp[b] * dc + d;
      }
    }
    Graph g;
    Var pred = gather_flat(model.forward(g, g.constant(obs)), sel);
    Var loss = mean(square(sub(pred, g.constant(std::move(t_norm)))));
    const double lv = loss.value().item();
    if (!std::isfinite(lv) || lv > config.divergence_limit) {
      throw NumericError("GVF training diverged at iteration " + std::to_string(it) +
                         " (levels " + level_list(model.level_ids()) + "): loss " +
                         std::to_string(lv));
    }
    g.backward(loss);
    opt.step();
    opt.zero_grad();
    ema_update(target, online, config.ema);
    stats.loss.push_back(lv);
    if ((it + 1) % 1000 == 0) {
      logger().debug("gvf [{}] iteration {} loss {:.6f}", level_list(model.level_ids()), it + 1,
                     lv);
    }
  }
  return stats;
}

GvfModel learn_gvf(const GvfSamples& samples, int level_id, const GvfConfig& config,
                   std::uint64_t seed, GvfTrainStats* stats) {
  const GvfSamples sub =
      samples.level_ids.size() == 1 && samples.level_ids[0] == level_id
          ? samples
          : samples.subset_level(level_id);
  Rng init = make_rng(seed, streams::kGvf);
  GvfModel model(sub.obs_dim, sub.level_ids, sub.cumulant_dim, config, init);
  auto st = train_gvf_model(model, sub, config, seed);
  if (stats != nullptr) *stats = std::move(st);
  return model;
}

Tensor GvfHeads::predict(int level_id, const Tensor& obs) const {
  if (joint) {
    const auto p = static_cast<std::uint32_t>(models.at(0).level_position(level_id));
    const std::vector<std::uint32_t> lp(obs.nrows(), p);
    return models[0].predict(obs, lp);
  }
  for (const auto& m : models) {
    if (m.level_ids().front() == level_id) {
      const std::vector<std::uint32_t> lp(obs.nrows(), 0);
      return m.predict(obs, lp);
    }
  }
  throw ContractError("no GVF head for level " + std::to_string(level_id));
}

std::vector<int> GvfHeads::level_ids() const {
  if (joint) return models.at(0).level_ids();
  std::vector<int> ids;
  for (const auto& m : models) ids.push_back(m.level_ids().front());
  return ids;
}

Checkpoint GvfHeads::to_checkpoint() const {
  Checkpoint c;
  nlohmann::json metas = nlohmann::json::array();
  for (std::size_t i = 0; i < models.size(); ++i) {
    const Checkpoint mc = models[i].to_checkpoint();
    metas.push_back(nlohmann::json::parse(mc.meta));
    for (const auto& [name, t] : mc.tensors) c.add("m" + std::to_string(i) + "/" + name, t);
  }
  if (!cumulant.projection.empty()) c.add("cumulant.projection", cumulant.projection);
  c.meta = nlohmann::json{{"kind", "gvf_heads"},
                          {"joint", joint},
                          {"cumulant",
                           {{"kind", to_string(cumulant.kind)},
                            {"dim", cumulant.dim},
                            {"num_actions", cumulant.num_actions},
                            {"c_max", cumulant.c_max}}},
                          {"models", metas}}
               .dump();
  return c;
}

GvfHeads GvfHeads::from_checkpoint(const Checkpoint& ckpt) {
  const auto meta = nlohmann::json::parse(ckpt.meta);
  if (meta.value("kind", "") != "gvf_heads") throw IoError("checkpoint is not a GVF head set");
  GvfHeads h;
  h.joint = meta.at("joint").get<bool>();
  const auto& cm = meta.at("cumulant");
  h.cumulant.kind = parse_cumulant_kind(cm.at("kind").get<std::string>());
  cm.at("dim").get_to(h.cumulant.dim);
  cm.at("num_actions").get_to(h.cumulant.num_actions);
  cm.at("c_max").get_to(h.cumulant.c_max);
  if (ckpt.contains("cumulant.projection")) h.cumulant.projection = ckpt.get("cumulant.projection");
  const auto& metas = meta.at("models");
  for (std::size_t i = 0; i < metas.size(); ++i) {
    Checkpoint mc;
    mc.meta = metas[i].dump();
    const std::string prefix = "m" + std::to_string(i) + "/";
    for (const auto& [name, t] : ckpt.tensors) {
      if (name.starts_with(prefix)) mc.add(name.substr(prefix.size()), t);
    }
    h.models.push_back(GvfModel::from_checkpoint(mc));
  }
  return h;
}

GvfHeads learn_all_gvfs(const GvfSamples& samples, const CumulantSpec& spec,
                        const GvfConfig& config, std::uint64_t seed) {
  StageTimer timer("train-gvf");
  GvfHeads heads;
  heads.cumulant = spec;
  heads.joint = config.joint;
  if (config.joint) {
    Rng init = make_rng(seed, streams::kGvf);
    GvfModel model(samples.obs_dim, samples.level_ids, samples.cumulant_dim, config, init);
    train_gvf_model(model, samples, config, seed);
    heads.models.push_back(std::move(model));
    return heads;
  }
  const std::size_t m = samples.level_ids.size();
  heads.models.resize(m);
  std::vector<std::exception_ptr> errors(m);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < m; i = next++) {
      const int id = samples.level_ids[i];
      try {
        heads.models[i] = learn_gvf(samples, id, config, derive_seed(seed, 1000 + static_cast<std::uint64_t>(id)));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(config.threads, m));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < m; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw NumericError("GVF level " + std::to_string(samples.level_ids[i]) + ": " + e.what());
    }
  }
  return heads;
}

double GvfValueTable::at(int level_id, std::size_t cell) const {
  const auto it = std::find(level_ids.begin(), level_ids.end(), level_id);
  if (it == level_ids.end()) throw ContractError("no GVF values for level " + std::to_string(level_id));
  return values[static_cast<std::size_t>(it - level_ids.begin()) * num_cells + cell];
}

GvfValueTable gvf_value_table(const GvfHeads& heads, const OfflineDataset& ds) {
  GvfValueTable t;
  t.num_cells = ds.family.mdp.num_cells();
  const std::size_t dim = ds.obs_dim();
  const double bound = heads.cumulant.c_max / (1.0 - ds.family.mdp.gamma) * 1.1;
  std::size_t violations = 0;
  for (const auto& l : ds.family.train) {
    t.level_ids.push_back(l.level_id);
    Tensor obs = Tensor::matrix(t.num_cells, dim);
    for (std::size_t c = 0; c < t.num_cells; ++c) {
      const auto row = ds.obs(l.level_id, c);
      std::copy(row.begin(), row.end(), obs.data().begin() + static_cast<long>(c * dim));
    }
    const Tensor g = heads.predict(l.level_id, obs);
    for (std::size_t c = 0; c < t.num_cells; ++c) {
      const double v = reduce_gvf(g.data().subspan(c * g.ncols(), g.ncols()));
      if (!ds.family.mdp.is_wall(c) && std::abs(v) > bound) ++violations;
      t.values.push_back(v);
    }
  }
  if (violations > 0) {
    logger().warn("{} GVF values exceed c_max/(1-gamma) by more than 10%", violations);
  }
  return t;
}

}  // namespace gsf
