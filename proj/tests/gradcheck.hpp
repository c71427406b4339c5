#pragma once

// Central finite differences (h = 1e-3) of L = sum(G * logits), evaluated on
// the double-precision reference forward pass, against the library's
// backward pass. Configurations whose perturbations cross a ReLU or max-pool
// kink are discarded and replaced by a fresh draw.

#include <cstdint>
#include <string>

#include "reference.hpp"
#include "relstab/network.hpp"
#include "relstab/rng.hpp"

namespace gradcheck {

using namespace relstab;

enum class Target { kConv, kDense, kReLU, kMaxPool, kFlatten, kStack };

inline const char* target_name(Target t) {
  switch (t) {
    case Target::kConv: return "Conv2D";
    case Target::kDense: return "Dense";
    case Target::kReLU: return "ReLU";
    case Target::kMaxPool: return "MaxPool2";
    case Target::kFlatten: return "Flatten";
    case Target::kStack: return "stacked";
  }
  return "?";
}

struct Stats {
  std::size_t configs = 0;
  std::size_t discarded = 0;
  std::size_t components = 0;
  double worst = 0.0;
  std::string worst_where;
};

constexpr double kStep = 1e-3;
constexpr double kFloor = 1e-4;

struct Case {
  LayerChain chain;
  Shape input_shape;
  Tensor input;
  Params params;
  Tensor g;
};

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

inline Case draw_case(Target target, Rng& rng) {
  Case c;
  const std::size_t n = pick(rng, 1, 2);
  const std::size_t ch = pick(rng, 1, 3);
  const std::size_t h = pick(rng, 2, 7), w = pick(rng, 2, 7);
  const std::size_t k_out = pick(rng, 1, 3);
  switch (target) {
    case Target::kConv: {
      const std::size_t k = pick(rng, 1, std::min<std::size_t>(3, std::min(h, w)));
      const std::size_t p = pick(rng, 0, k - 1);
      const std::size_t o = pick(rng, 1, 3);
      const std::size_t oh = h + 2 * p - k + 1, ow = w + 2 * p - k + 1;
      c.chain = {LayerSpec::conv(ch, o, k, p), LayerSpec::flatten(),
                 LayerSpec::dense(o * oh * ow, k_out)};
      c.input_shape = {n, ch, h, w};
      break;
    }
    case Target::kDense: {
      const std::size_t f = pick(rng, 1, 12), m = pick(rng, 1, 6);
      c.chain = {LayerSpec::dense(f, m), LayerSpec::dense(m, k_out)};
      c.input_shape = {n, f};
      break;
    }
    case Target::kReLU:
      c.chain = {LayerSpec::relu(), LayerSpec::flatten(),
                 LayerSpec::dense(ch * h * w, k_out)};
      c.input_shape = {n, ch, h, w};
      break;
    case Target::kMaxPool:
      c.chain = {LayerSpec::max_pool(), LayerSpec::flatten(),
                 LayerSpec::dense(ch * (h / 2) * (w / 2), k_out)};
      c.input_shape = {n, ch, h, w};
      break;
    case Target::kFlatten:
      c.chain = {LayerSpec::flatten(), LayerSpec::dense(ch * h * w, k_out)};
      c.input_shape = {n, ch, h, w};
      break;
    case Target::kStack: {
      const std::size_t side = pick(rng, 4, 7), o = pick(rng, 1, 3);
      const std::size_t pooled = side / 2;
      c.chain = {LayerSpec::conv(ch, o), LayerSpec::relu(), LayerSpec::max_pool(),
                 LayerSpec::conv(o, 2), LayerSpec::relu(), LayerSpec::flatten(),
                 LayerSpec::dense(2 * pooled * pooled, 4), LayerSpec::relu(),
                 LayerSpec::dense(4, k_out)};
      c.input_shape = {n, ch, side, side};
      break;
    }
  }
  c.params = init_params(c.chain, rng);
  for (std::size_t t = 1; t < c.params.tensors.size(); t += 2)
    for (float& b : c.params.tensors[t].values())
      b = static_cast<float>(rng.uniform() - 0.5);
  c.input = Tensor(c.input_shape);
  for (float& v : c.input.values()) v = static_cast<float>(2.0 * rng.uniform() - 1.0);
  c.g = Tensor({n, k_out});
  for (float& v : c.g.values()) v = static_cast<float>(2.0 * rng.uniform() - 1.0);
  return c;
}

struct Objective {
  const Case& c;
  double value(const std::vector<std::vector<double>>& params,
               const std::vector<double>& input, std::vector<long>* pattern) const {
    reference::Forward f = reference::forward(c.chain, params, {c.input_shape, input});
    if (pattern) *pattern = f.pattern;
    double l = 0.0;
    for (std::size_t i = 0; i < f.out.v.size(); ++i) l += c.g[i] * f.out.v[i];
    return l;
  }
};

// Returns false when a perturbation crossed a kink.
inline bool check_case(const Case& c, Stats& stats, const std::string& label) {
  const ForwardResult fr = forward_pass(c.chain, c.params, c.input);
  const BackwardResult br = backward_pass(c.chain, c.params, fr.tape, c.g, true);

  std::vector<std::vector<double>> params = reference::to_double(c.params);
  std::vector<double> input(c.input.values().begin(), c.input.values().end());
  const Objective obj{c};
  std::vector<long> base, pattern;
  obj.value(params, input, &base);

  struct Pending {
    double analytic, numeric;
    std::string where;
  };
  std::vector<Pending> results;
  auto probe = [&](double& slot, double analytic, const std::string& where) {
    const double saved = slot;
    slot = saved + kStep;
    const double up = obj.value(params, input, &pattern);
    if (pattern != base) return false;
    slot = saved - kStep;
    const double down = obj.value(params, input, &pattern);
    if (pattern != base) return false;
    slot = saved;
    results.push_back({analytic, (up - down) / (2 * kStep), where});
    return true;
  };
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t].size(); ++i)
      if (!probe(params[t][i], br.grads.tensors[t][i],
                 "param " + std::to_string(t) + "[" + std::to_string(i) + "]"))
        return false;
  for (std::size_t i = 0; i < input.size(); ++i)
    if (!probe(input[i], br.input_grad[i], "input[" + std::to_string(i) + "]"))
      return false;

  for (const Pending& p : results) {
    const double e = reference::relative_error(p.analytic, p.numeric, kFloor);
    ++stats.components;
    if (e > stats.worst) {
      stats.worst = e;
      stats.worst_where = label + " " + p.where;
    }
  }
  return true;
}

inline Stats run(Target target, std::size_t configs, std::uint64_t seed) {
  Stats stats;
  Rng rng(seed);
  while (stats.configs < configs) {
    const Case c = draw_case(target, rng);
    if (check_case(c, stats, std::string(target_name(target)) + " config " +
                                 std::to_string(stats.configs)))
      ++stats.configs;
    else
      ++stats.discarded;
  }
  return stats;
}

}  // namespace gradcheck
