#include "relstab/rssa.hpp"

#include <algorithm>
#include <cmath>

#include "relstab/errors.hpp"
#include "relstab/keyvalue.hpp"

namespace relstab {

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  if (size == 0 || !(sigma > 0.0))
    throw ConfigError("window size must be >= 1 and sigma > 0");
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  std::vector<double> w(size * size);
  double total = 0.0;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) - center;
      const double dx = static_cast<double>(x) - center;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      w[y * size + x] = v;
      total += v;
    }
  for (double& v : w) v /= total;
  return w;
}

NormalizedMap normalize_map(const Tensor& map) {
  if (map.empty()) throw InputError("cannot normalize an empty map");
  const auto [lo_it, hi_it] =
      std::minmax_element(map.values().begin(), map.values().end());
  const double lo = *lo_it, hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw InputError("relevance map contains non-finite values");
  NormalizedMap out{map, false};
  if (hi == lo) {
    out.values.fill(0.5f);
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < map.size(); ++i)
    out.values[i] =
        static_cast<float>((static_cast<double>(map[i]) - lo) / (hi - lo));
  return out;
}

PatchMoments patch_moments(std::span<const double> x, std::span<const double> y,
                           std::span<const double> weights) {
  if (x.size() != y.size() || x.size() != weights.size())
    throw InputError("patch sizes differ");
  PatchMoments m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mean_x += weights[i] * x[i];
    m.mean_y += weights[i] * y[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mean_x, dy = y[i] - m.mean_y;
    m.var_x += weights[i] * (dx * dx);
    m.var_y += weights[i] * (dy * dy);
    m.cov += weights[i] * (dx * dy);
  }
  return m;
}

SsimTerms ssim_terms(const PatchMoments& m, const SsimConstants& k) {
  const double c1 = k.c1(), c2 = k.c2(), c3 = k.c3();
  const double sx = std::sqrt(std::max(m.var_x, 0.0));
  const double sy = std::sqrt(std::max(m.var_y, 0.0));
  SsimTerms t;
  t.luminance = (2.0 * m.mean_x * m.mean_y + c1) /
                (m.mean_x * m.mean_x + m.mean_y * m.mean_y + c1);
  t.contrast = (2.0 * sx * sy + c2) / (m.var_x + m.var_y + c2);
  t.structure = (m.cov + c3) / (sx * sy + c3);
  return t;
}

namespace {

struct PreparedPair {
  std::size_t h = 0, w = 0;
  std::vector<double> a, b;
  bool degenerate = false;
};

PreparedPair prepare(const Tensor& a, const Tensor& b,
                     const RssaOptions& options) {
  if (a.shape() != b.shape())
    throw InputError("RSSA needs equal shapes, got " + shape_string(a.shape()) +
                     " and " + shape_string(b.shape()));
  const Shape& s = a.shape();
  if (!(s.size() == 2 || (s.size() == 3 && s[0] == 1)))
    throw InputError("RSSA expects [H,W] maps, got " + shape_string(s));
  PreparedPair p;
  p.h = s[s.size() - 2];
  p.w = s[s.size() - 1];
  const Tensor* ta = &a;
  const Tensor* tb = &b;
  NormalizedMap na, nb;
  if (options.normalize) {
    na = normalize_map(a);
    nb = normalize_map(b);
    ta = &na.values;
    tb = &nb.values;
    p.degenerate = na.degenerate || nb.degenerate;
  }
  p.a.assign(ta->values().begin(), ta->values().end());
  p.b.assign(tb->values().begin(), tb->values().end());
  return p;
}

// Calls fn(row, col, l*c*s) for every window in row-major order.
template <typename Fn>
void for_each_window(const PreparedPair& p, const RssaOptions& options,
                     std::size_t& rows, std::size_t& cols, Fn&& fn) {
  if (options.mode == WindowMode::kWholeImage) {
    rows = cols = 1;
    const std::vector<double> weights(p.a.size(),
                                      1.0 / static_cast<double>(p.a.size()));
    fn(0, 0, ssim_terms(patch_moments(p.a, p.b, weights), options.constants)
                 .product());
    return;
  }
  const std::size_t win = options.window;
  if (p.h < win || p.w < win)
    throw InputError("map " + std::to_string(p.h) + "x" + std::to_string(p.w) +
                     " is smaller than the " + std::to_string(win) + "x" +
                     std::to_string(win) + " window");
  const std::vector<double> weights = gaussian_window(win, options.sigma);
  rows = p.h - win + 1;
  cols = p.w - win + 1;
  std::vector<double> pa(win * win), pb(win * win);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      for (std::size_t y = 0; y < win; ++y)
        for (std::size_t x = 0; x < win; ++x) {
          pa[y * win + x] = p.a[(r + y) * p.w + c + x];
          pb[y * win + x] = p.b[(r + y) * p.w + c + x];
        }
      fn(r, c,
         ssim_terms(patch_moments(pa, pb, weights), options.constants)
             .product());
    }
}

}  // namespace

RssaMap rssa_map(const Tensor& a, const Tensor& b, const RssaOptions& options) {
  const PreparedPair p = prepare(a, b, options);
  RssaMap m;
  m.degenerate = p.degenerate;
  double sum = 0.0;
  for_each_window(p, options, m.rows, m.cols,
                  [&](std::size_t, std::size_t, double v) {
                    m.values.push_back(v);
                    sum += v;
                  });
  m.mean = sum / static_cast<double>(m.values.size());
  return m;
}

double rssa_global(const Tensor& a, const Tensor& b,
                   const RssaOptions& options) {
  const PreparedPair p = prepare(a, b, options);
  std::size_t rows = 0, cols = 0, count = 0;
  double sum = 0.0;
  for_each_window(p, options, rows, cols,
                  [&](std::size_t, std::size_t, double v) {
                    sum += v;
                    ++count;
                  });
  return sum / static_cast<double>(count);
}

std::string RssaMatrix::to_csv() const {
  std::string out = "kind";
  for (double l : lambdas) out += "," + format_number(l);
  out += "\n";
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    out += row_names[r];
    for (std::size_t c = 0; c < lambdas.size(); ++c)
      out += "," + format_number(at(r, c));
    out += "\n";
  }
  return out;
}

RssaMatrix rssa_matrix(ExplainerKind explainer, const Model& model,
                       const Dataset& eval_set, const NoiseGrid& grid,
                       const ExplainerSuite& suite,
                       const RssaOptions& options, TargetRule rule) {
  if (eval_set.empty()) throw InputError("RSSA matrix needs evaluation images");
  if (grid.kinds.empty() || grid.lambdas.empty())
    throw ConfigError("noise grid must have at least one kind and one lambda");
  const LogitFn scorer = model_scorer(model);

  std::vector<int> targets;
  std::vector<RelevanceMap> clean;
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    targets.push_back(rule == TargetRule::kLabel
                          ? eval_set.labels[i]
                          : predicted_class(scorer, eval_set.images[i]));
    clean.push_back(
        explain(explainer, model, eval_set.images[i], targets.back(), suite));
  }

  RssaMatrix m;
  m.explainer = explainer;
  m.lambdas = grid.lambdas;
  for (NoiseKind kind : grid.kinds) {
    m.row_names.push_back(noise_kind_name(kind));
    for (double lambda : grid.lambdas) {
      double sum = 0.0;
      for (std::size_t i = 0; i < eval_set.size(); ++i) {
        const NoiseParams params{
            kind, lambda, grid.seed ^ static_cast<std::uint64_t>(eval_set.ids[i])};
        const Tensor corrupted = corrupt_image(eval_set.images[i], params);
        if (bit_identical(corrupted, eval_set.images[i])) {
          sum += rssa_global(clean[i].values, clean[i].values, options);
          continue;
        }
        const RelevanceMap noisy =
            explain(explainer, model, corrupted, targets[i], suite);
        sum += rssa_global(noisy.values, clean[i].values, options);
      }
      m.values.push_back(sum / static_cast<double>(eval_set.size()));
    }
  }
  return m;
}

}  // namespace relstab
