// SPDX-License-Identifier: Apache-2.0
#include "augflat/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "augflat/numerics.hpp"

namespace augflat::augment {

namespace {

void clamp_pixels(Eigen::VectorXd& v, PixelScale scale) {
  double hi = nnet::pixel_max(scale);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::min(hi, std::max(0.0, v(i)));
}

void require_geom(const ImageGeom& geom, Eigen::Index n, const char* kind) {
  if (!geom.valid())
    throw std::invalid_argument(std::string("augment: ") + kind + " requires image-shaped data");
  if (geom.size() != n)
    throw std::invalid_argument(std::string("augment: ") + kind + " input does not match geometry");
}

inline Eigen::Index pix(const ImageGeom& g, int ch, int y, int x) {
  return (static_cast<Eigen::Index>(ch) * g.h + y) * g.w + x;
}

Eigen::VectorXd translate_by(const Eigen::VectorXd& x, const ImageGeom& g, int dy, int dx) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (int c = 0; c < g.ch; ++c)
    for (int y = 0; y < g.h; ++y) {
      int sy = y - dy;
      if (sy < 0 || sy >= g.h) continue;
      for (int xx = 0; xx < g.w; ++xx) {
        int sx = xx - dx;
        if (sx < 0 || sx >= g.w) continue;
        out(pix(g, c, y, xx)) = x(pix(g, c, sy, sx));
      }
    }
  return out;
}

// Inverse-mapped rotation about the image center with bilinear sampling and
// zero fill outside the source.
Eigen::VectorXd rotate_by(const Eigen::VectorXd& x, const ImageGeom& g, double deg) {
  double rad = deg * M_PI / 180.0;
  double cs = std::cos(rad), sn = std::sin(rad);
  double cy = (g.h - 1) / 2.0, cx = (g.w - 1) / 2.0;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (int y = 0; y < g.h; ++y)
    for (int xx = 0; xx < g.w; ++xx) {
      double sy = cy + cs * (y - cy) + sn * (xx - cx);
      double sx = cx - sn * (y - cy) + cs * (xx - cx);
      int y0 = static_cast<int>(std::floor(sy));
      int x0 = static_cast<int>(std::floor(sx));
      double fy = sy - y0, fx = sx - x0;
      for (int c = 0; c < g.ch; ++c) {
        double acc = 0.0;
        for (int by = 0; by <= 1; ++by)
          for (int bx = 0; bx <= 1; ++bx) {
            int yy = y0 + by, xc = x0 + bx;
            if (yy < 0 || yy >= g.h || xc < 0 || xc >= g.w) continue;
            double w = (by ? fy : 1.0 - fy) * (bx ? fx : 1.0 - fx);
            acc += w * x(pix(g, c, yy, xc));
          }
        out(pix(g, c, y, xx)) = acc;
      }
    }
  return out;
}

Eigen::VectorXd hflip_image(const Eigen::VectorXd& x, const ImageGeom& g) {
  Eigen::VectorXd out(x.size());
  for (int c = 0; c < g.ch; ++c)
    for (int y = 0; y < g.h; ++y)
      for (int xx = 0; xx < g.w; ++xx) out(pix(g, c, y, xx)) = x(pix(g, c, y, g.w - 1 - xx));
  return out;
}

// One random geometric op for chain_mix; magnitudes are tied to image size.
Eigen::VectorXd random_geom_op(const Eigen::VectorXd& x, const ImageGeom& g, Rng& rng) {
  int op = static_cast<int>(rng.uniform_int(0, 2));
  if (op == 0) {
    int span = std::max(1, std::min(g.h, g.w) / 4);
    int dy = static_cast<int>(rng.uniform_int(-span, span));
    int dx = static_cast<int>(rng.uniform_int(-span, span));
    return translate_by(x, g, dy, dx);
  }
  if (op == 1) return rotate_by(x, g, rng.uniform(-30.0, 30.0));
  return hflip_image(x, g);
}

struct Applier {
  const Eigen::VectorXd& x;
  const ImageGeom& geom;
  PixelScale scale;
  uint64_t seed;

  Eigen::VectorXd finish(Eigen::VectorXd v) const {
    if (geom.valid()) clamp_pixels(v, scale);
    return v;
  }

  Eigen::VectorXd operator()(const GaussianNoise& c) const {
    Rng rng(seed);
    Eigen::VectorXd v = x;
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += c.sigma * rng.normal();
    return finish(std::move(v));
  }

  Eigen::VectorXd operator()(const UniformNoise& c) const {
    Rng rng(seed);
    Eigen::VectorXd v = x;
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += rng.uniform(-c.amplitude, c.amplitude);
    return finish(std::move(v));
  }

  Eigen::VectorXd operator()(const Translate& c) const {
    require_geom(geom, x.size(), "translate");
    Rng rng(seed);
    int dy = static_cast<int>(rng.uniform_int(-c.max_px, c.max_px));
    int dx = static_cast<int>(rng.uniform_int(-c.max_px, c.max_px));
    return finish(translate_by(x, geom, dy, dx));
  }

  Eigen::VectorXd operator()(const Rotate& c) const {
    require_geom(geom, x.size(), "rotate");
    Rng rng(seed);
    return finish(rotate_by(x, geom, rng.uniform(-c.max_deg, c.max_deg)));
  }

  Eigen::VectorXd operator()(const HFlip& c) const {
    require_geom(geom, x.size(), "hflip");
    Rng rng(seed);
    if (rng.uniform() < c.prob) return finish(hflip_image(x, geom));
    return x;
  }

  Eigen::VectorXd operator()(const Contrast& c) const {
    Rng rng(seed);
    double f = rng.uniform(c.lo, c.hi);
    double mu = x.mean();
    Eigen::VectorXd v = mu + (f * (x.array() - mu)).matrix().array();
    return finish(std::move(v));
  }

  Eigen::VectorXd operator()(const Brightness& c) const {
    Rng rng(seed);
    double b = rng.uniform(c.lo, c.hi);
    Eigen::VectorXd v = x.array() + b;
    return finish(std::move(v));
  }

  Eigen::VectorXd operator()(const ChainMix& c) const {
    require_geom(geom, x.size(), "chain_mix");
    ChainMixParts parts = chain_mix_parts(c, x, geom, scale, seed);
    return finish(chain_mix_premix(x, parts));
  }

  Eigen::VectorXd operator()(const PatternMix& c) const {
    require_geom(geom, x.size(), "pattern_mix");
    Rng rng(seed);
    double hi = nnet::pixel_max(scale);
    Eigen::VectorXd u = x / hi;
    int rounds = static_cast<int>(rng.uniform_int(1, c.mix_rounds));
    for (int r = 0; r < rounds; ++r) {
      Eigen::MatrixXd pat = plasma_pattern(geom.h, geom.w, rng.bits());
      double keep = rng.beta(c.beta, 1.0);
      bool convex = rng.uniform_int(0, 1) == 0;
      for (int ch = 0; ch < geom.ch; ++ch)
        for (int y = 0; y < geom.h; ++y)
          for (int xx = 0; xx < geom.w; ++xx) {
            Eigen::Index at = pix(geom, ch, y, xx);
            double p = pat(y, xx);
            u(at) = convex ? keep * u(at) + (1.0 - keep) * p
                           : std::pow(u(at), keep) * std::pow(p, 1.0 - keep);
          }
    }
    return finish(u * hi);
  }
};

struct Validator {
  void operator()(const GaussianNoise& c) const {
    if (!(c.sigma >= 0.0)) throw std::invalid_argument("augment: sigma must be >= 0");
  }
  void operator()(const UniformNoise& c) const {
    if (!(c.amplitude >= 0.0)) throw std::invalid_argument("augment: amplitude must be >= 0");
  }
  void operator()(const Translate& c) const {
    if (c.max_px < 0) throw std::invalid_argument("augment: max_px must be >= 0");
  }
  void operator()(const Rotate& c) const {
    if (!(c.max_deg >= 0.0 && c.max_deg <= 180.0))
      throw std::invalid_argument("augment: max_deg must be in [0, 180]");
  }
  void operator()(const HFlip& c) const {
    if (!(c.prob >= 0.0 && c.prob <= 1.0))
      throw std::invalid_argument("augment: prob must be in [0, 1]");
  }
  void operator()(const Contrast& c) const {
    if (!(c.lo > 0.0 && c.lo <= c.hi))
      throw std::invalid_argument("augment: contrast range must satisfy 0 < lo <= hi");
  }
  void operator()(const Brightness& c) const {
    if (!(c.lo <= c.hi)) throw std::invalid_argument("augment: brightness range must satisfy lo <= hi");
  }
  void operator()(const ChainMix& c) const {
    if (c.width < 1 || c.depth < 1 || !(c.dirichlet_alpha > 0.0) || !(c.beta_alpha > 0.0))
      throw std::invalid_argument("augment: bad chain_mix parameters");
  }
  void operator()(const PatternMix& c) const {
    if (c.mix_rounds < 1 || !(c.beta > 0.0))
      throw std::invalid_argument("augment: bad pattern_mix parameters");
  }
};

std::string fmt1(const char* name, const char* field, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s(%s=%g)", name, field, v);
  return buf;
}

}  // namespace

void validate(const AugmentationConfig& cfg) { std::visit(Validator{}, cfg); }

std::string describe(const AugmentationConfig& cfg) {
  struct Desc {
    std::string operator()(const GaussianNoise& c) const { return fmt1("gaussian_noise", "sigma", c.sigma); }
    std::string operator()(const UniformNoise& c) const { return fmt1("uniform_noise", "amplitude", c.amplitude); }
    std::string operator()(const Translate& c) const { return fmt1("translate", "max_px", c.max_px); }
    std::string operator()(const Rotate& c) const { return fmt1("rotate", "max_deg", c.max_deg); }
    std::string operator()(const HFlip& c) const { return fmt1("hflip", "prob", c.prob); }
    std::string operator()(const Contrast& c) const {
      char buf[96];
      std::snprintf(buf, sizeof buf, "contrast(lo=%g,hi=%g)", c.lo, c.hi);
      return buf;
    }
    std::string operator()(const Brightness& c) const {
      char buf[96];
      std::snprintf(buf, sizeof buf, "brightness(lo=%g,hi=%g)", c.lo, c.hi);
      return buf;
    }
    std::string operator()(const ChainMix& c) const {
      char buf[96];
      std::snprintf(buf, sizeof buf, "chain_mix(width=%d,depth=%d)", c.width, c.depth);
      return buf;
    }
    std::string operator()(const PatternMix& c) const {
      char buf[96];
      std::snprintf(buf, sizeof buf, "pattern_mix(rounds=%d,beta=%g)", c.mix_rounds, c.beta);
      return buf;
    }
  };
  return std::visit(Desc{}, cfg);
}

nlohmann::json config_to_json(const AugmentationConfig& cfg) {
  struct ToJson {
    nlohmann::json operator()(const GaussianNoise& c) const {
      return {{"kind", "gaussian_noise"}, {"sigma", c.sigma}};
    }
    nlohmann::json operator()(const UniformNoise& c) const {
      return {{"kind", "uniform_noise"}, {"amplitude", c.amplitude}};
    }
    nlohmann::json operator()(const Translate& c) const {
      return {{"kind", "translate"}, {"max_px", c.max_px}};
    }
    nlohmann::json operator()(const Rotate& c) const {
      return {{"kind", "rotate"}, {"max_deg", c.max_deg}};
    }
    nlohmann::json operator()(const HFlip& c) const { return {{"kind", "hflip"}, {"prob", c.prob}}; }
    nlohmann::json operator()(const Contrast& c) const {
      return {{"kind", "contrast"}, {"lo", c.lo}, {"hi", c.hi}};
    }
    nlohmann::json operator()(const Brightness& c) const {
      return {{"kind", "brightness"}, {"lo", c.lo}, {"hi", c.hi}};
    }
    nlohmann::json operator()(const ChainMix& c) const {
      return {{"kind", "chain_mix"},
              {"width", c.width},
              {"depth", c.depth},
              {"dirichlet_alpha", c.dirichlet_alpha},
              {"beta_alpha", c.beta_alpha}};
    }
    nlohmann::json operator()(const PatternMix& c) const {
      return {{"kind", "pattern_mix"}, {"mix_rounds", c.mix_rounds}, {"beta", c.beta}};
    }
  };
  return std::visit(ToJson{}, cfg);
}

AugmentationConfig config_from_json(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  AugmentationConfig cfg;
  if (kind == "gaussian_noise") {
    cfg = GaussianNoise{j.at("sigma").get<double>()};
  } else if (kind == "uniform_noise") {
    cfg = UniformNoise{j.at("amplitude").get<double>()};
  } else if (kind == "translate") {
    cfg = Translate{j.at("max_px").get<int>()};
  } else if (kind == "rotate") {
    cfg = Rotate{j.at("max_deg").get<double>()};
  } else if (kind == "hflip") {
    cfg = HFlip{j.value("prob", 0.5)};
  } else if (kind == "contrast") {
    cfg = Contrast{j.at("lo").get<double>(), j.at("hi").get<double>()};
  } else if (kind == "brightness") {
    cfg = Brightness{j.at("lo").get<double>(), j.at("hi").get<double>()};
  } else if (kind == "chain_mix") {
    ChainMix c;
    c.width = j.value("width", 3);
    c.depth = j.value("depth", 3);
    c.dirichlet_alpha = j.value("dirichlet_alpha", 1.0);
    c.beta_alpha = j.value("beta_alpha", 1.0);
    cfg = c;
  } else if (kind == "pattern_mix") {
    PatternMix c;
    c.mix_rounds = j.value("mix_rounds", 3);
    c.beta = j.value("beta", 3.0);
    cfg = c;
  } else {
    throw std::invalid_argument("augment: unknown kind " + kind);
  }
  validate(cfg);
  return cfg;
}

Eigen::VectorXd apply(const AugmentationConfig& cfg, const Eigen::VectorXd& x,
                      const ImageGeom& geom, PixelScale scale, uint64_t seed) {
  validate(cfg);
  if (geom.valid() && geom.size() != x.size())
    throw std::invalid_argument("augment: input does not match geometry");
  return std::visit(Applier{x, geom, scale, seed}, cfg);
}

ChainMixParts chain_mix_parts(const ChainMix& cfg, const Eigen::VectorXd& x, const ImageGeom& geom,
                              PixelScale scale, uint64_t seed) {
  (void)scale;
  validate(AugmentationConfig{cfg});
  require_geom(geom, x.size(), "chain_mix");
  Rng rng(seed);
  ChainMixParts parts;
  parts.weights = rng.dirichlet(cfg.dirichlet_alpha, cfg.width);
  parts.keep = rng.beta(cfg.beta_alpha, cfg.beta_alpha);
  parts.chains.reserve(static_cast<size_t>(cfg.width));
  for (int c = 0; c < cfg.width; ++c) {
    Eigen::VectorXd chain = x;
    int depth = static_cast<int>(rng.uniform_int(1, cfg.depth));
    for (int s = 0; s < depth; ++s) chain = random_geom_op(chain, geom, rng);
    parts.chains.push_back(std::move(chain));
  }
  return parts;
}

Eigen::VectorXd chain_mix_premix(const Eigen::VectorXd& x, const ChainMixParts& parts) {
  if (parts.chains.size() != parts.weights.size() || parts.chains.empty())
    throw std::invalid_argument("chain_mix: chains and weights must align");
  Eigen::VectorXd mix = Eigen::VectorXd::Zero(x.size());
  for (size_t i = 0; i < parts.chains.size(); ++i) mix += parts.weights[i] * parts.chains[i];
  return parts.keep * x + (1.0 - parts.keep) * mix;
}

Eigen::MatrixXd plasma_pattern(int h, int w, uint64_t seed) {
  if (h < 1 || w < 1) throw std::invalid_argument("plasma_pattern: empty grid");
  int n = 1;
  while (n + 1 < std::max(h, w)) n <<= 1;
  int side = n + 1;

  Rng rng(seed);
  Eigen::MatrixXd g(side, side);
  g(0, 0) = rng.uniform();
  g(0, side - 1) = rng.uniform();
  g(side - 1, 0) = rng.uniform();
  g(side - 1, side - 1) = rng.uniform();

  double amp = 0.5;
  for (int step = n; step > 1; step /= 2, amp *= 0.5) {
    int half = step / 2;
    for (int y = half; y < side; y += step)
      for (int x = half; x < side; x += step) {
        double avg = (g(y - half, x - half) + g(y - half, x + half) + g(y + half, x - half) +
                      g(y + half, x + half)) /
                     4.0;
        g(y, x) = avg + rng.uniform(-amp, amp);
      }
    for (int y = 0; y < side; y += half)
      for (int x = (y / half) % 2 == 0 ? half : 0; x < side; x += step) {
        double acc = 0.0;
        int cnt = 0;
        if (y - half >= 0) acc += g(y - half, x), ++cnt;
        if (y + half < side) acc += g(y + half, x), ++cnt;
        if (x - half >= 0) acc += g(y, x - half), ++cnt;
        if (x + half < side) acc += g(y, x + half), ++cnt;
        g(y, x) = acc / cnt + rng.uniform(-amp, amp);
      }
  }

  Eigen::MatrixXd out = g.topLeftCorner(h, w);
  double lo = out.minCoeff(), hi = out.maxCoeff();
  if (hi > lo)
    out = ((out.array() - lo) / (hi - lo)).matrix();
  else
    out.setConstant(0.5);
  return out;
}

DistanceSampleSet distance_samples(const AugmentationConfig& cfg, const Dataset& d, int n,
                                   uint64_t seed) {
  validate(cfg);
  if (d.samples.empty()) throw std::invalid_argument("distance_samples: empty dataset");
  if (n < 1) throw std::invalid_argument("distance_samples: n must be >= 1");
  DistanceSampleSet set;
  set.aug = describe(cfg);
  set.scale = d.scale;
  set.distances.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd& x = d.samples[static_cast<size_t>(i) % d.samples.size()].x;
    Eigen::VectorXd xt = apply(cfg, x, d.geom, d.scale, seed_mix(seed, static_cast<uint64_t>(i)));
    set.distances[static_cast<size_t>(i)] = (xt - x).norm();
  }
  return set;
}

double ecdf(const std::vector<double>& distances, double gamma) {
  if (distances.empty()) throw std::invalid_argument("ecdf: no samples");
  std::vector<double> sorted = distances;
  std::sort(sorted.begin(), sorted.end());
  auto it = std::upper_bound(sorted.begin(), sorted.end(), gamma);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

double ecdf(const DistanceSampleSet& s, double gamma) { return ecdf(s.distances, gamma); }

PsaReport psa_score(const AugmentationConfig& cfg, const Dataset& d,
                    const std::vector<double>& thresholds, double gamma_star, int n, uint64_t seed) {
  if (thresholds.empty()) throw std::invalid_argument("psa_score: no thresholds");
  for (size_t i = 0; i + 1 < thresholds.size(); ++i)
    if (!(thresholds[i] < thresholds[i + 1]))
      throw std::invalid_argument("psa_score: thresholds must be strictly ascending");
  if (!(gamma_star > 0.0)) throw std::invalid_argument("psa_score: gamma_star must be positive");

  DistanceSampleSet set = distance_samples(cfg, d, n, seed);
  std::vector<double> sorted = set.distances;
  std::sort(sorted.begin(), sorted.end());

  auto cdf_at = [&](double g) {
    auto it = std::upper_bound(sorted.begin(), sorted.end(), g);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
  };

  PsaReport r;
  r.gamma_star = gamma_star;
  for (double t : thresholds) r.ecdf_at.emplace_back(t, cdf_at(t));
  size_t qi = static_cast<size_t>(
      std::max<int64_t>(0, static_cast<int64_t>(std::ceil(kQuantileLevel * n)) - 1));
  r.gamma_a_hat = sorted[std::min(qi, sorted.size() - 1)];
  r.compliant = cdf_at(gamma_star) >= kComplianceCutoff;
  return r;
}

}  // namespace augflat::augment
