#include "rmat/synth.hpp"

#include <algorithm>
#include <cmath>

#include "rmat/error.hpp"
#include "rmat/rng.hpp"

namespace rmat {

void SceneSpec::validate() const {
  if (n_landmarks < 2) throw ValidationError("scene: n_landmarks must be >= 2");
  if (plane_w < 32.0 || plane_h < 32.0) throw ValidationError("scene: plane too small");
  if (min_separation <= 0.0) throw ValidationError("scene: min_separation must be > 0");
}

void RenderConfig::validate() const {
  if (patch_side < 8) throw ValidationError("render: patch_side must be >= 8");
  if (noise_psnr != 0.0 && (noise_psnr < 5.0 || noise_psnr > 60.0)) {
    throw ValidationError("render: noise_psnr must be 0 (off) or within [5, 60] dB");
  }
  if (scale_min <= 0.0 || scale_max < scale_min) {
    throw ValidationError("render: invalid scale range");
  }
  if (saturation_min < 0.0 || saturation_max < saturation_min) {
    throw ValidationError("render: invalid saturation range");
  }
}

namespace {

struct TextureShape {
  int kind;  // 0 disk, 1 rectangle
  double cu, cv, r1, r2;
  double color[3];
};

struct TextureDesc {
  double bg[3];
  double dir_u, dir_v;
  double freq, phase, stripe_weight;
  double stripe_color[3];
  TextureShape shapes[3];
};

TextureDesc make_texture(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x74657874ULL));
  TextureDesc t;
  for (double& c : t.bg) c = rng.uniform(0.1, 0.9);
  const double ang = rng.uniform(0.0, M_PI);
  t.dir_u = std::cos(ang);
  t.dir_v = std::sin(ang);
  t.freq = rng.uniform(1.5, 5.0);
  t.phase = rng.uniform(0.0, 2.0 * M_PI);
  t.stripe_weight = rng.uniform(0.3, 0.7);
  for (double& c : t.stripe_color) c = rng.uniform(0.0, 1.0);
  for (TextureShape& s : t.shapes) {
    s.kind = rng.uniform_int(2);
    s.cu = rng.uniform(0.15, 0.85);
    s.cv = rng.uniform(0.15, 0.85);
    s.r1 = rng.uniform(0.08, 0.30);
    s.r2 = rng.uniform(0.08, 0.30);
    for (double& c : s.color) c = rng.uniform(0.0, 1.0);
  }
  return t;
}

void texel(const TextureDesc& t, double u, double v, double rgb[3]) {
  const double m =
      t.stripe_weight * (0.5 + 0.5 * std::sin(2.0 * M_PI * (t.freq * (u * t.dir_u + v * t.dir_v)) +
                                              t.phase));
  for (int c = 0; c < 3; ++c) rgb[c] = t.bg[c] + m * (t.stripe_color[c] - t.bg[c]);
  for (const TextureShape& s : t.shapes) {
    bool inside;
    if (s.kind == 0) {
      const double du = u - s.cu, dv = v - s.cv;
      inside = du * du + dv * dv <= s.r1 * s.r1;
    } else {
      inside = std::fabs(u - s.cu) <= s.r1 && std::fabs(v - s.cv) <= s.r2;
    }
    if (inside) {
      for (int c = 0; c < 3; ++c) rgb[c] += 0.85 * (s.color[c] - rgb[c]);
    }
  }
  for (int c = 0; c < 3; ++c) rgb[c] = std::min(1.0, std::max(0.0, rgb[c]));
}

double luma601(const double rgb[3]) {
  return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
}

}  // namespace

Scene gen_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(spec.scene_seed, 0x7363656eULL));
  Scene scene;
  scene.plane_w = spec.plane_w;
  scene.plane_h = spec.plane_h;
  scene.seed = spec.scene_seed;
  const double margin = 12.0;
  const double min_sq = spec.min_separation * spec.min_separation;
  int tries = 0;
  while (static_cast<int>(scene.landmarks.size()) < spec.n_landmarks) {
    if (++tries > 10000) {
      throw ValidationError("gen_scene: cannot place landmarks at the requested separation");
    }
    const double u = rng.uniform(margin, spec.plane_w - margin);
    const double v = rng.uniform(margin, spec.plane_h - margin);
    bool ok = true;
    for (const Landmark& l : scene.landmarks) {
      const double du = l.u - u, dv = l.v - v;
      if (du * du + dv * dv < min_sq) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    const int idx = static_cast<int>(scene.landmarks.size());
    scene.landmarks.push_back(Landmark{u, v, spec.first_identity + idx,
                                       mix_seed(spec.scene_seed, 1000 + static_cast<std::uint64_t>(idx))});
  }
  return scene;
}

Tensor canonical_texture(std::uint64_t texture_seed, int side) {
  const TextureDesc desc = make_texture(texture_seed);
  Tensor out({3, side, side});
  double rgb[3];
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      texel(desc, (j + 0.5) / side, (i + 0.5) / side, rgb);
      for (int c = 0; c < 3; ++c) {
        out[(static_cast<std::size_t>(c) * side + i) * side + j] = rgb[c];
      }
    }
  }
  return out;
}

Frame render_frame(const Scene& scene, int frame_id, int view_id, const RenderConfig& cfg) {
  cfg.validate();
  const std::uint64_t view_seed =
      mix_seed(mix_seed(cfg.seed, scene.seed), 0xf00d + static_cast<std::uint64_t>(view_id));
  Rng view_rng(view_seed);
  const double shift_u = view_rng.uniform(-cfg.view_shift_px, cfg.view_shift_px);
  const double shift_v = view_rng.uniform(-cfg.view_shift_px, cfg.view_shift_px);

  Frame frame;
  frame.frame_id = frame_id;
  const int s = cfg.patch_side;
  for (std::size_t li = 0; li < scene.landmarks.size(); ++li) {
    const Landmark& lm = scene.landmarks[li];
    Rng rng(mix_seed(view_seed, 7000 + li));
    const double tx = rng.uniform(-cfg.max_translation_px, cfg.max_translation_px) / s;
    const double ty = rng.uniform(-cfg.max_translation_px, cfg.max_translation_px) / s;
    const double zoom = rng.uniform(cfg.scale_min, cfg.scale_max);
    const double bright = rng.uniform(-cfg.brightness_range, cfg.brightness_range);
    const double sat = rng.uniform(cfg.saturation_min, cfg.saturation_max);
    const double ju = rng.uniform(-cfg.center_jitter_px, cfg.center_jitter_px);
    const double jv = rng.uniform(-cfg.center_jitter_px, cfg.center_jitter_px);

    const TextureDesc desc = make_texture(lm.texture_seed);
    Patch patch;
    patch.pixels = Tensor({3, s, s});
    patch.frame_id = frame_id;
    patch.identity = lm.identity;
    patch.center_u = std::min(scene.plane_w, std::max(0.0, lm.u + shift_u + ju));
    patch.center_v = std::min(scene.plane_h, std::max(0.0, lm.v + shift_v + jv));

    double rgb[3];
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) {
        const double u = 0.5 + ((j + 0.5) / s - 0.5) / zoom + tx;
        const double v = 0.5 + ((i + 0.5) / s - 0.5) / zoom + ty;
        texel(desc, u, v, rgb);
        const double y = luma601(rgb);
        for (int c = 0; c < 3; ++c) {
          const double val = y + sat * (rgb[c] - y) + bright;
          patch.pixels[(static_cast<std::size_t>(c) * s + i) * s + j] =
              std::min(1.0, std::max(0.0, val));
        }
      }
    }
    if (cfg.noise_psnr != 0.0) {
      patch.pixels = perturb(patch.pixels, PerturbKind::gauss, cfg.noise_psnr,
                             mix_seed(view_seed, 9000 + li));
    }
    frame.patches.push_back(std::move(patch));
  }
  return frame;
}

Tensor perturb(const Tensor& pixels, PerturbKind kind, double level, std::uint64_t seed) {
  if (pixels.ndim() != 3 || pixels.dim(0) != 3) {
    throw DimensionError("perturb: expected [3,S,S] pixels, got " + pixels.shape_str());
  }
  Tensor out = pixels;
  switch (kind) {
    case PerturbKind::gauss: {
      if (level < 5.0 || level > 60.0) {
        throw ValidationError("perturb: gauss level is a target PSNR in [5, 60] dB");
      }
      const double sigma = std::pow(10.0, -level / 20.0);
      Rng rng(mix_seed(seed, 0x6e6f697365ULL));
      for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = std::min(1.0, std::max(0.0, out[i] + sigma * rng.normal()));
      }
      break;
    }
    case PerturbKind::brightness: {
      if (level < -1.0 || level > 1.0) {
        throw ValidationError("perturb: brightness offset must be in [-1, 1]");
      }
      for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = std::min(1.0, std::max(0.0, out[i] + level));
      }
      break;
    }
    case PerturbKind::saturation: {
      if (level < 0.0 || level > 4.0) {
        throw ValidationError("perturb: saturation scale must be in [0, 4]");
      }
      const int s = pixels.dim(1);
      for (int i = 0; i < s; ++i) {
        for (int j = 0; j < s; ++j) {
          double rgb[3];
          for (int c = 0; c < 3; ++c) rgb[c] = out[(static_cast<std::size_t>(c) * s + i) * s + j];
          const double y = luma601(rgb);
          for (int c = 0; c < 3; ++c) {
            out[(static_cast<std::size_t>(c) * s + i) * s + j] =
                std::min(1.0, std::max(0.0, y + level * (rgb[c] - y)));
          }
        }
      }
      break;
    }
    case PerturbKind::blockout: {
      if (level <= 0.0 || level > 1.0) {
        throw ValidationError("perturb: blockout side fraction must be in (0, 1]");
      }
      const int s = pixels.dim(1);
      const int side = std::max(1, static_cast<int>(std::lround(level * s)));
      Rng rng(mix_seed(seed, 0x626c6f636bULL));
      const int y0 = rng.uniform_int(s - side + 1);
      const int x0 = rng.uniform_int(s - side + 1);
      for (int c = 0; c < 3; ++c) {
        for (int i = y0; i < y0 + side; ++i) {
          for (int j = x0; j < x0 + side; ++j) {
            out[(static_cast<std::size_t>(c) * s + i) * s + j] = 0.0;
          }
        }
      }
      break;
    }
  }
  return out;
}

double psnr(const Tensor& clean, const Tensor& noisy) {
  if (!clean.same_shape(noisy)) {
    throw DimensionError("psnr: shapes " + clean.shape_str() + " and " + noisy.shape_str() +
                         " differ");
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < clean.numel(); ++i) {
    const double d = clean[i] - noisy[i];
    mse += d * d;
  }
  mse /= static_cast<double>(clean.numel());
  if (mse == 0.0) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

std::vector<PairRef> make_pairs(const std::vector<Frame>& frames, double neg_per_pos,
                                std::uint64_t seed) {
  if (frames.size() < 2) throw ValidationError("make_pairs: need at least two frames");
  std::vector<PairRef> positives;
  std::vector<PairRef> candidates;
  for (std::size_t a = 0; a < frames.size(); ++a) {
    for (std::size_t b = a + 1; b < frames.size(); ++b) {
      const Frame& fa = frames[a];
      const Frame& fb = frames[b];
      bool overlap = false;
      for (const Patch& pa : fa.patches) {
        for (const Patch& pb : fb.patches) {
          if (pa.identity == pb.identity) {
            overlap = true;
            break;
          }
        }
        if (overlap) break;
      }
      if (!overlap) continue;
      for (int i = 0; i < static_cast<int>(fa.patches.size()); ++i) {
        for (int j = 0; j < static_cast<int>(fb.patches.size()); ++j) {
          const bool same =
              fa.patches[static_cast<std::size_t>(i)].identity ==
              fb.patches[static_cast<std::size_t>(j)].identity;
          const PairRef ref{fa.frame_id, i, fb.frame_id, j, same ? 1 : 0};
          if (same) {
            positives.push_back(ref);
          } else {
            candidates.push_back(ref);
          }
        }
      }
    }
  }
  if (positives.empty()) {
    throw ValidationError("make_pairs: no cross-frame identity overlap");
  }
  Rng rng(mix_seed(seed, 0x7061697273ULL));
  rng.shuffle(candidates);
  const std::size_t wanted = static_cast<std::size_t>(
      std::lround(neg_per_pos * static_cast<double>(positives.size())));
  const std::size_t take = std::min(wanted, candidates.size());
  std::vector<PairRef> out = positives;
  out.insert(out.end(), candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
  return out;
}

}  // namespace rmat
