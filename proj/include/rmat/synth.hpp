#pragma once

#include <cstdint>
#include <vector>

#include "rmat/landmark.hpp"
#include "rmat/tensor.hpp"

namespace rmat {

// Procedural stand-in for real landmark-patch data: each landmark identity
// owns a deterministic texture (seeded stripes, rectangles and disks over a
// seeded background), scenes place landmarks on a virtual image plane, and
// views re-render every landmark with geometric and photometric jitter.

struct SceneSpec {
  int n_landmarks = 6;
  double plane_w = 256.0;
  double plane_h = 256.0;
  double min_separation = 24.0;
  int first_identity = 0;  // identities are first_identity .. +n_landmarks-1
  std::uint64_t scene_seed = 0;

  void validate() const;
};

struct Landmark {
  double u = 0.0;
  double v = 0.0;
  int identity = -1;
  std::uint64_t texture_seed = 0;
};

struct Scene {
  std::vector<Landmark> landmarks;
  double plane_w = 0.0;
  double plane_h = 0.0;
  std::uint64_t seed = 0;
};

struct RenderConfig {
  int patch_side = 32;
  double view_shift_px = 6.0;       // per-view rigid shift of every center
  double center_jitter_px = 3.0;    // independent per-patch center jitter
  double max_translation_px = 2.0;  // texture-space translation jitter
  double scale_min = 0.9;           // texture zoom range per view
  double scale_max = 1.1;
  double brightness_range = 0.08;   // additive offset in [-range, range]
  double saturation_min = 0.75;     // chroma scale about the luma
  double saturation_max = 1.25;
  double noise_psnr = 0.0;          // 0 disables; else target PSNR dB in [5,60]
  std::uint64_t seed = 0;

  void validate() const;
};

Scene gen_scene(const SceneSpec& spec);

// Canonical (jitter-free) texture of one identity, for distinctness checks.
Tensor canonical_texture(std::uint64_t texture_seed, int side);

Frame render_frame(const Scene& scene, int frame_id, int view_id, const RenderConfig& cfg);

enum class PerturbKind { gauss, brightness, saturation, blockout };

// gauss: level is the target PSNR in dB (sigma = 10^(-PSNR/20), then clip);
// brightness: level is the additive offset; saturation: level scales chroma
// about the luma; blockout: level in (0,1] is the side fraction of a seeded
// rectangle that gets zeroed.
Tensor perturb(const Tensor& pixels, PerturbKind kind, double level, std::uint64_t seed);

// 10 log10(1 / MSE) against MAX = 1; identical inputs report the 99 dB
// sentinel.
double psnr(const Tensor& clean, const Tensor& noisy);

struct PairRef {
  int frame_a = -1;
  int idx_a = -1;
  int frame_b = -1;
  int idx_b = -1;
  int label = 0;
};

// Positives: every same-identity patch pair across distinct frames.
// Negatives: different-identity pairs sampled (seeded, without replacement)
// from frame pairs that share at least one identity, at `neg_per_pos`.
std::vector<PairRef> make_pairs(const std::vector<Frame>& frames, double neg_per_pos,
                                std::uint64_t seed);

}  // namespace rmat
