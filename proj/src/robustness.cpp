#include "rmat/robustness.hpp"

#include <algorithm>
#include <cmath>

#include "rmat/graph_diffusion.hpp"
#include "rmat/ops.hpp"
#include "rmat/rng.hpp"
#include "rmat/vertex_diffusion.hpp"

namespace rmat {

double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

struct PatchRef {
  int frame;
  int idx;
};

std::vector<PatchRef> list_patches(const Dataset& ds, int limit) {
  std::vector<PatchRef> out;
  for (const Frame& f : ds.frames) {
    for (int i = 0; i < static_cast<int>(f.patches.size()); ++i) {
      out.push_back({f.frame_id, i});
      if (static_cast<int>(out.size()) >= limit) return out;
    }
  }
  return out;
}

double fit_line(const std::vector<double>& x, const std::vector<double>& y, double* r2) {
  const int n = static_cast<int>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sx += x[static_cast<std::size_t>(i)];
    sy += y[static_cast<std::size_t>(i)];
    sxx += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    sxy += x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  if (r2) {
    double ss_res = 0.0, ss_tot = 0.0;
    const double ym = sy / n;
    for (int i = 0; i < n; ++i) {
      const double e = y[static_cast<std::size_t>(i)] - (intercept + slope * x[static_cast<std::size_t>(i)]);
      ss_res += e * e;
      const double d = y[static_cast<std::size_t>(i)] - ym;
      ss_tot += d * d;
    }
    *r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return slope;
}

Tensor unit_direction(const std::vector<int>& shape, Rng& rng) {
  Tensor d(shape);
  for (std::size_t i = 0; i < d.numel(); ++i) d[i] = rng.normal();
  const double n = d.frob_norm();
  for (std::size_t i = 0; i < d.numel(); ++i) d[i] /= n;
  return d;
}

SolverConfig module_solver(DiffusionModule module, double t1) {
  SolverConfig cfg;
  cfg.t1 = t1;
  const double tol = module == DiffusionModule::vertex ? 1e-2 : 1e-3;
  cfg.rtol = tol;
  cfg.atol = tol;
  return cfg;
}

}  // namespace

RobustnessReport stage_perturbation_stats(ModelParams& params, const Dataset& dataset,
                                          const std::vector<double>& psnr_levels, int n_patches,
                                          const SolverConfig& vertex_cfg,
                                          const SolverConfig& graph_cfg, std::uint64_t seed) {
  const std::vector<PatchRef> patches = list_patches(dataset, n_patches);
  RobustnessReport report;
  for (double level : psnr_levels) {
    StageSamples samples;
    samples.psnr_level = level;
    for (std::size_t pi = 0; pi < patches.size(); ++pi) {
      const PatchRef ref = patches[pi];
      const Frame& frame = dataset.frames[static_cast<std::size_t>(ref.frame)];
      const NeighborhoodGraph g =
          build_neighborhood(frame, ref.idx, params.cfg.knn, params.cfg.include_anchor);

      const Patch& anchor = frame.patches[static_cast<std::size_t>(ref.idx)];
      const std::uint64_t pseed =
          mix_seed(seed, (static_cast<std::uint64_t>(level * 1000) << 24) + pi);
      const Tensor anchor_noisy = perturb(anchor.pixels, PerturbKind::gauss, level, pseed);

      samples.ds_diff.push_back(
          ops::sub(downsample(anchor_noisy, params), downsample(anchor.pixels, params))
              .frob_norm());
      samples.f_diff.push_back(ops::sub(vertex_embedding(anchor_noisy, params, vertex_cfg),
                                        vertex_embedding(anchor.pixels, params, vertex_cfg))
                                   .frob_norm());

      std::vector<Tensor> clean_emb, noisy_emb;
      for (std::size_t vi = 0; vi < g.vertices.size(); ++vi) {
        const int v = g.vertices[vi];
        const Patch& p = frame.patches[static_cast<std::size_t>(v)];
        clean_emb.push_back(vertex_embedding(p.pixels, params, vertex_cfg));
        const Tensor noisy = v == ref.idx ? anchor_noisy
                                          : perturb(p.pixels, PerturbKind::gauss, level,
                                                    mix_seed(pseed, 100 + vi));
        noisy_emb.push_back(vertex_embedding(noisy, params, vertex_cfg));
      }
      samples.g_diff.push_back(ops::sub(graph_embedding(noisy_emb, params, graph_cfg),
                                        graph_embedding(clean_emb, params, graph_cfg))
                                   .frob_norm());
    }
    report.levels.push_back(std::move(samples));
  }
  return report;
}

JacobianProbe jacobian_probe(DiffusionModule module, ModelParams& params, const Dataset& dataset,
                             const SolverConfig& cfg, int n_trajectories, int n_points,
                             std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x6a616370ULL));
  const std::vector<PatchRef> patches = list_patches(dataset, n_trajectories);
  if (patches.empty()) throw ValidationError("jacobian_probe: dataset has no patches");

  std::vector<Tensor> states;
  OdeRhs rhs;
  Tensor adj;
  if (module == DiffusionModule::vertex) {
    rhs = make_vertex_rhs(params);
    for (const PatchRef& ref : patches) {
      const Frame& frame = dataset.frames[static_cast<std::size_t>(ref.frame)];
      std::vector<Tensor> traj;
      integrate(rhs, downsample(frame.patches[static_cast<std::size_t>(ref.idx)].pixels, params),
                cfg, &traj);
      for (Tensor& t : traj) states.push_back(std::move(t));
      if (static_cast<int>(states.size()) >= n_points) break;
    }
  } else {
    const SolverConfig vcfg = module_solver(DiffusionModule::vertex, 1.0);
    for (const PatchRef& ref : patches) {
      const Frame& frame = dataset.frames[static_cast<std::size_t>(ref.frame)];
      const NeighborhoodGraph g =
          build_neighborhood(frame, ref.idx, params.cfg.knn, params.cfg.include_anchor);
      std::vector<Tensor> embeddings;
      for (int v : g.vertices) {
        embeddings.push_back(
            vertex_embedding(frame.patches[static_cast<std::size_t>(v)].pixels, params, vcfg));
      }
      std::vector<const Tensor*> rows;
      for (const Tensor& e : embeddings) rows.push_back(&e);
      Tensor z0 = ops::stack_rows(rows);
      if (states.empty()) {
        adj = Tensor::full({z0.dim(0), z0.dim(0)}, 1.0);
        rhs = make_graph_rhs(params, adj);
      }
      std::vector<Tensor> traj;
      integrate(rhs, z0, cfg, &traj);
      for (Tensor& t : traj) states.push_back(std::move(t));
      if (static_cast<int>(states.size()) >= n_points) break;
    }
  }
  if (static_cast<int>(states.size()) > n_points) states.resize(static_cast<std::size_t>(n_points));

  constexpr double kStep = 1e-5;
  constexpr int kIndicesPerState = 8;
  JacobianProbe probe;
  double max_diag = -HUGE_VAL;
  for (const Tensor& z : states) {
    for (int trial = 0; trial < kIndicesPerState; ++trial) {
      const std::size_t i =
          static_cast<std::size_t>(rng.uniform_int(static_cast<int>(z.numel())));
      Tensor zp = z, zm = z;
      zp[i] += kStep;
      zm[i] -= kStep;
      const double diag = (rhs(zp, 0.0)[i] - rhs(zm, 0.0)[i]) / (2.0 * kStep);
      max_diag = std::max(max_diag, diag);
      ++probe.samples;
    }
  }
  probe.c_star = -max_diag;
  probe.assumption_met = probe.c_star > 0.0;
  return probe;
}

ContractionReport contraction_probe(DiffusionModule module, ModelParams& params,
                                    const Dataset& dataset, const std::vector<double>& t_list,
                                    const std::vector<double>& eps_list, int n_samples,
                                    std::uint64_t seed) {
  if (t_list.empty() || eps_list.empty()) {
    throw ValidationError("contraction_probe: need terminal times and eps levels");
  }
  ContractionReport report;
  report.terminal_times = t_list;
  report.probe = jacobian_probe(module, params, dataset, module_solver(module, 1.0),
                                /*n_trajectories=*/32, /*n_points=*/200, seed);

  // Base states and unit perturbation directions.
  Rng rng(mix_seed(seed, 0x70726f6265ULL));
  const std::vector<PatchRef> patches = list_patches(dataset, n_samples);
  std::vector<Tensor> bases;
  if (module == DiffusionModule::vertex) {
    for (const PatchRef& ref : patches) {
      const Frame& frame = dataset.frames[static_cast<std::size_t>(ref.frame)];
      bases.push_back(downsample(frame.patches[static_cast<std::size_t>(ref.idx)].pixels, params));
    }
  } else {
    const SolverConfig vcfg = module_solver(DiffusionModule::vertex, 1.0);
    for (const PatchRef& ref : patches) {
      const Frame& frame = dataset.frames[static_cast<std::size_t>(ref.frame)];
      const NeighborhoodGraph g =
          build_neighborhood(frame, ref.idx, params.cfg.knn, params.cfg.include_anchor);
      std::vector<Tensor> embeddings;
      for (int v : g.vertices) {
        embeddings.push_back(
            vertex_embedding(frame.patches[static_cast<std::size_t>(v)].pixels, params, vcfg));
      }
      std::vector<const Tensor*> rows;
      for (const Tensor& e : embeddings) rows.push_back(&e);
      bases.push_back(ops::stack_rows(rows));
    }
  }
  std::vector<Tensor> directions;
  for (const Tensor& b : bases) directions.push_back(unit_direction(b.shape(), rng));

  Tensor adj;
  for (double t1 : t_list) {
    const SolverConfig cfg = module_solver(module, t1);
    double acc = 0.0;
    int count = 0;
    for (std::size_t si = 0; si < bases.size(); ++si) {
      const Tensor& z0 = bases[si];
      OdeRhs rhs;
      if (module == DiffusionModule::vertex) {
        rhs = make_vertex_rhs(params);
      } else {
        adj = Tensor::full({z0.dim(0), z0.dim(0)}, 1.0);
        rhs = make_graph_rhs(params, adj);
      }
      auto out_of = [&](const Tensor& z) {
        const Tensor zT = integrate(rhs, z, cfg).state;
        if (module == DiffusionModule::vertex) return vertex_head(zT, params);
        return ops::mean_axis(zT, 0);
      };
      const Tensor clean = out_of(z0);
      for (double eps : eps_list) {
        Tensor zp = z0;
        for (std::size_t i = 0; i < zp.numel(); ++i) zp[i] += eps * directions[si][i];
        acc += ops::sub(out_of(zp), clean).frob_norm() / eps;
        ++count;
      }
    }
    report.mean_ratio.push_back(acc / count);
  }

  std::vector<double> logs;
  for (double r : report.mean_ratio) logs.push_back(std::log(std::max(r, 1e-300)));
  report.log_slope = fit_line(t_list, logs, &report.r_squared);
  return report;
}

}  // namespace rmat
