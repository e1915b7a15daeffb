#include "rmat/vertex_diffusion.hpp"

#include "rmat/ops.hpp"

namespace rmat {

Tensor downsample(const Tensor& pixels, const ModelParams& p) {
  Tensor z = pixels;
  for (std::size_t l = 0; l < p.downsampler.size(); ++l) {
    const ConvLayer& c = p.downsampler[l];
    z = ops::conv2d(z, c.kernel.value, c.bias.value, c.stride, c.padding);
    if (l + 1 < p.downsampler.size()) z = ops::relu(z);
  }
  return z;
}

NodeId downsample_t(Tape& tape, NodeId pixels, ModelParams& p) {
  NodeId z = pixels;
  for (std::size_t l = 0; l < p.downsampler.size(); ++l) {
    ConvLayer& c = p.downsampler[l];
    z = tape.conv2d(z, tape.param(c.kernel), tape.param(c.bias), c.stride, c.padding);
    if (l + 1 < p.downsampler.size()) z = tape.relu(z);
  }
  return z;
}

namespace {

Tensor vertex_net(const Tensor& z, const ModelParams& p) {
  const ConvLayer& c1 = p.ode_convs[0];
  const ConvLayer& c2 = p.ode_convs[1];
  Tensor h = ops::conv2d(z, c1.kernel.value, c1.bias.value, c1.stride, c1.padding);
  h = ops::tanh(h);
  return ops::conv2d(h, c2.kernel.value, c2.bias.value, c2.stride, c2.padding);
}

NodeId vertex_net_t(Tape& tape, NodeId z, ModelParams& p) {
  ConvLayer& c1 = p.ode_convs[0];
  ConvLayer& c2 = p.ode_convs[1];
  NodeId h = tape.conv2d(z, tape.param(c1.kernel), tape.param(c1.bias), c1.stride, c1.padding);
  h = tape.tanh(h);
  return tape.conv2d(h, tape.param(c2.kernel), tape.param(c2.bias), c2.stride, c2.padding);
}

}  // namespace

Tensor vertex_rhs(const Tensor& z, const ModelParams& p) {
  Tensor net = vertex_net(z, p);
  if (!p.cfg.contraction_form) return net;
  return ops::sub(net, ops::axis_scale(z, p.vertex_gamma.value, 0));
}

NodeId vertex_rhs_t(Tape& tape, NodeId z, ModelParams& p) {
  NodeId net = vertex_net_t(tape, z, p);
  if (!p.cfg.contraction_form) return net;
  return tape.sub(net, tape.axis_scale(z, tape.param(p.vertex_gamma), 0));
}

OdeRhs make_vertex_rhs(const ModelParams& p) {
  return [&p](const Tensor& z, double) { return vertex_rhs(z, p); };
}

TapedOdeRhs make_vertex_rhs_taped(ModelParams& p) {
  return [&p](Tape& tape, NodeId z, double) { return vertex_rhs_t(tape, z, p); };
}

Tensor vertex_head(const Tensor& z_final, const ModelParams& p) {
  Tensor pooled = ops::avg_pool(z_final, p.cfg.pool_grid);
  pooled = ops::reshape(pooled, {static_cast<int>(pooled.numel())});
  return ops::linear(pooled, p.fc_w.value, p.fc_b.value);
}

NodeId vertex_head_t(Tape& tape, NodeId z_final, ModelParams& p) {
  NodeId pooled = tape.avg_pool(z_final, p.cfg.pool_grid);
  pooled = tape.reshape(pooled, {static_cast<int>(tape.value(pooled).numel())});
  return tape.linear(pooled, tape.param(p.fc_w), tape.param(p.fc_b));
}

Tensor embed_vertex(const Tensor& pixels, const ModelParams& p, const SolverConfig& cfg,
                    IntegrationResult* stats) {
  Tensor z0 = downsample(pixels, p);
  IntegrationResult res = integrate(make_vertex_rhs(p), z0, cfg);
  Tensor out = vertex_head(res.state, p);
  if (stats) *stats = std::move(res);
  return out;
}

NodeId embed_vertex_t(Tape& tape, NodeId pixels, ModelParams& p, const SolverConfig& cfg,
                      PlanCache* plans, const std::string& plan_key) {
  NodeId z0 = downsample_t(tape, pixels, p);
  const std::vector<StepRecord>* frozen = nullptr;
  if (plans && plans->frozen) {
    auto it = plans->seq.find(plan_key);
    if (it != plans->seq.end()) frozen = &it->second;
  }
  std::vector<StepRecord> steps;
  NodeId zT = integrate_differentiable(tape, make_vertex_rhs(p), make_vertex_rhs_taped(p), z0,
                                       cfg, frozen, plans && !frozen ? &steps : nullptr);
  if (plans && !frozen) plans->seq[plan_key] = std::move(steps);
  return vertex_head_t(tape, zT, p);
}

Tensor embed_vertex_resnet(const Tensor& pixels, const ModelParams& p) {
  Tensor z0 = downsample(pixels, p);
  return vertex_head(ops::add(z0, vertex_net(z0, p)), p);
}

NodeId embed_vertex_resnet_t(Tape& tape, NodeId pixels, ModelParams& p) {
  NodeId z0 = downsample_t(tape, pixels, p);
  return vertex_head_t(tape, tape.add(z0, vertex_net_t(tape, z0, p)), p);
}

Tensor vertex_embedding(const Tensor& pixels, const ModelParams& p, const SolverConfig& cfg) {
  if (p.cfg.arch == "resnet_gat") return embed_vertex_resnet(pixels, p);
  return embed_vertex(pixels, p, cfg);
}

NodeId vertex_embedding_t(Tape& tape, NodeId pixels, ModelParams& p, const SolverConfig& cfg,
                          PlanCache* plans, const std::string& plan_key) {
  if (p.cfg.arch == "resnet_gat") return embed_vertex_resnet_t(tape, pixels, p);
  return embed_vertex_t(tape, pixels, p, cfg, plans, plan_key);
}

}  // namespace rmat
