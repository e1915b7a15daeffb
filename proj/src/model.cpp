#include "rmat/model.hpp"

#include <cmath>
#include <unordered_map>

#include "rmat/bin_io.hpp"
#include "rmat/error.hpp"
#include "rmat/ops.hpp"
#include "rmat/rng.hpp"

namespace rmat {

int ModelConfig::feature_channels() const {
  return downsampler.empty() ? 0 : downsampler.back().out_channels;
}

int ModelConfig::feature_side() const {
  int s = patch_side;
  for (const ConvSpec& c : downsampler) s = ops::conv_out_extent(s, c.kernel, c.stride, c.padding);
  return s;
}

void ModelConfig::validate() const {
  if (patch_side < 8) throw ValidationError("model: patch_side must be >= 8");
  if (downsampler.empty()) throw ValidationError("model: downsampler needs at least one layer");
  if (n_f < 1) throw ValidationError("model: n_f must be >= 1");
  if (knn < 1) throw ValidationError("model: knn must be >= 1");
  if (graph_variant != "gat" && graph_variant != "gcn") {
    throw ValidationError("model: graph_variant must be 'gat' or 'gcn'");
  }
  if (arch != "robustmat" && arch != "resnet_gat") {
    throw ValidationError("model: arch must be 'robustmat' or 'resnet_gat'");
  }
  if (graph_variant == "gat" && gat_heads * gat_head_dim != n_f) {
    throw ValidationError("model: gat_heads * gat_head_dim must equal n_f (state-shape "
                          "preserving diffusion)");
  }
  if (contraction_form && !(gamma_min > 0.0)) {
    throw ValidationError("model: gamma_min must be > 0 for the contraction form");
  }
  const int side = feature_side();
  if (side < 1) throw ValidationError("model: downsampler collapses the patch to nothing");
  if (pool_grid < 1 || side % pool_grid != 0) {
    throw ValidationError("model: pool_grid must divide the feature side " +
                          std::to_string(side));
  }
  if (r_hidden.empty()) throw ValidationError("model: r_hidden needs at least one layer");
}

ModelConfig ModelConfig::paper_scale() {
  ModelConfig cfg;
  cfg.patch_side = 256;
  cfg.downsampler = {{16, 3, 1, 1},  {32, 3, 2, 1},  {64, 3, 1, 1},  {64, 3, 2, 1},
                     {128, 3, 1, 1}, {128, 3, 1, 1}, {128, 3, 1, 1}};
  cfg.n_f = 512;
  cfg.gat_heads = 4;
  cfg.gat_head_dim = 128;
  cfg.r_hidden = {1024, 512, 256};
  return cfg;
}

namespace {

Tensor uniform_tensor(std::vector<int> shape, double limit, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

Tensor he_kernel(int co, int ci, int k, double gain, Rng& rng) {
  const double limit = gain * std::sqrt(6.0 / (static_cast<double>(ci) * k * k));
  return uniform_tensor({co, ci, k, k}, limit, rng);
}

Tensor glorot_matrix(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  return uniform_tensor({rows, cols}, limit, rng);
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0x6d6f64656cULL));
  ModelParams p;
  p.cfg = cfg;

  int ci = 3;
  for (std::size_t l = 0; l < cfg.downsampler.size(); ++l) {
    const ConvSpec& s = cfg.downsampler[l];
    const std::string base = "ds" + std::to_string(l);
    p.downsampler.push_back(ConvLayer{
        Parameter(base + ".kernel", he_kernel(s.out_channels, ci, s.kernel, 1.0, rng)),
        Parameter(base + ".bias", Tensor({s.out_channels})), s.stride, s.padding});
    ci = s.out_channels;
  }

  const int c = cfg.feature_channels();
  const int pad = cfg.ode_kernel / 2;
  for (int l = 0; l < 2; ++l) {
    const std::string base = "ode" + std::to_string(l);
    p.ode_convs.push_back(
        ConvLayer{Parameter(base + ".kernel", he_kernel(c, c, cfg.ode_kernel, 0.5, rng)),
                  Parameter(base + ".bias", Tensor({c})), 1, pad});
  }
  p.vertex_gamma = Parameter("vertex_gamma", Tensor::full({c}, cfg.gamma_init));
  if (cfg.contraction_form) p.vertex_gamma.min_value = cfg.gamma_min;

  const int pooled = c * cfg.pool_grid * cfg.pool_grid;
  p.fc_w = Parameter("fc.w", glorot_matrix(cfg.n_f, pooled, rng));
  p.fc_b = Parameter("fc.b", Tensor({cfg.n_f}));

  if (cfg.graph_variant == "gat") {
    for (int b = 0; b < 2; ++b) {
      GatBlock block;
      for (int h = 0; h < cfg.gat_heads; ++h) {
        const std::string base = "gat" + std::to_string(b) + ".h" + std::to_string(h);
        const double alimit = std::sqrt(6.0 / (cfg.gat_head_dim + 1));
        block.heads.push_back(
            GatHead{Parameter(base + ".w", glorot_matrix(cfg.n_f, cfg.gat_head_dim, rng)),
                    Parameter(base + ".a_src", uniform_tensor({cfg.gat_head_dim, 1}, alimit, rng)),
                    Parameter(base + ".a_dst", uniform_tensor({cfg.gat_head_dim, 1}, alimit, rng))});
      }
      p.gat_blocks.push_back(std::move(block));
    }
  } else {
    for (int b = 0; b < 2; ++b) {
      p.gcn_weights.push_back(Parameter("gcn" + std::to_string(b) + ".w",
                                        glorot_matrix(cfg.n_f, cfg.n_f, rng)));
    }
  }
  p.graph_gamma = Parameter("graph_gamma", Tensor::full({cfg.n_f}, cfg.gamma_init));
  if (cfg.contraction_form) p.graph_gamma.min_value = cfg.gamma_min;

  int in = cfg.n_f;
  for (std::size_t l = 0; l < cfg.r_hidden.size() + 1; ++l) {
    const int out = l < cfg.r_hidden.size() ? cfg.r_hidden[l] : 1;
    const std::string base = "r" + std::to_string(l);
    p.r_weights.emplace_back(base + ".w", glorot_matrix(out, in, rng));
    p.r_biases.emplace_back(base + ".b", Tensor({out}));
    in = out;
  }
  p.bilinear_m = Parameter("m", glorot_matrix(cfg.n_f, cfg.n_f, rng));
  return p;
}

std::vector<Parameter*> ModelParams::all() {
  std::vector<Parameter*> out;
  for (ConvLayer& l : downsampler) {
    out.push_back(&l.kernel);
    out.push_back(&l.bias);
  }
  for (ConvLayer& l : ode_convs) {
    out.push_back(&l.kernel);
    out.push_back(&l.bias);
  }
  out.push_back(&vertex_gamma);
  out.push_back(&fc_w);
  out.push_back(&fc_b);
  for (GatBlock& b : gat_blocks) {
    for (GatHead& h : b.heads) {
      out.push_back(&h.w);
      out.push_back(&h.a_src);
      out.push_back(&h.a_dst);
    }
  }
  for (Parameter& w : gcn_weights) out.push_back(&w);
  out.push_back(&graph_gamma);
  for (std::size_t i = 0; i < r_weights.size(); ++i) {
    out.push_back(&r_weights[i]);
    out.push_back(&r_biases[i]);
  }
  out.push_back(&bilinear_m);
  return out;
}

void ModelParams::zero_grads() {
  for (Parameter* p : all()) p->zero_grad();
}

// ---- checkpoint io ----------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'R', 'M', 'W', 'T'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, ModelParams& params,
                     const nlohmann::json& config_snapshot) {
  BinWriter w;
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  const std::string cfg = config_snapshot.dump();
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg.data(), cfg.size());
  auto ps = params.all();
  w.u32(static_cast<std::uint32_t>(ps.size()));
  for (Parameter* p : ps) {
    w.u16(static_cast<std::uint16_t>(p->name.size()));
    w.bytes(p->name.data(), p->name.size());
    w.u8(static_cast<std::uint8_t>(p->value.ndim()));
    for (int d = 0; d < p->value.ndim(); ++d) w.u32(static_cast<std::uint32_t>(p->value.dim(d)));
    for (std::size_t i = 0; i < p->value.numel(); ++i) w.f64(p->value[i]);
  }
  write_file(path, w.data());
}

ModelParams load_checkpoint(const std::string& path, nlohmann::json* config_snapshot) {
  const std::vector<char> buf = read_file(path);
  BinReader r(buf.data(), buf.size());
  if (r.str(4, "magic") != std::string(kMagic, 4)) {
    throw ParseError(0, "bad checkpoint magic (expected RMWT)");
  }
  const std::uint16_t version = r.u16("version");
  if (version != kVersion) {
    throw ParseError(4, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t cfg_off = r.offset();
  const std::uint32_t cfg_len = r.u32("config length");
  const std::string cfg_str = r.str(cfg_len, "config snapshot");
  nlohmann::json snapshot = nlohmann::json::parse(cfg_str, nullptr, false);
  if (snapshot.is_discarded()) throw ParseError(cfg_off, "config snapshot is not valid JSON");
  if (!snapshot.contains("model")) throw ParseError(cfg_off, "config snapshot lacks 'model'");
  ModelParams params = ModelParams::init(model_config_from_json(snapshot["model"]), 0);

  std::unordered_map<std::string, Parameter*> by_name;
  for (Parameter* p : params.all()) by_name[p->name] = p;

  const std::uint32_t n = r.u32("parameter count");
  if (n != by_name.size()) {
    throw ParseError(r.offset() - 4, "checkpoint holds " + std::to_string(n) +
                                         " parameters, model expects " +
                                         std::to_string(by_name.size()));
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t entry_off = r.offset();
    const std::uint16_t name_len = r.u16("parameter name length");
    const std::string name = r.str(name_len, "parameter name");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError(entry_off, "unknown parameter '" + name + "'");
    Parameter* p = it->second;
    const std::uint8_t ndim = r.u8("parameter rank");
    std::vector<int> shape;
    for (int d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(r.u32("parameter dim")));
    if (shape != p->value.shape()) {
      throw ParseError(entry_off, "parameter '" + name + "' has shape " +
                                      Tensor::shape_str_of(shape) + ", model expects " +
                                      p->value.shape_str());
    }
    for (std::size_t j = 0; j < p->value.numel(); ++j) p->value[j] = r.f64("parameter data");
  }
  r.expect_end("checkpoint");
  if (config_snapshot) *config_snapshot = std::move(snapshot);
  return params;
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["patch_side"] = cfg.patch_side;
  nlohmann::json ds = nlohmann::json::array();
  for (const ConvSpec& s : cfg.downsampler) {
    ds.push_back({s.out_channels, s.kernel, s.stride, s.padding});
  }
  j["downsampler"] = ds;
  j["ode_kernel"] = cfg.ode_kernel;
  j["contraction_form"] = cfg.contraction_form;
  j["gamma_init"] = cfg.gamma_init;
  j["gamma_min"] = cfg.gamma_min;
  j["pool_grid"] = cfg.pool_grid;
  j["n_f"] = cfg.n_f;
  j["graph_variant"] = cfg.graph_variant;
  j["gat_heads"] = cfg.gat_heads;
  j["gat_head_dim"] = cfg.gat_head_dim;
  j["r_hidden"] = cfg.r_hidden;
  j["knn"] = cfg.knn;
  j["include_anchor"] = cfg.include_anchor;
  j["arch"] = cfg.arch;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    if (j.contains("patch_side")) cfg.patch_side = j.at("patch_side").get<int>();
    if (j.contains("downsampler")) {
      cfg.downsampler.clear();
      for (const auto& e : j.at("downsampler")) {
        if (!e.is_array() || e.size() != 4) {
          throw ValidationError("model.downsampler entries must be [out,kernel,stride,padding]");
        }
        cfg.downsampler.push_back(
            {e[0].get<int>(), e[1].get<int>(), e[2].get<int>(), e[3].get<int>()});
      }
    }
    if (j.contains("ode_kernel")) cfg.ode_kernel = j.at("ode_kernel").get<int>();
    if (j.contains("contraction_form")) cfg.contraction_form = j.at("contraction_form").get<bool>();
    if (j.contains("gamma_init")) cfg.gamma_init = j.at("gamma_init").get<double>();
    if (j.contains("gamma_min")) cfg.gamma_min = j.at("gamma_min").get<double>();
    if (j.contains("pool_grid")) cfg.pool_grid = j.at("pool_grid").get<int>();
    if (j.contains("n_f")) cfg.n_f = j.at("n_f").get<int>();
    if (j.contains("graph_variant")) cfg.graph_variant = j.at("graph_variant").get<std::string>();
    if (j.contains("gat_heads")) cfg.gat_heads = j.at("gat_heads").get<int>();
    if (j.contains("gat_head_dim")) cfg.gat_head_dim = j.at("gat_head_dim").get<int>();
    if (j.contains("r_hidden")) cfg.r_hidden = j.at("r_hidden").get<std::vector<int>>();
    if (j.contains("knn")) cfg.knn = j.at("knn").get<int>();
    if (j.contains("include_anchor")) cfg.include_anchor = j.at("include_anchor").get<bool>();
    if (j.contains("arch")) cfg.arch = j.at("arch").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace rmat
