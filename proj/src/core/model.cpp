#include "model.hpp"

#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "checkpoint.hpp"

namespace tbf {

namespace {

struct Registrar {
  std::vector<std::pair<std::string, Tensor>>& out;
  std::unordered_set<std::string> seen;

  void add(const std::string& name, const Tensor& t) {
    if (!seen.insert(name).second)
      throw std::logic_error("model: duplicate parameter name '" + name + "'");
    out.emplace_back(name, t);
  }
  void add_linear(const std::string& prefix, const LinearParams& p) {
    add(prefix + ".w", p.w);
    add(prefix + ".b", p.b);
  }
  void add_ln(const std::string& prefix, const LayerNormParams& p) {
    add(prefix + ".gamma", p.gamma);
    add(prefix + ".beta", p.beta);
  }
  void add_layer(const std::string& prefix, const TransformerLayerParams& l) {
    add_ln(prefix + ".ln1", l.ln1);
    add_linear(prefix + ".q", l.attn.q);
    add_linear(prefix + ".k", l.attn.k);
    add_linear(prefix + ".v", l.attn.v);
    add_linear(prefix + ".o", l.attn.o);
    add_ln(prefix + ".ln2", l.ln2);
    add_linear(prefix + ".mlp1", l.mlp1);
    add_linear(prefix + ".mlp2", l.mlp2);
  }
  void add_branch(const std::string& prefix, const BranchParams& b) {
    add_linear(prefix + ".proj", b.proj);
    add(prefix + ".pos", b.pos);
    for (std::size_t i = 0; i < b.layers.size(); ++i)
      add_layer(prefix + ".layer" + std::to_string(i), b.layers[i]);
  }
  void add_conv(const std::string& prefix, const ConvLayer& c) {
    add(prefix + ".kernels", c.kernels);
    add(prefix + ".bias", c.bias);
  }
  void add_tap(const std::string& prefix, const TapFusionParams& t) {
    add_conv(prefix + ".merge", t.merge);
    add(prefix + ".q.kernels", t.q_kernels);
    add(prefix + ".k.kernels", t.k_kernels);
    add_conv(prefix + ".v", t.v);
    add(prefix + ".alpha", t.alpha);
    add_conv(prefix + ".fuse", t.fuse);
  }
};

void build_registry(TBFormerParams& p) {
  p.registry.clear();
  Registrar reg{p.registry, {}};
  reg.add("bayar.kernels", p.bayar.kernels);
  reg.add_branch("rgb", p.rgb_branch);
  reg.add_branch("noise", p.noise_branch);
  reg.add_tap("ahfm.early", p.ahfm.early);
  reg.add_tap("ahfm.mid", p.ahfm.mid);
  reg.add_tap("ahfm.late", p.ahfm.late);
  reg.add_conv("ahfm.final", p.ahfm.final_conv);
  if (p.built_for == Variant::rgb_noise_concat) reg.add_linear("concat", p.concat_proj);
  reg.add_linear("decoder.in", p.decoder.input_proj);
  reg.add("decoder.categories", p.decoder.categories);
  reg.add_layer("decoder.layer1", p.decoder.layer1);
  reg.add_layer("decoder.layer2", p.decoder.layer2);
  reg.add_linear("decoder.patch", p.decoder.patch_proj);
  reg.add_linear("decoder.class", p.decoder.class_proj);
}

std::size_t variant_index(Variant v) {
  switch (v) {
    case Variant::rgb_only: return 0;
    case Variant::rgb_noise_concat: return 1;
    case Variant::full_ahfm: return 2;
  }
  throw std::logic_error("variant_index: bad enum value");
}

Variant variant_at(std::size_t i) {
  switch (i) {
    case 0: return Variant::rgb_only;
    case 1: return Variant::rgb_noise_concat;
    case 2: return Variant::full_ahfm;
  }
  throw std::runtime_error("checkpoint: bad variant index " + std::to_string(i));
}

}  // namespace

const Tensor* TBFormerParams::find(const std::string& name) const {
  for (const auto& [n, t] : registry)
    if (n == name) return &t;
  return nullptr;
}

TBFormerParams make_model(const ModelConfig& cfg) {
  cfg.validate();
  TBFormerParams p;
  p.built_for = cfg.variant;
  Rng root(cfg.seed);
  {
    Rng r = root.stream(1);
    p.bayar = make_bayar(r);
  }
  {
    Rng r = root.stream(2);
    p.rgb_branch = make_branch(cfg, r);
  }
  {
    Rng r = root.stream(3);
    p.noise_branch = make_branch(cfg, r);
  }
  {
    Rng r = root.stream(4);
    p.ahfm = make_ahfm(cfg.dim, r);
  }
  if (cfg.variant == Variant::rgb_noise_concat) {
    Rng r = root.stream(5);
    p.concat_proj = make_linear(2 * cfg.dim, cfg.dim, r);
  }
  {
    Rng r = root.stream(6);
    p.decoder = make_decoder(cfg.dim, cfg.heads, r);
  }
  build_registry(p);
  for (auto& [name, t] : p.registry) snap_f32(t);
  return p;
}

std::vector<std::pair<std::string, Tensor>> active_params(const TBFormerParams& p, Variant v) {
  std::vector<std::string> prefixes;
  switch (v) {
    case Variant::rgb_only: prefixes = {"rgb.", "decoder."}; break;
    case Variant::rgb_noise_concat:
      prefixes = {"bayar.", "rgb.", "noise.", "concat.", "decoder."};
      break;
    case Variant::full_ahfm:
      prefixes = {"bayar.", "rgb.", "noise.", "ahfm.", "decoder."};
      break;
  }
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, t] : p.registry)
    for (const auto& pre : prefixes)
      if (name.rfind(pre, 0) == 0) {
        out.emplace_back(name, t);
        break;
      }
  return out;
}

Tensor model_forward(const Tensor& image, const TBFormerParams& p, const ModelConfig& cfg) {
  cfg.validate();
  if (cfg.variant != p.built_for)
    throw std::invalid_argument(std::string("model_forward: parameters built for ") +
                                variant_name(p.built_for) + " but config selects " +
                                variant_name(cfg.variant));
  if (image.shape() != Shape{3, cfg.image_h, cfg.image_w})
    throw std::invalid_argument("model_forward: image " + shape_str(image.shape()) +
                                " does not match configured 3x" + std::to_string(cfg.image_h) +
                                "x" + std::to_string(cfg.image_w));
  for (double v : image.data())
    if (v < -1e-9 || v > 1.0 + 1e-9)
      throw std::invalid_argument("model_forward: image values must lie in [0,1]");

  const std::size_t gh = cfg.grid_h(), gw = cfg.grid_w();
  TapFeatures rgb = branch_forward(patch_embed(image, p.rgb_branch, cfg.patch), p.rgb_branch);

  switch (cfg.variant) {
    case Variant::rgb_only:
      return decode(tokens_to_map(rgb.late, gh, gw), p.decoder, cfg.image_h, cfg.image_w);
    case Variant::rgb_noise_concat: {
      Tensor noise_map = bayar_forward(image, p.bayar);
      TapFeatures noi =
          branch_forward(patch_embed(noise_map, p.noise_branch, cfg.patch), p.noise_branch);
      Tensor joint = linear(concat({rgb.late, noi.late}, 1), p.concat_proj);
      return decode(tokens_to_map(joint, gh, gw), p.decoder, cfg.image_h, cfg.image_w);
    }
    case Variant::full_ahfm: {
      Tensor noise_map = bayar_forward(image, p.bayar);
      TapFeatures noi =
          branch_forward(patch_embed(noise_map, p.noise_branch, cfg.patch), p.noise_branch);
      Tensor ze = position_attention_fuse(rgb.early, noi.early, p.ahfm.early, gh, gw);
      Tensor zm = position_attention_fuse(rgb.mid, noi.mid, p.ahfm.mid, gh, gw);
      Tensor zl = position_attention_fuse(rgb.late, noi.late, p.ahfm.late, gh, gw);
      Tensor z = hierarchical_fuse(ze, zm, zl, p.ahfm);
      return decode(z, p.decoder, cfg.image_h, cfg.image_w);
    }
  }
  throw std::logic_error("model_forward: bad variant enum");
}

Tensor bce_loss(const Tensor& m, const Tensor& gt, double forged_weight) {
  if (m.rank() != 3 || m.extent(0) != 2)
    throw std::invalid_argument("bce_loss: expected 2xHxW probabilities, got " +
                                shape_str(m.shape()));
  const std::size_t h = m.extent(1), w = m.extent(2);
  if (gt.shape() != Shape{h, w})
    throw std::invalid_argument("bce_loss: mask " + shape_str(gt.shape()) +
                                " does not match prediction " + shape_str(m.shape()));
  for (double v : gt.data())
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument("bce_loss: ground truth must be binary {0,1}");

  Tensor probs = clamp(m, 1e-7, 1.0 - 1e-7);
  Tensor authentic = reshape(slice(probs, 0, 0, 1), {h, w});
  Tensor forged = reshape(slice(probs, 0, 1, 1), {h, w});
  Tensor pos = scalar_mul(mul(gt, log(forged)), forged_weight);
  Tensor neg = mul(scalar_add(scalar_mul(gt, -1.0), 1.0), log(authentic));
  return scalar_mul(sum_all(add(pos, neg)), -1.0 / static_cast<double>(h * w));
}

void model_save(const std::string& path, const TBFormerParams& p, const ModelConfig& cfg) {
  write_checkpoint(path, model_tensors(p, cfg));
}

std::vector<NamedTensor> model_tensors(const TBFormerParams& p, const ModelConfig& cfg) {
  std::vector<NamedTensor> tensors;
  tensors.reserve(p.registry.size() + 2);
  for (const auto& [name, t] : p.registry) tensors.push_back({name, t.shape(), t.data()});

  tensors.push_back({"meta.arch",
                     {7},
                     {static_cast<double>(cfg.image_h), static_cast<double>(cfg.image_w),
                      static_cast<double>(cfg.patch), static_cast<double>(cfg.dim),
                      static_cast<double>(cfg.depth), static_cast<double>(cfg.heads),
                      static_cast<double>(variant_index(cfg.variant))}});
  // u64 seed as four 16-bit chunks, low chunk first (each exact in f32).
  std::vector<double> seed_chunks(4);
  for (int i = 0; i < 4; ++i)
    seed_chunks[i] = static_cast<double>((cfg.seed >> (16 * i)) & 0xFFFFu);
  tensors.push_back({"meta.seed", {4}, seed_chunks});
  return tensors;
}

std::pair<TBFormerParams, ModelConfig> model_load(const std::string& path) {
  auto tensors = read_checkpoint(path);
  std::unordered_map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) {
    if (!by_name.emplace(t.name, &t).second)
      throw std::runtime_error("checkpoint: duplicate tensor '" + t.name + "'");
  }

  auto meta = [&](const std::string& name, std::size_t expect) -> const NamedTensor& {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint: missing required tensor '" + name + "'");
    if (it->second->data.size() != expect)
      throw std::runtime_error("checkpoint: tensor '" + name + "' has wrong size");
    return *it->second;
  };

  const auto& arch = meta("meta.arch", 7);
  const auto& seed = meta("meta.seed", 4);

  ModelConfig cfg;
  cfg.image_h = static_cast<std::size_t>(arch.data[0]);
  cfg.image_w = static_cast<std::size_t>(arch.data[1]);
  cfg.patch = static_cast<std::size_t>(arch.data[2]);
  cfg.dim = static_cast<std::size_t>(arch.data[3]);
  cfg.depth = static_cast<std::size_t>(arch.data[4]);
  cfg.heads = static_cast<std::size_t>(arch.data[5]);
  cfg.variant = variant_at(static_cast<std::size_t>(arch.data[6]));
  cfg.seed = 0;
  for (int i = 0; i < 4; ++i)
    cfg.seed |= static_cast<std::uint64_t>(seed.data[i]) << (16 * i);

  TBFormerParams params = make_model(cfg);
  std::unordered_set<std::string> consumed = {"meta.arch", "meta.seed"};
  for (auto& [name, t] : params.registry) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
    if (it->second->shape != t.shape())
      throw std::runtime_error("checkpoint: parameter '" + name + "' has shape " +
                               shape_str(it->second->shape) + ", expected " +
                               shape_str(t.shape()));
    t.mutable_data() = it->second->data;
    consumed.insert(name);
  }
  for (const auto& t : tensors) {
    // Training state rides along in the same file and is read elsewhere.
    if (t.name.rfind("optim.", 0) == 0 || t.name.rfind("meta.", 0) == 0) continue;
    if (!consumed.count(t.name))
      throw std::runtime_error("checkpoint: unknown tensor '" + t.name + "'");
  }
  return {std::move(params), cfg};
}

}  // namespace tbf
