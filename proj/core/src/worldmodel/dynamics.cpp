#include "wmsynth/worldmodel/dynamics.hpp"

#include <cmath>

#include "wmsynth/flowmatch/flowmatch.hpp"
#include "wmsynth/numerics/ops.hpp"

namespace wmsynth::worldmodel {

using numerics::Graph;
using numerics::ParameterStore;
using numerics::Shape;
using numerics::ShapeError;
using numerics::Var;

DynamicsNet::DynamicsNet(ParameterStore& store, const DynamicsConfig& cfg, std::size_t vocab, numerics::Rng& rng)
    : cfg_(cfg) {
  if (cfg.model_dim % cfg.heads != 0) throw std::invalid_argument("dynamics: model_dim must divide into heads");
  const std::size_t d = cfg.model_dim;
  in_proj_ = numerics::Linear(store, "dyn.in", cfg.latent_dim, d, rng);
  token_ = numerics::Embedding(store, "dyn.token", vocab, cfg.token_dim, rng);
  cond_proj_ = numerics::Linear(store, "dyn.cond", cfg.latent_dim + cfg.token_dim + cfg.time_dim, d, rng);
  store.add("dyn.pos", numerics::normal_tensor<float>({cfg.window + 1, d}, rng, 0.02));
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string p = "dyn.block" + std::to_string(b) + ".";
    Block blk;
    blk.ln1 = numerics::LayerNorm(store, p + "ln1", d);
    blk.ln2 = numerics::LayerNorm(store, p + "ln2", d);
    blk.q = numerics::Linear(store, p + "q", d, d, rng);
    blk.k = numerics::Linear(store, p + "k", d, d, rng);
    blk.v = numerics::Linear(store, p + "v", d, d, rng);
    blk.o = numerics::Linear(store, p + "o", d, d, rng);
    blk.fc1 = numerics::Linear(store, p + "fc1", d, cfg.ffn_dim, rng);
    blk.fc2 = numerics::Linear(store, p + "fc2", cfg.ffn_dim, d, rng);
    blocks_.push_back(std::move(blk));
  }
  ln_out_ = numerics::LayerNorm(store, "dyn.ln_out", d);
  out_proj_ = numerics::Linear(store, "dyn.out", d, cfg.latent_dim, rng);
}

Var DynamicsNet::forward(Graph& g, ParameterStore& store, Var noisy, std::span<const float> t, Var first,
                         std::span<const std::size_t> tokens) const {
  const Shape& s = noisy.shape();
  if (s.size() != 3 || s[1] != cfg_.window || s[2] != cfg_.latent_dim) {
    throw ShapeError("dynamics input", s, {0, cfg_.window, cfg_.latent_dim});
  }
  const std::size_t B = s[0], W = cfg_.window, d = cfg_.model_dim;
  if (first.shape() != Shape{B, cfg_.latent_dim}) throw ShapeError("dynamics first-frame latent", first.shape(), {B, cfg_.latent_dim});
  if (t.size() != B || tokens.size() != B) throw std::invalid_argument("dynamics: need one timestep and token per row");
  for (std::size_t tok : tokens) {
    if (tok >= token_.vocab()) throw std::out_of_range("dynamics: token id " + std::to_string(tok) + " out of range");
  }

  Var temb = g.constant(flowmatch::timestep_features<float>(t, cfg_.time_dim));
  Var cond = cond_proj_.forward(g, store, numerics::concat<float>({first, token_.forward(g, store, tokens), temb}, 1));
  Var x = add(in_proj_.forward(g, store, noisy), numerics::expand(cond, 1, W));
  Var h = numerics::concat<float>({reshape(cond, {B, 1, d}), x}, 1);
  h = add(h, numerics::expand(g.parameter(store.at("dyn.pos")), 0, B));

  const std::size_t H = cfg_.heads, dh = d / H;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const Block& blk : blocks_) {
    Var n = blk.ln1.forward(g, store, h);
    Var q = blk.q.forward(g, store, n), k = blk.k.forward(g, store, n), v = blk.v.forward(g, store, n);
    std::vector<Var> heads;
    for (std::size_t i = 0; i < H; ++i) {
      Var qh = numerics::slice(q, 2, i * dh, dh), kh = numerics::slice(k, 2, i * dh, dh);
      Var vh = numerics::slice(v, 2, i * dh, dh);
      Var att = numerics::softmax(scale(numerics::bmm(qh, numerics::transpose(kh)), inv));
      heads.push_back(numerics::bmm(att, vh));
    }
    Var attn = H == 1 ? heads[0] : numerics::concat(heads, 2);
    h = add(h, blk.o.forward(g, store, attn));
    Var f = blk.fc2.forward(g, store, gelu(blk.fc1.forward(g, store, blk.ln2.forward(g, store, h))));
    h = add(h, f);
  }
  Var out = numerics::slice(ln_out_.forward(g, store, h), 1, 1, W);
  return out_proj_.forward(g, store, out);
}

std::vector<numerics::Linear*> DynamicsNet::adaptable() {
  std::vector<numerics::Linear*> out;
  for (auto& b : blocks_) {
    for (numerics::Linear* l : {&b.q, &b.k, &b.v, &b.o, &b.fc1, &b.fc2}) out.push_back(l);
  }
  return out;
}

void DynamicsNet::attach_adapters(ParameterStore& store, const numerics::LoraConfig& cfg, numerics::Rng& rng) {
  for (numerics::Linear* l : adaptable()) {
    if (!l->has_adapter()) l->attach_adapter(store, cfg, rng);
  }
}

void DynamicsNet::merge_adapters(ParameterStore& store) {
  for (numerics::Linear* l : adaptable()) {
    if (l->has_adapter()) l->merge_adapter(store);
  }
}

bool DynamicsNet::has_adapters() const {
  for (const auto& b : blocks_) {
    if (b.q.has_adapter()) return true;
  }
  return false;
}

std::vector<std::string> DynamicsNet::adapter_targets() const {
  std::vector<std::string> out;
  for (const auto& b : blocks_) {
    for (const numerics::Linear* l : {&b.q, &b.k, &b.v, &b.o, &b.fc1, &b.fc2}) out.push_back(l->name());
  }
  return out;
}

}  // namespace wmsynth::worldmodel
