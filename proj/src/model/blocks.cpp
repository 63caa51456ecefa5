#include "voxtr/model/blocks.hpp"

namespace voxtr {

namespace {

ag::Var ffn(const ParamStore& params, const std::string& prefix, const ag::Var& x) {
  ag::Var h = ag::linear(x, params.at(prefix + "fc1.weight"), params.at(prefix + "fc1.bias"));
  h = ag::gelu(h);
  return ag::linear(h, params.at(prefix + "fc2.weight"), params.at(prefix + "fc2.bias"));
}

}  // namespace

ag::Var layer_norm_named(const ParamStore& params, const std::string& prefix, const ag::Var& x) {
  return ag::layer_norm(x, params.at(prefix + ".gamma"), params.at(prefix + ".beta"));
}

ag::Var mha(const ParamStore& params, const std::string& prefix, const ag::Var& query_in,
            const ag::Var& kv_in, int heads, bool causal) {
  ag::Var q = ag::linear(query_in, params.at(prefix + "wq.weight"), params.at(prefix + "wq.bias"));
  ag::Var k = ag::linear(kv_in, params.at(prefix + "wk.weight"), params.at(prefix + "wk.bias"));
  ag::Var v = ag::linear(kv_in, params.at(prefix + "wv.weight"), params.at(prefix + "wv.bias"));
  ag::Var ctx = ag::attention(q, k, v, heads, causal);
  return ag::linear(ctx, params.at(prefix + "wo.weight"), params.at(prefix + "wo.bias"));
}

ag::Var encoder_block(const ParamStore& params, const std::string& prefix, const ag::Var& x,
                      int heads) {
  ag::Var h = layer_norm_named(params, prefix + "norm1", x);
  ag::Var y = ag::add(x, mha(params, prefix + "attn.", h, h, heads, /*causal=*/false));
  h = layer_norm_named(params, prefix + "norm2", y);
  return ag::add(y, ffn(params, prefix + "ffn.", h));
}

ag::Var decoder_block(const ParamStore& params, const std::string& prefix, const ag::Var& x,
                      const ag::Var& memory, int heads, bool causal_self) {
  ag::Var h = layer_norm_named(params, prefix + "norm1", x);
  ag::Var y = ag::add(x, mha(params, prefix + "self_attn.", h, h, heads, causal_self));
  h = layer_norm_named(params, prefix + "norm2", y);
  y = ag::add(y, mha(params, prefix + "cross_attn.", h, memory, heads, /*causal=*/false));
  h = layer_norm_named(params, prefix + "norm3", y);
  return ag::add(y, ffn(params, prefix + "ffn.", h));
}

}  // namespace voxtr
