#include "f2r/transformer.hpp"

#include <cmath>

namespace f2r::nn {

namespace {

void create_attention(ParamStore& params, const std::string& prefix, int dim, double init_std,
                      Rng& rng) {
  params.normal(prefix + ".wq", dim, dim, init_std, rng);
  params.normal(prefix + ".wk", dim, dim, init_std, rng);
  params.normal(prefix + ".wv", dim, dim, init_std, rng);
  params.normal(prefix + ".wo", dim, dim, init_std, rng);
  params.zeros(prefix + ".bq", 1, dim);
  params.zeros(prefix + ".bk", 1, dim);
  params.zeros(prefix + ".bv", 1, dim);
  params.zeros(prefix + ".bo", 1, dim);
}

void create_layer_norm(ParamStore& params, const std::string& prefix, int dim) {
  params.ones(prefix + ".g", 1, dim);
  params.zeros(prefix + ".b", 1, dim);
}

void create_ffn(ParamStore& params, const std::string& prefix, int dim, int ffn, double init_std,
                Rng& rng) {
  params.normal(prefix + ".w1", dim, ffn, init_std, rng);
  params.zeros(prefix + ".b1", 1, ffn);
  params.normal(prefix + ".w2", ffn, dim, init_std, rng);
  params.zeros(prefix + ".b2", 1, dim);
}

ad::Var linear(ad::Tape& t, const TapeBinding& p, const std::string& w, const std::string& b,
               ad::Var x) {
  return t.add_rowwise(t.matmul(x, p[w]), p[b]);
}

ad::Var ffn_block(ad::Tape& t, const TapeBinding& p, const std::string& prefix, ad::Var x) {
  ad::Var h = t.gelu(linear(t, p, prefix + ".w1", prefix + ".b1", x));
  return linear(t, p, prefix + ".w2", prefix + ".b2", h);
}

ad::Var layer_norm(ad::Tape& t, const TapeBinding& p, const std::string& prefix, ad::Var x) {
  return t.layer_norm_rows(x, p[prefix + ".g"], p[prefix + ".b"]);
}

}  // namespace

void create_encoder_stack(ParamStore& params, const std::string& prefix, const StackDims& dims,
                          double init_std, Rng& rng) {
  for (int i = 0; i < dims.layers; ++i) {
    const std::string lp = prefix + ".L" + std::to_string(i);
    create_attention(params, lp + ".attn", dims.dim, init_std, rng);
    create_layer_norm(params, lp + ".ln1", dims.dim);
    create_ffn(params, lp + ".ffn", dims.dim, dims.ffn, init_std, rng);
    create_layer_norm(params, lp + ".ln2", dims.dim);
  }
  create_layer_norm(params, prefix + ".lnf", dims.dim);
}

void create_decoder_stack(ParamStore& params, const std::string& prefix, const StackDims& dims,
                          double init_std, Rng& rng) {
  for (int i = 0; i < dims.layers; ++i) {
    const std::string lp = prefix + ".L" + std::to_string(i);
    create_attention(params, lp + ".attn", dims.dim, init_std, rng);
    create_layer_norm(params, lp + ".ln1", dims.dim);
    create_attention(params, lp + ".cross", dims.dim, init_std, rng);
    create_layer_norm(params, lp + ".ln2", dims.dim);
    create_ffn(params, lp + ".ffn", dims.dim, dims.ffn, init_std, rng);
    create_layer_norm(params, lp + ".ln3", dims.dim);
  }
  create_layer_norm(params, prefix + ".lnf", dims.dim);
}

ad::Var multi_head_attention(ad::Tape& t, const TapeBinding& p, const std::string& prefix,
                             ad::Var queries, ad::Var keys_values, int heads,
                             const std::optional<ad::Matrix>& mask,
                             std::vector<ad::Matrix>* head_trace) {
  const int dim = static_cast<int>(t.value(queries).cols());
  if (heads <= 0 || dim % heads != 0) {
    throw Error("attention: head count must divide the model dimension");
  }
  const int dh = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  ad::Var q = linear(t, p, prefix + ".wq", prefix + ".bq", queries);
  ad::Var k = linear(t, p, prefix + ".wk", prefix + ".bk", keys_values);
  ad::Var v = linear(t, p, prefix + ".wv", prefix + ".bv", keys_values);

  ad::Var mask_var;
  if (mask) mask_var = t.leaf(*mask, /*requires_grad=*/false);

  std::vector<ad::Var> contexts;
  contexts.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    ad::Var qh = t.slice_cols(q, h * dh, dh);
    ad::Var kh = t.slice_cols(k, h * dh, dh);
    ad::Var vh = t.slice_cols(v, h * dh, dh);
    ad::Var scores = t.scale(t.matmul_nt(qh, kh), inv_sqrt);
    if (mask) scores = t.add(scores, mask_var);
    ad::Var attn = t.softmax_rows(scores);
    if (head_trace) head_trace->push_back(t.value(attn));
    contexts.push_back(t.matmul(attn, vh));
  }
  ad::Var merged = heads == 1 ? contexts[0] : t.concat_cols(contexts);
  return linear(t, p, prefix + ".wo", prefix + ".bo", merged);
}

ad::Var encoder_stack(ad::Tape& t, const TapeBinding& p, const std::string& prefix,
                      const StackDims& dims, ad::Var input, const std::optional<ad::Matrix>& mask,
                      AttentionTrace* trace) {
  ad::Var x = input;
  for (int i = 0; i < dims.layers; ++i) {
    const std::string lp = prefix + ".L" + std::to_string(i);
    std::vector<ad::Matrix> heads_trace;
    ad::Var normed = layer_norm(t, p, lp + ".ln1", x);
    ad::Var attn = multi_head_attention(t, p, lp + ".attn", normed, normed, dims.heads, mask,
                                        trace ? &heads_trace : nullptr);
    if (trace) trace->layers.push_back(std::move(heads_trace));
    x = t.add(x, attn);
    x = t.add(x, ffn_block(t, p, lp + ".ffn", layer_norm(t, p, lp + ".ln2", x)));
  }
  return layer_norm(t, p, prefix + ".lnf", x);
}

ad::Var decoder_stack(ad::Tape& t, const TapeBinding& p, const std::string& prefix,
                      const StackDims& dims, ad::Var input, ad::Var encoder_out) {
  const int n = static_cast<int>(t.value(input).rows());
  const ad::Matrix mask = causal_mask(n);
  ad::Var x = input;
  for (int i = 0; i < dims.layers; ++i) {
    const std::string lp = prefix + ".L" + std::to_string(i);
    ad::Var normed = layer_norm(t, p, lp + ".ln1", x);
    x = t.add(x, multi_head_attention(t, p, lp + ".attn", normed, normed, dims.heads, mask));
    ad::Var normed2 = layer_norm(t, p, lp + ".ln2", x);
    x = t.add(x, multi_head_attention(t, p, lp + ".cross", normed2, encoder_out, dims.heads,
                                      std::nullopt));
    x = t.add(x, ffn_block(t, p, lp + ".ffn", layer_norm(t, p, lp + ".ln3", x)));
  }
  return layer_norm(t, p, prefix + ".lnf", x);
}

ad::Matrix causal_mask(int n) {
  ad::Matrix m = ad::Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) m(i, j) = -1e30;
  }
  return m;
}

}  // namespace f2r::nn
