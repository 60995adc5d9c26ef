#pragma once

#include <optional>
#include <string>
#include <vector>

#include "f2r/ad.hpp"
#include "f2r/params.hpp"

namespace f2r::nn {

/// Creates the tensors of one pre-LN transformer stack under a name prefix.
/// Layout (per layer i, prefix p):
///   p.Li.attn.{wq,wk,wv,wo}  d x d      p.Li.attn.{bq,bk,bv,bo}  1 x d
///   p.Li.ln1.{g,b}           1 x d
///   p.Li.ffn.{w1 (d x f), b1 (1 x f), w2 (f x d), b2 (1 x d)}
///   p.Li.ln2.{g,b}           1 x d
/// Decoder layers add p.Li.cross.{...} and p.Li.ln3.{g,b}.
/// Both stacks own a final norm p.lnf.{g,b}.
struct StackDims {
  int layers = 2;
  int heads = 2;
  int dim = 32;
  int ffn = 128;
};

void create_encoder_stack(ParamStore& params, const std::string& prefix, const StackDims& dims,
                          double init_std, Rng& rng);
void create_decoder_stack(ParamStore& params, const std::string& prefix, const StackDims& dims,
                          double init_std, Rng& rng);

/// Attention weights captured during a forward pass: one row-stochastic
/// matrix (queries x keys) per layer per head.
struct AttentionTrace {
  std::vector<std::vector<ad::Matrix>> layers;  // [layer][head] -> Tq x Tk
};

/// Multi-head attention. mask, when present, is an additive Tq x Tk matrix
/// (0 or a large negative number) applied before the softmax.
ad::Var multi_head_attention(ad::Tape& tape, const TapeBinding& p, const std::string& prefix,
                             ad::Var queries, ad::Var keys_values, int heads,
                             const std::optional<ad::Matrix>& mask,
                             std::vector<ad::Matrix>* head_trace = nullptr);

/// Pre-LN encoder stack: x += Attn(LN(x)); x += FFN(LN(x)); final LN.
ad::Var encoder_stack(ad::Tape& tape, const TapeBinding& p, const std::string& prefix,
                      const StackDims& dims, ad::Var input,
                      const std::optional<ad::Matrix>& mask = std::nullopt,
                      AttentionTrace* trace = nullptr);

/// Pre-LN decoder stack with causal self-attention and cross-attention over
/// the encoder output; final LN.
ad::Var decoder_stack(ad::Tape& tape, const TapeBinding& p, const std::string& prefix,
                      const StackDims& dims, ad::Var input, ad::Var encoder_out);

/// Additive causal mask (strictly upper triangle set to -1e30).
ad::Matrix causal_mask(int n);

}  // namespace f2r::nn
