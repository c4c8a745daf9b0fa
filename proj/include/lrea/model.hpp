#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrea/data.hpp"
#include "lrea/matrix.hpp"
#include "lrea/tape.hpp"

namespace lrea {

enum class Arch {
    kLrea,     // low-rank compressed long-sequence attention
    kDinLong,  // target attention over the full long sequence
};

const char* arch_name(Arch a);
Arch arch_from_name(const std::string& name);

struct ModelConfig {
    Arch arch = Arch::kLrea;
    int seq_len = 200;   // L, long-history capacity
    int short_len = 16;  // S, short-history capacity
    int rank = 128;      // r, compressed length
    int emb_dim = 16;    // d
    int att_hidden = 36; // h, attention MLP width
    double leaky_slope = 0.01;
    std::vector<int> mlp_hidden = {512, 256, 128};
    int vocab_size = 2048;
    int side_count = 1;     // side-feature ids per example
    bool use_short = true;  // enable the short-history attention branch

    int head_input_dim() const {
        return emb_dim * (2 + (use_short ? 1 : 0) + side_count);
    }
    void validate() const;
};

struct EmbeddingTable {
    int vocab_size = 0;
    int dim = 0;
    Matrix weights;  // row 0 reserved for padding, frozen at zero
};

// Target-attention score MLP: three d x h input projections and an
// h x 1 output projection, no biases.
template <typename T>
struct AttentionParamsT {
    Mat<T> w1, w2, w3, w_o;
};
using AttentionParams = AttentionParamsT<double>;

template <typename T>
struct MlpT {
    std::vector<Mat<T>> weights;  // in x out
    std::vector<Mat<T>> biases;   // 1 x out
};
using Mlp = MlpT<double>;

struct ModelParams {
    EmbeddingTable embedding;
    Matrix w_comp;    // L x r, long-sequence compression (kLrea only)
    Matrix w_decomp;  // r x L, decompression (kLrea only)
    AttentionParams att_long;
    AttentionParams att_short;  // present when use_short
    Mlp head;
};

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Flips embedding, compression matrices and the long-branch input
// projections to their absolute values. Under this projection the
// activation commutes with the decompression product exactly, so the
// absorbed serving path reproduces the training path.
void project_nonneg(ModelParams& params, const ModelConfig& cfg);

// Visits every trainable tensor in a fixed canonical order.
template <typename Params, typename Fn>
void for_each_tensor(Params& p, const ModelConfig& cfg, Fn&& fn) {
    fn("embedding", p.embedding.weights);
    if (cfg.arch == Arch::kLrea) {
        fn("w_comp", p.w_comp);
        fn("w_decomp", p.w_decomp);
    }
    fn("long.w1", p.att_long.w1);
    fn("long.w2", p.att_long.w2);
    fn("long.w3", p.att_long.w3);
    fn("long.w_o", p.att_long.w_o);
    if (cfg.use_short) {
        fn("short.w1", p.att_short.w1);
        fn("short.w2", p.att_short.w2);
        fn("short.w3", p.att_short.w3);
        fn("short.w_o", p.att_short.w_o);
    }
    for (std::size_t i = 0; i < p.head.weights.size(); ++i) {
        fn(("head.w" + std::to_string(i)).c_str(), p.head.weights[i]);
        fn(("head.b" + std::to_string(i)).c_str(), p.head.biases[i]);
    }
}

std::vector<std::string> tensor_names(const ModelConfig& cfg);

// ---- value-level operations ----

// Embeds `ids` padded (or truncated) to `capacity` rows; padded rows are
// the frozen zero row.
Matrix lookup_sequence(const EmbeddingTable& table, const std::vector<int>& ids,
                       int capacity);
Matrix lookup_row(const EmbeddingTable& table, int id);

Matrix din_attention(const Matrix& seq_emb, const Matrix& target_emb,
                     const AttentionParams& att, double slope);

// (seq_emb' * w_comp * w_decomp)', the rank-r reconstruction of the
// sequence embedding.
Matrix lrea_reconstruct(const Matrix& seq_emb, const Matrix& w_comp,
                        const Matrix& w_decomp);

struct LreaTrainOutput {
    Matrix pooled;           // 1 x d, unabsorbed training-path output
    Matrix absorbed;         // 1 x d, absorbed-branch value
    double absorption_gap;   // max-abs difference of the two
};

LreaTrainOutput lrea_attention_train(const Matrix& seq_emb, const Matrix& target_emb,
                                     const Matrix& w_comp, const Matrix& w_decomp,
                                     const AttentionParams& att, double slope);

// Full forward for one example; probability clamped to [1e-7, 1-1e-7].
double predict(const ModelParams& params, const ModelConfig& cfg, const Example& ex);

// ---- tape builders (training path) ----

struct AttentionVars {
    Var w1, w2, w3, w_o;
};

struct ModelVars {
    Var embedding;
    Var w_comp, w_decomp;
    AttentionVars att_long;
    AttentionVars att_short;
    std::vector<Var> head_w, head_b;
};

ModelVars register_params(Tape& tape, const ModelParams& params, const ModelConfig& cfg,
                          bool trainable);

// Vars in the same order as for_each_tensor / tensor_names.
std::vector<Var> tensor_vars(const ModelVars& vars, const ModelConfig& cfg);

Var din_attention_node(Tape& t, Var seq_emb, Var target_emb, const AttentionVars& att,
                       double slope);

struct LreaAttentionNodes {
    Var pooled;       // 1 x d unabsorbed output, gradients flow through it
    Var penalty;      // 1 x 1 squared negative part of the compressed sequence
    Matrix absorbed;  // 1 x d absorbed-branch value, diagnostic only
    double absorption_gap = 0.0;
};

LreaAttentionNodes lrea_attention_node(Tape& t, Var seq_emb, Var target_emb, Var w_comp,
                                       Var w_decomp, const AttentionVars& att,
                                       double slope, bool penalty_stop_grad = false);

struct ExampleForward {
    Var prob;                     // 1 x 1 clamped probability
    Var comp_penalty;             // 1 x 1; invalid Var for the DIN arch
    double absorption_gap = 0.0;  // 0 for the DIN arch
};

ExampleForward forward_example(Tape& t, const ModelVars& vars, const ModelConfig& cfg,
                               const Example& ex, bool penalty_stop_grad = false);

}  // namespace lrea
