#pragma once

#include <vector>

#include "lrea/checkpoint.hpp"
#include "lrea/model.hpp"
#include "lrea/store.hpp"

namespace lrea {

// Absorbed-path attention over cached d x r state. Nothing here touches
// or allocates anything sized by the original sequence length.
template <typename T>
Mat<T> lrea_attention_serve(const Mat<T>& e_comp, const Mat<T>& e_auxabsorb,
                            const Mat<T>& target_emb, const AttentionParamsT<T>& att,
                            T slope) {
    const int rank = e_comp.cols;
    const Mat<T> comp_t = transpose(e_comp);                       // r x d
    const Mat<T> tb = broadcast_row(target_emb, rank);             // r x d
    const Mat<T> m = add(add(matmul(tb, att.w1), matmul(comp_t, att.w2)),
                         matmul(hadamard(tb, comp_t), att.w3));    // r x h
    const Mat<T> gate = matmul(leaky_relu(m, slope), att.w_o);     // r x 1
    return transpose(matmul(e_auxabsorb, gate));                   // 1 x d
}

// Plain-value target attention over a full sequence; the serving-side
// baseline path and the short-branch evaluator. Mirrors the training
// graph operation for operation.
template <typename T>
Mat<T> din_attention_value(const Mat<T>& seq_emb, const Mat<T>& target_emb,
                           const AttentionParamsT<T>& att, T slope) {
    const int len = seq_emb.rows;
    const Mat<T> q = broadcast_row(matmul(target_emb, att.w1), len);
    const Mat<T> keys = matmul(seq_emb, att.w2);
    const Mat<T> cross = matmul(hadamard(broadcast_row(target_emb, len), seq_emb), att.w3);
    const Mat<T> scores = matmul(leaky_relu(add(add(q, keys), cross), slope), att.w_o);
    return transpose(matmul(transpose(seq_emb), scores));
}

template <typename T>
T mlp_logit(const MlpT<T>& head, Mat<T> x, T slope) {
    for (std::size_t i = 0; i < head.weights.size(); ++i) {
        x = add(matmul(x, head.weights[i]), head.biases[i]);
        if (i + 1 < head.weights.size()) x = leaky_relu(x, slope);
    }
    return x(0, 0);
}

template <typename T>
T clamped_sigmoid(T logit) {
    const T p = T(1) / (T(1) + std::exp(-logit));
    return std::min(T(1) - T(1e-7), std::max(T(1e-7), p));
}

struct ScoreRequest {
    std::int64_t user_id = 0;
    std::vector<int> candidate_ids;
    std::vector<int> side_ids;
};

// Scores every candidate from cached state only; the raw long sequence is
// never loaded. Throws StaleCacheError when the store was built from a
// different parameter version, CacheMissError for unknown users.
std::vector<double> score(const ScoreRequest& request, StateStore& store,
                          const Checkpoint& ck);

}  // namespace lrea
