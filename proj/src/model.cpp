#include "lrea/model.hpp"

#include <cmath>

#include "lrea/rng.hpp"

namespace lrea {

const char* arch_name(Arch a) { return a == Arch::kLrea ? "lrea" : "din"; }

Arch arch_from_name(const std::string& name) {
    if (name == "lrea") return Arch::kLrea;
    if (name == "din") return Arch::kDinLong;
    throw DataError("unknown architecture '" + name + "' (expected lrea or din)");
}

void ModelConfig::validate() const {
    if (seq_len <= 0 || emb_dim <= 0 || att_hidden <= 0 || vocab_size <= 1) {
        throw ShapeError("model config: sizes must be positive");
    }
    if (arch == Arch::kLrea) {
        if (rank <= 0 || rank > seq_len) {
            throw ShapeError("model config: rank " + std::to_string(rank) +
                             " must be in [1, " + std::to_string(seq_len) + "]");
        }
    }
    if (use_short && short_len <= 0) {
        throw ShapeError("model config: short_len must be positive when the short branch is on");
    }
    if (side_count < 0) throw ShapeError("model config: side_count must be >= 0");
    if (leaky_slope <= 0.0 || leaky_slope >= 1.0) {
        throw ShapeError("model config: leaky slope must be in (0,1)");
    }
    if (mlp_hidden.empty()) throw ShapeError("model config: head needs at least one hidden layer");
}

std::vector<std::string> tensor_names(const ModelConfig& cfg) {
    std::vector<std::string> names;
    ModelParams dummy;  // shapes irrelevant, only the visit order matters
    dummy.head.weights.resize(cfg.mlp_hidden.size() + 1);
    dummy.head.biases.resize(cfg.mlp_hidden.size() + 1);
    for_each_tensor(dummy, cfg, [&](const char* name, const Matrix&) {
        names.emplace_back(name);
    });
    return names;
}

namespace {

Matrix random_normal(Rng& rng, int rows, int cols, double stddev) {
    Matrix m(rows, cols);
    for (auto& x : m.data) x = rng.normal(0.0, stddev);
    return m;
}

AttentionParams init_attention(Rng& rng, int d, int h) {
    AttentionParams att;
    const double s_in = std::sqrt(2.0 / (d + h));
    att.w1 = random_normal(rng, d, h, s_in);
    att.w2 = random_normal(rng, d, h, s_in);
    att.w3 = random_normal(rng, d, h, s_in);
    // Pooling sums scores across the whole sequence, so the output
    // projection starts small to keep the head unsaturated at init.
    att.w_o = random_normal(rng, h, 1, 0.1 * std::sqrt(2.0 / (h + 1)));
    return att;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ModelParams p;

    p.embedding.vocab_size = cfg.vocab_size;
    p.embedding.dim = cfg.emb_dim;
    p.embedding.weights = random_normal(rng, cfg.vocab_size, cfg.emb_dim,
                                        1.0 / std::sqrt(static_cast<double>(cfg.emb_dim)));
    for (int j = 0; j < cfg.emb_dim; ++j) p.embedding.weights(0, j) = 0.0;

    if (cfg.arch == Arch::kLrea) {
        // Non-negative start so the non-negativity penalty begins near zero.
        p.w_comp = Matrix(cfg.seq_len, cfg.rank);
        const double comp_hi = 1.0 / std::sqrt(static_cast<double>(cfg.seq_len));
        for (auto& x : p.w_comp.data) x = rng.uniform(0.0, comp_hi);
        p.w_decomp = Matrix(cfg.rank, cfg.seq_len);
        const double decomp_scale = 1.0 / std::sqrt(static_cast<double>(cfg.rank));
        for (auto& x : p.w_decomp.data) x = std::abs(rng.normal()) * decomp_scale;
    }

    p.att_long = init_attention(rng, cfg.emb_dim, cfg.att_hidden);
    if (cfg.use_short) p.att_short = init_attention(rng, cfg.emb_dim, cfg.att_hidden);

    int in_dim = cfg.head_input_dim();
    for (std::size_t i = 0; i <= cfg.mlp_hidden.size(); ++i) {
        const int out_dim =
            i < cfg.mlp_hidden.size() ? cfg.mlp_hidden[i] : 1;
        p.head.weights.push_back(
            random_normal(rng, in_dim, out_dim, std::sqrt(2.0 / in_dim)));
        p.head.biases.push_back(Matrix(1, out_dim));
        in_dim = out_dim;
    }
    return p;
}

void project_nonneg(ModelParams& params, const ModelConfig& cfg) {
    abs_inplace(params.embedding.weights);
    if (cfg.arch == Arch::kLrea) {
        abs_inplace(params.w_comp);
        abs_inplace(params.w_decomp);
    }
    abs_inplace(params.att_long.w1);
    abs_inplace(params.att_long.w2);
    abs_inplace(params.att_long.w3);
}

// ---- value-level operations ----

Matrix lookup_row(const EmbeddingTable& table, int id) {
    if (id < 0 || id >= table.vocab_size) {
        throw IndexError("lookup: id " + std::to_string(id) + " outside vocab of " +
                         std::to_string(table.vocab_size));
    }
    Matrix r(1, table.dim);
    for (int j = 0; j < table.dim; ++j) r(0, j) = table.weights(id, j);
    return r;
}

Matrix lookup_sequence(const EmbeddingTable& table, const std::vector<int>& ids,
                       int capacity) {
    if (static_cast<int>(ids.size()) > capacity) {
        throw ShapeError("lookup_sequence: " + std::to_string(ids.size()) +
                         " ids exceed capacity " + std::to_string(capacity));
    }
    Matrix out(capacity, table.dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || id >= table.vocab_size) {
            throw IndexError("lookup_sequence: id " + std::to_string(id) +
                             " outside vocab of " + std::to_string(table.vocab_size));
        }
        for (int j = 0; j < table.dim; ++j) out(static_cast<int>(i), j) = table.weights(id, j);
    }
    return out;
}

Matrix din_attention(const Matrix& seq_emb, const Matrix& target_emb,
                     const AttentionParams& att, double slope) {
    Tape t;
    AttentionVars av{t.param(att.w1), t.param(att.w2), t.param(att.w3), t.param(att.w_o)};
    Var out = din_attention_node(t, t.constant(seq_emb), t.constant(target_emb), av, slope);
    return t.value(out);
}

Matrix lrea_reconstruct(const Matrix& seq_emb, const Matrix& w_comp,
                        const Matrix& w_decomp) {
    return transpose(matmul(matmul(transpose(seq_emb), w_comp), w_decomp));
}

LreaTrainOutput lrea_attention_train(const Matrix& seq_emb, const Matrix& target_emb,
                                     const Matrix& w_comp, const Matrix& w_decomp,
                                     const AttentionParams& att, double slope) {
    Tape t;
    AttentionVars av{t.param(att.w1), t.param(att.w2), t.param(att.w3), t.param(att.w_o)};
    LreaAttentionNodes nodes =
        lrea_attention_node(t, t.constant(seq_emb), t.constant(target_emb),
                            t.param(w_comp), t.param(w_decomp), av, slope);
    return LreaTrainOutput{t.value(nodes.pooled), nodes.absorbed, nodes.absorption_gap};
}

// ---- tape builders ----

ModelVars register_params(Tape& t, const ModelParams& p, const ModelConfig& cfg,
                          bool trainable) {
    auto reg = [&](const Matrix& m) { return trainable ? t.param(m) : t.constant(m); };
    ModelVars v;
    v.embedding = reg(p.embedding.weights);
    if (cfg.arch == Arch::kLrea) {
        v.w_comp = reg(p.w_comp);
        v.w_decomp = reg(p.w_decomp);
    }
    v.att_long = {reg(p.att_long.w1), reg(p.att_long.w2), reg(p.att_long.w3),
                  reg(p.att_long.w_o)};
    if (cfg.use_short) {
        v.att_short = {reg(p.att_short.w1), reg(p.att_short.w2), reg(p.att_short.w3),
                       reg(p.att_short.w_o)};
    }
    for (std::size_t i = 0; i < p.head.weights.size(); ++i) {
        v.head_w.push_back(reg(p.head.weights[i]));
        v.head_b.push_back(reg(p.head.biases[i]));
    }
    return v;
}

std::vector<Var> tensor_vars(const ModelVars& v, const ModelConfig& cfg) {
    std::vector<Var> out;
    out.push_back(v.embedding);
    if (cfg.arch == Arch::kLrea) {
        out.push_back(v.w_comp);
        out.push_back(v.w_decomp);
    }
    out.insert(out.end(), {v.att_long.w1, v.att_long.w2, v.att_long.w3, v.att_long.w_o});
    if (cfg.use_short) {
        out.insert(out.end(),
                   {v.att_short.w1, v.att_short.w2, v.att_short.w3, v.att_short.w_o});
    }
    for (std::size_t i = 0; i < v.head_w.size(); ++i) {
        out.push_back(v.head_w[i]);
        out.push_back(v.head_b[i]);
    }
    return out;
}

Var din_attention_node(Tape& t, Var seq_emb, Var target_emb, const AttentionVars& att,
                       double slope) {
    const int len = t.value(seq_emb).rows;
    Var q = t.broadcast_row(t.matmul(target_emb, att.w1), len);
    Var keys = t.matmul(seq_emb, att.w2);
    Var cross = t.matmul(t.hadamard(t.broadcast_row(target_emb, len), seq_emb), att.w3);
    Var scores = t.matmul(t.leaky_relu(t.add(t.add(q, keys), cross), slope), att.w_o);
    return t.transpose(t.matmul(t.transpose(seq_emb), scores));
}

LreaAttentionNodes lrea_attention_node(Tape& t, Var seq_emb, Var target_emb, Var w_comp,
                                       Var w_decomp, const AttentionVars& att,
                                       double slope, bool penalty_stop_grad) {
    const int rank = t.value(w_comp).cols;

    Var seq_t = t.transpose(seq_emb);                    // d x L
    Var comp = t.matmul(seq_t, w_comp);                  // d x r
    Var comp_t = t.transpose(comp);                      // r x d
    Var tb = t.broadcast_row(target_emb, rank);          // r x d
    Var m = t.add(t.add(t.matmul(tb, att.w1), t.matmul(comp_t, att.w2)),
                  t.matmul(t.hadamard(tb, comp_t), att.w3));  // r x h
    Var pre = t.matmul(t.transpose(w_decomp), m);        // L x h
    Var scores = t.matmul(t.leaky_relu(pre, slope), att.w_o);  // L x 1
    Var pooled = t.transpose(t.matmul(seq_t, scores));   // 1 x d

    LreaAttentionNodes out;
    out.pooled = pooled;

    if (penalty_stop_grad) {
        Var comp_pen =
            t.transpose(t.matmul(t.transpose(t.stop_gradient(seq_emb)), w_comp));
        out.penalty = t.neg_part_sq_norm(comp_pen);
    } else {
        out.penalty = t.neg_part_sq_norm(comp_t);
    }

    // Absorbed branch, value only. This mirrors what serving computes from
    // its cache, written out independently here so the two can be compared.
    const Matrix aux = matmul(t.value(seq_t), transpose(t.value(w_decomp)));  // d x r
    const Matrix gate = matmul(leaky_relu(t.value(m), slope), t.value(att.w_o));  // r x 1
    out.absorbed = transpose(matmul(aux, gate));  // 1 x d
    out.absorption_gap = max_abs_diff(t.value(pooled), out.absorbed);
    return out;
}

namespace {

std::vector<int> padded_ids(const std::vector<int>& ids, int capacity, const char* what) {
    if (static_cast<int>(ids.size()) > capacity) {
        throw ShapeError(std::string(what) + ": " + std::to_string(ids.size()) +
                         " ids exceed capacity " + std::to_string(capacity));
    }
    std::vector<int> out(capacity, 0);
    std::copy(ids.begin(), ids.end(), out.begin());
    return out;
}

}  // namespace

ExampleForward forward_example(Tape& t, const ModelVars& v, const ModelConfig& cfg,
                               const Example& ex, bool penalty_stop_grad) {
    if (static_cast<int>(ex.side_ids.size()) != cfg.side_count) {
        throw ShapeError("forward: example has " + std::to_string(ex.side_ids.size()) +
                         " side ids, config expects " + std::to_string(cfg.side_count));
    }

    Var seq_emb = t.gather_rows(v.embedding, padded_ids(ex.seq.long_ids, cfg.seq_len,
                                                        "long sequence"));
    Var target_emb = t.gather_rows(v.embedding, {ex.target_id});

    ExampleForward out;
    std::vector<Var> features;
    if (cfg.arch == Arch::kLrea) {
        LreaAttentionNodes attn =
            lrea_attention_node(t, seq_emb, target_emb, v.w_comp, v.w_decomp, v.att_long,
                                cfg.leaky_slope, penalty_stop_grad);
        features.push_back(attn.pooled);
        out.comp_penalty = attn.penalty;
        out.absorption_gap = attn.absorption_gap;
    } else {
        features.push_back(din_attention_node(t, seq_emb, target_emb, v.att_long,
                                              cfg.leaky_slope));
    }
    if (cfg.use_short) {
        Var short_emb = t.gather_rows(
            v.embedding, padded_ids(ex.seq.short_ids, cfg.short_len, "short sequence"));
        features.push_back(
            din_attention_node(t, short_emb, target_emb, v.att_short, cfg.leaky_slope));
    }
    features.push_back(target_emb);
    for (int id : ex.side_ids) features.push_back(t.gather_rows(v.embedding, {id}));

    Var x = t.concat_cols(features);
    for (std::size_t i = 0; i < v.head_w.size(); ++i) {
        x = t.add(t.matmul(x, v.head_w[i]), v.head_b[i]);
        if (i + 1 < v.head_w.size()) x = t.leaky_relu(x, cfg.leaky_slope);
    }
    out.prob = t.clamp(t.sigmoid(x), 1e-7, 1.0 - 1e-7);
    return out;
}

double predict(const ModelParams& params, const ModelConfig& cfg, const Example& ex) {
    Tape t;
    ModelVars v = register_params(t, params, cfg, /*trainable=*/false);
    ExampleForward fwd = forward_example(t, v, cfg, ex);
    return t.value(fwd.prob)(0, 0);
}

}  // namespace lrea
