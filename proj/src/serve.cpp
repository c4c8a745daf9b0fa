#include "lrea/serve.hpp"

namespace lrea {

std::vector<double> score(const ScoreRequest& request, StateStore& store,
                          const Checkpoint& ck) {
    if (request.candidate_ids.empty()) {
        throw DataError("score: request has no candidates");
    }
    if (store.manifest().params_version != ck.version) {
        throw StaleCacheError(
            "state store was built from parameter version " +
            version_string(store.manifest().params_version) +
            " but the checkpoint is " + version_string(ck.version) +
            "; re-run precompute");
    }
    const ModelConfig& cfg = ck.config;
    if (static_cast<int>(request.side_ids.size()) != cfg.side_count) {
        throw ShapeError("score: request has " + std::to_string(request.side_ids.size()) +
                         " side ids, model expects " + std::to_string(cfg.side_count));
    }

    const CompressedUserState& st = store.get(request.user_id);
    if (st.params_version != ck.version) {
        throw StaleCacheError("cached state for user " + std::to_string(request.user_id) +
                              " has parameter version " +
                              version_string(st.params_version) + ", checkpoint is " +
                              version_string(ck.version));
    }

    Matrix short_emb;
    if (cfg.use_short) {
        short_emb = lookup_sequence(ck.params.embedding, st.short_ids, cfg.short_len);
    }
    std::vector<Matrix> side_embs;
    for (int id : request.side_ids) side_embs.push_back(lookup_row(ck.params.embedding, id));

    std::vector<double> probs;
    probs.reserve(request.candidate_ids.size());
    for (int candidate : request.candidate_ids) {
        const Matrix target_emb = lookup_row(ck.params.embedding, candidate);
        const Matrix pooled = lrea_attention_serve(st.e_comp, st.e_auxabsorb, target_emb,
                                                   ck.params.att_long, cfg.leaky_slope);
        Matrix x(1, cfg.head_input_dim());
        int off = 0;
        auto place = [&](const Matrix& part) {
            for (int j = 0; j < part.cols; ++j) x(0, off + j) = part(0, j);
            off += part.cols;
        };
        place(pooled);
        if (cfg.use_short) {
            place(din_attention_value(short_emb, target_emb, ck.params.att_short,
                                      cfg.leaky_slope));
        }
        place(target_emb);
        for (const Matrix& s : side_embs) place(s);

        probs.push_back(clamped_sigmoid(mlp_logit(ck.params.head, x, cfg.leaky_slope)));
    }
    return probs;
}

}  // namespace lrea
