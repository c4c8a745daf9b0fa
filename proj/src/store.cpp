#include "lrea/store.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

namespace fs = std::filesystem;

namespace lrea {

CompressedUserState compress_user(std::int64_t user_id, const std::vector<int>& long_ids,
                                  const std::vector<int>& short_ids,
                                  const Checkpoint& ck) {
    if (ck.config.arch != Arch::kLrea) {
        throw DataError("precompute: checkpoint does not hold a low-rank model");
    }
    const Matrix seq_emb =
        lookup_sequence(ck.params.embedding, long_ids, ck.config.seq_len);
    const Matrix seq_t = transpose(seq_emb);  // d x L

    CompressedUserState st;
    st.user_id = user_id;
    st.e_comp = matmul(seq_t, ck.params.w_comp);
    st.e_auxabsorb = matmul(seq_t, transpose(ck.params.w_decomp));
    st.params_version = ck.version;
    st.short_ids = short_ids;
    return st;
}

std::vector<UserHistory> user_histories(const Dataset& data) {
    std::map<std::int64_t, UserHistory> users;  // ordered for determinism
    for (const Example& ex : data) {
        UserHistory& u = users[ex.user_id];
        u.user_id = ex.user_id;
        u.long_ids = ex.seq.long_ids;
        u.short_ids = ex.seq.short_ids;
    }
    std::vector<UserHistory> out;
    out.reserve(users.size());
    for (auto& [id, u] : users) out.push_back(std::move(u));
    return out;
}

namespace {

std::string user_path(const std::string& dir, std::int64_t user_id) {
    return dir + "/u" + std::to_string(user_id) + ".bin";
}

void write_matrix(std::ofstream& out, const Matrix& m) {
    const std::int32_t dims[2] = {m.rows, m.cols};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

Matrix read_matrix(std::ifstream& in) {
    std::int32_t dims[2];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in || dims[0] <= 0 || dims[1] <= 0) throw DataError("corrupt state record");
    Matrix m(dims[0], dims[1]);
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!in) throw DataError("corrupt state record");
    return m;
}

}  // namespace

void precompute(const std::vector<UserHistory>& users, const Checkpoint& ck,
                const std::string& dir) {
    fs::create_directories(dir);

    std::vector<const UserHistory*> ordered;
    ordered.reserve(users.size());
    for (const auto& u : users) ordered.push_back(&u);
    std::sort(ordered.begin(), ordered.end(),
              [](const UserHistory* a, const UserHistory* b) {
                  return a->user_id < b->user_id;
              });

    for (const UserHistory* u : ordered) {
        const CompressedUserState st =
            compress_user(u->user_id, u->long_ids, u->short_ids, ck);
        std::ofstream out(user_path(dir, u->user_id), std::ios::binary);
        if (!out) throw DataError("cannot write state record for user " +
                                  std::to_string(u->user_id));
        out.write(reinterpret_cast<const char*>(&st.user_id), sizeof(st.user_id));
        out.write(reinterpret_cast<const char*>(&st.params_version),
                  sizeof(st.params_version));
        write_matrix(out, st.e_comp);
        write_matrix(out, st.e_auxabsorb);
        const std::int32_t n_short = static_cast<std::int32_t>(st.short_ids.size());
        out.write(reinterpret_cast<const char*>(&n_short), sizeof(n_short));
        out.write(reinterpret_cast<const char*>(st.short_ids.data()),
                  static_cast<std::streamsize>(st.short_ids.size() * sizeof(int)));
        if (!out) throw DataError("failed writing state record for user " +
                                  std::to_string(u->user_id));
    }

    nlohmann::json manifest{{"params_version", version_string(ck.version)},
                            {"d", ck.config.emb_dim},
                            {"r", ck.config.rank},
                            {"user_count", ordered.size()}};
    std::ofstream mf(dir + "/manifest.json");
    if (!mf) throw DataError("cannot write store manifest");
    mf << manifest.dump(2) << "\n";
}

StateStore StateStore::open(const std::string& dir) {
    StateStore store(dir);
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw DataError("state store '" + dir + "' has no manifest");
    nlohmann::json manifest;
    try {
        mf >> manifest;
        store.manifest_.params_version =
            std::stoull(manifest.at("params_version").get<std::string>(), nullptr, 16);
        store.manifest_.emb_dim = manifest.at("d").get<int>();
        store.manifest_.rank = manifest.at("r").get<int>();
        store.manifest_.user_count = manifest.at("user_count").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("state store '" + dir + "': bad manifest: " + e.what());
    }
    return store;
}

const CompressedUserState& StateStore::get(std::int64_t user_id) {
    auto it = cache_.find(user_id);
    if (it != cache_.end()) return it->second;

    std::ifstream in(user_path(dir_, user_id), std::ios::binary);
    if (!in) {
        throw CacheMissError("no cached state for user " + std::to_string(user_id));
    }
    CompressedUserState st;
    in.read(reinterpret_cast<char*>(&st.user_id), sizeof(st.user_id));
    in.read(reinterpret_cast<char*>(&st.params_version), sizeof(st.params_version));
    if (!in || st.user_id != user_id) throw DataError("corrupt state record");
    st.e_comp = read_matrix(in);
    st.e_auxabsorb = read_matrix(in);
    std::int32_t n_short = 0;
    in.read(reinterpret_cast<char*>(&n_short), sizeof(n_short));
    if (!in || n_short < 0) throw DataError("corrupt state record");
    st.short_ids.resize(n_short);
    if (n_short > 0) {
        in.read(reinterpret_cast<char*>(st.short_ids.data()),
                static_cast<std::streamsize>(st.short_ids.size() * sizeof(int)));
    }
    if (!in) throw DataError("corrupt state record");
    return cache_.emplace(user_id, std::move(st)).first->second;
}

}  // namespace lrea
