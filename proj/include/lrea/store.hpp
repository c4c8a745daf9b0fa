#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lrea/checkpoint.hpp"
#include "lrea/data.hpp"
#include "lrea/matrix.hpp"

namespace lrea {

// Per-user serving cache: two d x r matrices that replace the raw
// length-L sequence, plus the O(S) short history so the short branch can
// run at serve time. Bound to one parameter version.
struct CompressedUserState {
    std::int64_t user_id = 0;
    Matrix e_comp;        // seq_emb' * w_comp
    Matrix e_auxabsorb;   // seq_emb' * w_decomp'
    std::uint64_t params_version = 0;
    std::vector<int> short_ids;
};

CompressedUserState compress_user(std::int64_t user_id, const std::vector<int>& long_ids,
                                  const std::vector<int>& short_ids,
                                  const Checkpoint& ck);

struct UserHistory {
    std::int64_t user_id = 0;
    std::vector<int> long_ids;
    std::vector<int> short_ids;
};

// One history per user, keeping the most recent example's sequences.
std::vector<UserHistory> user_histories(const Dataset& data);

struct StoreManifest {
    std::uint64_t params_version = 0;
    int emb_dim = 0;
    int rank = 0;
    std::uint64_t user_count = 0;
};

// Directory of per-user binary records plus a JSON manifest, with an
// in-memory read cache. Reads are concurrent-safe only across separate
// instances; one instance serves one thread.
class StateStore {
public:
    static StateStore open(const std::string& dir);

    const StoreManifest& manifest() const { return manifest_; }

    // Throws CacheMissError when the user has no record.
    const CompressedUserState& get(std::int64_t user_id);

private:
    explicit StateStore(std::string dir) : dir_(std::move(dir)) {}

    std::string dir_;
    StoreManifest manifest_;
    std::unordered_map<std::int64_t, CompressedUserState> cache_;
};

// Builds and persists the state of every user under `dir`, overwriting
// existing records. Deterministic: running it twice yields byte-identical
// files.
void precompute(const std::vector<UserHistory>& users, const Checkpoint& ck,
                const std::string& dir);

}  // namespace lrea
