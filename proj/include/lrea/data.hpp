#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrea/matrix.hpp"

namespace lrea {

// One user's interaction history, oldest first, unpadded. Padding to the
// model's fixed capacities (id 0) happens at embedding lookup.
struct BehaviorSequence {
    std::vector<int> long_ids;
    std::vector<int> short_ids;
};

// One training record.
struct Example {
    std::int64_t user_id = 0;
    int target_id = 0;
    int label = 0;
    BehaviorSequence seq;
    std::vector<int> side_ids;
};

using Dataset = std::vector<Example>;

struct SyntheticSpec {
    int n_users = 2500;
    int n_items = 2000;
    int seq_len = 200;    // long-history capacity
    int short_len = 16;   // short-history capacity
    int n_examples = 25000;
    std::uint64_t seed = 7;
    int latent_dim = 8;
    double noise = 0.1;
    double temperature = 1.0;
    int side_vocab = 8;  // user-segment side feature cardinality; 0 disables

    void validate() const;
    // items occupy [1, n_items], segments [n_items+1, n_items+side_vocab]
    int vocab_size() const { return 1 + n_items + side_vocab; }
};

// Generated data plus the hidden ground truth that produced it. The true
// logits give a best-possible scorer for acceptance checks.
struct SyntheticData {
    Dataset examples;
    std::vector<double> true_logits;    // per example, noise-free
    std::vector<double> item_latents;   // n_items+1 rows x latent_dim, row 0 zero
    std::vector<double> user_latents;   // n_users rows x latent_dim
    int latent_dim = 0;
};

SyntheticData generate(const SyntheticSpec& spec);

// Tab-separated interchange format, one example per line:
//   user_id \t target_id \t label \t long_ids \t short_ids \t side_ids
// with the id lists comma-joined and possibly empty. Sequences longer
// than the capacities keep their most recent suffix.
Dataset load_tsv(const std::string& path, int seq_len, int short_len);
void save_tsv(const std::string& path, const Dataset& data);

}  // namespace lrea
