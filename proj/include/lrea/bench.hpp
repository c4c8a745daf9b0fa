#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lrea {

// Serving-latency comparison between the compressed-state path and the
// full-sequence target-attention path on synthetic users.
struct BenchConfig {
    std::vector<int> seq_lens = {128, 1024, 8192};
    int candidates = 32;  // B, candidates per request
    int rank = 32;
    int emb_dim = 16;
    int att_hidden = 36;
    double leaky_slope = 0.01;
    std::vector<int> mlp_hidden = {512, 256, 128};
    int side_count = 1;
    int vocab_size = 10000;
    int reps = 100;               // timed repetitions per cell
    int doubling_seq_len = 1024;  // extra 2B cells at this length
    std::uint64_t seed = 99;
    int precision = 32;  // arithmetic width: 32 or 64
};

struct BenchCell {
    std::string path;  // "lrea_serve" or "din_long"
    int seq_len = 0;
    int candidates = 0;
    double median_ms = 0.0;
    double p90_ms = 0.0;
};

struct BenchReport {
    BenchConfig config;
    std::vector<BenchCell> cells;
    std::vector<std::pair<int, double>> precompute_ms;  // (seq_len, ms)

    // Throws if the cell is missing.
    double median(const std::string& path, int seq_len, int candidates) const;
    std::string to_json() const;
};

BenchReport run_bench(const BenchConfig& cfg);

}  // namespace lrea
