#include "lrea/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <string_view>

#include "lrea/rng.hpp"

namespace lrea {

void SyntheticSpec::validate() const {
    if (n_users <= 0 || n_items <= 0 || n_examples <= 0 || latent_dim <= 0) {
        throw DataError("synthetic spec: counts must be positive");
    }
    if (seq_len <= 0 || short_len < 0 || side_vocab < 0) {
        throw DataError("synthetic spec: sequence capacities must be non-negative");
    }
    if (noise < 0.0) throw DataError("synthetic spec: noise must be >= 0");
    if (temperature <= 0.0) throw DataError("synthetic spec: temperature must be positive");
}

namespace {

// sharpening of the per-user item preference used to sample histories
constexpr double kHistorySharpness = 4.0;
// sharpening of the target-vs-history attention inside the label model
constexpr double kAttentionSharpness = 2.0;
// logit scale after affinity standardization; large enough that labels
// are close to separable at small noise
constexpr double kSignalScale = 8.0;

double dot(const double* a, const double* b, int k) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

SyntheticData generate(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int k = spec.latent_dim;

    SyntheticData out;
    out.latent_dim = k;
    out.item_latents.assign(static_cast<std::size_t>(spec.n_items + 1) * k, 0.0);
    const double item_scale = 1.0 / std::sqrt(static_cast<double>(k));
    for (int i = 1; i <= spec.n_items; ++i)
        for (int j = 0; j < k; ++j)
            out.item_latents[static_cast<std::size_t>(i) * k + j] =
                rng.normal() * item_scale;

    out.user_latents.assign(static_cast<std::size_t>(spec.n_users) * k, 0.0);
    for (int u = 0; u < spec.n_users; ++u)
        for (int j = 0; j < k; ++j)
            out.user_latents[static_cast<std::size_t>(u) * k + j] =
                rng.normal() * item_scale;

    // Per-user histories: items drawn from a softmax over latent affinity,
    // so a history reflects that user's interests. The short list holds the
    // most recent draws.
    std::vector<std::vector<int>> long_hist(spec.n_users), short_hist(spec.n_users);
    std::vector<int> segment(spec.n_users, 0);
    std::vector<double> cdf(spec.n_items);
    for (int u = 0; u < spec.n_users; ++u) {
        const double* wu = &out.user_latents[static_cast<std::size_t>(u) * k];
        double max_pref = -1e300;
        std::vector<double> pref(spec.n_items);
        for (int i = 0; i < spec.n_items; ++i) {
            pref[i] = kHistorySharpness *
                      dot(&out.item_latents[static_cast<std::size_t>(i + 1) * k], wu, k);
            max_pref = std::max(max_pref, pref[i]);
        }
        double total = 0.0;
        for (int i = 0; i < spec.n_items; ++i) {
            total += std::exp(pref[i] - max_pref);
            cdf[i] = total;
        }
        auto draw_item = [&]() {
            const double r = rng.uniform() * total;
            const auto it = std::lower_bound(cdf.begin(), cdf.end(), r);
            return static_cast<int>(it - cdf.begin()) + 1;
        };
        long_hist[u].reserve(spec.seq_len);
        for (int i = 0; i < spec.seq_len; ++i) long_hist[u].push_back(draw_item());
        short_hist[u].reserve(spec.short_len);
        for (int i = 0; i < spec.short_len; ++i) short_hist[u].push_back(draw_item());

        if (spec.side_vocab > 0) {
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (wu[j] > wu[best]) best = j;
            segment[u] = best % spec.side_vocab;
        }
    }

    // Examples: targets are a mix of user-preferred and uniform items; the
    // noise-free logit is the target's attention-weighted affinity with the
    // user's long history, standardized across the dataset.
    out.examples.resize(spec.n_examples);
    std::vector<double> affinity(spec.n_examples);
    for (int e = 0; e < spec.n_examples; ++e) {
        const int u = e % spec.n_users;
        Example& ex = out.examples[e];
        ex.user_id = u;
        ex.seq.long_ids = long_hist[u];
        ex.seq.short_ids = short_hist[u];
        if (spec.side_vocab > 0) ex.side_ids = {1 + spec.n_items + segment[u]};

        int target;
        if (rng.bernoulli(0.5)) {
            // re-draw from this user's preference distribution
            const double* wu = &out.user_latents[static_cast<std::size_t>(u) * k];
            double max_pref = -1e300;
            std::vector<double> pref(spec.n_items);
            for (int i = 0; i < spec.n_items; ++i) {
                pref[i] = kHistorySharpness *
                          dot(&out.item_latents[static_cast<std::size_t>(i + 1) * k], wu, k);
                max_pref = std::max(max_pref, pref[i]);
            }
            double total = 0.0;
            for (int i = 0; i < spec.n_items; ++i) {
                total += std::exp(pref[i] - max_pref);
                cdf[i] = total;
            }
            const double r = rng.uniform() * total;
            target = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), r) -
                                      cdf.begin()) + 1;
        } else {
            target = 1 + rng.index(spec.n_items);
        }
        ex.target_id = target;

        const double* xt = &out.item_latents[static_cast<std::size_t>(target) * k];
        std::vector<double> att(ex.seq.long_ids.size());
        double max_att = -1e300;
        for (std::size_t i = 0; i < att.size(); ++i) {
            att[i] = kAttentionSharpness *
                     dot(&out.item_latents[static_cast<std::size_t>(ex.seq.long_ids[i]) * k],
                         xt, k);
            max_att = std::max(max_att, att[i]);
        }
        double att_total = 0.0;
        std::vector<double> pooled(k, 0.0);
        for (std::size_t i = 0; i < att.size(); ++i) {
            const double w = std::exp(att[i] - max_att);
            att_total += w;
            const double* xi =
                &out.item_latents[static_cast<std::size_t>(ex.seq.long_ids[i]) * k];
            for (int j = 0; j < k; ++j) pooled[j] += w * xi[j];
        }
        for (int j = 0; j < k; ++j) pooled[j] /= att_total;
        affinity[e] = dot(xt, pooled.data(), k);
    }

    double mean = 0.0;
    for (double a : affinity) mean += a;
    mean /= affinity.size();
    double var = 0.0;
    for (double a : affinity) var += (a - mean) * (a - mean);
    const double stddev = std::sqrt(std::max(var / affinity.size(), 1e-12));

    out.true_logits.resize(spec.n_examples);
    for (int e = 0; e < spec.n_examples; ++e) {
        const double logit =
            kSignalScale * (affinity[e] - mean) / stddev / spec.temperature;
        out.true_logits[e] = logit;
        const double observed = logit + spec.noise * rng.normal();
        out.examples[e].label = rng.bernoulli(1.0 / (1.0 + std::exp(-observed))) ? 1 : 0;
    }

    // decorrelate file order from the user cycle
    std::vector<std::size_t> perm(spec.n_examples);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    SyntheticData shuffled;
    shuffled.latent_dim = out.latent_dim;
    shuffled.item_latents = std::move(out.item_latents);
    shuffled.user_latents = std::move(out.user_latents);
    shuffled.examples.reserve(perm.size());
    shuffled.true_logits.reserve(perm.size());
    for (std::size_t i : perm) {
        shuffled.examples.push_back(std::move(out.examples[i]));
        shuffled.true_logits.push_back(out.true_logits[i]);
    }
    return shuffled;
}

namespace {

int parse_int(std::string_view field, std::size_t line_no, const char* what, int min_value,
              long long max_value = std::numeric_limits<int>::max()) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw DataError("line " + std::to_string(line_no) + ": malformed " + what + " '" +
                        std::string(field) + "'");
    }
    if (v < min_value || v > max_value) {
        throw DataError("line " + std::to_string(line_no) + ": " + what + " " +
                        std::to_string(v) + " out of range");
    }
    return static_cast<int>(v);
}

std::vector<int> parse_id_list(std::string_view field, std::size_t line_no,
                               const char* what) {
    std::vector<int> ids;
    if (field.empty()) return ids;
    std::size_t start = 0;
    while (start <= field.size()) {
        const std::size_t comma = field.find(',', start);
        const std::size_t end = comma == std::string_view::npos ? field.size() : comma;
        ids.push_back(parse_int(field.substr(start, end - start), line_no, what, 1));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return ids;
}

// keeps the most recent suffix
void truncate_to(std::vector<int>& ids, int capacity) {
    if (static_cast<int>(ids.size()) > capacity) {
        ids.erase(ids.begin(), ids.end() - capacity);
    }
}

}  // namespace

Dataset load_tsv(const std::string& path, int seq_len, int short_len) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset '" + path + "'");

    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::string_view rest(line);
        std::vector<std::string_view> fields;
        while (true) {
            const std::size_t tab = rest.find('\t');
            fields.push_back(rest.substr(0, tab));
            if (tab == std::string_view::npos) break;
            rest = rest.substr(tab + 1);
        }
        if (fields.size() != 6) {
            throw DataError("line " + std::to_string(line_no) + ": expected 6 fields, got " +
                            std::to_string(fields.size()));
        }
        Example ex;
        ex.user_id = parse_int(fields[0], line_no, "user id", 0,
                               std::numeric_limits<int>::max());
        ex.target_id = parse_int(fields[1], line_no, "target id", 1);
        ex.label = parse_int(fields[2], line_no, "label", 0, 1);
        ex.seq.long_ids = parse_id_list(fields[3], line_no, "long-sequence id");
        ex.seq.short_ids = parse_id_list(fields[4], line_no, "short-sequence id");
        ex.side_ids = parse_id_list(fields[5], line_no, "side id");
        truncate_to(ex.seq.long_ids, seq_len);
        truncate_to(ex.seq.short_ids, short_len);
        data.push_back(std::move(ex));
    }
    return data;
}

void save_tsv(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    auto join = [&](const std::vector<int>& ids) {
        std::string s;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(ids[i]);
        }
        return s;
    };
    for (const Example& ex : data) {
        out << ex.user_id << '\t' << ex.target_id << '\t' << ex.label << '\t'
            << join(ex.seq.long_ids) << '\t' << join(ex.seq.short_ids) << '\t'
            << join(ex.side_ids) << '\n';
    }
    if (!out) throw DataError("failed writing dataset '" + path + "'");
}

}  // namespace lrea
