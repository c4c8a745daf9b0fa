// Command-line front end for the full pipeline: synthetic data generation,
// training, evaluation, state precomputation, cached scoring, the serving
// latency benchmark and the gradient self-check.

#include <charconv>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lrea/bench.hpp"
#include "lrea/checkpoint.hpp"
#include "lrea/data.hpp"
#include "lrea/metrics.hpp"
#include "lrea/model.hpp"
#include "lrea/rng.hpp"
#include "lrea/serve.hpp"
#include "lrea/store.hpp"
#include "lrea/training.hpp"

namespace {

using nlohmann::json;

void echo_config(const std::string& command, const json& resolved) {
    json line{{"command", command}, {"config", resolved}};
    std::cerr << line.dump() << "\n";
}

int max_id_in(const lrea::Dataset& data) {
    int m = 0;
    for (const auto& ex : data) {
        m = std::max(m, ex.target_id);
        for (int id : ex.seq.long_ids) m = std::max(m, id);
        for (int id : ex.seq.short_ids) m = std::max(m, id);
        for (int id : ex.side_ids) m = std::max(m, id);
    }
    return m;
}

struct ModelFlags {
    std::string arch = "lrea";
    int seq_len = 200;
    int short_len = 16;
    int rank = 128;
    int emb_dim = 16;
    int att_hidden = 36;
    double leaky_slope = 0.01;
    std::vector<int> mlp_hidden = {512, 256, 128};
    int vocab = 0;        // 0 = derive from data
    int side_count = -1;  // -1 = derive from data
    bool no_short = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--arch", arch, "model architecture: lrea or din")
            ->check(CLI::IsMember({"lrea", "din"}));
        cmd->add_option("--L", seq_len, "long-history capacity");
        cmd->add_option("--S", short_len, "short-history capacity");
        cmd->add_option("--r", rank, "compressed rank");
        cmd->add_option("--d", emb_dim, "embedding dimension");
        cmd->add_option("--att-hidden", att_hidden, "attention MLP width");
        cmd->add_option("--slope", leaky_slope, "leaky ReLU slope");
        cmd->add_option("--mlp", mlp_hidden, "head hidden layer widths");
        cmd->add_option("--vocab", vocab, "vocabulary size (0 = derive from data)");
        cmd->add_option("--side-count", side_count,
                        "side features per example (-1 = derive from data)");
        cmd->add_flag("--no-short", no_short, "disable the short-history branch");
    }

    lrea::ModelConfig resolve(const lrea::Dataset& data) const {
        lrea::ModelConfig cfg;
        cfg.arch = lrea::arch_from_name(arch);
        cfg.seq_len = seq_len;
        cfg.short_len = short_len;
        cfg.rank = rank;
        cfg.emb_dim = emb_dim;
        cfg.att_hidden = att_hidden;
        cfg.leaky_slope = leaky_slope;
        cfg.mlp_hidden = mlp_hidden;
        cfg.vocab_size = vocab > 0 ? vocab : max_id_in(data) + 1;
        cfg.side_count = side_count >= 0
                             ? side_count
                             : (data.empty() ? 0 : static_cast<int>(data[0].side_ids.size()));
        cfg.use_short = !no_short;
        cfg.validate();
        return cfg;
    }

    json to_json() const {
        return {{"arch", arch},         {"L", seq_len},      {"S", short_len},
                {"r", rank},            {"d", emb_dim},      {"h", att_hidden},
                {"slope", leaky_slope}, {"mlp", mlp_hidden}, {"vocab", vocab},
                {"side_count", side_count}, {"use_short", !no_short}};
    }
};

int run_generate(const std::string& out_path, const std::string& test_out,
                 double test_frac, const lrea::SyntheticSpec& spec) {
    lrea::SyntheticData data = lrea::generate(spec);
    if (test_out.empty()) {
        lrea::save_tsv(out_path, data.examples);
        std::cout << "wrote " << data.examples.size() << " examples to " << out_path
                  << "\n";
        return 0;
    }
    const std::size_t n_test =
        static_cast<std::size_t>(test_frac * static_cast<double>(data.examples.size()));
    const std::size_t n_train = data.examples.size() - n_test;
    lrea::Dataset train(data.examples.begin(), data.examples.begin() + n_train);
    lrea::Dataset test(data.examples.begin() + n_train, data.examples.end());
    lrea::save_tsv(out_path, train);
    lrea::save_tsv(test_out, test);
    std::cout << "wrote " << train.size() << " train examples to " << out_path << " and "
              << test.size() << " test examples to " << test_out << "\n";
    return 0;
}

int run_train(const std::string& data_path, const std::string& eval_path,
              const std::string& ckpt_path, const std::string& log_path,
              const ModelFlags& mf, const lrea::TrainConfig& tc) {
    const lrea::Dataset train_set = lrea::load_tsv(data_path, mf.seq_len, mf.short_len);
    lrea::Dataset eval_set;
    if (!eval_path.empty()) eval_set = lrea::load_tsv(eval_path, mf.seq_len, mf.short_len);

    lrea::ModelConfig cfg = mf.resolve(train_set);
    if (!eval_set.empty()) cfg.vocab_size = std::max(cfg.vocab_size, max_id_in(eval_set) + 1);

    std::ofstream log_file;
    std::ostream* log_stream = nullptr;
    if (!log_path.empty()) {
        log_file.open(log_path);
        if (!log_file) throw lrea::DataError("cannot open log file '" + log_path + "'");
        log_stream = &log_file;
    }

    lrea::TrainResult result =
        lrea::train(train_set, eval_set.empty() ? nullptr : &eval_set, cfg, tc, log_stream);
    lrea::save_checkpoint(ckpt_path, result.params, cfg);

    const lrea::EpochStats& last = result.log.back();
    json summary{{"epochs", tc.epochs},
                 {"ce", last.ce},
                 {"penalty", last.penalty},
                 {"gap_mean", last.gap_mean},
                 {"auc", last.auc ? json(*last.auc) : json()},
                 {"gauc", last.gauc ? json(*last.gauc) : json()},
                 {"params_version", lrea::version_string(result.version)},
                 {"checkpoint", ckpt_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_eval(const std::string& data_path, const std::string& ckpt_path, int threads) {
    const lrea::Checkpoint ck = lrea::load_checkpoint(ckpt_path);
    const lrea::Dataset data =
        lrea::load_tsv(data_path, ck.config.seq_len, ck.config.short_len);
    if (data.empty()) throw lrea::DataError("eval: empty dataset");

    const std::vector<double> scores =
        lrea::predict_all(ck.params, ck.config, data, threads);
    std::vector<int> labels(data.size());
    std::vector<std::int64_t> users(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        labels[i] = data[i].label;
        users[i] = data[i].user_id;
    }
    json out{{"n", data.size()}};
    out["auc"] = lrea::auc(scores, labels);
    try {
        out["gauc"] = lrea::gauc(scores, labels, users);
    } catch (const lrea::MetricError&) {
        out["gauc"] = nullptr;
    }
    std::cout << out.dump() << "\n";
    return 0;
}

int run_precompute(const std::string& data_path, const std::string& ckpt_path,
                   const std::string& store_dir) {
    const lrea::Checkpoint ck = lrea::load_checkpoint(ckpt_path);
    const lrea::Dataset data =
        lrea::load_tsv(data_path, ck.config.seq_len, ck.config.short_len);
    const std::vector<lrea::UserHistory> users = lrea::user_histories(data);
    lrea::precompute(users, ck, store_dir);
    std::cout << "cached " << users.size() << " user states in " << store_dir
              << " (version " << lrea::version_string(ck.version) << ")\n";
    return 0;
}

lrea::ScoreRequest parse_request(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
        const std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) {
        throw lrea::DataError("request line " + std::to_string(line_no) +
                              ": expected 'user\\tcandidates[\\tside]'");
    }
    auto parse_list = [&](const std::string& s) {
        std::vector<int> ids;
        std::size_t pos = 0;
        while (pos <= s.size() && !s.empty()) {
            const std::size_t comma = s.find(',', pos);
            const std::string tok =
                s.substr(pos, comma == std::string::npos ? comma : comma - pos);
            int v = 0;
            const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc{} || p != tok.data() + tok.size()) {
                throw lrea::DataError("request line " + std::to_string(line_no) +
                                      ": malformed id '" + tok + "'");
            }
            ids.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        return ids;
    };
    lrea::ScoreRequest req;
    req.user_id = std::stoll(fields[0]);
    req.candidate_ids = parse_list(fields[1]);
    if (fields.size() == 3) req.side_ids = parse_list(fields[2]);
    return req;
}

int run_score(const std::string& store_dir, const std::string& ckpt_path,
              const std::string& request_path) {
    const lrea::Checkpoint ck = lrea::load_checkpoint(ckpt_path);
    lrea::StateStore store = lrea::StateStore::open(store_dir);

    std::ifstream in(request_path);
    if (!in) throw lrea::DataError("cannot open request file '" + request_path + "'");
    std::string line;
    std::size_t line_no = 0;
    char buf[32];
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const lrea::ScoreRequest req = parse_request(line, line_no);
        const std::vector<double> probs = lrea::score(req, store, ck);
        std::cout << req.user_id << '\t';
        for (std::size_t i = 0; i < probs.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.9g", probs[i]);
            std::cout << (i ? "," : "") << buf;
        }
        std::cout << '\n';
    }
    return 0;
}

int run_bench_cmd(const lrea::BenchConfig& bc, const std::string& report_path) {
    const lrea::BenchReport report = lrea::run_bench(bc);
    const std::string payload = report.to_json();
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw lrea::DataError("cannot write report '" + report_path + "'");
        out << payload << "\n";
    }
    std::cout << payload << "\n";
    return 0;
}

int run_gradcheck(int seq_len, int rank, int emb_dim, int att_hidden, int batch,
                  double lambda, double step, double tol, std::uint64_t seed) {
    lrea::ModelConfig cfg;
    cfg.arch = lrea::Arch::kLrea;
    cfg.seq_len = seq_len;
    cfg.short_len = 4;
    cfg.rank = rank;
    cfg.emb_dim = emb_dim;
    cfg.att_hidden = att_hidden;
    cfg.mlp_hidden = {16, 8};  // small head so every entry gets checked
    cfg.vocab_size = 48;
    cfg.side_count = 1;
    cfg.use_short = true;

    const lrea::GradCheckReport report =
        lrea::loss_grad_check(cfg, batch, lambda, step, tol, seed);
    std::cout << report.summary();
    return report.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"low-rank compressed target attention for long behavior histories"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI/TOML file");
    app.allow_config_extras(false);

    std::uint64_t seed = 7;
    int threads = 1;
    app.add_option("--seed", seed, "global random seed")->capture_default_str();
    app.add_option("--threads", threads, "worker thread cap")->capture_default_str();

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset as TSV");
    std::string gen_out, gen_test_out;
    double gen_test_frac = 0.2;
    lrea::SyntheticSpec spec;
    gen->add_option("--out", gen_out, "output TSV path")->required();
    gen->add_option("--test-out", gen_test_out, "optional held-out split path");
    gen->add_option("--test-frac", gen_test_frac, "fraction routed to the held-out split");
    gen->add_option("--n-examples", spec.n_examples);
    gen->add_option("--n-users", spec.n_users);
    gen->add_option("--n-items", spec.n_items);
    gen->add_option("--L", spec.seq_len);
    gen->add_option("--S", spec.short_len);
    gen->add_option("--latent-dim", spec.latent_dim);
    gen->add_option("--noise", spec.noise);
    gen->add_option("--temperature", spec.temperature);
    gen->add_option("--side-vocab", spec.side_vocab);

    // train
    auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
    std::string tr_data, tr_eval, tr_ckpt, tr_log;
    ModelFlags tr_model;
    lrea::TrainConfig tc;
    tr->add_option("--data", tr_data, "training TSV")->required();
    tr->add_option("--eval", tr_eval, "held-out TSV for per-epoch metrics");
    tr->add_option("--checkpoint", tr_ckpt, "checkpoint output path")->required();
    tr->add_option("--log", tr_log, "per-epoch NDJSON log path");
    tr_model.attach(tr);
    tr->add_option("--lambda", tc.lambda, "non-negativity penalty weight");
    tr->add_option("--lr", tc.lr, "learning rate");
    tr->add_option("--batch", tc.batch_size, "batch size");
    tr->add_option("--epochs", tc.epochs, "training epochs");
    tr->add_flag("--penalty-stop-grad", tc.penalty_stop_grad,
                 "keep the penalty gradient out of the embeddings");

    // eval
    auto* ev = app.add_subcommand("eval", "report AUC/GAUC of a checkpoint on a dataset");
    std::string ev_data, ev_ckpt;
    ev->add_option("--data", ev_data, "dataset TSV")->required();
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();

    // precompute
    auto* pc = app.add_subcommand("precompute", "build the per-user serving state store");
    std::string pc_data, pc_ckpt, pc_store;
    pc->add_option("--data", pc_data, "dataset TSV with user histories")->required();
    pc->add_option("--checkpoint", pc_ckpt, "checkpoint path")->required();
    pc->add_option("--store", pc_store, "state store directory")->required();

    // score
    auto* sc = app.add_subcommand("score", "score candidate items from cached state");
    std::string sc_store, sc_ckpt, sc_requests;
    sc->add_option("--store", sc_store, "state store directory")->required();
    sc->add_option("--checkpoint", sc_ckpt, "checkpoint path")->required();
    sc->add_option("--requests", sc_requests,
                   "request TSV: user, comma-joined candidates[, side ids]")
        ->required();

    // bench
    auto* bn = app.add_subcommand("bench", "serving latency comparison");
    lrea::BenchConfig bc;
    std::string bn_report;
    bn->add_option("--report", bn_report, "JSON report output path");
    bn->add_option("--L-grid", bc.seq_lens, "sequence lengths to measure");
    bn->add_option("--B", bc.candidates, "candidates per request");
    bn->add_option("--r", bc.rank);
    bn->add_option("--d", bc.emb_dim);
    bn->add_option("--att-hidden", bc.att_hidden);
    bn->add_option("--reps", bc.reps, "timed repetitions per cell");
    bn->add_option("--doubling-L", bc.doubling_seq_len,
                   "length at which doubled-B cells run");
    bn->add_option("--precision", bc.precision, "arithmetic width")
        ->check(CLI::IsMember({32, 64}));

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient self-check");
    int gc_L = 8, gc_r = 3, gc_d = 4, gc_h = 5, gc_batch = 3;
    double gc_lambda = 0.3, gc_step = 1e-5, gc_tol = 1e-4;
    gc->add_option("--L", gc_L);
    gc->add_option("--r", gc_r);
    gc->add_option("--d", gc_d);
    gc->add_option("--att-hidden", gc_h);
    gc->add_option("--batch", gc_batch);
    gc->add_option("--lambda", gc_lambda);
    gc->add_option("--step", gc_step);
    gc->add_option("--tol", gc_tol);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            spec.seed = seed;
            echo_config("generate",
                        {{"out", gen_out},
                         {"test_out", gen_test_out},
                         {"test_frac", gen_test_frac},
                         {"n_examples", spec.n_examples},
                         {"n_users", spec.n_users},
                         {"n_items", spec.n_items},
                         {"L", spec.seq_len},
                         {"S", spec.short_len},
                         {"latent_dim", spec.latent_dim},
                         {"noise", spec.noise},
                         {"temperature", spec.temperature},
                         {"side_vocab", spec.side_vocab},
                         {"seed", seed}});
            return run_generate(gen_out, gen_test_out, gen_test_frac, spec);
        }
        if (*tr) {
            tc.seed = seed;
            tc.threads = threads;
            json cfg_json = tr_model.to_json();
            cfg_json.update(json{{"lambda", tc.lambda},
                                 {"lr", tc.lr},
                                 {"batch", tc.batch_size},
                                 {"epochs", tc.epochs},
                                 {"seed", seed},
                                 {"threads", threads},
                                 {"data", tr_data},
                                 {"eval", tr_eval},
                                 {"checkpoint", tr_ckpt}});
            echo_config("train", cfg_json);
            return run_train(tr_data, tr_eval, tr_ckpt, tr_log, tr_model, tc);
        }
        if (*ev) {
            echo_config("eval", {{"data", ev_data},
                                 {"checkpoint", ev_ckpt},
                                 {"threads", threads}});
            return run_eval(ev_data, ev_ckpt, threads);
        }
        if (*pc) {
            echo_config("precompute", {{"data", pc_data},
                                       {"checkpoint", pc_ckpt},
                                       {"store", pc_store}});
            return run_precompute(pc_data, pc_ckpt, pc_store);
        }
        if (*sc) {
            echo_config("score", {{"store", sc_store},
                                  {"checkpoint", sc_ckpt},
                                  {"requests", sc_requests}});
            return run_score(sc_store, sc_ckpt, sc_requests);
        }
        if (*bn) {
            bc.seed = seed;
            echo_config("bench", {{"report", bn_report},
                                  {"L_grid", bc.seq_lens},
                                  {"B", bc.candidates},
                                  {"r", bc.rank},
                                  {"d", bc.emb_dim},
                                  {"h", bc.att_hidden},
                                  {"reps", bc.reps},
                                  {"precision", bc.precision},
                                  {"seed", seed}});
            return run_bench_cmd(bc, bn_report);
        }
        if (*gc) {
            echo_config("gradcheck", {{"L", gc_L},
                                      {"r", gc_r},
                                      {"d", gc_d},
                                      {"h", gc_h},
                                      {"batch", gc_batch},
                                      {"lambda", gc_lambda},
                                      {"step", gc_step},
                                      {"tol", gc_tol},
                                      {"seed", seed}});
            return run_gradcheck(gc_L, gc_r, gc_d, gc_h, gc_batch, gc_lambda, gc_step,
                                 gc_tol, seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
