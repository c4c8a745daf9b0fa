#include "lrea/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "lrea/errors.hpp"

namespace lrea {

namespace {

constexpr char kMagic[8] = {'L', 'R', 'E', 'A', 'C', 'K', 'P', '1'};

class Fnv1a {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= c[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    void u64(std::uint64_t v) { bytes(&v, sizeof(v)); }
    void i32(std::int32_t v) { bytes(&v, sizeof(v)); }
    void f64(double v) { bytes(&v, sizeof(v)); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

struct Writer {
    std::ofstream out;
    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw DataError("cannot open '" + path + "' for writing");
    }
    void bytes(const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void u64(std::uint64_t v) { bytes(&v, sizeof(v)); }
    void i32(std::int32_t v) { bytes(&v, sizeof(v)); }
    void f64(double v) { bytes(&v, sizeof(v)); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
};

struct Reader {
    std::ifstream in;
    explicit Reader(const std::string& path) : in(path, std::ios::binary) {
        if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    }
    void bytes(void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in) throw DataError("truncated checkpoint");
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, sizeof(v));
        return v;
    }
    std::int32_t i32() {
        std::int32_t v;
        bytes(&v, sizeof(v));
        return v;
    }
    double f64() {
        double v;
        bytes(&v, sizeof(v));
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        if (n > (1ULL << 20)) throw DataError("corrupt checkpoint string length");
        std::string s(n, '\0');
        if (n) bytes(s.data(), n);
        return s;
    }
};

template <typename Sink>
void emit_config(Sink& sink, const ModelConfig& cfg) {
    sink.str(arch_name(cfg.arch));
    sink.i32(cfg.seq_len);
    sink.i32(cfg.short_len);
    sink.i32(cfg.rank);
    sink.i32(cfg.emb_dim);
    sink.i32(cfg.att_hidden);
    sink.f64(cfg.leaky_slope);
    sink.i32(static_cast<std::int32_t>(cfg.mlp_hidden.size()));
    for (int w : cfg.mlp_hidden) sink.i32(w);
    sink.i32(cfg.vocab_size);
    sink.i32(cfg.side_count);
    sink.i32(cfg.use_short ? 1 : 0);
}

template <typename Sink>
void emit_tensors(Sink& sink, const ModelParams& params, const ModelConfig& cfg) {
    std::int32_t count = 0;
    for_each_tensor(params, cfg, [&](const char*, const Matrix&) { ++count; });
    sink.i32(count);
    for_each_tensor(params, cfg, [&](const char* name, const Matrix& m) {
        sink.str(name);
        sink.i32(m.rows);
        sink.i32(m.cols);
        for (double x : m.data) sink.f64(x);
    });
}

}  // namespace

std::uint64_t params_version(const ModelParams& params, const ModelConfig& cfg) {
    Fnv1a h;
    emit_config(h, cfg);
    emit_tensors(h, params, cfg);
    return h.value();
}

std::string version_string(std::uint64_t version) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(version));
    return buf;
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelConfig& cfg) {
    Writer w(path);
    w.bytes(kMagic, sizeof(kMagic));
    emit_config(w, cfg);
    emit_tensors(w, params, cfg);
    w.u64(params_version(params, cfg));
    w.out.flush();
    if (!w.out) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("'" + path + "' is not a checkpoint file");
    }

    Checkpoint ck;
    ModelConfig& cfg = ck.config;
    cfg.arch = arch_from_name(r.str());
    cfg.seq_len = r.i32();
    cfg.short_len = r.i32();
    cfg.rank = r.i32();
    cfg.emb_dim = r.i32();
    cfg.att_hidden = r.i32();
    cfg.leaky_slope = r.f64();
    cfg.mlp_hidden.resize(r.i32());
    for (int& w : cfg.mlp_hidden) w = r.i32();
    cfg.vocab_size = r.i32();
    cfg.side_count = r.i32();
    cfg.use_short = r.i32() != 0;
    cfg.validate();

    // Allocate tensors at their canonical shapes, then fill by name.
    ck.params = init_params(cfg, 0);
    const std::int32_t count = r.i32();
    for (std::int32_t i = 0; i < count; ++i) {
        const std::string name = r.str();
        const int rows = r.i32();
        const int cols = r.i32();
        Matrix m(rows, cols);
        for (double& x : m.data) x = r.f64();
        bool placed = false;
        for_each_tensor(ck.params, cfg, [&](const char* n, Matrix& dst) {
            if (placed || name != n) return;
            if (dst.rows != rows || dst.cols != cols) {
                throw DataError("checkpoint tensor '" + name + "' has shape " +
                                m.shape_str() + ", expected " + dst.shape_str());
            }
            dst = std::move(m);
            placed = true;
        });
        if (!placed) throw DataError("checkpoint tensor '" + name + "' is not part of this model");
    }
    const std::uint64_t stored = r.u64();
    ck.version = params_version(ck.params, cfg);
    if (stored != ck.version) {
        throw DataError("checkpoint '" + path + "' is corrupt: version hash mismatch");
    }
    return ck;
}

}  // namespace lrea
