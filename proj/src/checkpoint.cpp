#include "lrgcn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lrgcn {

namespace {

constexpr char kMagic[4] = {'L', 'R', 'G', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}
void write_matrix(std::ofstream& out, const Matrix& m) {
    write_u64(out, m.rows);
    write_u64(out, m.cols);
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
std::vector<double> read_doubles(std::ifstream& in) {
    std::vector<double> v(read_u64(in));
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    return v;
}
Matrix read_matrix(std::ifstream& in) {
    Matrix m;
    m.rows = read_u64(in);
    m.cols = read_u64(in);
    m.data.resize(m.rows * m.cols);
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, ckpt.has_rules ? 1u : 0u);
    write_u64(out, ckpt.seed);

    const PredictorParams& p = ckpt.predictor;
    write_u64(out, p.dim);
    write_u32(out, static_cast<std::uint32_t>(p.comp));
    write_matrix(out, p.entity);
    write_matrix(out, p.relation);
    write_matrix(out, p.w_comp);
    write_matrix(out, p.w_self);
    write_matrix(out, p.w_rel);
    write_doubles(out, p.w_attn);

    const PolicyParams& t = ckpt.policy;
    write_u64(out, t.dim);
    write_u64(out, t.hidden);
    write_matrix(out, t.entity);
    write_matrix(out, t.relation);
    write_matrix(out, t.w1);
    write_doubles(out, t.b1);
    write_doubles(out, t.w2);

    if (ckpt.has_rules) {
        write_u64(out, ckpt.rules.size());
        for (const Rule& r : ckpt.rules) {
            write_u64(out, r.body.size());
            for (RelationId b : r.body) write_u32(out, b);
            write_u32(out, r.head);
            out.write(reinterpret_cast<const char*>(&r.weight), sizeof r.weight);
            write_u64(out, r.update_count);
        }
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path.string());
    if (read_u32(in) != kVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path.string());

    Checkpoint ckpt;
    ckpt.has_rules = read_u32(in) != 0;
    ckpt.seed = read_u64(in);

    PredictorParams& p = ckpt.predictor;
    p.dim = read_u64(in);
    p.comp = static_cast<CompositionOp>(read_u32(in));
    p.entity = read_matrix(in);
    p.relation = read_matrix(in);
    p.w_comp = read_matrix(in);
    p.w_self = read_matrix(in);
    p.w_rel = read_matrix(in);
    p.w_attn = read_doubles(in);

    PolicyParams& t = ckpt.policy;
    t.dim = read_u64(in);
    t.hidden = read_u64(in);
    t.entity = read_matrix(in);
    t.relation = read_matrix(in);
    t.w1 = read_matrix(in);
    t.b1 = read_doubles(in);
    t.w2 = read_doubles(in);

    if (ckpt.has_rules) {
        const std::uint64_t n = read_u64(in);
        for (std::uint64_t i = 0; i < n; ++i) {
            RuleKey key;
            key.body.resize(read_u64(in));
            for (RelationId& b : key.body) b = read_u32(in);
            key.head = read_u32(in);
            double weight = 0.0;
            in.read(reinterpret_cast<char*>(&weight), sizeof weight);
            const std::uint64_t count = read_u64(in);
            Rule& r = ckpt.rules.get_or_insert(key, weight);
            r.weight = weight;
            r.update_count = count;
        }
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
    return ckpt;
}

}  // namespace lrgcn
