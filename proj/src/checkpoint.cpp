#include "burstcast/checkpoint.hpp"

#include "burstcast/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace burstcast {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'B', 'A', 'F', 'C'};

class Writer {
public:
    template <class T>
    void pod(const T& v) {
        auto p = reinterpret_cast<const std::uint8_t*>(&v);
        out.insert(out.end(), p, p + sizeof(T));
    }
    void bytes(const void* data, std::size_t n) {
        auto p = static_cast<const std::uint8_t*>(data);
        out.insert(out.end(), p, p + n);
    }
    void str(const std::string& s) {
        pod(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : buf(b) {}
    template <class T>
    T pod(const std::string& what) {
        T v{};
        need(sizeof(T), what);
        std::memcpy(&v, buf.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    void bytes(void* dst, std::size_t n, const std::string& what) {
        need(n, what);
        if (n) std::memcpy(dst, buf.data() + pos, n);
        pos += n;
    }
    std::string str(const std::string& what) {
        auto n = pod<std::uint32_t>(what);
        std::string s(n, '\0');
        bytes(s.data(), n, what);
        return s;
    }
    bool done() const { return pos == buf.size(); }
    std::size_t remaining() const { return buf.size() - pos; }

private:
    void need(std::size_t n, const std::string& what) const {
        if (buf.size() - pos < n) throw DataError("truncated checkpoint: missing " + what);
    }
    std::span<const std::uint8_t> buf;
    std::size_t pos = 0;
};

}  // namespace

Checkpoint make_checkpoint(const BurstInformer& model, const NormStats& norm, std::uint64_t train_digest) {
    Checkpoint c{model.config(), norm, train_digest, {}};
    for (const auto& p : model.parameters()) {
        NamedTensor t{p.name, p.tensor.shape(), {}};
        auto v = p.tensor.values();
        t.data.assign(v.begin(), v.end());
        c.tensors.push_back(std::move(t));
    }
    return c;
}

BurstInformer restore_model(const Checkpoint& ckpt) {
    BurstInformer model(ckpt.model);
    std::set<std::string> seen;
    for (const auto& t : ckpt.tensors) {
        if (!seen.insert(t.name).second) throw DataError("duplicate tensor in checkpoint: " + t.name);
        ad::Tensor* dst = nullptr;
        try {
            dst = &model.param(t.name);
        } catch (const std::out_of_range&) {
            throw DataError("unexpected tensor in checkpoint: " + t.name);
        }
        if (dst->shape() != t.shape)
            throw DataError("tensor " + t.name + " has shape " + ad::to_string(t.shape) + ", model expects " +
                            ad::to_string(dst->shape()));
        auto v = dst->mutable_values();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.data[i];
    }
    for (const auto& p : model.parameters())
        if (!seen.count(p.name)) throw DataError("checkpoint is missing tensor " + p.name);
    return model;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kMagic, 4);
    w.pod(kCheckpointVersion);
    w.str(ckpt.model.canonical());
    w.pod(ckpt.norm.mean);
    w.pod(ckpt.norm.sd);
    w.pod(ckpt.train_digest);
    w.pod(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        w.str(t.name);
        w.pod(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) w.pod(static_cast<std::uint64_t>(d));
        w.bytes(t.data.data(), t.data.size() * sizeof(float));
    }
    return std::move(w.out);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes, const ModelConfig* expected) {
    Reader r(bytes);
    char magic[4];
    r.bytes(magic, 4, "header");
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a checkpoint (bad magic)");
    auto version = r.pod<std::uint32_t>("version");
    if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint c;
    c.model = ModelConfig::parse(r.str("model config"));
    if (expected && expected->digest() != c.model.digest()) {
        std::string msg = "checkpoint model config does not match:";
        for (const auto& d : config_diff(c.model, *expected)) msg += " " + d + ";";
        throw DataError(msg);
    }
    c.norm.mean = r.pod<double>("normalization stats");
    c.norm.sd = r.pod<double>("normalization stats");
    c.train_digest = r.pod<std::uint64_t>("train config digest");

    // Expected blob names come from the model layout, so a short file can
    // name exactly what is missing.
    std::vector<std::string> names;
    const BurstInformer layout(c.model);
    for (const auto& p : layout.parameters()) names.push_back(p.name);
    auto count = r.pod<std::uint32_t>("tensor count");
    if (count != names.size())
        throw DataError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                        std::to_string(names.size()));
    for (std::size_t i = 0; i < count; ++i) {
        const std::string what = "tensor " + names[i];
        NamedTensor t;
        t.name = r.str(what);
        if (t.name != names[i]) throw DataError("checkpoint tensor " + t.name + " found where " + names[i] + " expected");
        auto ndim = r.pod<std::uint32_t>(what);
        if (ndim > 8) throw DataError("corrupt checkpoint: " + what + " has " + std::to_string(ndim) + " dimensions");
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            t.shape.push_back(static_cast<std::size_t>(r.pod<std::uint64_t>(what)));
            n *= t.shape.back();
        }
        if (n > r.remaining() / sizeof(float)) throw DataError("truncated checkpoint: missing " + what);
        t.data.resize(n);
        r.bytes(t.data.data(), n * sizeof(float), what);
        c.tensors.push_back(std::move(t));
    }
    if (!r.done()) throw DataError("trailing bytes after checkpoint");
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes, expected);
}

}  // namespace burstcast
