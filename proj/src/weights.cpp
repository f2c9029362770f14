#include "camforge/weights.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace camforge {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'M', 'W'};
constexpr uint32_t kMaxNameLen = 4096;
constexpr uint32_t kMaxNdim = 8;

void put_u32(std::ostream& f, uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 24)};
    f.write(b, 4);
}

class Reader {
public:
    Reader(const std::string& path) : path_(path), f_(path, std::ios::binary) {
        if (!f_) throw IoError("cannot open " + path);
    }

    bool at_eof() {
        return f_.peek() == std::char_traits<char>::eof();
    }

    uint32_t u32(const char* what) {
        unsigned char b[4];
        f_.read(reinterpret_cast<char*>(b), 4);
        if (f_.gcount() != 4)
            throw FormatError(path_ + ": truncated while reading " + std::string(what));
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }

    void bytes(void* dst, size_t n, const char* what) {
        f_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (f_.gcount() != static_cast<std::streamsize>(n))
            throw FormatError(path_ + ": truncated while reading " + std::string(what));
    }

private:
    std::string path_;
    std::ifstream f_;
};

} // namespace

void write_tensor_records(const std::string& path,
                          const std::vector<std::pair<std::string, const Tensor*>>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(kMagic, 4);
    put_u32(f, kWeightFileVersion);
    for (const auto& [name, t] : records) {
        if (name.empty() || name.size() > kMaxNameLen)
            throw UsageError("tensor record name length out of range: '" + name + "'");
        put_u32(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(f, static_cast<uint32_t>(t->ndim()));
        for (int i = 0; i < t->ndim(); ++i) put_u32(f, static_cast<uint32_t>(t->dim(i)));
        f.write(reinterpret_cast<const char*>(t->data()),
                static_cast<std::streamsize>(t->numel() * sizeof(float)));
    }
    if (!f) throw IoError("short write to " + path);
}

std::vector<std::pair<std::string, Tensor>> read_tensor_records(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + " is not a weight file (bad magic)");
    uint32_t version = r.u32("version");
    if (version != kWeightFileVersion)
        throw FormatError(path + ": unsupported weight file version " + std::to_string(version));
    std::vector<std::pair<std::string, Tensor>> out;
    while (!r.at_eof()) {
        uint32_t name_len = r.u32("record name length");
        if (name_len == 0 || name_len > kMaxNameLen)
            throw FormatError(path + ": implausible record name length " +
                              std::to_string(name_len));
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len, "record name");
        uint32_t ndim = r.u32("record rank");
        if (ndim == 0 || ndim > kMaxNdim)
            throw FormatError(path + ": implausible rank " + std::to_string(ndim) + " for '" +
                              name + "'");
        std::vector<int64_t> dims(ndim);
        int64_t numel = 1;
        for (uint32_t i = 0; i < ndim; ++i) {
            uint32_t d = r.u32("record dims");
            if (d == 0 || d > (1u << 30))
                throw FormatError(path + ": implausible extent " + std::to_string(d) + " for '" +
                                  name + "'");
            dims[i] = d;
            numel *= d;
        }
        std::vector<float> data(static_cast<size_t>(numel));
        r.bytes(data.data(), data.size() * sizeof(float), "tensor data");
        out.emplace_back(std::move(name), Tensor(std::move(dims), std::move(data)));
    }
    return out;
}

void save_weights(const Model& model, const std::string& path) {
    std::vector<std::pair<std::string, const Tensor*>> records;
    for (const auto& p : model.store().params()) records.emplace_back(p->name, &p->value);
    for (const auto& b : model.store().buffers()) records.emplace_back(b->name, &b->value);
    write_tensor_records(path, records);
}

Model load_weights(const ModelConfig& config, const std::string& path) {
    Model model(config, 0);
    auto records = read_tensor_records(path);
    std::map<std::string, Tensor*> loaded;
    for (auto& [name, t] : records) {
        if (!loaded.emplace(name, &t).second)
            throw FormatError(path + ": duplicate tensor '" + name + "'");
    }
    std::set<std::string> used;
    auto fill = [&](const std::string& name, Tensor& dst) {
        auto it = loaded.find(name);
        if (it == loaded.end())
            throw FormatError(path + ": missing tensor '" + name + "' required by preset " +
                              config.name);
        if (!it->second->same_shape(dst))
            throw FormatError(path + ": dimension mismatch for '" + name + "': file has " +
                              it->second->shape_str() + ", model needs " + dst.shape_str());
        dst = *it->second;
        used.insert(name);
    };
    for (const auto& p : model.store().params()) fill(p->name, p->value);
    for (const auto& b : model.store().buffers()) fill(b->name, b->value);
    for (const auto& [name, t] : loaded)
        if (!used.count(name))
            throw FormatError(path + ": unknown tensor '" + name + "' not part of preset " +
                              config.name);
    return model;
}

void save_embeddings(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& embeddings) {
    std::vector<std::pair<std::string, const Tensor*>> records;
    records.reserve(embeddings.size());
    for (const auto& [id, t] : embeddings) records.emplace_back(id, &t);
    write_tensor_records(path, records);
}

std::map<std::string, Tensor> load_embeddings(const std::string& path) {
    std::map<std::string, Tensor> out;
    int64_t dim = -1;
    for (auto& [name, t] : read_tensor_records(path)) {
        if (t.ndim() != 1)
            throw FormatError(path + ": embedding '" + name + "' has rank " +
                              std::to_string(t.ndim()) + ", expected 1");
        if (dim < 0) dim = t.numel();
        if (t.numel() != dim)
            throw FormatError(path + ": embedding '" + name + "' has dim " +
                              std::to_string(t.numel()) + ", others have " + std::to_string(dim));
        if (!out.emplace(name, std::move(t)).second)
            throw FormatError(path + ": duplicate embedding id '" + name + "'");
    }
    return out;
}

} // namespace camforge
