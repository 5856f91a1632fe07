#include "sadepth/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sadepth::ckpt {

namespace {
constexpr char kMagic[8] = {'S', 'A', 'D', 'E', 'P', 'T', 'H', '1'};
}

void save(const std::string& path, const nlohmann::json& meta,
          const std::vector<std::pair<std::string, const Tensor*>>& arrays) {
    nlohmann::json header;
    header["meta"] = meta;
    nlohmann::json entries = nlohmann::json::array();
    int64_t offset = 0;
    for (const auto& [name, tensor] : arrays) {
        nlohmann::json e;
        e["name"] = name;
        e["shape"] = tensor->shape();
        e["offset"] = offset;
        entries.push_back(std::move(e));
        offset += tensor->numel();
    }
    header["entries"] = std::move(entries);
    const std::string header_str = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint save: cannot open " + path);
    f.write(kMagic, sizeof(kMagic));
    const uint64_t hlen = header_str.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, tensor] : arrays) {
        f.write(reinterpret_cast<const char*>(tensor->data()),
                static_cast<std::streamsize>(tensor->numel() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("checkpoint save: write failed for " + path);
}

Archive load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint load: cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("checkpoint load: bad magic in " + path);
    }
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header_str(hlen, '\0');
    f.read(header_str.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw std::runtime_error("checkpoint load: truncated header in " + path);
    nlohmann::json header = nlohmann::json::parse(header_str);

    Archive out;
    out.meta = header.at("meta");
    for (const auto& e : header.at("entries")) {
        const std::string name = e.at("name").get<std::string>();
        const std::vector<int64_t> shape = e.at("shape").get<std::vector<int64_t>>();
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint load: truncated data for '" + name + "' in " + path);
        out.arrays.emplace(name, std::move(t));
    }
    return out;
}

const Tensor& Archive::require(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw std::runtime_error("checkpoint: missing array '" + name + "'");
    return it->second;
}

} // namespace sadepth::ckpt
