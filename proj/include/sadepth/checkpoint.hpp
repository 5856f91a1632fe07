#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sadepth/tensor.hpp"

namespace sadepth::ckpt {

/// Single-file archive: magic, JSON header (free-form metadata plus an entry
/// table), then raw little-endian doubles. Readers look entries up by name,
/// so unknown keys are ignored and missing ones reported.
void save(const std::string& path, const nlohmann::json& meta,
          const std::vector<std::pair<std::string, const Tensor*>>& arrays);

struct Archive {
    nlohmann::json meta;
    std::map<std::string, Tensor> arrays;

    const Tensor& require(const std::string& name) const;
    bool has(const std::string& name) const { return arrays.count(name) != 0; }
};

Archive load(const std::string& path);

} // namespace sadepth::ckpt
