#pragma once

#include <initializer_list>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "dctnet/error.hpp"

namespace dctnet {

/// Throws ConfigError if `j` is not an object or has a key outside `allowed`.
inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                                std::string_view context) {
    if (!j.is_object()) throw ConfigError(std::string(context) + ": expected a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (auto a : allowed) known = known || item.key() == a;
        if (!known) throw ConfigError(std::string(context) + ": unknown key \"" + item.key() + "\"");
    }
}

/// Reads j[key] into `out` when present, converting type errors to ConfigError.
template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out, std::string_view context) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(context) + "." + key + ": " + e.what());
    }
}

}  // namespace dctnet
