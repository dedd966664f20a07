#pragma once

// Internal strict-JSON helpers shared by the serialization units. Keys are
// always optional (caller defaults stand in); unknown keys and wrong types
// are rejected with the full key path so typos cannot silently revert a
// setting to its default.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "whisker/errors.hpp"
#include "whisker/geometry.hpp"

namespace whisker::jsonu {

using Json = nlohmann::ordered_json;

class StrictObject {
public:
    // `domain` prefixes every error ("config", "train.jsonl:12", ...).
    StrictObject(const Json& j, std::string path, std::string domain)
        : j_(j), path_(std::move(path)), domain_(std::move(domain)) {
        if (!j_.is_object()) throw ValidationError(domain_ + ": " + path_ + " must be a JSON object");
    }

    const Json* get(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &it.value();
    }

    // Like get(), but a missing key is an error (for record formats where
    // defaults make no sense).
    const Json& require(const std::string& key) {
        const Json* j = get(key);
        if (j == nullptr) throw ValidationError(fail(key, "is missing"));
        return *j;
    }

    std::string child_path(const std::string& key) const { return path_ + "." + key; }
    std::string fail(const std::string& key, const std::string& what) const {
        return domain_ + ": " + child_path(key) + " " + what;
    }
    const std::string& domain() const { return domain_; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (seen_.find(it.key()) == seen_.end()) {
                throw ValidationError(domain_ + ": unknown key \"" + child_path(it.key()) + "\"");
            }
        }
    }

private:
    const Json& j_;
    std::string path_;
    std::string domain_;
    std::set<std::string> seen_;
};

inline void read_field(StrictObject& o, const std::string& key, double& v) {
    if (const Json* j = o.get(key)) {
        if (!j->is_number()) throw ValidationError(o.fail(key, "must be a number"));
        v = j->get<double>();
    }
}

inline void read_field(StrictObject& o, const std::string& key, int& v) {
    if (const Json* j = o.get(key)) {
        if (!j->is_number_integer()) throw ValidationError(o.fail(key, "must be an integer"));
        v = j->get<int>();
    }
}

inline void read_field(StrictObject& o, const std::string& key, std::uint64_t& v) {
    if (const Json* j = o.get(key)) {
        if (!(j->is_number_unsigned() || (j->is_number_integer() && j->get<long long>() >= 0))) {
            throw ValidationError(o.fail(key, "must be a non-negative integer"));
        }
        v = j->get<std::uint64_t>();
    }
}

inline void read_field(StrictObject& o, const std::string& key, bool& v) {
    if (const Json* j = o.get(key)) {
        if (!j->is_boolean()) throw ValidationError(o.fail(key, "must be a boolean"));
        v = j->get<bool>();
    }
}

inline void read_field(StrictObject& o, const std::string& key, std::string& v) {
    if (const Json* j = o.get(key)) {
        if (!j->is_string()) throw ValidationError(o.fail(key, "must be a string"));
        v = j->get<std::string>();
    }
}

inline void read_field(StrictObject& o, const std::string& key, std::vector<double>& v) {
    if (const Json* j = o.get(key)) {
        if (!j->is_array()) throw ValidationError(o.fail(key, "must be an array"));
        v.clear();
        for (const Json& e : *j) {
            if (!e.is_number()) throw ValidationError(o.fail(key, "must hold numbers"));
            v.push_back(e.get<double>());
        }
    }
}

inline Vec2 parse_vec2(const Json& j, const std::string& path, const std::string& domain) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ValidationError(domain + ": " + path + " must be [x, y]");
    }
    return Vec2(j[0].get<double>(), j[1].get<double>());
}

inline Json dump_vec2(const Vec2& v) { return Json::array({v.x(), v.y()}); }

}  // namespace whisker::jsonu
