#pragma once

// Internal helper for reading JSON objects field by field while tracking
// which keys were consumed, so leftover keys can be rejected or preserved.

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "agenteval/core.hpp"
#include "agenteval/errors.hpp"
#include "agenteval/records.hpp"

namespace agenteval::detail {

class FieldReader {
public:
    FieldReader(const Json& doc, std::string what) : doc_(doc), what_(std::move(what)) {
        if (!doc_.is_object()) throw ValidationError(what_ + ": expected a JSON object");
    }

    bool has(const std::string& key) const { return doc_.contains(key); }

    const Json& required(const std::string& key) {
        consumed_.insert(key);
        auto it = doc_.find(key);
        if (it == doc_.end()) throw ValidationError(what_ + ": missing field '" + key + "'");
        return *it;
    }

    const Json* optional(const std::string& key) {
        consumed_.insert(key);
        auto it = doc_.find(key);
        return it == doc_.end() ? nullptr : &*it;
    }

    std::string string(const std::string& key) {
        const Json& v = required(key);
        if (!v.is_string()) fail(key, "a string");
        return v.get<std::string>();
    }

    std::string string_or(const std::string& key, std::string fallback) {
        const Json* v = optional(key);
        if (!v || v->is_null()) return fallback;
        if (!v->is_string()) fail(key, "a string");
        return v->get<std::string>();
    }

    long long integer(const std::string& key) {
        const Json& v = required(key);
        if (!v.is_number_integer()) fail(key, "an integer");
        return v.get<long long>();
    }

    double number(const std::string& key) {
        const Json& v = required(key);
        if (!v.is_number()) fail(key, "a number");
        return v.get<double>();
    }

    bool boolean(const std::string& key) {
        const Json& v = required(key);
        if (!v.is_boolean()) fail(key, "a boolean");
        return v.get<bool>();
    }

    std::vector<std::string> strings(const std::string& key, bool required_field = true) {
        const Json* v = required_field ? &required(key) : optional(key);
        if (!v) return {};
        if (!v->is_array()) fail(key, "an array of strings");
        std::vector<std::string> out;
        for (const auto& item : *v) {
            if (!item.is_string()) fail(key, "an array of strings");
            out.push_back(item.get<std::string>());
        }
        return out;
    }

    std::set<std::string> string_set(const std::string& key, bool required_field = true) {
        auto list = strings(key, required_field);
        return {list.begin(), list.end()};
    }

    void check_version() {
        const Json* v = optional("format_version");
        if (!v) return;
        if (!v->is_number_integer() || v->get<long long>() != kFormatVersion) {
            throw ValidationError(what_ + ": unsupported format_version");
        }
    }

    // Strict: throws on any key not consumed. Lenient: returns them.
    Json leftovers(ParseMode mode) const {
        Json extra = Json::object();
        for (auto it = doc_.begin(); it != doc_.end(); ++it) {
            if (consumed_.contains(it.key())) continue;
            if (mode == ParseMode::kStrict) {
                throw ValidationError(what_ + ": unknown field '" + it.key() + "'");
            }
            extra[it.key()] = it.value();
        }
        return extra;
    }

    [[noreturn]] void fail(const std::string& key, const char* expected) const {
        throw ValidationError(what_ + ": field '" + key + "' must be " + expected);
    }

    const std::string& what() const { return what_; }

private:
    const Json& doc_;
    std::string what_;
    std::set<std::string> consumed_;
};

inline Json strings_to_json(const std::set<std::string>& values) {
    Json out = Json::array();
    for (const auto& v : values) out.push_back(v);
    return out;
}

// Merges preserved unknown fields back into a record without overwriting
// canonical keys.
inline void merge_extra(Json& record, const Json& extra) {
    if (!extra.is_object()) return;
    for (auto it = extra.begin(); it != extra.end(); ++it) {
        if (!record.contains(it.key())) record[it.key()] = it.value();
    }
}

}  // namespace agenteval::detail
