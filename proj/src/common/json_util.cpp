#include "teach/common/json_util.hpp"

#include "teach/common/error.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace teach {

double round9(double value) {
    if (!std::isfinite(value) || value == 0.0) {
        return value;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return std::strtod(buf, nullptr);
}

json round_numbers(json doc) {
    if (doc.is_number_float()) {
        return round9(doc.get<double>());
    }
    if (doc.is_object() || doc.is_array()) {
        for (auto& child : doc) {
            child = round_numbers(std::move(child));
        }
    }
    return doc;
}

std::string canonical_dump(const json& doc) {
    return round_numbers(doc).dump();
}

std::string exact_dump(const json& doc) {
    return doc.dump();
}

const json& require(const json& doc, const std::string& key) {
    if (!doc.is_object() || !doc.contains(key)) {
        throw ValidationError("missing field \"" + key + "\"");
    }
    return doc.at(key);
}

double require_number(const json& doc, const std::string& key) {
    const json& v = require(doc, key);
    if (!v.is_number()) {
        throw ValidationError("field \"" + key + "\" must be a number");
    }
    return v.get<double>();
}

void check_keys(const json& doc, std::initializer_list<const char*> allowed, const std::string& what) {
    if (!doc.is_object()) {
        throw ValidationError(what + " must be a JSON object");
    }
    for (const auto& item : doc.items()) {
        bool known = false;
        for (const char* key : allowed) {
            known = known || item.key() == key;
        }
        if (!known) {
            throw ValidationError("unknown field \"" + item.key() + "\" in " + what);
        }
    }
}

void throw_field_type(const char* key) {
    throw ValidationError(std::string("field \"") + key + "\" has the wrong type");
}

}  // namespace teach
