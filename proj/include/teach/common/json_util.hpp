#pragma once

#include <json.hpp>

#include <initializer_list>
#include <string>

namespace teach {

using json = nlohmann::json;

/// Rounds to 9 significant decimal digits. Used for every value that goes
/// on the bus or into a log so that two runs produce byte-identical output
/// and so that in-process and networked runs see identical inputs.
double round9(double value);

/// Recursively applies round9 to every floating-point number in `doc`.
json round_numbers(json doc);

/// Compact dump with sorted keys (nlohmann's default object is ordered by
/// key) after rounding floats to 9 significant digits.
std::string canonical_dump(const json& doc);

/// Compact dump at full round-trip precision. Used for model artifacts.
std::string exact_dump(const json& doc);

/// Lookup helpers that raise ValidationError naming the missing key.
const json& require(const json& doc, const std::string& key);
double require_number(const json& doc, const std::string& key);

[[noreturn]] void throw_field_type(const char* key);

/// Throws ValidationError when `doc` is not an object or has a key outside
/// `allowed`. `what` names the section in the message.
void check_keys(const json& doc, std::initializer_list<const char*> allowed, const std::string& what);

/// Reads doc[key] into `out` when present; a type mismatch raises
/// ValidationError naming the key.
template <class T>
void read_optional(const json& doc, const char* key, T& out) {
    if (!doc.contains(key)) {
        return;
    }
    try {
        out = doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw_field_type(key);
    }
}

}  // namespace teach
