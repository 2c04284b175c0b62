#pragma once

#include "teach/common/error.hpp"
#include "teach/common/json_util.hpp"

#include <string>

namespace teach::app {

class ArtifactError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Hex SHA-256 of `bytes`.
std::string sha256_hex(const std::string& bytes);

/// Digest of a model document: SHA-256 of its full-precision canonical
/// dump with any "digest" key removed.
std::string artifact_digest(json doc);

/// Writes `doc` plus its "digest" atomically (temp file + rename).
/// Returns the digest.
std::string save_artifact(const json& doc, const std::string& path);

/// Reads, checks that "kind" equals `kind` and "version" is
/// `max_version` or lower, then verifies the digest. Throws ArtifactError.
json load_artifact(const std::string& path, const std::string& kind, int max_version);

}  // namespace teach::app
