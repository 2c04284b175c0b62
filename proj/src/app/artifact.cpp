#include "teach/app/artifact.hpp"

#include <openssl/sha.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace teach::app {

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
    SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md.data());
    std::string hex;
    hex.reserve(md.size() * 2);
    char buf[3];
    for (unsigned char c : md) {
        std::snprintf(buf, sizeof buf, "%02x", c);
        hex += buf;
    }
    return hex;
}

std::string artifact_digest(json doc) {
    if (doc.is_object()) doc.erase("digest");
    return sha256_hex(exact_dump(doc));
}

std::string save_artifact(const json& doc, const std::string& path) {
    json out = doc;
    const std::string digest = artifact_digest(out);
    out["digest"] = digest;
    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const auto tmp = target.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw RuntimeFault("cannot write artifact " + tmp);
        f << exact_dump(out) << '\n';
        if (!f) throw RuntimeFault("write failed for artifact " + tmp);
    }
    std::filesystem::rename(tmp, target);
    return digest;
}

json load_artifact(const std::string& path, const std::string& kind, int max_version) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ArtifactError("cannot open artifact " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    json doc;
    try {
        doc = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ArtifactError(path + ": not valid JSON (" + e.what() + ")");
    }
    if (!doc.is_object()) throw ArtifactError(path + ": artifact must be a JSON object");
    if (!doc.contains("kind") || doc.at("kind") != kind) {
        throw ArtifactError(path + ": expected an artifact of kind \"" + kind + "\"");
    }
    const auto& version = doc.contains("version") ? doc.at("version") : json(nullptr);
    if (!version.is_number_integer() || version.get<long long>() < 1 || version.get<long long>() > max_version) {
        throw ArtifactError(path + ": unsupported " + kind + " artifact version " + version.dump());
    }
    if (!doc.contains("digest") || !doc.at("digest").is_string()) {
        throw ArtifactError(path + ": artifact has no digest");
    }
    const auto stored = doc.at("digest").get<std::string>();
    if (artifact_digest(doc) != stored) {
        throw ArtifactError(path + ": digest mismatch (file corrupted or edited)");
    }
    doc.erase("digest");
    return doc;
}

}  // namespace teach::app
