#pragma once

#include <string>

#include <json.hpp>

#include "evenres/logcover.hpp"

namespace evenres {

// All reports use insertion-ordered JSON so that field order is stable.
using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaTag = "evenres/1";

// Serializer pinned to 17 significant digits for every float, so that equal
// inputs give byte-identical documents (nlohmann's own dump() uses
// shortest-round-trip formatting, which we do not want in reports).
std::string json_dump(const Json& j, int indent = 2);

// FNV-1a 64-bit over a canonical dump; stable across platforms and runs.
std::string stable_hash_hex(const Json& j);

Json logpoint_to_json(const LogPoint& p);
LogPoint logpoint_from_json(const Json& j);

// Writes atomically (temp file + rename) so a cache is never half-written.
void write_text_file(const std::string& path, const std::string& body);
std::string read_text_file(const std::string& path);

}  // namespace evenres
