#pragma once

#include <filesystem>
#include <json.hpp>

#include "cpsde/param_store.hpp"

namespace cpsde {

inline constexpr int kCheckpointFormatVersion = 1;

/// {"format_version", "step_count", "params": {name: {"shape", "values"[, "moment1", "moment2"]}}}
nlohmann::json store_to_json(const ParamStore& store, bool with_optimizer_state = true);
ParamStore store_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
ParamStore load_checkpoint(const std::filesystem::path& path);

/// Writes `doc` with a trailing newline; throws IoError on failure.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace cpsde
