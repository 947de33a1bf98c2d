#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "rolekit/llm/types.hpp"
#include "rolekit/pipeline/pipeline.hpp"

namespace rolekit::cli {

/// Settings shared by every command. JSON file shape:
///   {data_root, prompts_dir, parallelism, chat: {...}, embedding: {...},
///    judge: {...}, pipeline: {...}}
/// with backend objects as in llm::backend_config_from_json. Relative
/// paths resolve against the config file's directory.
struct CliConfig {
    std::filesystem::path data_root = "rolekit-data";
    std::filesystem::path prompts_dir;
    std::size_t parallelism = 4;
    llm::BackendConfig chat;
    llm::BackendConfig embedding;
    std::optional<llm::BackendConfig> judge; // unset = same as chat
    pipeline::PipelineConfig pipeline;
};

CliConfig load_cli_config(const std::filesystem::path& path);

struct GlobalFlags {
    std::string config_path;
    std::string data_root;
    std::string backend_url;
    std::string model;
    std::string script;
};

/// Config file (when given) overlaid by the flags.
CliConfig resolve_config(const GlobalFlags& flags);

/// Parses argv and runs one command. Errors print one line
/// "error[E_CODE]: message" to `err`; returns 0 on success, 2 on usage
/// errors and 1 otherwise.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

} // namespace rolekit::cli
