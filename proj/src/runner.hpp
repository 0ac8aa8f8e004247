#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace cpcseq::run {

// Stage entry point used by the C API. Creates `out_dir` (refusing to reuse a
// non-empty directory unless `force`), writes the resolved config, executes
// the stage and writes its artifacts. Throws UsageError / DataError /
// NumericError; partial history is flushed before a numeric abort.
void execute(const std::string& command, nlohmann::json config, const std::string& out_dir,
             bool force);

// Returns every violation found in the config for the given command; an
// empty list means the config is runnable.
std::vector<std::string> validate_config(const std::string& command,
                                         const nlohmann::json& config);

bool known_command(const std::string& command);

// Worker thread budget: 1 in deterministic mode, otherwise the config value,
// capped by the CPC_SEQ_THREADS environment variable when set.
int resolve_threads(const nlohmann::json& config);

}  // namespace cpcseq::run
