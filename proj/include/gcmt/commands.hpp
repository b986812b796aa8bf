#pragma once

#include <string>

#include "gcmt/config.hpp"

namespace gcmt {

// Library-level command bodies. Each writes its outputs plus a
// resolved_config_<command>.cfg into the output directory and throws on any
// failure; the CLI wrapper turns exceptions into exit codes.
void cmd_gen_data(const GenDataConfig& cfg);
void cmd_pretrain(const PretrainCmdConfig& cfg);
void cmd_adapt(const AdaptCmdConfig& cfg);
void cmd_eval(const EvalCmdConfig& cfg);

// Full front end: resolves the config for `command` (one of gen-data,
// pretrain, adapt, eval), runs it, and maps errors to an exit code with a
// one-line `error: <kind>: <message>` on stderr. config_path may be empty.
int run_cli_command(const std::string& command, const std::string& config_path, const ConfigOverrides& overrides);

}  // namespace gcmt
