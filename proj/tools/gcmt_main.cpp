#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gcmt/commands.hpp"
#include "gcmt/errors.hpp"

namespace {

// Shared flags attached to every subcommand.
struct CommonArgs {
    std::string config_path;
    gcmt::ConfigOverrides overrides;
};

void attach_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "Config file of `key value` lines");
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&args](const std::uint64_t& v) {
            args.overrides.has_seed = true;
            args.overrides.seed = v;
        },
        "Master seed; section seeds derive from it unless set explicitly");
    sub->add_option_function<std::string>(
        "--out",
        [&args](const std::string& v) {
            args.overrides.has_out = true;
            args.overrides.out_dir = v;
        },
        "Output directory (default: out)");
    sub->add_option_function<std::vector<std::string>>(
        "--set",
        [&args](const std::vector<std::string>& pairs) {
            for (const auto& p : pairs) {
                const std::size_t eq = p.find('=');
                if (eq == std::string::npos || eq == 0 || eq + 1 >= p.size()) {
                    throw CLI::ValidationError("--set", "expected key=value, got '" + p + "'");
                }
                args.overrides.sets.push_back({p.substr(0, eq), p.substr(eq + 1)});
            }
        },
        "Override one config key, e.g. --set adapt.lambda_gcc=0");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-consistency mean teaching on synthetic identity data"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string command;
    for (const char* name : {"gen-data", "pretrain", "adapt", "eval"}) {
        CLI::App* sub = app.add_subcommand(name, "");
        attach_common(sub, args);
        sub->callback([&command, name]() { command = name; });
    }
    app.get_subcommand("gen-data")->description("Write synthetic source and target domain datasets");
    app.get_subcommand("pretrain")->description("Supervised source training, writes a checkpoint");
    app.get_subcommand("adapt")->description("Unsupervised adaptation, writes metrics and checkpoints");
    app.get_subcommand("eval")->description("Retrieval evaluation of a checkpoint on a dataset");

    CLI11_PARSE(app, argc, argv);
    return gcmt::run_cli_command(command, args.config_path, args.overrides);
}
