#include "gcmt/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gcmt/checkpoint.hpp"
#include "gcmt/errors.hpp"
#include "gcmt/evalkit.hpp"
#include "gcmt/synthdata.hpp"

namespace gcmt {

namespace {

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw FileError("cannot create output directory " + dir + ": " + ec.message());
    }
}

void require_file(const std::string& path) {
    if (!std::filesystem::exists(path)) {
        throw FileError("missing file: " + path);
    }
}

std::string out_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FileError("cannot open for writing: " + path);
    f << text;
    if (!f) throw FileError("failed writing: " + path);
}

void write_resolved(const ConfigMap& resolved, const std::string& out_dir, const std::string& command) {
    write_text(out_path(out_dir, "resolved_config_" + command + ".cfg"), config_to_text(resolved));
}

// Adapted checkpoints hold a student/teacher pair; evaluation and further
// adaptation start from the teacher. Pretrained checkpoints hold one model.
const Model& initial_model(const Checkpoint& ckpt, const std::string& path) {
    if (ckpt.models.size() == 1) return ckpt.models[0].second;
    for (const auto& [name, model] : ckpt.models) {
        if (name == "teacher") return model;
    }
    throw CheckpointError(CheckpointError::Kind::Malformed,
                          path + " holds neither a single model nor a teacher");
}

}  // namespace

void cmd_gen_data(const GenDataConfig& cfg) {
    ensure_out_dir(cfg.out_dir);
    for (int d = 0; d < cfg.domains; ++d) {
        const DomainSpec spec =
            make_domain_spec(d, cfg.identities, cfg.cameras, cfg.images_per_identity_per_camera, cfg.latent_dim,
                             cfg.input_dim, cfg.noise_sigma, cfg.seed);
        const SyntheticDataset ds = generate_domain(spec);
        std::string name;
        if (d == 0) {
            name = "source.csv";
        } else if (d == 1) {
            name = "target.csv";
        } else {
            name = "domain" + std::to_string(d) + ".csv";
        }
        const std::string path = out_path(cfg.out_dir, name);
        write_dataset(ds, path);
        std::printf("wrote %s (%zu samples)\n", path.c_str(), ds.samples.size());
    }
    write_resolved(cfg.resolved, cfg.out_dir, "gen-data");
}

void cmd_pretrain(const PretrainCmdConfig& cfg) {
    ensure_out_dir(cfg.out_dir);
    require_file(cfg.dataset);
    const SyntheticDataset source = read_dataset(cfg.dataset);
    const Model model = pretrain_source(source, cfg.train);
    save_checkpoint(model, cfg.checkpoint_out);
    write_resolved(cfg.resolved, cfg.out_dir, "pretrain");
    std::printf("wrote %s\n", cfg.checkpoint_out.c_str());
}

void cmd_adapt(const AdaptCmdConfig& cfg) {
    ensure_out_dir(cfg.out_dir);
    require_file(cfg.dataset);
    for (const auto& path : cfg.checkpoints) {
        require_file(path);
    }
    const SyntheticDataset target = read_dataset(cfg.dataset);
    std::vector<Model> pretrained;
    for (const auto& path : cfg.checkpoints) {
        pretrained.push_back(initial_model(load_checkpoint(path), path));
    }

    const AdaptResult result = train(cfg.train, pretrained, target);

    const std::string metrics_path = out_path(cfg.out_dir, "metrics.csv");
    write_text(metrics_path, metric_log_csv(result.log));
    for (std::size_t j = 0; j < result.pairs.size(); ++j) {
        save_checkpoint(result.pairs[j], out_path(cfg.out_dir, "adapted-" + std::to_string(j) + ".ckpt"));
    }
    write_resolved(cfg.resolved, cfg.out_dir, "adapt");
    std::printf("wrote %s\n", metrics_path.c_str());
    std::printf("final best teacher mAP %.6f\n", final_best_map(result.log));
}

void cmd_eval(const EvalCmdConfig& cfg) {
    ensure_out_dir(cfg.out_dir);
    require_file(cfg.dataset);
    require_file(cfg.checkpoint);
    const SyntheticDataset ds = read_dataset(cfg.dataset);
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
    const Model& model = initial_model(ckpt, cfg.checkpoint);

    const RetrievalSet query = extract_retrieval_set(model, ds, Split::Query);
    const RetrievalSet gallery = extract_retrieval_set(model, ds, Split::Gallery);
    const EvalResult result = evaluate(query, gallery);

    const std::string report = format_eval_result(result);
    write_text(out_path(cfg.out_dir, "eval.txt"), report);
    write_resolved(cfg.resolved, cfg.out_dir, "eval");
    std::printf("%s", report.c_str());
}

int run_cli_command(const std::string& command, const std::string& config_path, const ConfigOverrides& overrides) {
    try {
        ConfigMap file;
        if (!config_path.empty()) {
            file = read_config_file(config_path);
        }
        if (command == "gen-data") {
            cmd_gen_data(resolve_gen_data_config(file, overrides));
        } else if (command == "pretrain") {
            cmd_pretrain(resolve_pretrain_config(file, overrides));
        } else if (command == "adapt") {
            cmd_adapt(resolve_adapt_config(file, overrides));
        } else if (command == "eval") {
            cmd_eval(resolve_eval_config(file, overrides));
        } else {
            std::fprintf(stderr, "error: usage: unknown command %s\n", command.c_str());
            return 2;
        }
        return 0;
    } catch (const FileError& e) {
        std::fprintf(stderr, "error: missing-file: %s\n", e.what());
        return 3;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: parse: %s\n", e.what());
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: validation: %s\n", e.what());
        return 2;
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "error: parameter: %s\n", e.what());
        return 2;
    } catch (const CheckpointError& e) {
        std::fprintf(stderr, "error: checkpoint: %s\n", e.what());
        return 1;
    } catch (const EvalError& e) {
        std::fprintf(stderr, "error: eval: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: numeric: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: runtime: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: runtime: %s\n", e.what());
        return 1;
    }
}

}  // namespace gcmt
