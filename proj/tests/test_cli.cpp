#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "gcmt/checkpoint.hpp"
#include "gcmt/commands.hpp"
#include "gcmt/config.hpp"
#include "gcmt/errors.hpp"
#include "gcmt/model.hpp"
#include "gcmt/rng.hpp"

using namespace gcmt;

namespace {

struct TmpDir {
    std::filesystem::path path;
    explicit TmpDir(const std::string& name) : path(std::filesystem::current_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TmpDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void spit(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

ConfigOverrides overrides_for(const std::string& out_dir,
                              const std::vector<std::pair<std::string, std::string>>& sets = {}) {
    ConfigOverrides o;
    o.has_out = true;
    o.out_dir = out_dir;
    for (const auto& [k, v] : sets) {
        o.sets.push_back({k, v});
    }
    return o;
}

// Tiny world shared by the pipeline tests.
const std::vector<std::pair<std::string, std::string>> kTinyData = {
    {"data.identities", "6"}, {"data.cameras", "2"},  {"data.images_per_identity_per_camera", "4"},
    {"data.latent_dim", "4"}, {"data.input_dim", "10"},
};
const std::vector<std::pair<std::string, std::string>> kTinyPretrain = {
    {"pretrain.epochs", "10"}, {"pretrain.hidden", "16"}, {"pretrain.feature_dim", "8"},
    {"pretrain.batch_size", "16"},
};
const std::vector<std::pair<std::string, std::string>> kTinyAdapt = {
    {"adapt.epochs", "1"},        {"adapt.iters_per_epoch", "2"}, {"adapt.batch_identities", "3"},
    {"adapt.images_per_identity", "2"}, {"adapt.cluster_count", "5"},   {"adapt.knn_k", "3"},
    {"adapt.kmeans_iters", "20"},
};

int exit_status(int system_rc) {
    REQUIRE(system_rc != -1);
    REQUIRE(WIFEXITED(system_rc));
    return WEXITSTATUS(system_rc);
}

}  // namespace

TEST_CASE("config text parsing") {
    ConfigMap map = parse_config_text("# comment\n\nseed 7\r\nadapt.beta  0.05\nname two words\n");
    CHECK(map.entries.size() == 3u);
    CHECK(map.get("seed") == "7");
    CHECK(map.get("adapt.beta") == "0.05");
    CHECK(map.get("name") == "two words");
    CHECK(map.has("seed"));
    CHECK(!map.has("missing"));
    CHECK_THROWS_AS(map.get("missing"), StateError);
}

TEST_CASE("config parse failures carry line numbers") {
    auto expect = [](const std::string& text, const std::string& fragment) {
        try {
            parse_config_text(text);
            FAIL_CHECK("expected ParseError for: " << text);
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(fragment) != std::string::npos);
        }
    };
    expect("seed 1\nseed 2\n", "line 2: duplicate key 'seed'");
    expect("# ok\nkeyonly\n", "line 2: key 'keyonly' has no value");
    expect("key \n", "has no value");
}

TEST_CASE("config text round trips in order") {
    ConfigMap map;
    map.set("b", "2");
    map.set("a", "1");
    map.set("b", "3");
    CHECK(config_to_text(map) == "b 3\na 1\n");
}

TEST_CASE("gen-data resolution fills documented defaults") {
    GenDataConfig cfg = resolve_gen_data_config(ConfigMap{}, ConfigOverrides{});
    CHECK(cfg.identities == 100);
    CHECK(cfg.cameras == 4);
    CHECK(cfg.images_per_identity_per_camera == 6);
    CHECK(cfg.latent_dim == 16);
    CHECK(cfg.input_dim == 32);
    CHECK(cfg.noise_sigma == 0.08);
    CHECK(cfg.domains == 2);
    CHECK(cfg.out_dir == "out");
    CHECK(cfg.seed == Rng::derive(42, "data"));

    const std::string expected = "seed 42\nout out\ndata.seed " + std::to_string(Rng::derive(42, "data")) +
                                 "\ndata.identities 100\ndata.cameras 4\ndata.images_per_identity_per_camera 6\n"
                                 "data.latent_dim 16\ndata.input_dim 32\ndata.noise_sigma 0.08\ndata.domains 2\n";
    CHECK(config_to_text(cfg.resolved) == expected);
}

TEST_CASE("overrides beat file values which beat defaults") {
    ConfigMap file = parse_config_text("seed 7\ndata.identities 5\ndata.cameras 3\n");
    ConfigOverrides o;
    o.sets.push_back({"data.identities", "9"});
    o.has_seed = true;
    o.seed = 11;
    o.has_out = true;
    o.out_dir = "elsewhere";
    GenDataConfig cfg = resolve_gen_data_config(file, o);
    CHECK(cfg.identities == 9);
    CHECK(cfg.cameras == 3);
    CHECK(cfg.out_dir == "elsewhere");
    CHECK(cfg.seed == Rng::derive(11, "data"));
    CHECK(cfg.resolved.get("seed") == "11");
}

TEST_CASE("an explicit section seed is taken verbatim") {
    ConfigMap file = parse_config_text("data.seed 1234\n");
    GenDataConfig cfg = resolve_gen_data_config(file, ConfigOverrides{});
    CHECK(cfg.seed == 1234);
}

TEST_CASE("every unknown key and bad value lands in one validation error") {
    ConfigMap file = parse_config_text("lamda_gcc 0.6\nadapt.bogus 1\nadapt.epochs x\nadapt.beta 0\n");
    try {
        resolve_adapt_config(file, ConfigOverrides{});
        FAIL_CHECK("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.rfind("config: ", 0) == 0);
        CHECK(msg.find("unknown key lamda_gcc") != std::string::npos);
        CHECK(msg.find("unknown key adapt.bogus") != std::string::npos);
        CHECK(msg.find("adapt.epochs: not an integer: x") != std::string::npos);
        CHECK(msg.find("beta must be positive") != std::string::npos);
        CHECK(msg.find("; ") != std::string::npos);
    }
}

TEST_CASE("adapt resolution defaults and checkpoint lists") {
    AdaptCmdConfig cfg = resolve_adapt_config(ConfigMap{}, ConfigOverrides{});
    CHECK(cfg.dataset == "out/target.csv");
    REQUIRE(cfg.checkpoints.size() == 1u);
    CHECK(cfg.checkpoints[0] == "out/pretrained.ckpt");
    CHECK(cfg.train.epochs == 20);
    CHECK(cfg.train.lambda_gcc == 0.6);
    CHECK(cfg.train.beta == 0.05);
    CHECK(cfg.train.seed == Rng::derive(42, "adapt"));

    ConfigMap file = parse_config_text("adapt.checkpoints a.ckpt, b.ckpt\n");
    AdaptCmdConfig multi = resolve_adapt_config(file, ConfigOverrides{});
    REQUIRE(multi.checkpoints.size() == 2u);
    CHECK(multi.checkpoints[0] == "a.ckpt");
    CHECK(multi.checkpoints[1] == "b.ckpt");

    ConfigMap trailing = parse_config_text("adapt.checkpoints a.ckpt,\n");
    CHECK_THROWS_AS(resolve_adapt_config(trailing, ConfigOverrides{}), ValidationError);
}

TEST_CASE("pretrain resolution parses hidden layer lists") {
    ConfigMap file = parse_config_text("pretrain.hidden 64,32\n");
    PretrainCmdConfig cfg = resolve_pretrain_config(file, ConfigOverrides{});
    CHECK(cfg.train.hidden_dims == std::vector<int>{64, 32});
    CHECK(cfg.dataset == "out/source.csv");
    CHECK(cfg.checkpoint_out == "out/pretrained.ckpt");
    CHECK(cfg.train.seed == Rng::derive(42, "pretrain"));

    ConfigMap bad = parse_config_text("pretrain.hidden 64,x\n");
    CHECK_THROWS_AS(resolve_pretrain_config(bad, ConfigOverrides{}), ValidationError);
}

TEST_CASE("eval resolution points at the first adapted checkpoint by default") {
    EvalCmdConfig cfg = resolve_eval_config(ConfigMap{}, ConfigOverrides{});
    CHECK(cfg.dataset == "out/target.csv");
    CHECK(cfg.checkpoint == "out/adapted-0.ckpt");

    ConfigOverrides o = overrides_for("w", {{"eval.checkpoint", "model.ckpt"}});
    EvalCmdConfig custom = resolve_eval_config(ConfigMap{}, o);
    CHECK(custom.dataset == "w/target.csv");
    CHECK(custom.checkpoint == "model.ckpt");
}

TEST_CASE("the full pipeline runs end to end through the command layer") {
    TmpDir tmp("tmp_cli_pipeline");

    REQUIRE(run_cli_command("gen-data", "", overrides_for(tmp.file(""), kTinyData)) == 0);
    CHECK(std::filesystem::exists(tmp.file("source.csv")));
    CHECK(std::filesystem::exists(tmp.file("target.csv")));
    CHECK(std::filesystem::exists(tmp.file("resolved_config_gen-data.cfg")));

    // regenerating with the same inputs is byte stable
    const std::string first = slurp(tmp.file("source.csv"));
    REQUIRE(run_cli_command("gen-data", "", overrides_for(tmp.file(""), kTinyData)) == 0);
    CHECK(slurp(tmp.file("source.csv")) == first);

    REQUIRE(run_cli_command("pretrain", "", overrides_for(tmp.file(""), kTinyPretrain)) == 0);
    CHECK(std::filesystem::exists(tmp.file("pretrained.ckpt")));
    CHECK(std::filesystem::exists(tmp.file("resolved_config_pretrain.cfg")));
    Checkpoint pre = load_checkpoint(tmp.file("pretrained.ckpt"));
    CHECK(pre.models.size() == 1u);

    REQUIRE(run_cli_command("adapt", "", overrides_for(tmp.file(""), kTinyAdapt)) == 0);
    CHECK(std::filesystem::exists(tmp.file("adapted-0.ckpt")));
    const std::string metrics = slurp(tmp.file("metrics.csv"));
    CHECK(metrics.rfind("epoch,l_ce,l_mce,l_gcc,l_total,teacher_idx,map,rank1,rank5,rank10\n", 0) == 0);
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3);
    NetworkPair adapted = load_pair_checkpoint(tmp.file("adapted-0.ckpt"));
    CHECK(adapted.student.encoder.input_dim() == 10);

    // the resolved adapt config re-resolves to itself
    ConfigMap resolved = read_config_file(tmp.file("resolved_config_adapt.cfg"));
    AdaptCmdConfig again = resolve_adapt_config(resolved, ConfigOverrides{});
    CHECK(config_to_text(again.resolved) == config_to_text(resolved));

    REQUIRE(run_cli_command("eval", "", overrides_for(tmp.file(""))) == 0);
    const std::string eval_text = slurp(tmp.file("eval.txt"));
    CHECK(eval_text.rfind("map ", 0) == 0);
    CHECK(eval_text.find("cmc0 ") != std::string::npos);
    CHECK(eval_text.find("queries ") != std::string::npos);
}

TEST_CASE("adapting two checkpoints writes one pair per teacher") {
    TmpDir tmp("tmp_cli_two");
    REQUIRE(run_cli_command("gen-data", "", overrides_for(tmp.file(""), kTinyData)) == 0);
    REQUIRE(run_cli_command("pretrain", "", overrides_for(tmp.file(""), kTinyPretrain)) == 0);

    auto second = kTinyPretrain;
    second.push_back({"pretrain.seed", "99"});
    second.push_back({"pretrain.checkpoint", tmp.file("pretrained-b.ckpt")});
    REQUIRE(run_cli_command("pretrain", "", overrides_for(tmp.file(""), second)) == 0);

    auto adapt_sets = kTinyAdapt;
    adapt_sets.push_back(
        {"adapt.checkpoints", tmp.file("pretrained.ckpt") + "," + tmp.file("pretrained-b.ckpt")});
    REQUIRE(run_cli_command("adapt", "", overrides_for(tmp.file(""), adapt_sets)) == 0);
    CHECK(std::filesystem::exists(tmp.file("adapted-0.ckpt")));
    CHECK(std::filesystem::exists(tmp.file("adapted-1.ckpt")));
    const std::string metrics = slurp(tmp.file("metrics.csv"));
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 5);
}

TEST_CASE("cli failure modes map to distinct exit codes") {
    TmpDir tmp("tmp_cli_errors");

    SUBCASE("unknown command") {
        CHECK(run_cli_command("frobnicate", "", ConfigOverrides{}) == 2);
    }
    SUBCASE("missing config file") {
        CHECK(run_cli_command("gen-data", tmp.file("nope.cfg"), ConfigOverrides{}) == 3);
    }
    SUBCASE("config parse error") {
        spit(tmp.file("bad.cfg"), "seed 1\nseed 2\n");
        CHECK(run_cli_command("gen-data", tmp.file("bad.cfg"), ConfigOverrides{}) == 2);
    }
    SUBCASE("unknown key") {
        spit(tmp.file("unk.cfg"), "lamda_gcc 0.6\n");
        CHECK(run_cli_command("adapt", tmp.file("unk.cfg"), ConfigOverrides{}) == 2);
    }
    SUBCASE("missing dataset") {
        CHECK(run_cli_command("adapt", "", overrides_for(tmp.file(""))) == 3);
    }
    SUBCASE("corrupt checkpoint") {
        spit(tmp.file("target.csv"), "id,camera,domain,split,x0\n0,0,1,train,0.5\n");
        spit(tmp.file("adapted-0.ckpt"), "NOT-A-CKPT\n");
        CHECK(run_cli_command("eval", "", overrides_for(tmp.file(""))) == 1);
    }
    SUBCASE("eval with no usable query") {
        Rng rng(3);
        Model model;
        model.encoder = make_encoder(2, {4}, 3, rng);
        model.head.weight = Matrix(3, 2);
        save_checkpoint(model, tmp.file("adapted-0.ckpt"));
        spit(tmp.file("target.csv"),
             "id,camera,domain,split,x0,x1\n"
             "1,0,1,query,0.5,0.5\n"
             "2,1,1,gallery,0.2,0.8\n");
        CHECK(run_cli_command("eval", "", overrides_for(tmp.file(""))) == 1);
    }
}

#ifdef GCMT_CLI_PATH
TEST_CASE("the installed binary drives the same front end") {
    TmpDir tmp("tmp_cli_binary");
    const std::string bin = GCMT_CLI_PATH;
    const std::string base = std::string(" --out ") + tmp.file("");

    const std::string gen = bin + " gen-data" + base +
                            " --set data.identities=4 --set data.cameras=2"
                            " --set data.images_per_identity_per_camera=3"
                            " --set data.latent_dim=4 --set data.input_dim=8 > " +
                            tmp.file("gen.log") + " 2>&1";
    CHECK(exit_status(std::system(gen.c_str())) == 0);
    CHECK(std::filesystem::exists(tmp.file("source.csv")));
    const std::string log = slurp(tmp.file("gen.log"));
    CHECK(log.find("wrote ") != std::string::npos);
    CHECK(log.find("source.csv (24 samples)") != std::string::npos);

    const std::string bad = bin + " adapt --config " + tmp.file("missing.cfg") + " > /dev/null 2> " +
                            tmp.file("err.log");
    CHECK(exit_status(std::system(bad.c_str())) == 3);
    CHECK(slurp(tmp.file("err.log")).rfind("error: missing-file: ", 0) == 0);

    const std::string unknown = bin + " no-such-command > /dev/null 2>&1";
    CHECK(exit_status(std::system(unknown.c_str())) != 0);
}
#endif
