#include "gcmt/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gcmt/errors.hpp"
#include "gcmt/rng.hpp"

namespace gcmt {

bool ConfigMap::has(const std::string& key) const {
    for (const auto& e : entries) {
        if (e.key == key) return true;
    }
    return false;
}

const std::string& ConfigMap::get(const std::string& key) const {
    for (const auto& e : entries) {
        if (e.key == key) return e.value;
    }
    throw StateError("config has no key " + key);
}

void ConfigMap::set(const std::string& key, const std::string& value) {
    for (auto& e : entries) {
        if (e.key == key) {
            e.value = value;
            return;
        }
    }
    entries.push_back({key, value});
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t ws = stripped.find_first_of(" \t");
        if (ws == std::string::npos) {
            throw ParseError("line " + std::to_string(line_no) + ": key '" + stripped + "' has no value");
        }
        const std::string key = stripped.substr(0, ws);
        const std::string value = trim(stripped.substr(ws + 1));
        if (value.empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": key '" + key + "' has no value");
        }
        if (map.has(key)) {
            throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        map.entries.push_back({key, value});
    }
    return map;
}

ConfigMap read_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FileError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

std::string config_to_text(const ConfigMap& map) {
    std::string out;
    for (const auto& e : map.entries) {
        out += e.key + " " + e.value + "\n";
    }
    return out;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string format_u64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(v));
    return buf;
}

std::string join_path(const std::string& dir, const std::string& name) {
    if (dir.empty() || dir == ".") return name;
    if (dir.back() == '/') return dir + name;
    return dir + "/" + name;
}

// Merged view of file values and overrides plus typed accessors that collect
// every complaint instead of stopping at the first.
class Resolver {
public:
    Resolver(const ConfigMap& file, const ConfigOverrides& overrides, std::vector<std::string> known_keys)
        : known_(std::move(known_keys)) {
        for (const auto& e : file.entries) {
            note_key(e.key);
            merged_.set(e.key, e.value);
        }
        for (const auto& e : overrides.sets) {
            note_key(e.key);
            merged_.set(e.key, e.value);
        }
        if (overrides.has_seed) merged_.set("seed", format_u64(overrides.seed));
        if (overrides.has_out) merged_.set("out", overrides.out_dir);
    }

    // The master seed and output directory resolve first; derived defaults
    // depend on them.
    std::uint64_t master_seed() {
        if (!merged_.has("seed")) return 42;
        return parse_u64("seed", merged_.get("seed"));
    }

    std::string out_dir() { return merged_.has("out") ? merged_.get("out") : std::string("out"); }

    std::string raw(const std::string& key, const std::string& fallback) {
        const std::string v = merged_.has(key) ? merged_.get(key) : fallback;
        resolved_.set(key, v);
        return v;
    }

    int geti(const std::string& key, int fallback) {
        const std::string v = raw(key, std::to_string(fallback));
        try {
            std::size_t pos = 0;
            const int r = std::stoi(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            complain(key + ": not an integer: " + v);
            return fallback;
        }
    }

    double getd(const std::string& key, double fallback) {
        const std::string v = raw(key, format_double(fallback));
        try {
            std::size_t pos = 0;
            const double r = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            complain(key + ": not a number: " + v);
            return fallback;
        }
    }

    std::uint64_t getu(const std::string& key, std::uint64_t fallback) {
        const std::string v = raw(key, format_u64(fallback));
        return parse_u64(key, v, fallback);
    }

    std::string gets(const std::string& key, const std::string& fallback) { return raw(key, fallback); }

    std::vector<std::string> get_list(const std::string& key, const std::string& fallback) {
        const std::string v = raw(key, fallback);
        std::vector<std::string> parts;
        std::string cur;
        for (char ch : v) {
            if (ch == ',') {
                parts.push_back(trim(cur));
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
        parts.push_back(trim(cur));
        for (const auto& p : parts) {
            if (p.empty()) {
                complain(key + ": empty element in list: " + v);
            }
        }
        return parts;
    }

    std::vector<int> get_int_list(const std::string& key, const std::string& fallback) {
        std::vector<int> out;
        for (const auto& p : get_list(key, fallback)) {
            try {
                std::size_t pos = 0;
                out.push_back(std::stoi(p, &pos));
                if (pos != p.size()) throw std::invalid_argument(p);
            } catch (const std::exception&) {
                complain(key + ": not an integer: " + p);
            }
        }
        return out;
    }

    void complain(const std::string& msg) { problems_.push_back(msg); }

    // Throws one error naming every unknown key and bad value.
    ConfigMap finish() {
        std::string msg;
        for (const auto& k : unknown_) {
            if (!msg.empty()) msg += "; ";
            msg += "unknown key " + k;
        }
        for (const auto& p : problems_) {
            if (!msg.empty()) msg += "; ";
            msg += p;
        }
        if (!msg.empty()) {
            throw ValidationError("config: " + msg);
        }
        return std::move(resolved_);
    }

private:
    void note_key(const std::string& key) {
        if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
            if (std::find(unknown_.begin(), unknown_.end(), key) == unknown_.end()) {
                unknown_.push_back(key);
            }
        }
    }

    std::uint64_t parse_u64(const std::string& key, const std::string& v, std::uint64_t fallback = 42) {
        try {
            std::size_t pos = 0;
            const std::uint64_t r = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            complain(key + ": not an unsigned integer: " + v);
            return fallback;
        }
    }

    std::vector<std::string> known_;
    std::vector<std::string> unknown_;
    std::vector<std::string> problems_;
    ConfigMap merged_;
    ConfigMap resolved_;
};

}  // namespace

GenDataConfig resolve_gen_data_config(const ConfigMap& file, const ConfigOverrides& overrides) {
    Resolver r(file, overrides,
               {"seed", "out", "data.seed", "data.identities", "data.cameras", "data.images_per_identity_per_camera",
                "data.latent_dim", "data.input_dim", "data.noise_sigma", "data.domains"});
    GenDataConfig cfg;
    const std::uint64_t master = r.master_seed();
    cfg.out_dir = r.out_dir();
    r.raw("seed", format_u64(master));
    r.raw("out", cfg.out_dir);
    cfg.seed = r.getu("data.seed", Rng::derive(master, "data"));
    cfg.identities = r.geti("data.identities", 100);
    cfg.cameras = r.geti("data.cameras", 4);
    cfg.images_per_identity_per_camera = r.geti("data.images_per_identity_per_camera", 6);
    cfg.latent_dim = r.geti("data.latent_dim", 16);
    cfg.input_dim = r.geti("data.input_dim", 32);
    cfg.noise_sigma = r.getd("data.noise_sigma", 0.08);
    cfg.domains = r.geti("data.domains", 2);
    if (cfg.identities < 1 || cfg.cameras < 1 || cfg.images_per_identity_per_camera < 1 || cfg.latent_dim < 1 ||
        cfg.input_dim < 1) {
        r.complain("data counts must all be positive");
    }
    if (cfg.noise_sigma < 0.0) r.complain("data.noise_sigma: must be non-negative");
    if (cfg.domains < 1) r.complain("data.domains: must be positive");
    cfg.resolved = r.finish();
    return cfg;
}

PretrainCmdConfig resolve_pretrain_config(const ConfigMap& file, const ConfigOverrides& overrides) {
    Resolver r(file, overrides,
               {"seed", "out", "pretrain.seed", "pretrain.dataset", "pretrain.epochs", "pretrain.hidden",
                "pretrain.feature_dim", "pretrain.batch_size", "pretrain.learning_rate", "pretrain.checkpoint"});
    PretrainCmdConfig cfg;
    const std::uint64_t master = r.master_seed();
    cfg.out_dir = r.out_dir();
    r.raw("seed", format_u64(master));
    r.raw("out", cfg.out_dir);
    cfg.train.seed = r.getu("pretrain.seed", Rng::derive(master, "pretrain"));
    cfg.dataset = r.gets("pretrain.dataset", join_path(cfg.out_dir, "source.csv"));
    cfg.train.epochs = r.geti("pretrain.epochs", 15);
    cfg.train.hidden_dims = r.get_int_list("pretrain.hidden", "64");
    cfg.train.feature_dim = r.geti("pretrain.feature_dim", 16);
    cfg.train.batch_size = r.geti("pretrain.batch_size", 64);
    cfg.train.learning_rate = r.getd("pretrain.learning_rate", 0.003);
    cfg.checkpoint_out = r.gets("pretrain.checkpoint", join_path(cfg.out_dir, "pretrained.ckpt"));
    try {
        cfg.train.validate();
    } catch (const ParameterError& e) {
        r.complain(e.what());
    }
    cfg.resolved = r.finish();
    return cfg;
}

AdaptCmdConfig resolve_adapt_config(const ConfigMap& file, const ConfigOverrides& overrides) {
    Resolver r(file, overrides,
               {"seed",
                "out",
                "adapt.seed",
                "adapt.dataset",
                "adapt.checkpoints",
                "adapt.epochs",
                "adapt.iters_per_epoch",
                "adapt.batch_identities",
                "adapt.images_per_identity",
                "adapt.cluster_count",
                "adapt.knn_k",
                "adapt.beta",
                "adapt.lambda_gcc",
                "adapt.ema_decay",
                "adapt.learning_rate",
                "adapt.lr_decay_factor",
                "adapt.lr_decay_epoch",
                "adapt.aug_noise_sigma",
                "adapt.aug_drop_prob",
                "adapt.kmeans_iters"});
    AdaptCmdConfig cfg;
    const std::uint64_t master = r.master_seed();
    cfg.out_dir = r.out_dir();
    r.raw("seed", format_u64(master));
    r.raw("out", cfg.out_dir);
    cfg.train.seed = r.getu("adapt.seed", Rng::derive(master, "adapt"));
    cfg.dataset = r.gets("adapt.dataset", join_path(cfg.out_dir, "target.csv"));
    cfg.checkpoints = r.get_list("adapt.checkpoints", join_path(cfg.out_dir, "pretrained.ckpt"));
    cfg.train.epochs = r.geti("adapt.epochs", 20);
    cfg.train.iters_per_epoch = r.geti("adapt.iters_per_epoch", 50);
    cfg.train.batch_identities = r.geti("adapt.batch_identities", 16);
    cfg.train.images_per_identity = r.geti("adapt.images_per_identity", 4);
    cfg.train.cluster_count = r.geti("adapt.cluster_count", 100);
    cfg.train.knn_k = r.geti("adapt.knn_k", 12);
    cfg.train.beta = r.getd("adapt.beta", 0.05);
    cfg.train.lambda_gcc = r.getd("adapt.lambda_gcc", 0.6);
    cfg.train.ema_decay = r.getd("adapt.ema_decay", 0.999);
    cfg.train.learning_rate = r.getd("adapt.learning_rate", 0.00035);
    cfg.train.lr_decay_factor = r.getd("adapt.lr_decay_factor", 0.1);
    cfg.train.lr_decay_epoch = r.geti("adapt.lr_decay_epoch", 20);
    cfg.train.aug_noise_sigma = r.getd("adapt.aug_noise_sigma", 0.05);
    cfg.train.aug_drop_prob = r.getd("adapt.aug_drop_prob", 0.1);
    cfg.train.kmeans_iters = r.geti("adapt.kmeans_iters", 100);
    try {
        cfg.train.validate();
    } catch (const ParameterError& e) {
        r.complain(e.what());
    }
    cfg.resolved = r.finish();
    return cfg;
}

EvalCmdConfig resolve_eval_config(const ConfigMap& file, const ConfigOverrides& overrides) {
    Resolver r(file, overrides, {"seed", "out", "eval.dataset", "eval.checkpoint"});
    EvalCmdConfig cfg;
    const std::uint64_t master = r.master_seed();
    cfg.out_dir = r.out_dir();
    r.raw("seed", format_u64(master));
    r.raw("out", cfg.out_dir);
    cfg.dataset = r.gets("eval.dataset", join_path(cfg.out_dir, "target.csv"));
    cfg.checkpoint = r.gets("eval.checkpoint", join_path(cfg.out_dir, "adapted-0.ckpt"));
    cfg.resolved = r.finish();
    return cfg;
}

}  // namespace gcmt
