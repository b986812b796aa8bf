#include "gcmt/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gcmt/errors.hpp"

namespace gcmt {

namespace {

const char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= bytes.size()) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
        i += 3;
    }
    const std::size_t rem = bytes.size() - i;
    if (rem == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rem == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) {
        throw CheckpointError(CheckpointError::Kind::BadBase64, "base64 payload length not a multiple of 4");
    }
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) {
                    throw CheckpointError(CheckpointError::Kind::BadBase64, "misplaced base64 padding");
                }
                vals[j] = 0;
                ++pad;
            } else {
                vals[j] = b64_value(c);
                if (vals[j] < 0 || pad > 0) {
                    throw CheckpointError(CheckpointError::Kind::BadBase64, "invalid base64 character");
                }
            }
        }
        const std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back((v >> 16) & 0xFF);
        if (pad < 2) out.push_back((v >> 8) & 0xFF);
        if (pad < 1) out.push_back(v & 0xFF);
    }
    return out;
}

std::uint64_t fnv1a64(std::uint64_t h, const std::vector<std::uint8_t>& bytes) {
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;

std::vector<std::uint8_t> float_bytes_le(const Matrix& m) {
    std::vector<std::uint8_t> bytes(m.size() * 4);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const float f = static_cast<float>(m.data()[i]);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        bytes[4 * i + 0] = u & 0xFF;
        bytes[4 * i + 1] = (u >> 8) & 0xFF;
        bytes[4 * i + 2] = (u >> 16) & 0xFF;
        bytes[4 * i + 3] = (u >> 24) & 0xFF;
    }
    return bytes;
}

void floats_from_bytes_le(const std::vector<std::uint8_t>& bytes, Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::uint32_t u = bytes[4 * i] | (bytes[4 * i + 1] << 8) | (bytes[4 * i + 2] << 16) |
                          (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        float f;
        std::memcpy(&f, &u, 4);
        m.data()[i] = static_cast<double>(f);
    }
}

void write_param(std::ostream& os, std::uint64_t& checksum, const std::string& name, const Matrix& m) {
    const auto bytes = float_bytes_le(m);
    checksum = fnv1a64(checksum, bytes);
    os << "param " << name << " " << m.size() << "\n" << base64_encode(bytes) << "\n";
}

struct LineReader {
    std::istringstream in;
    std::string line;

    explicit LineReader(std::string text) : in(std::move(text)) {}

    std::string next() {
        if (!std::getline(in, line)) {
            throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated: unexpected end of file");
        }
        return line;
    }
};

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream iss(s);
    std::vector<std::string> parts;
    std::string tok;
    while (iss >> tok) parts.push_back(tok);
    return parts;
}

long to_long(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw CheckpointError(CheckpointError::Kind::Malformed, std::string("bad integer for ") + what + ": " + s);
    }
}

Matrix read_param(LineReader& reader, std::uint64_t& checksum, const std::string& expect_name, int rows, int cols) {
    const auto parts = split_ws(reader.next());
    if (parts.size() != 3 || parts[0] != "param") {
        throw CheckpointError(CheckpointError::Kind::Malformed, "expected param line, got: " + reader.line);
    }
    if (parts[1] != expect_name) {
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              "expected parameter " + expect_name + ", got " + parts[1]);
    }
    const long declared = to_long(parts[2], "param length");
    const long expected = static_cast<long>(rows) * cols;
    if (declared != expected) {
        throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                              "parameter " + expect_name + " declares " + std::to_string(declared) +
                                  " values but the manifest implies " + std::to_string(expected));
    }
    const auto bytes = base64_decode(reader.next());
    if (bytes.size() != static_cast<std::size_t>(declared) * 4) {
        throw CheckpointError(CheckpointError::Kind::LengthMismatch,
                              "parameter " + expect_name + " declares " + std::to_string(declared) + " values but " +
                                  std::to_string(bytes.size() / 4) + " were stored");
    }
    checksum = fnv1a64(checksum, bytes);
    Matrix m(rows, cols);
    floats_from_bytes_le(bytes, m);
    return m;
}

}  // namespace

static void save_models(const std::vector<std::pair<std::string, const Model*>>& models, const std::string& path) {
    std::ostringstream os;
    os << kCheckpointMagic << "\n";
    os << "version " << kCheckpointVersion << "\n";
    os << "models " << models.size() << "\n";
    std::uint64_t checksum = kFnvOffset;
    for (const auto& [name, model] : models) {
        os << "model " << name << "\n";
        os << "encoder_layers " << model->encoder.layers.size() << "\n";
        for (std::size_t l = 0; l < model->encoder.layers.size(); ++l) {
            const auto& w = model->encoder.layers[l].weight;
            os << "layer " << l << " " << w.rows() << " " << w.cols() << "\n";
        }
        os << "head " << model->head.weight.rows() << " " << model->head.weight.cols() << "\n";
        for (std::size_t l = 0; l < model->encoder.layers.size(); ++l) {
            write_param(os, checksum, "encoder.l" + std::to_string(l) + ".weight", model->encoder.layers[l].weight);
            write_param(os, checksum, "encoder.l" + std::to_string(l) + ".bias", model->encoder.layers[l].bias);
        }
        write_param(os, checksum, "head.weight", model->head.weight);
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(checksum));
    os << "checksum " << hex << "\n";

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint path for writing: " + path);
    f << os.str();
    if (!f) throw Error("failed writing checkpoint: " + path);
}

void save_checkpoint(const Model& model, const std::string& path) {
    save_models({{"model", &model}}, path);
}

void save_checkpoint(const NetworkPair& pair, const std::string& path) {
    save_models({{"student", &pair.student}, {"teacher", &pair.teacher}}, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    LineReader reader(buf.str());

    if (reader.next() != kCheckpointMagic) {
        throw CheckpointError(CheckpointError::Kind::BadMagic, "not a checkpoint file (bad magic string)");
    }
    {
        const auto parts = split_ws(reader.next());
        if (parts.size() != 2 || parts[0] != "version") {
            throw CheckpointError(CheckpointError::Kind::Malformed, "expected version line");
        }
        const long version = to_long(parts[1], "version");
        if (version != kCheckpointVersion) {
            throw CheckpointError(CheckpointError::Kind::BadVersion,
                                  "unsupported checkpoint version " + std::to_string(version));
        }
    }
    long model_count = 0;
    {
        const auto parts = split_ws(reader.next());
        if (parts.size() != 2 || parts[0] != "models") {
            throw CheckpointError(CheckpointError::Kind::Malformed, "expected models line");
        }
        model_count = to_long(parts[1], "model count");
        if (model_count < 1) {
            throw CheckpointError(CheckpointError::Kind::Malformed, "checkpoint declares no models");
        }
    }

    Checkpoint ckpt;
    std::uint64_t checksum = kFnvOffset;
    for (long mi = 0; mi < model_count; ++mi) {
        auto parts = split_ws(reader.next());
        if (parts.size() != 2 || parts[0] != "model") {
            throw CheckpointError(CheckpointError::Kind::Malformed, "expected model line");
        }
        const std::string name = parts[1];

        parts = split_ws(reader.next());
        if (parts.size() != 2 || parts[0] != "encoder_layers") {
            throw CheckpointError(CheckpointError::Kind::Malformed, "expected encoder_layers line");
        }
        const long layer_count = to_long(parts[1], "layer count");
        if (layer_count < 1) {
            throw CheckpointError(CheckpointError::Kind::Malformed, "model declares no encoder layers");
        }

        std::vector<std::pair<int, int>> layer_dims;
        for (long l = 0; l < layer_count; ++l) {
            parts = split_ws(reader.next());
            if (parts.size() != 4 || parts[0] != "layer" || to_long(parts[1], "layer index") != l) {
                throw CheckpointError(CheckpointError::Kind::Malformed, "bad layer manifest line: " + reader.line);
            }
            const long rows = to_long(parts[2], "layer rows");
            const long cols = to_long(parts[3], "layer cols");
            if (rows < 1 || cols < 1) {
                throw CheckpointError(CheckpointError::Kind::ShapeMismatch, "non-positive layer dimension");
            }
            if (!layer_dims.empty() && layer_dims.back().second != rows) {
                throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                      "layer " + std::to_string(l) + " does not chain from the previous layer");
            }
            layer_dims.emplace_back(static_cast<int>(rows), static_cast<int>(cols));
        }

        parts = split_ws(reader.next());
        if (parts.size() != 3 || parts[0] != "head") {
            throw CheckpointError(CheckpointError::Kind::Malformed, "expected head line");
        }
        const long head_rows = to_long(parts[1], "head rows");
        const long head_cols = to_long(parts[2], "head cols");
        if (head_rows != layer_dims.back().second || head_cols < 1) {
            throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                  "head shape does not match the encoder feature width");
        }

        Model model;
        for (long l = 0; l < layer_count; ++l) {
            DenseLayer layer;
            layer.weight = read_param(reader, checksum, "encoder.l" + std::to_string(l) + ".weight",
                                      layer_dims[l].first, layer_dims[l].second);
            layer.bias = read_param(reader, checksum, "encoder.l" + std::to_string(l) + ".bias", 1,
                                    layer_dims[l].second);
            model.encoder.layers.push_back(std::move(layer));
        }
        model.head.weight =
            read_param(reader, checksum, "head.weight", static_cast<int>(head_rows), static_cast<int>(head_cols));
        ckpt.models.emplace_back(name, std::move(model));
    }

    const auto parts = split_ws(reader.next());
    if (parts.size() != 2 || parts[0] != "checksum") {
        throw CheckpointError(CheckpointError::Kind::Malformed, "expected checksum line");
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(checksum));
    if (parts[1] != hex) {
        throw CheckpointError(CheckpointError::Kind::BadChecksum,
                              "checksum mismatch: stored " + parts[1] + ", computed " + hex);
    }
    return ckpt;
}

Model single_model(const Checkpoint& ckpt) {
    if (ckpt.models.size() != 1) {
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              "expected a single-model checkpoint, found " + std::to_string(ckpt.models.size()));
    }
    return ckpt.models[0].second;
}

const Model& named_model(const Checkpoint& ckpt, const std::string& name) {
    for (const auto& [n, m] : ckpt.models) {
        if (n == name) return m;
    }
    throw CheckpointError(CheckpointError::Kind::Malformed, "checkpoint has no model named " + name);
}

NetworkPair load_pair_checkpoint(const std::string& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    NetworkPair pair;
    pair.student = named_model(ckpt, "student");
    pair.teacher = named_model(ckpt, "teacher");
    return pair;
}

}  // namespace gcmt
