#include "gcmt/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gcmt/errors.hpp"
#include "gcmt/numeric.hpp"
#include "gcmt/rng.hpp"

namespace gcmt {

namespace {

// Relative strength of the knobs that shape the synthetic world. The gap
// scale controls how far apart two domains from one master seed sit; camera
// scales control intra-identity variation across views.
constexpr double kDomainGapScale = 0.6;
constexpr double kDomainOffsetScale = 0.15;
constexpr double kCameraMixScale = 0.12;
constexpr double kCameraOffsetScale = 0.06;

Matrix gaussian_matrix(int rows, int cols, Rng& rng, double scale) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.gaussian() * scale;
    }
    return m;
}

}  // namespace

std::string split_to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Query: return "query";
        case Split::Gallery: return "gallery";
    }
    throw StateError("unreachable split value");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "query") return Split::Query;
    if (s == "gallery") return Split::Gallery;
    throw ParseError("unknown split tag: " + s);
}

Matrix apply_map(const AffineMap& map, const Matrix& rows) {
    Matrix out = matmul(rows, map.linear);
    if (map.offset.cols() != out.cols() || map.offset.rows() != 1) {
        throw DimensionError("affine offset is " + map.offset.shape_str() + ", expected 1x" +
                             std::to_string(out.cols()));
    }
    for (int i = 0; i < out.rows(); ++i) {
        for (int j = 0; j < out.cols(); ++j) {
            out(i, j) += map.offset(0, j);
        }
    }
    return out;
}

DomainSpec make_domain_spec(int domain_id, int identity_count, int cameras, int images_per_identity_per_camera,
                            int latent_dim, int input_dim, double noise_sigma, std::uint64_t master_seed) {
    if (identity_count < 1 || cameras < 1 || images_per_identity_per_camera < 1 || latent_dim < 1 || input_dim < 1) {
        throw ParameterError("domain counts must all be positive");
    }
    if (noise_sigma < 0.0) {
        throw ParameterError("noise sigma must be non-negative, got " + std::to_string(noise_sigma));
    }

    DomainSpec spec;
    spec.domain_id = domain_id;
    spec.identity_count = identity_count;
    spec.cameras_per_domain = cameras;
    spec.images_per_identity_per_camera = images_per_identity_per_camera;
    spec.latent_dim = latent_dim;
    spec.input_dim = input_dim;
    spec.noise_sigma = noise_sigma;

    const std::string tag = "domain-" + std::to_string(domain_id);
    spec.seed = Rng::derive(master_seed, tag + "-samples");
    spec.identity_seed = Rng::derive(master_seed, tag + "-latents");

    // Shared base plus a domain-specific part; rescaled so output magnitude
    // does not depend on the gap setting.
    Rng base_rng(Rng::derive(master_seed, "domain-base"));
    Rng gap_rng(Rng::derive(master_seed, tag + "-map"));
    const double norm = 1.0 / (std::sqrt(static_cast<double>(latent_dim)) *
                               std::sqrt(1.0 + kDomainGapScale * kDomainGapScale));
    Matrix base = gaussian_matrix(latent_dim, input_dim, base_rng, norm);
    Matrix specific = gaussian_matrix(latent_dim, input_dim, gap_rng, norm * kDomainGapScale);
    spec.domain_transform.linear = add(base, specific);
    spec.domain_transform.offset = gaussian_matrix(1, input_dim, gap_rng, kDomainOffsetScale);

    // Each camera perturbs the identity anchor with a near-identity mixing map
    // plus a fixed offset, so views of one identity stay correlated but shift.
    const double mix = kCameraMixScale / std::sqrt(static_cast<double>(input_dim));
    for (int c = 0; c < cameras; ++c) {
        Rng cam_rng(Rng::derive(master_seed, tag + "-camera-" + std::to_string(c)));
        AffineMap cam;
        cam.linear = gaussian_matrix(input_dim, input_dim, cam_rng, mix);
        for (int i = 0; i < input_dim; ++i) {
            cam.linear(i, i) += 1.0;
        }
        cam.offset = gaussian_matrix(1, input_dim, cam_rng, kCameraOffsetScale);
        spec.camera_transforms.push_back(std::move(cam));
    }
    return spec;
}

SyntheticDataset generate_domain(const DomainSpec& spec) {
    if (spec.identity_count < 1 || spec.cameras_per_domain < 1 || spec.images_per_identity_per_camera < 1 ||
        spec.latent_dim < 1 || spec.input_dim < 1) {
        throw ParameterError("domain counts must all be positive");
    }
    if (spec.noise_sigma < 0.0) {
        throw ParameterError("noise sigma must be non-negative");
    }
    if (static_cast<int>(spec.camera_transforms.size()) != spec.cameras_per_domain) {
        throw DimensionError("spec has " + std::to_string(spec.camera_transforms.size()) + " camera transforms for " +
                             std::to_string(spec.cameras_per_domain) + " cameras");
    }
    if (spec.domain_transform.linear.rows() != spec.latent_dim ||
        spec.domain_transform.linear.cols() != spec.input_dim) {
        throw DimensionError("domain transform is " + spec.domain_transform.linear.shape_str() + ", expected " +
                             std::to_string(spec.latent_dim) + "x" + std::to_string(spec.input_dim));
    }
    if (!spec.domain_transform.linear.all_finite() || !spec.domain_transform.offset.all_finite()) {
        throw ValidationError("domain transform has non-finite entries");
    }
    for (const auto& cam : spec.camera_transforms) {
        if (cam.linear.rows() != spec.input_dim || cam.linear.cols() != spec.input_dim) {
            throw DimensionError("camera transform is " + cam.linear.shape_str() + ", expected square of size " +
                                 std::to_string(spec.input_dim));
        }
        if (!cam.linear.all_finite() || !cam.offset.all_finite()) {
            throw ValidationError("camera transform has non-finite entries");
        }
    }

    // Identity latents drawn on the unit sphere.
    Rng latent_rng(spec.identity_seed);
    Matrix latents = gaussian_matrix(spec.identity_count, spec.latent_dim, latent_rng, 1.0);
    latents = l2_normalize_rows(latents);

    // One camera-transformed anchor per (identity, camera); each image is the
    // anchor plus fresh noise.
    std::vector<Matrix> per_camera;
    const Matrix mapped = apply_map(spec.domain_transform, latents);
    per_camera.reserve(spec.cameras_per_domain);
    for (int c = 0; c < spec.cameras_per_domain; ++c) {
        per_camera.push_back(apply_map(spec.camera_transforms[c], mapped));
    }

    SyntheticDataset ds;
    ds.input_dim = spec.input_dim;
    Rng noise_rng(spec.seed);
    const bool carve = spec.hold_out_eval && spec.images_per_identity_per_camera >= 2;
    for (int id = 0; id < spec.identity_count; ++id) {
        for (int c = 0; c < spec.cameras_per_domain; ++c) {
            for (int img = 0; img < spec.images_per_identity_per_camera; ++img) {
                Sample s;
                s.identity = id;
                s.camera = c;
                s.domain = spec.domain_id;
                if (carve && img == 0) {
                    s.split = Split::Gallery;
                } else if (carve && img == 1) {
                    s.split = Split::Query;
                } else {
                    s.split = Split::Train;
                }
                s.vec.resize(spec.input_dim);
                for (int d = 0; d < spec.input_dim; ++d) {
                    s.vec[d] = per_camera[c](id, d) + noise_rng.gaussian() * spec.noise_sigma;
                }
                ds.samples.push_back(std::move(s));
            }
        }
    }
    return ds;
}

void write_dataset(const SyntheticDataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open dataset path for writing: " + path);
    f << "id,camera,domain,split";
    for (int d = 0; d < ds.input_dim; ++d) {
        f << ",x" << d;
    }
    f << "\n";
    char num[40];
    for (const auto& s : ds.samples) {
        if (static_cast<int>(s.vec.size()) != ds.input_dim) {
            throw DimensionError("sample width " + std::to_string(s.vec.size()) + " does not match dataset width " +
                                 std::to_string(ds.input_dim));
        }
        f << s.identity << "," << s.camera << "," << s.domain << "," << split_to_string(s.split);
        for (double v : s.vec) {
            std::snprintf(num, sizeof(num), ",%.9g", v);
            f << num;
        }
        f << "\n";
    }
    if (!f) throw Error("failed writing dataset: " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

int parse_int_field(const std::string& s, int line_no, const char* what) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " value: " + s);
    }
}

double parse_double_field(const std::string& s, int line_no, int col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad float in column x" + std::to_string(col) + ": " +
                         s);
    }
}

}  // namespace

SyntheticDataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open dataset: " + path);

    std::string line;
    if (!std::getline(f, line)) {
        throw ParseError("line 1: empty dataset file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() < 5 || header[0] != "id" || header[1] != "camera" || header[2] != "domain" ||
        header[3] != "split") {
        throw ParseError("line 1: malformed header, expected id,camera,domain,split,x0,...");
    }
    const int dim = static_cast<int>(header.size()) - 4;
    for (int d = 0; d < dim; ++d) {
        if (header[4 + d] != "x" + std::to_string(d)) {
            throw ParseError("line 1: malformed header, expected column x" + std::to_string(d) + ", got " +
                             header[4 + d]);
        }
    }

    SyntheticDataset ds;
    ds.input_dim = dim;
    int line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != 4 + dim) {
            throw ParseError("line " + std::to_string(line_no) + ": row has " + std::to_string(fields.size()) +
                             " fields, header implies " + std::to_string(4 + dim));
        }
        Sample s;
        s.identity = parse_int_field(fields[0], line_no, "id");
        s.camera = parse_int_field(fields[1], line_no, "camera");
        s.domain = parse_int_field(fields[2], line_no, "domain");
        try {
            s.split = split_from_string(fields[3]);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        s.vec.resize(dim);
        for (int d = 0; d < dim; ++d) {
            s.vec[d] = parse_double_field(fields[4 + d], line_no, d);
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

SplitView gather_split(const SyntheticDataset& ds, Split split) {
    std::vector<const Sample*> picked;
    for (const auto& s : ds.samples) {
        if (s.split == split) picked.push_back(&s);
    }
    SplitView view;
    view.inputs = Matrix(static_cast<int>(picked.size()), ds.input_dim);
    for (std::size_t i = 0; i < picked.size(); ++i) {
        for (int d = 0; d < ds.input_dim; ++d) {
            view.inputs(static_cast<int>(i), d) = picked[i]->vec[d];
        }
        view.identities.push_back(picked[i]->identity);
        view.cameras.push_back(picked[i]->camera);
    }
    return view;
}

SyntheticDataset merge_datasets(const std::vector<SyntheticDataset>& parts) {
    if (parts.empty()) {
        throw ParameterError("nothing to merge");
    }
    SyntheticDataset out;
    out.input_dim = parts[0].input_dim;
    for (const auto& p : parts) {
        if (p.input_dim != out.input_dim) {
            throw DimensionError("dataset widths differ: " + std::to_string(out.input_dim) + " vs " +
                                 std::to_string(p.input_dim));
        }
        out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
    }
    return out;
}

}  // namespace gcmt
