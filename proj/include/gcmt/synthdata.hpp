#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcmt/matrix.hpp"

namespace gcmt {

enum class Split { Train, Query, Gallery };

std::string split_to_string(Split s);
Split split_from_string(const std::string& s);

struct Sample {
    int identity = 0;
    int camera = 0;
    int domain = 0;
    Split split = Split::Train;
    std::vector<double> vec;
};

struct SyntheticDataset {
    int input_dim = 0;
    std::vector<Sample> samples;
};

// Row-vector affine map: y = x * linear + offset.
struct AffineMap {
    Matrix linear;
    Matrix offset;
};

Matrix apply_map(const AffineMap& map, const Matrix& rows);

// Recipe for one domain. Identity latents come from identity_seed, so two
// specs sharing it describe the same identities seen through different
// transforms; sample noise comes from seed.
struct DomainSpec {
    int domain_id = 0;
    int identity_count = 100;
    int cameras_per_domain = 4;
    int images_per_identity_per_camera = 6;
    int latent_dim = 16;
    int input_dim = 32;
    AffineMap domain_transform;                // latent space -> input space
    std::vector<AffineMap> camera_transforms;  // one per camera, input -> input
    double noise_sigma = 0.08;
    std::uint64_t seed = 0;
    std::uint64_t identity_seed = 0;
    bool hold_out_eval = true;  // carve one gallery and one query image per (identity, camera)
};

// Builds a spec with randomized transforms. Domains made from the same master
// seed share a base mixing map, so the gap between them is partial rather than
// a completely unrelated input space.
DomainSpec make_domain_spec(int domain_id, int identity_count, int cameras, int images_per_identity_per_camera,
                            int latent_dim, int input_dim, double noise_sigma, std::uint64_t master_seed);

SyntheticDataset generate_domain(const DomainSpec& spec);

void write_dataset(const SyntheticDataset& ds, const std::string& path);
SyntheticDataset read_dataset(const std::string& path);

// All samples of one split as a matrix plus aligned identity and camera ids.
struct SplitView {
    Matrix inputs;
    std::vector<int> identities;
    std::vector<int> cameras;
};

SplitView gather_split(const SyntheticDataset& ds, Split split);

// Concatenates datasets with identical input_dim (e.g. several domains).
SyntheticDataset merge_datasets(const std::vector<SyntheticDataset>& parts);

}  // namespace gcmt
