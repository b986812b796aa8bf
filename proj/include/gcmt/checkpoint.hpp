#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gcmt/model.hpp"

namespace gcmt {

// Versioned on-disk container for one or more named models. Parameters are
// stored as base64-encoded little-endian 32-bit floats in manifest order with
// a trailing FNV-1a checksum of the decoded bytes.
struct Checkpoint {
    std::vector<std::pair<std::string, Model>> models;
};

inline constexpr char kCheckpointMagic[] = "GCMT-CKPT";
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::string& path);
void save_checkpoint(const NetworkPair& pair, const std::string& path);

Checkpoint load_checkpoint(const std::string& path);

// The single model of a one-model checkpoint, or the named model of a pair
// checkpoint ("student"/"teacher").
Model single_model(const Checkpoint& ckpt);
const Model& named_model(const Checkpoint& ckpt, const std::string& name);

NetworkPair load_pair_checkpoint(const std::string& path);

}  // namespace gcmt
