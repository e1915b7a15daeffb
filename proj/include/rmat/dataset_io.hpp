#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rmat/landmark.hpp"
#include "rmat/synth.hpp"

namespace rmat {

// In-memory dataset: frames (frame_id equals its index), labeled pairs and
// the generating config snapshot.
struct Dataset {
  std::vector<Frame> frames;
  std::vector<PairRef> pairs;
  nlohmann::json config = nlohmann::json::object();
};

// On-disk layout: <dir>/manifest.json plus <dir>/patches.bin. The binary
// file starts with magic "RMAT" and a u16 version, followed by per-patch
// records (little-endian u32 frame_id, u32 identity, 2x f32 center, u16 S,
// then 3*S*S f32 pixels). The manifest carries frame records with the byte
// offset of every patch, the pair list, and the config snapshot. Writing is
// byte-deterministic, so regenerating a dataset reproduces identical files.
void write_dataset(const std::string& dir, const Dataset& dataset);
Dataset read_dataset(const std::string& dir);

}  // namespace rmat
