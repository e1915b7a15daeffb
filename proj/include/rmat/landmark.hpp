#pragma once

#include <vector>

#include "rmat/tensor.hpp"

namespace rmat {

// One landmark image patch: [3,S,S] pixels in [0,1], the center position of
// the patch in its source frame, and the ground-truth landmark identity.
struct Patch {
  Tensor pixels;
  double center_u = 0.0;
  double center_v = 0.0;
  int identity = -1;
  int frame_id = -1;
};

struct Frame {
  int frame_id = -1;
  std::vector<Patch> patches;
};

// The anchor patch plus its K nearest in-frame neighbors (by center
// distance) with complete-graph edges. With include_anchor=false the anchor
// is left out of the vertex set (the alternative reading of the paper's
// neighborhood definition); either way neighbors are ranked by distance with
// ties broken by ascending patch index.
struct NeighborhoodGraph {
  std::vector<int> vertices;  // patch indices into the frame
  int anchor_pos = -1;        // position of the anchor within `vertices`, -1 if excluded
  int k = 0;
};

NeighborhoodGraph build_neighborhood(const Frame& frame, int anchor, int k,
                                     bool include_anchor = true);

// Complete-graph 0/1 adjacency over the graph's vertices.
Tensor adjacency(const NeighborhoodGraph& graph, bool self_loops);

}  // namespace rmat
