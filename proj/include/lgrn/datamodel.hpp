#ifndef LGRN_DATAMODEL_HPP
#define LGRN_DATAMODEL_HPP

#include <string>

#include "lgrn/tensor.hpp"

namespace lgrn {

// One video frame with its optical flow and binary ground truth.
// frame: {3,H,W} in [0,1]; flow: {3,H,W} (u, v, magnitude encoding);
// mask: {H,W} strictly binary.
struct VideoSample {
    Tensor frame;
    Tensor flow;
    Tensor mask;
    std::string sequence_id;
    int frame_index = 0;
};

enum class StreamTag { spatial, temporal, fused, refined };

struct FeaturePyramid {
    std::vector<Tensor> levels;
    StreamTag stream_tag = StreamTag::spatial;
    std::vector<int> stride_per_level;

    void validate() const;
};

enum class MapStage { intermediate, final };

struct SaliencyMap {
    Tensor values; // {H,W}, every value in [0,1]
    MapStage stage = MapStage::final;

    void validate() const;
};

// Returns the sample unchanged if every invariant holds, else throws
// (categories: dimension_mismatch, non_binary_mask, non_finite_value).
const VideoSample& validate_sample(const VideoSample& s);

} // namespace lgrn

#endif
