#include "lgrn/datamodel.hpp"

namespace lgrn {

const VideoSample& validate_sample(const VideoSample& s) {
    if (s.frame.ndim() != 3 || s.frame.dim(0) != 3)
        throw Error("dimension_mismatch", "frame must be {3,H,W}");
    if (s.flow.ndim() != 3 || s.flow.dim(0) != 3)
        throw Error("dimension_mismatch", "flow must be {3,H,W}");
    if (s.mask.ndim() != 2)
        throw Error("dimension_mismatch", "mask must be {H,W}");
    int h = s.frame.dim(1), w = s.frame.dim(2);
    if (s.flow.dim(1) != h || s.flow.dim(2) != w)
        throw Error("dimension_mismatch", "flow resolution differs from frame");
    if (s.mask.dim(0) != h || s.mask.dim(1) != w)
        throw Error("dimension_mismatch", "mask resolution differs from frame");
    if (s.frame_index < 0)
        throw Error("dimension_mismatch", "frame_index must be nonnegative");
    if (!s.frame.all_finite() || !s.flow.all_finite())
        throw Error("non_finite_value", "sample contains non-finite values");
    for (long i = 0; i < s.mask.numel(); ++i) {
        double v = s.mask[i];
        if (v != 0.0 && v != 1.0)
            throw Error("non_binary_mask", "mask contains non-binary value");
    }
    return s;
}

void FeaturePyramid::validate() const {
    if (levels.size() < 2)
        throw Error("dimension_mismatch", "pyramid needs at least 2 levels");
    if (stride_per_level.size() != levels.size())
        throw Error("dimension_mismatch", "stride list length differs from level count");
    for (size_t l = 1; l < levels.size(); ++l) {
        if (levels[l].dim(1) >= levels[l - 1].dim(1) ||
            levels[l].dim(2) >= levels[l - 1].dim(2))
            throw Error("dimension_mismatch", "pyramid spatial sizes must strictly decrease");
    }
}

void SaliencyMap::validate() const {
    if (values.ndim() != 2)
        throw Error("dimension_mismatch", "saliency map must be {H,W}");
    for (long i = 0; i < values.numel(); ++i)
        if (!(values[i] >= 0.0 && values[i] <= 1.0))
            throw Error("non_finite_value", "saliency value outside [0,1]");
}

} // namespace lgrn
