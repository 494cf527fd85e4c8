#ifndef LGRN_SYNTH_HPP
#define LGRN_SYNTH_HPP

#include <utility>

#include "lgrn/config.hpp"
#include "lgrn/datamodel.hpp"

namespace lgrn {

enum class ShapeKind { disc, rectangle, triangle };
enum class BackgroundKind { flat, gradient, noise };

// One synthetic sequence: a single shape translating over a static scene.
// trajectory[t] is the integer displacement applied between frame t and t+1;
// flow of frame t encodes trajectory[t].
struct SequenceSpec {
    std::string sequence_id;
    int num_frames = 2;
    int height = 64, width = 64;
    ShapeKind shape_kind = ShapeKind::disc;
    int shape_size = 8;       // radius / half extent
    int start_x = 0, start_y = 0;
    std::vector<std::pair<int, int>> trajectory; // (dx, dy) per frame
    BackgroundKind background = BackgroundKind::flat;
    int distractor_count = 0;
    double flow_range = 8.0; // R: max |displacement| the flow encoding covers
    long seed = 0;
};

struct DatasetManifest {
    std::string dataset_root;
    struct Entry {
        std::string sequence_id;
        int num_frames;
        int height, width;
    };
    std::vector<Entry> sequences;
    double flow_range = 8.0;
    int format_version = 1;
};

constexpr int kDatasetFormatVersion = 1;

// Deterministic: identical spec (including seed) yields bit-identical samples.
std::vector<VideoSample> generate_sequence(const SequenceSpec& spec);

// Flow encoding: channel 0 = (dx+R)/(2R), channel 1 = (dy+R)/(2R) inside the
// mask (0.5 outside); channel 2 = |d|/(R*sqrt(2)) inside (0 outside). Values
// quantized to the 16-bit grid so the on-disk round trip is exact.
Tensor render_flow(const Tensor& mask, std::pair<int, int> displacement, double flow_range);

// Inverse of render_flow inside the mask (integer displacements round-trip).
std::pair<int, int> decode_flow(const Tensor& flow, const Tensor& mask, double flow_range);

DatasetManifest write_dataset(const std::vector<VideoSample>& samples, const std::string& root,
                              double flow_range);
std::vector<VideoSample> load_dataset(const std::string& root);
DatasetManifest read_manifest(const std::string& root);

// Random dataset per the generation keys of cfg; returns written manifest.
DatasetManifest generate_dataset(const RunConfig& cfg, const std::string& root, long seed);

// 80/20 split by sequence-id hash; stable across runs and platforms.
bool is_holdout_sequence(const std::string& sequence_id);

} // namespace lgrn

#endif
