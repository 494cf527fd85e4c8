#ifndef LGRN_CONFIG_HPP
#define LGRN_CONFIG_HPP

#include <string>

#include "lgrn/tensor.hpp"

namespace lgrn {

enum class WeightingMode { gcn, fc, none };
enum class LossMode { bce, combined };

// Every field maps 1:1 to a key in the flat key=value config file.
// Unknown keys in the file are a hard error.
struct RunConfig {
    // architecture
    int num_levels = 4;        // L
    int aligned_channels = 32; // c_0
    int gcn_depth = 2;         // M
    int decode_iterations = 2; // T
    int input_size = 64;       // H = W of training frames

    // loss
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
    LossMode loss_mode = LossMode::combined;

    // optimizer
    double learning_rate = 0.005;
    double momentum = 0.925;
    double weight_decay = 0.0005;
    double poly_power = 0.9;
    int epochs = 100;
    int batch_size = 4;
    bool augment_flip = true;

    // ablation switches
    bool enable_lrm = true;
    bool enable_grm = true;
    bool enable_feedback = true;
    WeightingMode weighting_mode = WeightingMode::gcn;

    // synthetic dataset generation (consumed by gen-data)
    int data_sequences = 12;
    int data_frames = 6;
    int data_resolution = 64;
    double data_flow_range = 8.0;
    int data_distractors = 2;

    long seed = 1;

    void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string config_to_text(const RunConfig& cfg);

std::string to_string(WeightingMode m);
std::string to_string(LossMode m);

} // namespace lgrn

#endif
