#ifndef LGRN_TRAIN_HPP
#define LGRN_TRAIN_HPP

#include <functional>
#include <iosfwd>

#include "lgrn/losses.hpp"
#include "lgrn/metrics.hpp"
#include "lgrn/net.hpp"
#include "lgrn/synth.hpp"

namespace lgrn {

constexpr int kCheckpointFormatVersion = 1;

// Serialized model state: parameter values plus optimizer momentum, the
// config the architecture was built from, and enough bookkeeping to resume.
struct Checkpoint {
    int format_version = kCheckpointFormatVersion;
    RunConfig config;
    long epoch = 0;
    long seed = 0;
    struct Blob {
        std::string name;
        Tensor value;
        Tensor momentum;
    };
    std::vector<Blob> blobs;

    static Checkpoint capture(const RunConfig& cfg, const std::vector<Param*>& params,
                              long epoch, long seed);
    // Overwrites the net's parameters; throws architecture_mismatch if the
    // blob list does not line up with the net's parameter list.
    void apply_to(LgrnNet& net) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

// SGD with momentum, weight decay, and the poly learning-rate schedule
// lr(t) = lr0 * (1 - t/t_max)^power stepped once per batch.
struct SgdOptimizer {
    double lr0 = 0.005;
    double momentum = 0.925;
    double weight_decay = 0.0005;
    double poly_power = 0.9;
    long total_steps = 1;
    long step_count = 0;

    double current_lr() const;
    void step(const std::vector<Param*>& params);
};

enum class Split { all, train, holdout };

std::vector<VideoSample> filter_split(const std::vector<VideoSample>& samples, Split split);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> epoch_losses; // mean training loss per epoch
};

// Trains on the requested split of the dataset under dataset_root.
// Deterministic for a fixed config (batch gradients are accumulated in
// sample order even when computed on worker threads). log, if given,
// receives one key=value line per epoch.
TrainResult train(const RunConfig& cfg, const std::string& dataset_root,
                  Split split = Split::all, std::ostream* log = nullptr);

// Runs the checkpointed model over the split and computes the metric
// report; writes CSV artifacts when report_dir is nonempty.
MetricsReport evaluate(const Checkpoint& ckpt, const std::string& dataset_root,
                       Split split = Split::all, const std::string& report_dir = "");

// Same reporting path with an injectable predictor (oracle tests).
using Predictor = std::function<Tensor(const VideoSample&)>;
MetricsReport evaluate_with(const Predictor& predict, const std::vector<VideoSample>& samples,
                            const std::string& report_dir = "");

struct AblationRow {
    std::string label;
    LossMode loss_mode;
    bool enable_lrm, enable_grm, enable_feedback;
    WeightingMode weighting_mode;
    double f_beta_max = 0.0, s_measure = 0.0, mae = 0.0;
};

// Module ladder plus the weighting variants, all trained on the train split
// and scored on the holdout split with the base config's seed.
std::vector<AblationRow> ablate(const RunConfig& base, const std::string& dataset_root,
                                const std::string& report_dir = "", std::ostream* log = nullptr);
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

// Per-component wall time of the forward pass, averaged over n_frames.
struct ProfileReport {
    long frames = 0;
    std::map<std::string, double> seconds_per_frame;
    std::map<std::string, double> share; // sums to 1 over the five components
};

ProfileReport profile(const Checkpoint& ckpt, int n_frames);

} // namespace lgrn

#endif
