#include "lgrn/train.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

namespace lgrn {

// ---------------------------------------------------------------- checkpoint

Checkpoint Checkpoint::capture(const RunConfig& cfg, const std::vector<Param*>& params,
                               long epoch, long seed) {
    Checkpoint c;
    c.config = cfg;
    c.epoch = epoch;
    c.seed = seed;
    for (Param* p : params) c.blobs.push_back({p->name, p->value, p->momentum});
    return c;
}

void Checkpoint::apply_to(LgrnNet& net) const {
    std::vector<Param*> params = net.params();
    if (params.size() != blobs.size())
        throw Error("architecture_mismatch",
                    "checkpoint holds " + std::to_string(blobs.size()) + " parameters, model has " +
                        std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        const Blob& b = blobs[i];
        if (params[i]->name != b.name || !params[i]->value.same_shape(b.value))
            throw Error("architecture_mismatch",
                        "parameter mismatch at '" + b.name + "' vs '" + params[i]->name + "'");
        params[i]->value = b.value;
        params[i]->momentum = b.momentum;
    }
}

namespace {

constexpr char kCkptMagic[8] = {'L', 'G', 'R', 'N', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error("corrupt_checkpoint", "truncated checkpoint");
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    auto n = get<uint64_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw Error("corrupt_checkpoint", "truncated checkpoint");
    return s;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    put<int32_t>(out, t.ndim());
    for (int i = 0; i < t.ndim(); ++i) put<int32_t>(out, t.dim(i));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

Tensor get_tensor(std::istream& in) {
    auto nd = get<int32_t>(in);
    if (nd <= 0 || nd > 8) throw Error("corrupt_checkpoint", "bad tensor rank");
    std::vector<int> shape;
    for (int i = 0; i < nd; ++i) shape.push_back(get<int32_t>(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw Error("corrupt_checkpoint", "truncated tensor payload");
    return t;
}

} // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("missing_file", "cannot write checkpoint " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    put<int32_t>(out, format_version);
    put_string(out, config_to_text(config));
    put<int64_t>(out, epoch);
    put<int64_t>(out, seed);
    put<uint64_t>(out, blobs.size());
    for (const Blob& b : blobs) {
        put_string(out, b.name);
        put_tensor(out, b.value);
        put_tensor(out, b.momentum);
    }
    if (!out) throw Error("missing_file", "short write on checkpoint " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing_file", "cannot read checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw Error("corrupt_checkpoint", "bad magic in " + path);
    Checkpoint c;
    c.format_version = get<int32_t>(in);
    if (c.format_version != kCheckpointFormatVersion)
        throw Error("version_mismatch", "checkpoint format_version " +
                                            std::to_string(c.format_version) + ", expected " +
                                            std::to_string(kCheckpointFormatVersion));
    c.config = parse_config_text(get_string(in));
    c.epoch = get<int64_t>(in);
    c.seed = get<int64_t>(in);
    auto n = get<uint64_t>(in);
    for (uint64_t i = 0; i < n; ++i) {
        Blob b;
        b.name = get_string(in);
        b.value = get_tensor(in);
        b.momentum = get_tensor(in);
        c.blobs.push_back(std::move(b));
    }
    return c;
}

// ----------------------------------------------------------------- optimizer

double SgdOptimizer::current_lr() const {
    double frac = static_cast<double>(step_count) / static_cast<double>(total_steps);
    frac = std::clamp(frac, 0.0, 1.0);
    return lr0 * std::pow(1.0 - frac, poly_power);
}

void SgdOptimizer::step(const std::vector<Param*>& params) {
    double lr = current_lr();
    for (Param* p : params) {
        double* w = p->value.data();
        double* g = p->grad.data();
        double* m = p->momentum.data();
        for (long i = 0; i < p->value.numel(); ++i) {
            double grad = g[i] + weight_decay * w[i];
            m[i] = momentum * m[i] + grad;
            w[i] -= lr * m[i];
        }
        p->zero_grad();
    }
    ++step_count;
}

// ------------------------------------------------------------------ training

std::vector<VideoSample> filter_split(const std::vector<VideoSample>& samples, Split split) {
    if (split == Split::all) return samples;
    std::vector<VideoSample> out;
    for (const auto& s : samples) {
        bool hold = is_holdout_sequence(s.sequence_id);
        if ((split == Split::holdout) == hold) out.push_back(s);
    }
    return out;
}

namespace {

VideoSample flip_horizontal(const VideoSample& s) {
    VideoSample f = s;
    int h = s.mask.dim(0), w = s.mask.dim(1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int xm = w - 1 - x;
            f.mask.at(y, x) = s.mask.at(y, xm);
            for (int c = 0; c < 3; ++c) f.frame.at(c, y, x) = s.frame.at(c, y, xm);
            // Mirroring negates dx: u = (dx+R)/2R maps to 1-u. v and |d| carry over.
            f.flow.at(0, y, x) = 1.0 - s.flow.at(0, y, xm);
            f.flow.at(1, y, x) = s.flow.at(1, y, xm);
            f.flow.at(2, y, x) = s.flow.at(2, y, xm);
        }
    return f;
}

struct SampleGrad {
    Tape tape;
    double loss = 0.0;
    LossValue parts;
};

} // namespace

TrainResult train(const RunConfig& cfg, const std::string& dataset_root, Split split,
                  std::ostream* log) {
    cfg.validate();
    std::vector<VideoSample> samples = filter_split(load_dataset(dataset_root), split);
    if (samples.empty()) throw Error("empty_input", "train: no samples in the requested split");

    Rng rng(static_cast<unsigned long long>(cfg.seed));
    LgrnNet net(cfg, rng);
    std::vector<Param*> params = net.params();
    for (Param* p : params) p->zero_grad();

    long steps_per_epoch =
        (static_cast<long>(samples.size()) + cfg.batch_size - 1) / cfg.batch_size;
    SgdOptimizer opt;
    opt.lr0 = cfg.learning_rate;
    opt.momentum = cfg.momentum;
    opt.weight_decay = cfg.weight_decay;
    opt.poly_power = cfg.poly_power;
    opt.total_steps = steps_per_epoch * cfg.epochs;

    TrainResult result;
    std::vector<size_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        long seen = 0;
        for (size_t b = 0; b < order.size(); b += static_cast<size_t>(cfg.batch_size)) {
            size_t bend = std::min(order.size(), b + static_cast<size_t>(cfg.batch_size));
            std::vector<VideoSample> batch;
            for (size_t i = b; i < bend; ++i) {
                const VideoSample& s = samples[order[i]];
                bool flip = cfg.augment_flip && (rng() & 1ull);
                batch.push_back(flip ? flip_horizontal(s) : s);
            }

            // One tape per sample; gradients are flushed serially in batch
            // order afterwards, so the summation order never depends on
            // thread scheduling.
            std::vector<SampleGrad> grads(batch.size());
            auto worker = [&](size_t i) {
                Tape& t = grads[i].tape;
                std::vector<Var> maps = net.forward(t, batch[i].frame, batch[i].flow);
                Var loss = combined_loss(t, maps, batch[i].mask, cfg, &grads[i].parts);
                grads[i].loss = loss->value[0];
                t.backward(loss, /*flush_params=*/false);
            };
            {
                std::vector<std::thread> pool;
                for (size_t i = 0; i < batch.size(); ++i) pool.emplace_back(worker, i);
                for (auto& th : pool) th.join();
            }
            for (auto& g : grads) g.tape.flush_param_grads();

            double batch_loss = 0.0;
            for (const auto& g : grads) batch_loss += g.loss;
            batch_loss /= static_cast<double>(grads.size());
            if (!std::isfinite(batch_loss)) {
                std::string diag = "non-finite loss at epoch=" + std::to_string(epoch) +
                                   " step=" + std::to_string(opt.step_count) +
                                   " lr=" + std::to_string(opt.current_lr());
                for (const auto& g : grads)
                    diag += " sample_loss=" + std::to_string(g.loss) +
                            " bce=" + std::to_string(g.parts.bce);
                throw Error("non_finite_loss", diag);
            }
            double inv = 1.0 / static_cast<double>(grads.size());
            for (Param* p : params)
                for (long i = 0; i < p->grad.numel(); ++i) p->grad[i] *= inv;
            opt.step(params);
            epoch_loss += batch_loss * static_cast<double>(grads.size());
            seen += static_cast<long>(grads.size());
        }
        epoch_loss /= static_cast<double>(seen);
        result.epoch_losses.push_back(epoch_loss);
        if (log)
            (*log) << "event=epoch epoch=" << epoch << " loss=" << epoch_loss
                   << " lr=" << opt.current_lr() << " samples=" << seen << "\n";
    }

    result.checkpoint = Checkpoint::capture(cfg, params, cfg.epochs, cfg.seed);
    return result;
}

// ---------------------------------------------------------------- evaluation

MetricsReport evaluate_with(const Predictor& predict, const std::vector<VideoSample>& samples,
                            const std::string& report_dir) {
    if (samples.empty()) throw Error("empty_input", "evaluate: no samples");
    std::vector<EvalFrame> frames(samples.size());
    unsigned hw = std::max(1u, std::min(4u, std::thread::hardware_concurrency()));
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= samples.size()) return;
            frames[i] = {samples[i].sequence_id, predict(samples[i]), samples[i].mask};
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < hw; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    MetricsReport rep = compute_report(frames);
    if (!report_dir.empty()) write_report_csv(rep, report_dir);
    return rep;
}

MetricsReport evaluate(const Checkpoint& ckpt, const std::string& dataset_root, Split split,
                       const std::string& report_dir) {
    std::vector<VideoSample> samples = filter_split(load_dataset(dataset_root), split);
    Rng rng(static_cast<unsigned long long>(ckpt.seed));
    LgrnNet net(ckpt.config, rng);
    ckpt.apply_to(net);
    // Forward passes only read the parameters, so frames can run in parallel
    // on tapes of their own.
    Predictor predict = [&net](const VideoSample& s) {
        Tape t;
        std::vector<Var> maps = net.forward(t, s.frame, s.flow);
        return maps.back()->value;
    };
    return evaluate_with(predict, samples, report_dir);
}

// ------------------------------------------------------------------ ablation

std::vector<AblationRow> ablate(const RunConfig& base, const std::string& dataset_root,
                                const std::string& report_dir, std::ostream* log) {
    struct RowSpec {
        const char* label;
        LossMode loss;
        bool lrm, grm, fb;
        WeightingMode wm;
    };
    // The module ladder, then the weighting/feedback variants of the full model.
    const RowSpec specs[] = {
        {"baseline_bce", LossMode::bce, false, false, false, WeightingMode::none},
        {"plus_combined_loss", LossMode::combined, false, false, false, WeightingMode::none},
        {"plus_lrm", LossMode::combined, true, false, true, WeightingMode::gcn},
        {"full_model", LossMode::combined, true, true, true, WeightingMode::gcn},
        {"feedback_only", LossMode::combined, true, true, true, WeightingMode::none},
        {"gcn_no_feedback", LossMode::combined, true, true, false, WeightingMode::gcn},
        {"fc_with_feedback", LossMode::combined, true, true, true, WeightingMode::fc},
    };
    std::vector<AblationRow> rows;
    for (const RowSpec& rs : specs) {
        RunConfig cfg = base;
        cfg.loss_mode = rs.loss;
        cfg.enable_lrm = rs.lrm;
        cfg.enable_grm = rs.grm;
        cfg.enable_feedback = rs.fb;
        cfg.weighting_mode = rs.wm;
        if (log) (*log) << "event=ablation_row label=" << rs.label << " state=train\n";
        TrainResult tr = train(cfg, dataset_root, Split::train, log);
        MetricsReport rep = evaluate(tr.checkpoint, dataset_root, Split::holdout);
        AblationRow row{rs.label, rs.loss, rs.lrm, rs.grm, rs.fb, rs.wm,
                        rep.f_beta_max, rep.s_measure, rep.mae};
        if (log)
            (*log) << "event=ablation_row label=" << rs.label << " f_beta_max=" << row.f_beta_max
                   << " s_measure=" << row.s_measure << " mae=" << row.mae << "\n";
        rows.push_back(row);
    }
    if (!report_dir.empty()) {
        std::filesystem::create_directories(report_dir);
        write_ablation_csv(rows, report_dir + "/ablation.csv");
    }
    return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("missing_file", "cannot write " + path);
    out << "label,loss_mode,enable_lrm,enable_grm,enable_feedback,weighting_mode,"
           "f_beta_max,s_measure,mae\n";
    char buf[128];
    for (const auto& r : rows) {
        out << r.label << ',' << to_string(r.loss_mode) << ',' << (r.enable_lrm ? 1 : 0) << ','
            << (r.enable_grm ? 1 : 0) << ',' << (r.enable_feedback ? 1 : 0) << ','
            << to_string(r.weighting_mode);
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g", r.f_beta_max, r.s_measure, r.mae);
        out << buf << '\n';
    }
}

// ----------------------------------------------------------------- profiling

ProfileReport profile(const Checkpoint& ckpt, int n_frames) {
    if (n_frames <= 0) throw Error("config", "profile: n_frames must be positive");
    Rng rng(static_cast<unsigned long long>(ckpt.seed));
    LgrnNet net(ckpt.config, rng);
    ckpt.apply_to(net);

    // A small synthetic clip is enough; only wall time matters here.
    SequenceSpec spec;
    spec.sequence_id = "profile";
    spec.num_frames = 2;
    spec.height = spec.width = ckpt.config.input_size;
    spec.shape_size = std::max(4, ckpt.config.input_size / 8);
    spec.start_x = spec.width / 2;
    spec.start_y = spec.height / 2;
    spec.trajectory = {{2, 1}, {2, 1}};
    spec.flow_range = ckpt.config.data_flow_range;
    spec.seed = ckpt.seed;
    VideoSample sample = generate_sequence(spec).front();

    Profiler prof;
    for (int i = 0; i < n_frames; ++i) {
        Tape t;
        net.forward(t, sample.frame, sample.flow, &prof);
    }

    const char* components[] = {"backbone", "fusion", "lrm", "grm", "head"};
    ProfileReport rep;
    rep.frames = prof.frames;
    double total = 0.0;
    for (const char* c : components) total += prof.seconds[c];
    for (const char* c : components) {
        rep.seconds_per_frame[c] = prof.seconds[c] / static_cast<double>(n_frames);
        rep.share[c] = total > 0.0 ? prof.seconds[c] / total : 0.0;
    }
    return rep;
}

} // namespace lgrn
