#include "lgrn/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace lgrn {

namespace {

double q8(double v) { return std::round(v * 255.0) / 255.0; }
double q16(double v) { return std::round(v * 65535.0) / 65535.0; }

// Footprint of the shape centered at (cx, cy).
bool inside_shape(ShapeKind kind, int size, int cx, int cy, int x, int y) {
    int dx = x - cx, dy = y - cy;
    switch (kind) {
        case ShapeKind::disc:
            return dx * dx + dy * dy <= size * size;
        case ShapeKind::rectangle:
            return std::abs(dx) <= size && std::abs(dy) <= size;
        case ShapeKind::triangle: {
            // Isoceles triangle with apex up, bounding half-extent = size.
            if (dy < -size || dy > size) return false;
            double half = static_cast<double>(dy + size) / 2.0;
            return std::abs(dx) <= half;
        }
    }
    return false;
}

void check_bounds(const SequenceSpec& spec, int cx, int cy, int frame) {
    if (cx - spec.shape_size < 0 || cx + spec.shape_size >= spec.width ||
        cy - spec.shape_size < 0 || cy + spec.shape_size >= spec.height)
        throw Error("out_of_bounds", "trajectory leaves the frame at t=" +
                                         std::to_string(frame) + " for sequence " +
                                         spec.sequence_id);
}

Tensor render_mask(const SequenceSpec& spec, int cx, int cy) {
    Tensor m({spec.height, spec.width});
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            m.at(y, x) = inside_shape(spec.shape_kind, spec.shape_size, cx, cy, x, y) ? 1.0 : 0.0;
    return m;
}

struct Distractor {
    ShapeKind kind;
    int size, cx, cy;
    double color[3];
};

} // namespace

Tensor render_flow(const Tensor& mask, std::pair<int, int> displacement, double flow_range) {
    auto [dx, dy] = displacement;
    double r = flow_range;
    if (std::abs(dx) > r || std::abs(dy) > r)
        throw Error("range", "displacement exceeds flow range R=" + std::to_string(r));
    int h = mask.dim(0), w = mask.dim(1);
    double u = q16((dx + r) / (2.0 * r));
    double v = q16((dy + r) / (2.0 * r));
    double mag = q16(std::sqrt(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) /
                     (r * std::sqrt(2.0)));
    const double u0 = q16(0.5), v0 = q16(0.5);
    Tensor flow({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool in = mask.at(y, x) > 0.5;
            flow.at(0, y, x) = in ? u : u0;
            flow.at(1, y, x) = in ? v : v0;
            flow.at(2, y, x) = in ? mag : 0.0;
        }
    return flow;
}

std::pair<int, int> decode_flow(const Tensor& flow, const Tensor& mask, double flow_range) {
    for (int y = 0; y < mask.dim(0); ++y)
        for (int x = 0; x < mask.dim(1); ++x)
            if (mask.at(y, x) > 0.5) {
                int dx = static_cast<int>(std::lround(flow.at(0, y, x) * 2.0 * flow_range -
                                                      flow_range));
                int dy = static_cast<int>(std::lround(flow.at(1, y, x) * 2.0 * flow_range -
                                                      flow_range));
                return {dx, dy};
            }
    return {0, 0};
}

std::vector<VideoSample> generate_sequence(const SequenceSpec& spec) {
    if (spec.num_frames < 2)
        throw Error("config", "a sequence needs at least 2 frames");
    if (static_cast<int>(spec.trajectory.size()) < spec.num_frames)
        throw Error("config", "trajectory must have one displacement per frame");

    Rng rng(static_cast<unsigned long long>(spec.seed));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Scene appearance is fixed for the whole sequence.
    double bg_a[3], bg_b[3], obj_color[3];
    for (int c = 0; c < 3; ++c) bg_a[c] = 0.1 + 0.4 * unit(rng);
    for (int c = 0; c < 3; ++c) bg_b[c] = 0.1 + 0.4 * unit(rng);
    for (int c = 0; c < 3; ++c) obj_color[c] = 0.6 + 0.4 * unit(rng);
    std::vector<Distractor> distractors;
    std::uniform_int_distribution<int> kind_d(0, 2);
    for (int i = 0; i < spec.distractor_count; ++i) {
        Distractor d;
        d.kind = static_cast<ShapeKind>(kind_d(rng));
        d.size = 3 + static_cast<int>(unit(rng) * 4.0);
        d.cx = d.size + static_cast<int>(unit(rng) * (spec.width - 2 * d.size - 1));
        d.cy = d.size + static_cast<int>(unit(rng) * (spec.height - 2 * d.size - 1));
        for (int c = 0; c < 3; ++c) d.color[c] = 0.3 + 0.5 * unit(rng);
        distractors.push_back(d);
    }
    // Noise texture is static too (motion is what singles out the object).
    Tensor noise({3, spec.height, spec.width});
    if (spec.background == BackgroundKind::noise)
        for (long i = 0; i < noise.numel(); ++i) noise[i] = 0.15 * unit(rng);

    // Validate the full trajectory before rendering anything.
    {
        int cx = spec.start_x, cy = spec.start_y;
        check_bounds(spec, cx, cy, 0);
        for (int t = 0; t + 1 < spec.num_frames; ++t) {
            cx += spec.trajectory[static_cast<size_t>(t)].first;
            cy += spec.trajectory[static_cast<size_t>(t)].second;
            check_bounds(spec, cx, cy, t + 1);
        }
    }

    std::vector<VideoSample> out;
    int cx = spec.start_x, cy = spec.start_y;
    for (int t = 0; t < spec.num_frames; ++t) {
        VideoSample s;
        s.sequence_id = spec.sequence_id;
        s.frame_index = t;
        s.mask = render_mask(spec, cx, cy);
        s.frame = Tensor({3, spec.height, spec.width});
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                double px[3];
                switch (spec.background) {
                    case BackgroundKind::flat:
                        for (int c = 0; c < 3; ++c) px[c] = bg_a[c];
                        break;
                    case BackgroundKind::gradient: {
                        double a = static_cast<double>(x) / (spec.width - 1);
                        for (int c = 0; c < 3; ++c) px[c] = (1.0 - a) * bg_a[c] + a * bg_b[c];
                        break;
                    }
                    case BackgroundKind::noise:
                        for (int c = 0; c < 3; ++c) px[c] = bg_a[c] + noise.at(c, y, x);
                        break;
                }
                for (const auto& d : distractors)
                    if (inside_shape(d.kind, d.size, d.cx, d.cy, x, y))
                        for (int c = 0; c < 3; ++c) px[c] = d.color[c];
                if (s.mask.at(y, x) > 0.5)
                    for (int c = 0; c < 3; ++c) px[c] = obj_color[c];
                for (int c = 0; c < 3; ++c) s.frame.at(c, y, x) = q8(px[c]);
            }
        s.flow = render_flow(s.mask, spec.trajectory[static_cast<size_t>(t)], spec.flow_range);
        validate_sample(s);
        out.push_back(std::move(s));
        cx += spec.trajectory[static_cast<size_t>(t)].first;
        cy += spec.trajectory[static_cast<size_t>(t)].second;
    }
    return out;
}

namespace {

std::string frame_name(int idx) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d.png", idx);
    return buf;
}

void write_png(const cv::Mat& m, const std::string& path) {
    if (!cv::imwrite(path, m))
        throw Error("missing_file", "cannot write image " + path);
}

cv::Mat read_png(const std::string& path, int expected_type) {
    if (!fs::exists(path)) throw Error("missing_file", "missing file: " + path);
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty() || m.type() != expected_type)
        throw Error("corrupt_image", "cannot decode image " + path);
    return m;
}

} // namespace

DatasetManifest write_dataset(const std::vector<VideoSample>& samples, const std::string& root,
                              double flow_range) {
    DatasetManifest man;
    man.dataset_root = root;
    man.flow_range = flow_range;
    man.format_version = kDatasetFormatVersion;

    std::vector<std::string> order;
    std::map<std::string, int> counts;
    std::map<std::string, std::pair<int, int>> sizes;
    for (const auto& s : samples) {
        validate_sample(s);
        if (!counts.count(s.sequence_id)) order.push_back(s.sequence_id);
        counts[s.sequence_id]++;
        sizes[s.sequence_id] = {s.mask.dim(0), s.mask.dim(1)};

        fs::path seq = fs::path(root) / s.sequence_id;
        fs::create_directories(seq / "frames");
        fs::create_directories(seq / "flow");
        fs::create_directories(seq / "masks");
        int h = s.mask.dim(0), w = s.mask.dim(1);

        cv::Mat frame(h, w, CV_8UC3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                auto& px = frame.at<cv::Vec3b>(y, x);
                // BGR on disk, RGB in memory.
                px[0] = static_cast<uchar>(std::lround(s.frame.at(2, y, x) * 255.0));
                px[1] = static_cast<uchar>(std::lround(s.frame.at(1, y, x) * 255.0));
                px[2] = static_cast<uchar>(std::lround(s.frame.at(0, y, x) * 255.0));
            }
        write_png(frame, (seq / "frames" / frame_name(s.frame_index)).string());

        cv::Mat flow(h, w, CV_16UC3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                auto& px = flow.at<cv::Vec3w>(y, x);
                px[0] = static_cast<ushort>(std::lround(s.flow.at(2, y, x) * 65535.0));
                px[1] = static_cast<ushort>(std::lround(s.flow.at(1, y, x) * 65535.0));
                px[2] = static_cast<ushort>(std::lround(s.flow.at(0, y, x) * 65535.0));
            }
        write_png(flow, (seq / "flow" / frame_name(s.frame_index)).string());

        cv::Mat mask(h, w, CV_8UC1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                mask.at<uchar>(y, x) = s.mask.at(y, x) > 0.5 ? 255 : 0;
        write_png(mask, (seq / "masks" / frame_name(s.frame_index)).string());
    }

    json j;
    j["format_version"] = man.format_version;
    j["flow_range"] = man.flow_range;
    j["sequences"] = json::array();
    for (const auto& id : order) {
        man.sequences.push_back({id, counts[id], sizes[id].first, sizes[id].second});
        j["sequences"].push_back({{"sequence_id", id},
                                  {"num_frames", counts[id]},
                                  {"height", sizes[id].first},
                                  {"width", sizes[id].second}});
    }
    std::ofstream out(fs::path(root) / "manifest.json");
    if (!out) throw Error("missing_file", "cannot write manifest under " + root);
    out << j.dump(2) << "\n";
    return man;
}

DatasetManifest read_manifest(const std::string& root) {
    fs::path mp = fs::path(root) / "manifest.json";
    std::ifstream in(mp);
    if (!in) throw Error("missing_file", "missing file: " + mp.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("corrupt_image", "manifest parse failure: " + std::string(e.what()));
    }
    DatasetManifest man;
    man.dataset_root = root;
    man.format_version = j.at("format_version").get<int>();
    if (man.format_version != kDatasetFormatVersion)
        throw Error("version_mismatch",
                    "dataset format_version " + std::to_string(man.format_version) +
                        ", expected " + std::to_string(kDatasetFormatVersion));
    man.flow_range = j.at("flow_range").get<double>();
    for (const auto& s : j.at("sequences"))
        man.sequences.push_back({s.at("sequence_id").get<std::string>(),
                                 s.at("num_frames").get<int>(), s.at("height").get<int>(),
                                 s.at("width").get<int>()});
    return man;
}

std::vector<VideoSample> load_dataset(const std::string& root) {
    DatasetManifest man = read_manifest(root);
    std::vector<VideoSample> out;
    for (const auto& e : man.sequences) {
        fs::path seq = fs::path(root) / e.sequence_id;
        for (int t = 0; t < e.num_frames; ++t) {
            VideoSample s;
            s.sequence_id = e.sequence_id;
            s.frame_index = t;
            cv::Mat frame = read_png((seq / "frames" / frame_name(t)).string(), CV_8UC3);
            cv::Mat flow = read_png((seq / "flow" / frame_name(t)).string(), CV_16UC3);
            cv::Mat mask = read_png((seq / "masks" / frame_name(t)).string(), CV_8UC1);
            int h = frame.rows, w = frame.cols;
            s.frame = Tensor({3, h, w});
            s.flow = Tensor({3, h, w});
            s.mask = Tensor({h, w});
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const auto& fp = frame.at<cv::Vec3b>(y, x);
                    s.frame.at(0, y, x) = fp[2] / 255.0;
                    s.frame.at(1, y, x) = fp[1] / 255.0;
                    s.frame.at(2, y, x) = fp[0] / 255.0;
                    const auto& fl = flow.at<cv::Vec3w>(y, x);
                    s.flow.at(0, y, x) = fl[2] / 65535.0;
                    s.flow.at(1, y, x) = fl[1] / 65535.0;
                    s.flow.at(2, y, x) = fl[0] / 65535.0;
                    s.mask.at(y, x) = mask.at<uchar>(y, x) > 0 ? 1.0 : 0.0;
                }
            validate_sample(s);
            out.push_back(std::move(s));
        }
    }
    return out;
}

DatasetManifest generate_dataset(const RunConfig& cfg, const std::string& root, long seed) {
    std::vector<VideoSample> all;
    Rng master(static_cast<unsigned long long>(seed));
    for (int i = 0; i < cfg.data_sequences; ++i) {
        SequenceSpec spec;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "seq%03d", i);
        spec.sequence_id = buf;
        spec.num_frames = cfg.data_frames;
        spec.height = spec.width = cfg.data_resolution;
        spec.flow_range = cfg.data_flow_range;
        spec.distractor_count = cfg.data_distractors;
        spec.seed = static_cast<long>(master());

        Rng rng(static_cast<unsigned long long>(spec.seed));
        std::uniform_int_distribution<int> kind_d(0, 2), bg_d(0, 2);
        spec.shape_kind = static_cast<ShapeKind>(kind_d(rng));
        spec.background = static_cast<BackgroundKind>(bg_d(rng));
        // Scale the shape with the frame so a full trajectory always fits,
        // even at very small resolutions.
        int lo = std::max(2, spec.width / 8);
        int hi = std::max(lo, std::min(10, spec.width / 6));
        std::uniform_int_distribution<int> size_d(lo, hi);
        spec.shape_size = size_d(rng);
        int margin = spec.shape_size + 1;
        int vmax = static_cast<int>(std::min(3.0, cfg.data_flow_range));
        std::uniform_int_distribution<int> vel_d(-vmax, vmax);
        // Retry until the constant-velocity trajectory stays inside the frame.
        for (int attempt = 0;; ++attempt) {
            if (attempt > 1000)
                throw Error("config", "cannot place a moving shape inside the frame");
            std::uniform_int_distribution<int> px(margin, spec.width - margin - 1);
            std::uniform_int_distribution<int> py(margin, spec.height - margin - 1);
            int sx = px(rng), sy = py(rng);
            int dx = vel_d(rng), dy = vel_d(rng);
            if (dx == 0 && dy == 0) continue;
            int ex = sx + dx * (spec.num_frames - 1), ey = sy + dy * (spec.num_frames - 1);
            if (ex - margin < 0 || ex + margin >= spec.width || ey - margin < 0 ||
                ey + margin >= spec.height)
                continue;
            spec.start_x = sx;
            spec.start_y = sy;
            spec.trajectory.assign(static_cast<size_t>(spec.num_frames), {dx, dy});
            break;
        }
        auto seq = generate_sequence(spec);
        all.insert(all.end(), seq.begin(), seq.end());
    }
    return write_dataset(all, root, cfg.data_flow_range);
}

bool is_holdout_sequence(const std::string& sequence_id) {
    // FNV-1a, stable across platforms.
    uint64_t h = 1469598103934665603ull;
    for (char c : sequence_id) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h % 5 == 0;
}

} // namespace lgrn
