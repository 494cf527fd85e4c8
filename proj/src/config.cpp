#include "lgrn/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace lgrn {

void RunConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error("config", m); };
    if (num_levels < 2) fail("num_levels must be >= 2");
    if (aligned_channels < 1) fail("aligned_channels must be >= 1");
    if (gcn_depth < 1) fail("gcn_depth must be >= 1");
    if (decode_iterations < 1) fail("decode_iterations must be >= 1");
    if (!(focal_alpha > 0.0 && focal_alpha < 1.0)) fail("focal_alpha must be in (0,1)");
    if (focal_gamma < 0.0) fail("focal_gamma must be >= 0");
    if (learning_rate <= 0.0) fail("learning_rate must be positive");
    if (epochs < 1) fail("epochs must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (input_size < 4) fail("input_size must be >= 4");
    if (data_sequences < 1 || data_frames < 2) fail("dataset must have >=1 sequences of >=2 frames");
    if (data_flow_range <= 0.0) fail("data_flow_range must be positive");
}

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error("config", "invalid boolean value: " + v);
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

} // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"num_levels", [&](const std::string& v) { cfg.num_levels = std::stoi(v); }},
        {"aligned_channels", [&](const std::string& v) { cfg.aligned_channels = std::stoi(v); }},
        {"gcn_depth", [&](const std::string& v) { cfg.gcn_depth = std::stoi(v); }},
        {"decode_iterations", [&](const std::string& v) { cfg.decode_iterations = std::stoi(v); }},
        {"input_size", [&](const std::string& v) { cfg.input_size = std::stoi(v); }},
        {"focal_alpha", [&](const std::string& v) { cfg.focal_alpha = std::stod(v); }},
        {"focal_gamma", [&](const std::string& v) { cfg.focal_gamma = std::stod(v); }},
        {"loss_mode", [&](const std::string& v) {
             if (v == "bce") cfg.loss_mode = LossMode::bce;
             else if (v == "combined") cfg.loss_mode = LossMode::combined;
             else throw Error("config", "loss_mode must be bce or combined");
         }},
        {"learning_rate", [&](const std::string& v) { cfg.learning_rate = std::stod(v); }},
        {"momentum", [&](const std::string& v) { cfg.momentum = std::stod(v); }},
        {"weight_decay", [&](const std::string& v) { cfg.weight_decay = std::stod(v); }},
        {"poly_power", [&](const std::string& v) { cfg.poly_power = std::stod(v); }},
        {"epochs", [&](const std::string& v) { cfg.epochs = std::stoi(v); }},
        {"batch_size", [&](const std::string& v) { cfg.batch_size = std::stoi(v); }},
        {"augment_flip", [&](const std::string& v) { cfg.augment_flip = parse_bool(v); }},
        {"enable_lrm", [&](const std::string& v) { cfg.enable_lrm = parse_bool(v); }},
        {"enable_grm", [&](const std::string& v) { cfg.enable_grm = parse_bool(v); }},
        {"enable_feedback", [&](const std::string& v) { cfg.enable_feedback = parse_bool(v); }},
        {"weighting_mode", [&](const std::string& v) {
             if (v == "gcn") cfg.weighting_mode = WeightingMode::gcn;
             else if (v == "fc") cfg.weighting_mode = WeightingMode::fc;
             else if (v == "none") cfg.weighting_mode = WeightingMode::none;
             else throw Error("config", "weighting_mode must be gcn, fc or none");
         }},
        {"data_sequences", [&](const std::string& v) { cfg.data_sequences = std::stoi(v); }},
        {"data_frames", [&](const std::string& v) { cfg.data_frames = std::stoi(v); }},
        {"data_resolution", [&](const std::string& v) { cfg.data_resolution = std::stoi(v); }},
        {"data_flow_range", [&](const std::string& v) { cfg.data_flow_range = std::stod(v); }},
        {"data_distractors", [&](const std::string& v) { cfg.data_distractors = std::stoi(v); }},
        {"seed", [&](const std::string& v) { cfg.seed = std::stol(v); }},
    };

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("config", "line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end())
            throw Error("config", "unknown config key: " + key);
        try {
            it->second(val);
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw Error("config", "invalid value for key " + key + ": " + val);
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string to_string(WeightingMode m) {
    switch (m) {
        case WeightingMode::gcn: return "gcn";
        case WeightingMode::fc: return "fc";
        default: return "none";
    }
}

std::string to_string(LossMode m) {
    return m == LossMode::bce ? "bce" : "combined";
}

std::string config_to_text(const RunConfig& c) {
    std::ostringstream o;
    o.precision(17);
    o << "num_levels = " << c.num_levels << "\n"
      << "aligned_channels = " << c.aligned_channels << "\n"
      << "gcn_depth = " << c.gcn_depth << "\n"
      << "decode_iterations = " << c.decode_iterations << "\n"
      << "input_size = " << c.input_size << "\n"
      << "focal_alpha = " << c.focal_alpha << "\n"
      << "focal_gamma = " << c.focal_gamma << "\n"
      << "loss_mode = " << to_string(c.loss_mode) << "\n"
      << "learning_rate = " << c.learning_rate << "\n"
      << "momentum = " << c.momentum << "\n"
      << "weight_decay = " << c.weight_decay << "\n"
      << "poly_power = " << c.poly_power << "\n"
      << "epochs = " << c.epochs << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "augment_flip = " << (c.augment_flip ? "true" : "false") << "\n"
      << "enable_lrm = " << (c.enable_lrm ? "true" : "false") << "\n"
      << "enable_grm = " << (c.enable_grm ? "true" : "false") << "\n"
      << "enable_feedback = " << (c.enable_feedback ? "true" : "false") << "\n"
      << "weighting_mode = " << to_string(c.weighting_mode) << "\n"
      << "data_sequences = " << c.data_sequences << "\n"
      << "data_frames = " << c.data_frames << "\n"
      << "data_resolution = " << c.data_resolution << "\n"
      << "data_flow_range = " << c.data_flow_range << "\n"
      << "data_distractors = " << c.data_distractors << "\n"
      << "seed = " << c.seed << "\n";
    return o.str();
}

} // namespace lgrn
