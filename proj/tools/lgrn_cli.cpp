// Command-line front end: dataset generation, training, evaluation,
// ablation, profiling, and PR-curve export.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lgrn/train.hpp"

using namespace lgrn;

namespace {

RunConfig load_cfg(const std::string& path) {
    RunConfig cfg = path.empty() ? RunConfig{} : load_config_file(path);
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive local-global refinement network for video salient object detection"};
    app.require_subcommand(1);

    std::string config_path, data_root, out_path, ckpt_path, report_dir;
    long seed_override = -1;
    int frames = 50;

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic moving-shape dataset");
    gen->add_option("--config", config_path, "key=value config file");
    gen->add_option("--out", out_path, "dataset root directory")->required();
    gen->add_option("--seed", seed_override, "override the config seed");

    auto* tr = app.add_subcommand("train", "Train a model");
    tr->add_option("--config", config_path, "key=value config file");
    tr->add_option("--data", data_root, "dataset root")->required();
    tr->add_option("--out", ckpt_path, "checkpoint output path")->required();
    tr->add_option("--seed", seed_override, "override the config seed");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    ev->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    ev->add_option("--data", data_root, "dataset root")->required();
    ev->add_option("--report", report_dir, "report output directory")->required();

    auto* ab = app.add_subcommand("ablate", "Run the ablation ladder");
    ab->add_option("--config", config_path, "key=value config file");
    ab->add_option("--data", data_root, "dataset root")->required();
    ab->add_option("--report", report_dir, "report output directory")->required();
    ab->add_option("--seed", seed_override, "override the config seed");

    auto* pf = app.add_subcommand("profile", "Per-component runtime of the forward pass");
    pf->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    pf->add_option("--frames", frames, "number of frames to time");

    auto* pc = app.add_subcommand("pr-curve", "Export the PR curve of a report");
    pc->add_option("--report", report_dir, "report directory")->required();
    pc->add_option("--out", out_path, "output csv path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            RunConfig cfg = load_cfg(config_path);
            if (seed_override >= 0) cfg.seed = seed_override;
            DatasetManifest man = generate_dataset(cfg, out_path, cfg.seed);
            std::cout << "event=gen_data root=" << out_path
                      << " sequences=" << man.sequences.size() << " seed=" << cfg.seed << "\n";
        } else if (tr->parsed()) {
            RunConfig cfg = load_cfg(config_path);
            if (seed_override >= 0) cfg.seed = seed_override;
            TrainResult res = train(cfg, data_root, Split::all, &std::cout);
            res.checkpoint.save(ckpt_path);
            std::cout << "event=train_done epochs=" << cfg.epochs
                      << " final_loss=" << res.epoch_losses.back() << " ckpt=" << ckpt_path
                      << "\n";
        } else if (ev->parsed()) {
            Checkpoint ckpt = Checkpoint::load(ckpt_path);
            MetricsReport rep = evaluate(ckpt, data_root, Split::all, report_dir);
            std::cout << "event=eval f_beta_max=" << rep.f_beta_max
                      << " s_measure=" << rep.s_measure << " mae=" << rep.mae
                      << " report=" << report_dir << "\n";
        } else if (ab->parsed()) {
            RunConfig cfg = load_cfg(config_path);
            if (seed_override >= 0) cfg.seed = seed_override;
            ablate(cfg, data_root, report_dir, &std::cout);
            std::cout << "event=ablate_done report=" << report_dir << "/ablation.csv\n";
        } else if (pf->parsed()) {
            Checkpoint ckpt = Checkpoint::load(ckpt_path);
            ProfileReport rep = profile(ckpt, frames);
            for (const auto& [name, sec] : rep.seconds_per_frame)
                std::cout << "event=profile component=" << name << " seconds_per_frame=" << sec
                          << " share=" << rep.share.at(name) << "\n";
        } else if (pc->parsed()) {
            std::ifstream in(report_dir + "/pr_curve.csv", std::ios::binary);
            if (!in) throw Error("missing_file", "no pr_curve.csv under " + report_dir);
            std::ofstream out(out_path, std::ios::binary);
            if (!out) throw Error("missing_file", "cannot write " + out_path);
            out << in.rdbuf();
            std::cout << "event=pr_curve out=" << out_path << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error category=" << e.category << " msg=" << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error category=internal msg=" << e.what() << "\n";
        return 1;
    }
    return 0;
}
