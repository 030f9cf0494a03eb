// c2f command-line entry point: train | eval | predict | tsne | report | synth.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "c2f/commands.hpp"
#include "c2f/config.hpp"
#include "c2f/data.hpp"
#include "c2f/error.hpp"
#include "c2f/train.hpp"

using namespace c2f;

int main(int argc, char** argv) {
    CLI::App app{"C2f image classifier: training, evaluation, prediction, t-SNE and metric reports"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train a network on a dataset tree");
    std::string config_file, resume;
    std::map<std::string, std::string> overrides;
    train->add_option("--config", config_file, "flat key=value config file");
    train->add_option("--resume", resume, "checkpoint to continue from");
    for (const auto& key : config_keys()) {
        train->add_option_function<std::string>(
            "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, "override " + key);
    }

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    EvalOptions eo;
    std::optional<int> eval_positive;
    std::string eval_ckpt, eval_root, eval_out;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--data_root", eval_root, "dataset root")->required();
    eval->add_option("--split", eo.split, "train | test | valid")->capture_default_str();
    eval->add_option("--positive_class", eval_positive, "0 or 1 (default: from checkpoint)");
    eval->add_option("--batch_size", eo.batch_size, "inference batch size")->capture_default_str();
    eval->add_option("--output_dir", eval_out, "where to write reports (default: checkpoint directory)");

    // predict
    auto* predict = app.add_subcommand("predict", "classify one image");
    std::string pred_ckpt, pred_image;
    predict->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
    predict->add_option("image", pred_image, "image file (png, jpeg or ppm)")->required();

    // tsne
    auto* tsne = app.add_subcommand("tsne", "t-SNE embedding of a split");
    TsneCommand to;
    std::string tsne_root, tsne_ckpt, tsne_out = to.output_dir.string();
    tsne->add_option("--data_root", tsne_root, "dataset root")->required();
    tsne->add_option("--split", to.split)->capture_default_str();
    tsne->add_option("--dims", to.dims, "2 or 3")->capture_default_str();
    tsne->add_option("--perplexity", to.perplexity)->capture_default_str();
    tsne->add_option("--seed", to.seed)->capture_default_str();
    tsne->add_option("--iterations", to.iterations)->capture_default_str();
    tsne->add_option("--img_size", to.img_size, "decode size for pixel features")->capture_default_str();
    tsne->add_option("--features", to.features, "pixels | pooled")->capture_default_str();
    tsne->add_option("--checkpoint", tsne_ckpt, "network for pooled features");
    tsne->add_option("--output_dir", tsne_out)->capture_default_str();

    // report
    auto* rep = app.add_subcommand("report", "metric table from counts or report.csv files");
    ReportCommand ro;
    std::optional<std::size_t> tp, fp, fn, tn;
    rep->add_option("--tp", tp);
    rep->add_option("--fp", fp);
    rep->add_option("--fn", fn);
    rep->add_option("--tn", tn);
    rep->add_option("--name", ro.name, "row name for counts")->capture_default_str();
    std::vector<std::string> report_files;
    rep->add_option("files", report_files, "report.csv files");

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic dataset tree");
    std::size_t synth_n = 8, synth_size = 32;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    synth->add_option("--n_per_class", synth_n)->capture_default_str();
    synth->add_option("--size", synth_size, "image side in pixels")->capture_default_str();
    synth->add_option("--seed", synth_seed)->capture_default_str();
    synth->add_option("--out", synth_out, "output root")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    return run_command(
        [&] {
            if (*train) {
                RunConfig cfg;
                std::optional<std::filesystem::path> from;
                if (!resume.empty()) {
                    from = resume;
                    cfg = config_from_checkpoint(load_checkpoint(resume));
                }
                if (!config_file.empty()) cfg = load_config(config_file, cfg);
                for (const auto& key : config_keys()) {
                    if (auto it = overrides.find(key); it != overrides.end()) apply_setting(cfg, key, it->second);
                }
                cmd_train(cfg, from, std::cout);
            } else if (*eval) {
                eo.checkpoint = eval_ckpt;
                eo.data_root = eval_root;
                eo.output_dir = eval_out;
                eo.positive_class = eval_positive;
                cmd_eval(eo, std::cout);
            } else if (*predict) {
                cmd_predict(pred_ckpt, pred_image, std::cout);
            } else if (*tsne) {
                to.data_root = tsne_root;
                to.checkpoint = tsne_ckpt;
                to.output_dir = tsne_out;
                cmd_tsne(to, std::cout);
            } else if (*rep) {
                if (tp || fp || fn || tn) {
                    if (!(tp && fp && fn && tn)) throw c2f::ConfigError("report: --tp --fp --fn --tn must be given together");
                    ConfusionMatrix2 c;
                    c.tp = *tp;
                    c.fp = *fp;
                    c.fn = *fn;
                    c.tn = *tn;
                    ro.counts = c;
                }
                for (const auto& f : report_files) ro.report_files.emplace_back(f);
                cmd_report(ro, std::cout);
            } else if (*synth) {
                generate_synthetic(synth_n, synth_size, synth_seed, synth_out);
                std::cout << "wrote synthetic dataset to " << synth_out << "\n";
            }
        },
        std::cerr);
}
