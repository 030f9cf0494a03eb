#include <cmath>
#include <sstream>

#include "c2f/checkpoint.hpp"
#include "c2f/commands.hpp"
#include "c2f/error.hpp"
#include "c2f/train.hpp"
#include "doctest.h"
#include "run_fixture.hpp"
#include "temp_dir.hpp"

using namespace c2f;
using c2f::test::slurp;

namespace fs = std::filesystem;

namespace {

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

// Checkpoint with a zeroed classify head.
fs::path zero_head_checkpoint(const fs::path& dir, const RunConfig& cfg) {
    auto st = make_train_state(cfg);
    st->net.head().weight.fill(0.0f);
    st->net.head().bias.fill(0.0f);
    const fs::path p = dir / "zero.ckpt";
    save_checkpoint(p, to_checkpoint(*st));
    return p;
}

fs::path m_first_test(const RunConfig& cfg) { return load_manifest(cfg.data_root).split("test").samples[0].path; }

}  // namespace

TEST_CASE("train with zero epochs writes the initial network") {
    c2f::test::TempDir dir;
    RunConfig cfg = c2f::test::synthetic_run(dir.path(), 2, 16, OptimizerKind::sgd, 12);
    cfg.epochs = 0;
    std::ostringstream log;
    cmd_train(cfg, std::nullopt, log);
    auto st = state_from_checkpoint(load_checkpoint(cfg.output_dir / "last.ckpt"));
    CHECK(st->epoch == 0);
    Network fresh = build_network(2, 12);
    auto a = fresh.parameters();
    auto b = st->net.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].tensor == *b[i].tensor);
    CHECK(slurp(cfg.output_dir / "curves.csv") == "epoch,train_loss,val_loss,val_accuracy_top1\n");
    CHECK_FALSE(fs::exists(cfg.output_dir / ".lock"));
}

TEST_CASE("training outputs, determinism and resume") {
    c2f::test::TempDir dir;
    RunConfig cfg = c2f::test::synthetic_run(dir.path(), 3, 16, OptimizerKind::adamw, 5);
    cfg.epochs = 4;
    cfg.batch_size = 4;
    std::ostringstream log;

    cfg.output_dir = dir.path() / "a";
    cmd_train(cfg, std::nullopt, log);
    const std::string curves = slurp(cfg.output_dir / "curves.csv");
    for (const char* f : {"last.ckpt", "best.ckpt", "loss.svg", "accuracy.svg", "config.txt"}) {
        CHECK(fs::exists(cfg.output_dir / f));
    }
    auto rows = csv_rows(curves);
    REQUIRE(rows.size() == 4);
    double best = -1;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(std::stoul(rows[i][0]) == i + 1);
        best = std::max(best, std::stod(rows[i][3]));
    }
    auto best_state = state_from_checkpoint(load_checkpoint(cfg.output_dir / "best.ckpt"));
    CHECK(best_state->best_val_accuracy == doctest::Approx(best).epsilon(1e-9));

    SUBCASE("same config twice gives identical curves") {
        cfg.output_dir = dir.path() / "b";
        cmd_train(cfg, std::nullopt, log);
        CHECK(slurp(cfg.output_dir / "curves.csv") == curves);
        CHECK(slurp(cfg.output_dir / "last.ckpt").size() == slurp(dir.path() / "a" / "last.ckpt").size());
    }
    SUBCASE("stop and resume matches an uninterrupted run") {
        RunConfig part = cfg;
        part.output_dir = dir.path() / "c";
        part.epochs = 2;
        cmd_train(part, std::nullopt, log);
        part.epochs = 4;
        cmd_train(part, part.output_dir / "last.ckpt", log);
        CHECK(slurp(part.output_dir / "curves.csv") == curves);
        auto x = state_from_checkpoint(load_checkpoint(part.output_dir / "last.ckpt"));
        auto y = state_from_checkpoint(load_checkpoint(dir.path() / "a" / "last.ckpt"));
        auto px = x->net.parameters();
        auto py = y->net.parameters();
        for (std::size_t i = 0; i < px.size(); ++i) CHECK(*px[i].tensor == *py[i].tensor);
        CHECK(x->optimizer.first_moment == y->optimizer.first_moment);
        CHECK(x->optimizer.step == y->optimizer.step);
    }
    SUBCASE("resume refuses a different optimizer") {
        RunConfig other = cfg;
        other.optimizer = OptimizerKind::sgd;
        other.output_dir = dir.path() / "d";
        CHECK_THROWS_AS(cmd_train(other, cfg.output_dir / "last.ckpt", log), CheckpointError);
    }
    SUBCASE("divergent training exits with the numeric code") {
        RunConfig wild = cfg;
        wild.optimizer = OptimizerKind::sgd;
        wild.lr0 = 1e30;
        wild.output_dir = dir.path() / "e";
        std::ostringstream err;
        CHECK(run_command([&] { cmd_train(wild, std::nullopt, log); }, err) == kExitNumeric);
        CHECK(err.str().find("epoch") != std::string::npos);
    }
    SUBCASE("a locked output directory is refused") {
        std::ofstream(cfg.output_dir / ".lock") << "1\n";
        CHECK_THROWS_WITH_AS(cmd_train(cfg, std::nullopt, log), doctest::Contains("locked"), ConfigError);
    }
}

TEST_CASE("eval and predict") {
    c2f::test::TempDir dir;
    RunConfig cfg = c2f::test::synthetic_run(dir.path(), 4, 16, OptimizerKind::adamw, 8);
    std::ostringstream out;

    SUBCASE("zero head predicts class 0 everywhere") {
        const fs::path ck = zero_head_checkpoint(dir.path(), cfg);
        EvalOptions o{ck, cfg.data_root, "test", std::nullopt, 16, dir.path() / "eval"};
        MetricsReport r = cmd_eval(o, out);
        CHECK(r.counts.fn == 0);
        CHECK(r.counts.tn == 0);
        CHECK(r.accuracy == 0.5);
        CHECK(slurp(dir.path() / "eval" / "confusion.txt").find("0 = Autistic, 1 = Non Autistic") == 0);
        CHECK(slurp(dir.path() / "eval" / "report.csv").rfind("optimizer,accuracy,precision,recall,f1,ap\nadamw,", 0) == 0);

        Prediction p = cmd_predict(ck, m_first_test(cfg), out);
        CHECK(p.label == 0);
        CHECK(p.probabilities[0] == 0.5);
        CHECK(p.probabilities[1] == 0.5);
    }
    SUBCASE("batch size does not change the report, predict agrees with eval") {
        cfg.epochs = 2;
        cfg.batch_size = 4;
        cmd_train(cfg, std::nullopt, out);
        const fs::path ck = cfg.output_dir / "last.ckpt";
        EvalOptions o{ck, cfg.data_root, "test", std::nullopt, 1, dir.path() / "e1"};
        cmd_eval(o, out);
        o.batch_size = 32;
        o.output_dir = dir.path() / "e32";
        cmd_eval(o, out);
        for (const char* f : {"report.csv", "metrics.txt", "predictions.csv"}) {
            CHECK(slurp(dir.path() / "e1" / f) == slurp(dir.path() / "e32" / f));
        }
        for (const auto& row : csv_rows(slurp(dir.path() / "e1" / "predictions.csv"))) {
            std::ostringstream sink;
            Prediction p = cmd_predict(ck, row[1], sink);
            CHECK(p.label == std::stoi(row[3]));
            CHECK(std::abs(p.probabilities[0] + p.probabilities[1] - 1.0) <= 1e-6);
            CHECK(std::abs(p.probabilities[0] - std::stod(row[4])) <= 1e-6);
        }
    }
    SUBCASE("checkpoint errors") {
        EvalOptions o{dir.path() / "missing.ckpt", cfg.data_root, "test", std::nullopt, 16, dir.path()};
        CHECK(run_command([&] { cmd_eval(o, out); }, out) == kExitCheckpoint);
        std::ofstream(dir.path() / "junk.ckpt") << "not a checkpoint";
        o.checkpoint = dir.path() / "junk.ckpt";
        CHECK(run_command([&] { cmd_eval(o, out); }, out) == kExitCheckpoint);
    }
    SUBCASE("undecodable image") {
        const fs::path ck = zero_head_checkpoint(dir.path(), cfg);
        std::ofstream(dir.path() / "bad.png") << "garbage";
        CHECK(run_command([&] { cmd_predict(ck, dir.path() / "bad.png", out); }, out) == kExitData);
    }
}

TEST_CASE("tsne command") {
    c2f::test::TempDir dir;
    RunConfig cfg = c2f::test::synthetic_run(dir.path(), 4, 16, OptimizerKind::adamw, 2);
    std::ostringstream log;
    TsneCommand t;
    t.data_root = cfg.data_root;
    t.img_size = 16;
    t.perplexity = 2.0;
    t.iterations = 300;
    t.dims = 4;
    t.output_dir = dir.path() / "t";
    CHECK(run_command([&] { cmd_tsne(t, log); }, log) == kExitConfig);

    t.dims = 3;
    cmd_tsne(t, log);
    const std::string first = slurp(t.output_dir / "embedding.csv");
    CHECK(first.rfind("x,y,z,label,file\n", 0) == 0);
    CHECK(csv_rows(first).size() == 8);
    CHECK(slurp(t.output_dir / "embedding.svg").find("<svg") == 0);
    cmd_tsne(t, log);
    CHECK(slurp(t.output_dir / "embedding.csv") == first);

    t.features = "pooled";
    CHECK(run_command([&] { cmd_tsne(t, log); }, log) == kExitConfig);
}

TEST_CASE("report and exit codes") {
    std::ostringstream out;
    ReportCommand r;
    ConfusionMatrix2 c;
    c.tp = 124;
    c.fp = 16;
    c.fn = 13;
    c.tn = 127;
    r.counts = c;
    r.name = "AdamW";
    cmd_report(r, out);
    CHECK(out.str().find("AdamW            89.64      88.57    89.53    90.51      n/a") != std::string::npos);

    CHECK(run_command([] { throw ConfigError("x"); }, out) == 2);
    CHECK(run_command([] { throw DataError("x"); }, out) == 3);
    CHECK(run_command([] { throw NumericError("x"); }, out) == 4);
    CHECK(run_command([] { throw CheckpointError("x"); }, out) == 5);
    CHECK(run_command([] {}, out) == 0);

    RunConfig bad;
    bad.data_root = "/nonexistent/c2f";
    bad.output_dir = "/tmp";
    CHECK(run_command([&] { cmd_train(bad, std::nullopt, out); }, out) == kExitData);
    bad.data_root.clear();
    CHECK(run_command([&] { cmd_train(bad, std::nullopt, out); }, out) == kExitConfig);
}
