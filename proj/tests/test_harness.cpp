#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lesen/checkpoint.hpp"
#include "lesen/harness.hpp"

using namespace lesen;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("lesen_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

TrainConfig tiny_config(const fs::path& root) {
    TrainConfig cfg;
    cfg.dataset_path = (root / "data").string();
    cfg.out_dir = (root / "run").string();
    cfg.data.image_height = 16;
    cfg.data.image_width = 16;
    cfg.data.n_samples = 12;
    cfg.data.seed = 5;
    cfg.n_labeled = 4;
    cfg.n_unlabeled = 5;
    cfg.n_test = 3;
    cfg.net.base_width = 4;
    cfg.net.depth = 2;
    cfg.aug.m_copies = 2;
    cfg.total_epochs = 2;
    cfg.labeled_batch = 2;
    cfg.unlabeled_batch = 3;
    cfg.validation_count = 1;
    cfg.checkpoint_interval = 1;
    cfg.ablate_seeds = 1;
    return cfg;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

int count_rows(const std::vector<std::string>& lines, const std::string& type) {
    int n = 0;
    for (const auto& l : lines)
        if (l.rfind(type + "\t", 0) == 0) ++n;
    return n;
}

}  // namespace

TEST_CASE("generate writes the dataset and split manifest") {
    fs::path root = fresh_dir("generate");
    TrainConfig cfg = tiny_config(root);
    cmd_generate(cfg);

    auto ids = list_dataset_ids(cfg.dataset_path);
    CHECK(ids.size() == 12);
    SplitManifest m = read_split_manifest(cfg.resolved_split_path());
    CHECK(m.labeled_ids.size() == 4);
    CHECK(m.unlabeled_ids.size() == 5);
    CHECK(m.test_ids.size() == 3);
}

TEST_CASE("generate rejects oversubscribed splits before touching the disk") {
    fs::path root = fresh_dir("generate_bad");
    TrainConfig cfg = tiny_config(root);
    cfg.n_unlabeled = 100;
    CHECK_THROWS_AS(cmd_generate(cfg), std::invalid_argument);
    CHECK_FALSE(fs::exists(cfg.dataset_path));
}

TEST_CASE("config files round-trip through the resolved form") {
    fs::path root = fresh_dir("config");
    TrainConfig cfg = tiny_config(root);
    cfg.loss.lambda_max = 0.75;
    cfg.use_russ = false;
    const std::string path = (root / "cfg.txt").string();
    write_resolved_config(cfg, path);
    TrainConfig back = parse_config_file(path);
    CHECK(back.dataset_path == cfg.dataset_path);
    CHECK(back.data.n_samples == 12);
    CHECK(back.loss.lambda_max == 0.75);
    CHECK(back.use_russ == false);
    CHECK(back.net.depth == 2);

    SUBCASE("unknown keys are rejected with the offending name") {
        TrainConfig c;
        CHECK_THROWS_WITH_AS(apply_override(c, "train.bogus=1"),
                             "unknown config key: train.bogus", std::invalid_argument);
    }
    SUBCASE("parse errors carry the line number") {
        std::ofstream bad(root / "bad.txt");
        bad << "# fine\n" << "train.total_epochs=notanumber\n";
        bad.close();
        try {
            parse_config_file((root / "bad.txt").string());
            FAIL("expected a parse error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find(":2:") != std::string::npos);
        }
    }
    SUBCASE("comments and blank lines are ignored") {
        std::ofstream ok(root / "ok.txt");
        ok << "\n  # comment\ntrain.total_epochs=7  # trailing\n";
        ok.close();
        CHECK(parse_config_file((root / "ok.txt").string()).total_epochs == 7);
    }
}

TEST_CASE("a short training run produces the full run directory") {
    fs::path root = fresh_dir("train");
    TrainConfig cfg = tiny_config(root);
    cmd_generate(cfg);
    TrainResult res = cmd_train(cfg);

    fs::path run(res.run_dir);
    CHECK(fs::exists(run / "config.resolved"));
    CHECK(fs::exists(run / "checkpoints" / "last.ckpt"));
    CHECK(fs::exists(run / "checkpoints" / "final.ckpt"));
    CHECK(fs::exists(run / "checkpoints" / "best.ckpt"));
    CHECK(fs::exists(run / "checkpoints" / "epoch_1.ckpt"));
    CHECK(fs::exists(run / "checkpoints" / "epoch_2.ckpt"));

    auto lines = read_lines(run / "metrics.tsv");
    CHECK(lines[0] == "type\tepoch\tstep\tl_sup\tl_cons\tl_total\tlambda\tq\tval_dsc");
    // 5 unlabeled / batch 3 -> 2 steps per epoch, 2 epochs
    CHECK(count_rows(lines, "step") == 4);
    CHECK(count_rows(lines, "epoch") == 2);

    auto report = read_lines(run / "report.tsv");
    REQUIRE(!report.empty());
    CHECK(report[0].rfind("# model: teacher, checkpoint: ", 0) == 0);
    CHECK(res.scored_checkpoint == report[0].substr(report[0].rfind(' ') + 1));
    CHECK(res.test_dsc >= 0.0);
    CHECK(res.test_dsc <= 1.0);

    SUBCASE("the final checkpoint round-trips") {
        LoadedCheckpoint lc = load_checkpoint(res.final_checkpoint);
        CHECK(lc.config == cfg.net);
        CHECK(lc.state.epoch == 2);
        CHECK(lc.state.global_step == 4);
    }

    SUBCASE("resuming continues the epoch counter instead of restarting") {
        TrainConfig longer = cfg;
        longer.total_epochs = 3;
        TrainResult res2 = cmd_train(longer, (run / "checkpoints" / "last.ckpt").string());
        LoadedCheckpoint lc = load_checkpoint(res2.final_checkpoint);
        CHECK(lc.state.epoch == 3);
        CHECK(lc.state.global_step == 6);
        auto lines2 = read_lines(run / "metrics.tsv");
        CHECK(count_rows(lines2, "epoch") == 3);  // appended, not rewritten
    }
}

TEST_CASE("identical configurations reproduce metrics.tsv byte for byte") {
    fs::path root = fresh_dir("repro");
    TrainConfig cfg = tiny_config(root);
    cfg.total_epochs = 1;
    cmd_generate(cfg);

    TrainConfig a = cfg, b = cfg;
    a.out_dir = (root / "run_a").string();
    b.out_dir = (root / "run_b").string();
    cmd_train(a);
    cmd_train(b);
    CHECK(read_lines(fs::path(a.out_dir) / "metrics.tsv") ==
          read_lines(fs::path(b.out_dir) / "metrics.tsv"));
}

TEST_CASE("supervised-only runs take the same number of steps") {
    fs::path root = fresh_dir("suponly");
    TrainConfig cfg = tiny_config(root);
    cfg.total_epochs = 1;
    cmd_generate(cfg);
    cfg.supervised_only = true;
    cfg.loss.lambda_max = 0.0;
    TrainResult res = cmd_train(cfg);
    auto lines = read_lines(fs::path(res.run_dir) / "metrics.tsv");
    CHECK(count_rows(lines, "step") == 2);  // still ceil(5/3) per epoch
}

TEST_CASE("evaluate reads a checkpoint and scores a split section") {
    fs::path root = fresh_dir("evaluate");
    TrainConfig cfg = tiny_config(root);
    cfg.total_epochs = 1;
    cmd_generate(cfg);
    TrainResult res = cmd_train(cfg);

    const std::string report_path = (root / "eval.tsv").string();
    EvalReport t = cmd_evaluate(res.final_checkpoint, cfg.dataset_path,
                                cfg.resolved_split_path(), "test", "teacher", report_path);
    CHECK(t.rows.size() == 3);
    CHECK(fs::exists(report_path));
    EvalReport s = cmd_evaluate(res.final_checkpoint, cfg.dataset_path,
                                cfg.resolved_split_path(), "labeled", "student", "");
    CHECK(s.rows.size() == 4);

    SUBCASE("bad section names and empty splits are errors") {
        CHECK_THROWS_AS(cmd_evaluate(res.final_checkpoint, cfg.dataset_path,
                                     cfg.resolved_split_path(), "test", "oracle", ""),
                        std::invalid_argument);
        CHECK_THROWS_AS(cmd_evaluate(res.final_checkpoint, cfg.dataset_path,
                                     cfg.resolved_split_path(), "validation", "teacher", ""),
                        std::invalid_argument);
        SplitManifest empty_test;
        empty_test.labeled_ids = {"s0000"};
        const std::string p = (root / "empty_splits.txt").string();
        write_split_manifest(empty_test, p);
        CHECK_THROWS_AS(
            cmd_evaluate(res.final_checkpoint, cfg.dataset_path, p, "test", "teacher", ""),
            std::invalid_argument);
    }
}

TEST_CASE("ablation runs every variant and writes the summary tables") {
    fs::path root = fresh_dir("ablate");
    TrainConfig cfg = tiny_config(root);
    cfg.total_epochs = 1;
    cfg.aug.m_copies = 2;
    cmd_generate(cfg);
    cfg.out_dir = (root / "ablation").string();
    cmd_ablate(cfg);

    auto rep = read_lines(fs::path(cfg.out_dir) / "ablation_report.tsv");
    CHECK(rep[0] == "variant\tseed\tdsc\tasd");
    CHECK(count_rows(rep, "all") == 2);      // one run row + one mean row
    CHECK(count_rows(rep, "wo_russ") == 2);
    CHECK(count_rows(rep, "wo_sa") == 2);

    auto plot = read_lines(fs::path(cfg.out_dir) / "ablation_plot.dat");
    CHECK(plot.size() == 12);  // 3 variants x 4 statistics
    for (const char* v : {"all", "wo_russ", "wo_sa"})
        CHECK(fs::exists(fs::path(cfg.out_dir) / (std::string(v) + "_seed0") / "report.tsv"));

    // variant runs really differ in configuration
    auto all_cfg = read_lines(fs::path(cfg.out_dir) / "all_seed0" / "config.resolved");
    auto wo_sa_cfg = read_lines(fs::path(cfg.out_dir) / "wo_sa_seed0" / "config.resolved");
    auto has = [](const std::vector<std::string>& lines, const std::string& kv) {
        for (const auto& l : lines)
            if (l == kv) return true;
        return false;
    };
    CHECK(has(all_cfg, "net.use_spatial_attention=true"));
    CHECK(has(wo_sa_cfg, "net.use_spatial_attention=false"));
    auto wo_russ_cfg = read_lines(fs::path(cfg.out_dir) / "wo_russ_seed0" / "config.resolved");
    CHECK(has(wo_russ_cfg, "train.use_russ=false"));
}
