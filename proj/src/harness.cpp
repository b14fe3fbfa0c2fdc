#include "lesen/harness.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lesen/checkpoint.hpp"
#include "lesen/rng.hpp"

namespace fs = std::filesystem;

namespace lesen {

void cmd_generate(const TrainConfig& cfg) {
    cfg.validate();
    const long total = static_cast<long>(cfg.n_labeled) + cfg.n_unlabeled + cfg.n_test;
    if (total > cfg.data.n_samples)
        throw std::invalid_argument("split counts (" + std::to_string(total) +
                                    ") exceed data.n_samples (" +
                                    std::to_string(cfg.data.n_samples) + ")");
    generate_dataset(cfg.data, cfg.dataset_path);
    SplitManifest splits = make_splits(cfg.dataset_path, cfg.n_labeled, cfg.n_unlabeled,
                                       cfg.n_test, cfg.split_seed);
    write_split_manifest(splits, cfg.resolved_split_path());
}

namespace {

std::vector<MultiModalSample> load_set(const std::string& dataset_dir,
                                       const std::vector<std::string>& ids, bool keep_mask) {
    std::vector<MultiModalSample> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        MultiModalSample s = load_sample(dataset_dir, id);
        if (!keep_mask) s.mask.reset();  // unlabeled samples never expose a mask
        out.push_back(std::move(s));
    }
    return out;
}

double validation_dsc(const ModelState& teacher, const NetworkConfig& net,
                      const std::vector<MultiModalSample>& val) {
    if (val.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : val) {
        Tensor prob = forward(teacher, net, s.modality_a, s.modality_b);
        sum += dsc(binarize(prob), *s.mask);
    }
    return sum / static_cast<double>(val.size());
}

StepConfig make_step_config(const TrainConfig& cfg) {
    StepConfig sc;
    sc.aug = cfg.aug;
    sc.net = cfg.net;
    sc.loss = cfg.loss;
    sc.ema = cfg.ema;
    sc.opt = cfg.opt;
    sc.use_russ = cfg.use_russ;
    sc.total_epochs = cfg.total_epochs;
    sc.labeled_noise_sigma = cfg.labeled_noise_sigma;
    return sc;
}

}  // namespace

EvalReport evaluate_model(const ModelState& model, const NetworkConfig& net,
                          const std::string& dataset_dir,
                          const std::vector<std::string>& sample_ids) {
    EvalReport report;
    for (const auto& id : sample_ids) {
        MultiModalSample s = load_sample(dataset_dir, id);
        if (!s.mask) throw std::runtime_error("evaluation sample has no mask: " + id);
        Tensor prob = forward(model, net, s.modality_a, s.modality_b);
        Tensor pred = binarize(prob);
        EvalReport::Row row;
        row.sample_id = id;
        row.dsc = dsc(pred, *s.mask);
        try {
            row.asd = asd(pred, *s.mask);
        } catch (const std::exception&) {
            ++report.asd_undefined_count;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

TrainResult cmd_train(const TrainConfig& cfg, const std::string& resume_path) {
    cfg.validate();
    const fs::path run_dir(cfg.out_dir);
    fs::create_directories(run_dir / "checkpoints");
    write_resolved_config(cfg, (run_dir / "config.resolved").string());

    SplitManifest splits = read_split_manifest(cfg.resolved_split_path());
    std::vector<std::string> val_ids(
        splits.labeled_ids.begin(),
        splits.labeled_ids.begin() +
            std::min<std::size_t>(cfg.validation_count, splits.labeled_ids.size()));
    std::vector<std::string> train_lab_ids(splits.labeled_ids.begin() + val_ids.size(),
                                           splits.labeled_ids.end());
    if (train_lab_ids.empty()) throw std::runtime_error("no labeled training samples left");

    auto labeled = load_set(cfg.dataset_path, train_lab_ids, /*keep_mask=*/true);
    for (const auto& s : labeled)
        if (!s.mask) throw std::runtime_error("labeled sample missing mask: " + s.sample_id);
    auto val = load_set(cfg.dataset_path, val_ids, /*keep_mask=*/true);
    std::vector<MultiModalSample> unlabeled;
    if (!cfg.supervised_only)
        unlabeled = load_set(cfg.dataset_path, splits.unlabeled_ids, /*keep_mask=*/false);

    TrainState state;
    if (!resume_path.empty()) {
        LoadedCheckpoint lc = load_checkpoint(resume_path);
        if (!(lc.config == cfg.net))
            throw std::runtime_error("resume checkpoint architecture differs from config");
        state = std::move(lc.state);
    } else {
        state.student = init_state(cfg.net, cfg.init_seed);
        state.teacher = state.student;  // teacher starts as an exact copy
        state.optimizer = AdamState::init(state.student);
        state.rng_seed = cfg.train_seed;
    }

    const std::string metrics_path = (run_dir / "metrics.tsv").string();
    std::ofstream metrics;
    if (!resume_path.empty() && fs::exists(metrics_path)) {
        metrics.open(metrics_path, std::ios::app);
    } else {
        metrics.open(metrics_path, std::ios::trunc);
        metrics << "type\tepoch\tstep\tl_sup\tl_cons\tl_total\tlambda\tq\tval_dsc\n";
    }
    metrics.precision(9);

    // Step count follows the unlabeled split so a supervised-only run takes
    // exactly the same gradient steps as its semi-supervised counterpart.
    const int n_unlab_nominal = static_cast<int>(splits.unlabeled_ids.size());
    const int steps_per_epoch =
        n_unlab_nominal > 0
            ? (n_unlab_nominal + cfg.unlabeled_batch - 1) / cfg.unlabeled_batch
            : (static_cast<int>(labeled.size()) + cfg.labeled_batch - 1) / cfg.labeled_batch;

    StepConfig step_cfg = make_step_config(cfg);
    TrainResult result;
    result.run_dir = run_dir.string();
    result.best_checkpoint = (run_dir / "checkpoints" / "best.ckpt").string();
    result.final_checkpoint = (run_dir / "checkpoints" / "final.ckpt").string();
    double best_val = -1.0;

    for (int epoch = state.epoch + 1; epoch <= cfg.total_epochs; ++epoch) {
        std::vector<int> lab_order(labeled.size());
        std::iota(lab_order.begin(), lab_order.end(), 0);
        auto lab_rng = make_rng(derive_seed(state.rng_seed, "labeled", epoch));
        std::shuffle(lab_order.begin(), lab_order.end(), lab_rng);
        std::vector<int> unlab_order(unlabeled.size());
        std::iota(unlab_order.begin(), unlab_order.end(), 0);
        auto unlab_rng = make_rng(derive_seed(state.rng_seed, "unlabeled", epoch));
        std::shuffle(unlab_order.begin(), unlab_order.end(), unlab_rng);

        std::size_t lab_pos = 0;
        for (int k = 0; k < steps_per_epoch; ++k) {
            std::vector<MultiModalSample> lab_batch;
            for (int i = 0; i < cfg.labeled_batch; ++i) {
                lab_batch.push_back(labeled[lab_order[lab_pos]]);
                lab_pos = (lab_pos + 1) % lab_order.size();
            }
            std::vector<MultiModalSample> unlab_batch;
            if (!unlabeled.empty()) {
                const std::size_t lo = static_cast<std::size_t>(k) * cfg.unlabeled_batch;
                const std::size_t hi =
                    std::min(unlabeled.size(), lo + static_cast<std::size_t>(cfg.unlabeled_batch));
                for (std::size_t i = lo; i < hi; ++i)
                    unlab_batch.push_back(unlabeled[unlab_order[i]]);
            }
            const std::uint64_t aug_seed = derive_seed(state.rng_seed, "augstep", epoch, k);
            StepStats stats;
            try {
                stats = train_step(state, lab_batch, unlab_batch, step_cfg, epoch, aug_seed);
            } catch (const std::exception& e) {
                const std::string diag =
                    (run_dir / "checkpoints" / "diagnostic.ckpt").string();
                save_checkpoint(diag, cfg.net, state);
                throw std::runtime_error(std::string("training aborted at epoch ") +
                                         std::to_string(epoch) + ": " + e.what() +
                                         " (diagnostic checkpoint: " + diag + ")");
            }
            metrics << "step\t" << epoch << "\t" << state.global_step << "\t" << stats.l_sup
                    << "\t" << stats.l_cons << "\t" << stats.l_total << "\t" << stats.lambda
                    << "\t" << stats.q << "\t\n";
        }

        state.epoch = epoch;
        const int q_epoch =
            n_unlab_nominal > 0
                ? (cfg.use_russ
                       ? q_schedule(epoch, cfg.total_epochs,
                                    std::min(cfg.unlabeled_batch, n_unlab_nominal))
                       : std::min(cfg.unlabeled_batch, n_unlab_nominal))
                : 0;
        const double val_dsc = validation_dsc(state.teacher, cfg.net, val);
        metrics << "epoch\t" << epoch << "\t" << state.global_step << "\t\t\t\t\t" << q_epoch
                << "\t" << val_dsc << "\n";
        metrics.flush();

        save_checkpoint((run_dir / "checkpoints" / "last.ckpt").string(), cfg.net, state);
        if (!val.empty() && val_dsc > best_val) {
            best_val = val_dsc;
            save_checkpoint(result.best_checkpoint, cfg.net, state);
        }
        if (epoch % cfg.checkpoint_interval == 0)
            save_checkpoint(
                (run_dir / "checkpoints" / ("epoch_" + std::to_string(epoch) + ".ckpt")).string(),
                cfg.net, state);
    }

    save_checkpoint(result.final_checkpoint, cfg.net, state);
    result.best_val_dsc = best_val;

    // Final report on the test split, scored with the end-of-schedule
    // weights.  Training always runs the full schedule; the best-validation
    // checkpoint is kept on disk for inspection but is not used for scoring
    // (the tiny validation split makes early stopping unreliable).
    ModelState scoring = state.teacher;
    result.scored_checkpoint = "final";
    if (!splits.test_ids.empty()) {
        EvalReport report = evaluate_model(scoring, cfg.net, cfg.dataset_path, splits.test_ids);
        std::ofstream rep(run_dir / "report.tsv", std::ios::trunc);
        rep << "# model: teacher, checkpoint: " << result.scored_checkpoint << "\n";
        rep.close();
        // append the tabular part
        const std::string tmp = (run_dir / "report.body.tsv").string();
        write_eval_report(report, tmp);
        std::ifstream body(tmp);
        std::ofstream full(run_dir / "report.tsv", std::ios::app);
        full << body.rdbuf();
        body.close();
        fs::remove(tmp);
        result.test_dsc = report.mean_dsc();
        result.test_asd = report.mean_asd();
    }
    return result;
}

EvalReport cmd_evaluate(const std::string& checkpoint_path, const std::string& dataset_dir,
                        const std::string& split_manifest_path, const std::string& split_section,
                        const std::string& model_section, const std::string& report_path) {
    LoadedCheckpoint lc = load_checkpoint(checkpoint_path);
    const ModelState* model = nullptr;
    if (model_section == "teacher")
        model = &lc.state.teacher;
    else if (model_section == "student")
        model = &lc.state.student;
    else
        throw std::invalid_argument("model section must be 'teacher' or 'student'");

    SplitManifest splits = read_split_manifest(split_manifest_path);
    const std::vector<std::string>* ids = nullptr;
    if (split_section == "labeled")
        ids = &splits.labeled_ids;
    else if (split_section == "unlabeled")
        ids = &splits.unlabeled_ids;
    else if (split_section == "test")
        ids = &splits.test_ids;
    else
        throw std::invalid_argument("split section must be labeled, unlabeled or test");
    if (ids->empty()) throw std::invalid_argument("requested split section is empty");

    EvalReport report = evaluate_model(*model, lc.config, dataset_dir, *ids);
    if (!report_path.empty()) write_eval_report(report, report_path);
    return report;
}

namespace {

struct AblateRun {
    std::string variant;
    int seed_rep;
    TrainConfig cfg;
    double dsc = 0.0;
    double asd = 0.0;
};

void run_one(AblateRun& run) {
    TrainResult r = cmd_train(run.cfg);
    run.dsc = r.test_dsc;
    run.asd = r.test_asd;
}

std::pair<double, double> parse_report_mean(const std::string& report_path) {
    std::ifstream in(report_path);
    if (!in) throw std::runtime_error("missing run report: " + report_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("mean\t", 0) == 0) {
            std::istringstream is(line);
            std::string tag;
            double d, a;
            is >> tag >> d >> a;
            return {d, a};
        }
    }
    throw std::runtime_error("no mean row in report: " + report_path);
}

}  // namespace

void cmd_ablate(const TrainConfig& cfg) {
    cfg.validate();
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);

    struct Variant {
        const char* name;
        bool use_russ;
        bool use_sa;
    };
    const Variant variants[] = {{"all", true, true}, {"wo_russ", false, true},
                                {"wo_sa", true, false}};

    std::vector<AblateRun> runs;
    for (int rep = 0; rep < cfg.ablate_seeds; ++rep)
        for (const auto& v : variants) {
            AblateRun r;
            r.variant = v.name;
            r.seed_rep = rep;
            r.cfg = cfg;
            r.cfg.use_russ = v.use_russ;
            r.cfg.net.use_spatial_attention = v.use_sa;
            // shared seeds within a repetition, distinct across repetitions
            r.cfg.init_seed = derive_seed(cfg.init_seed, "ablate_init", rep);
            r.cfg.train_seed = derive_seed(cfg.train_seed, "ablate_train", rep);
            r.cfg.out_dir =
                (out_dir / (std::string(v.name) + "_seed" + std::to_string(rep))).string();
            runs.push_back(std::move(r));
        }

    if (cfg.ablate_jobs <= 1) {
        for (auto& r : runs) {
            std::cerr << "[ablate] " << r.variant << " seed " << r.seed_rep << "\n";
            run_one(r);
        }
    } else {
        // opt-in concurrency: independent child processes, one per run
        std::size_t next = 0;
        while (next < runs.size()) {
            std::vector<std::pair<pid_t, std::size_t>> active;
            for (int j = 0; j < cfg.ablate_jobs && next < runs.size(); ++j, ++next) {
                pid_t pid = fork();
                if (pid < 0) throw std::runtime_error("fork failed");
                if (pid == 0) {
                    try {
                        run_one(runs[next]);
                    } catch (const std::exception& e) {
                        std::cerr << "ablate child failed: " << e.what() << "\n";
                        _exit(1);
                    }
                    _exit(0);
                }
                active.emplace_back(pid, next);
            }
            for (auto& [pid, idx] : active) {
                int status = 0;
                waitpid(pid, &status, 0);
                if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
                    throw std::runtime_error("ablation run failed: " + runs[idx].cfg.out_dir);
                auto [d, a] = parse_report_mean(runs[idx].cfg.out_dir + "/report.tsv");
                runs[idx].dsc = d;
                runs[idx].asd = a;
            }
        }
    }

    std::ofstream rep(out_dir / "ablation_report.tsv", std::ios::trunc);
    std::ofstream plot(out_dir / "ablation_plot.dat", std::ios::trunc);
    rep.precision(9);
    plot.precision(9);
    rep << "variant\tseed\tdsc\tasd\n";
    for (const auto& r : runs)
        rep << r.variant << "\t" << r.seed_rep << "\t" << r.dsc << "\t" << r.asd << "\n";
    for (const auto& v : variants) {
        std::vector<double> ds, as;
        for (const auto& r : runs)
            if (r.variant == v.name) {
                ds.push_back(r.dsc);
                as.push_back(r.asd);
            }
        auto mean = [](const std::vector<double>& x) {
            double s = 0.0;
            for (double v2 : x) s += v2;
            return s / x.size();
        };
        auto stdev = [&](const std::vector<double>& x) {
            const double m = mean(x);
            double s = 0.0;
            for (double v2 : x) s += (v2 - m) * (v2 - m);
            return std::sqrt(s / x.size());
        };
        rep << v.name << "\tmean±std\t" << mean(ds) << "±" << stdev(ds) << "\t" << mean(as)
            << "±" << stdev(as) << "\n";
        plot << v.name << "\tdsc_mean\t" << mean(ds) << "\n";
        plot << v.name << "\tdsc_std\t" << stdev(ds) << "\n";
        plot << v.name << "\tasd_mean\t" << mean(as) << "\n";
        plot << v.name << "\tasd_std\t" << stdev(as) << "\n";
    }
}

}  // namespace lesen
