// Command-line front end for the lesion-censoring laboratory.
//
// Verbs:
//   generate    synthesize a phantom dataset and save it
//   censor      build and save a censoring plan for the dataset
//   train       train one grid cell and save the checkpoint
//   evaluate    evaluate a saved checkpoint on the test split
//   experiment  run the full loss grid end to end
//   sweep       run the grid once per training-cohort size
//   plot        re-emit SVG plots from saved results
//
// Exit codes: 0 success, 1 configuration error, 2 runtime/divergence error.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lesionlab/runner.hpp"

namespace {

using namespace lesionlab;

void print_result_row(const ExperimentResult& r) {
    std::printf("  %-34s mAP %.3f [%.3f, %.3f]  max_sens %.3f  tp_dice %.3f  H(les) %.3f\n",
                (r.cell + " (" + r.loss.label() + ")").c_str(), r.map, r.ci_lo, r.ci_hi,
                r.max_sensitivity, r.tp_dice_mean, r.lesion_entropy);
}

int run(int argc, char** argv) {
    CLI::App app{"lesionlab: phantom lesion segmentation under censored labels"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    bool force = false;
    int threads = 1;
    app.add_option("--config", config_path, "Experiment config JSON path");
    app.add_option("--seed", seed, "Override the master and phantom seeds");
    app.add_option("--out", out, "Output directory");
    app.add_flag("--force", force, "Recompute outputs that already exist");
    app.add_option("--threads", threads, "Worker threads for test-split inference")
        ->check(CLI::PositiveNumber);

    auto* cmd_generate = app.add_subcommand("generate", "Synthesize a phantom dataset");
    auto* cmd_censor = app.add_subcommand("censor", "Emit a censoring plan");
    auto* cmd_train = app.add_subcommand("train", "Train one grid cell");
    int cell = 0;
    cmd_train->add_option("--cell", cell, "Grid cell index to train")->check(CLI::NonNegativeNumber);
    auto* cmd_evaluate = app.add_subcommand("evaluate", "Evaluate a saved checkpoint");
    auto* cmd_experiment = app.add_subcommand("experiment", "Run the full loss grid");
    auto* cmd_sweep = app.add_subcommand("sweep", "Run the grid per training-cohort size");
    auto* cmd_plot = app.add_subcommand("plot", "Re-emit SVG plots from saved results");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // help/version are success; bad usage is a config error
    }

    ExperimentConfig cfg =
        config_path.empty() ? default_experiment_config() : load_experiment_config(config_path);
    if (seed) {
        cfg.seed = *seed;
        cfg.phantom.seed = *seed;
    }
    cfg.validate();
    const fs::path out_dir(out);

    if (cmd_generate->parsed()) {
        if (fs::exists(out_dir / "dataset.json") && !force) {
            std::printf("dataset already exists at %s (use --force to regenerate)\n",
                        out_dir.string().c_str());
            return 0;
        }
        const Dataset ds =
            generate_dataset(cfg.phantom, cfg.n_train, cfg.n_val, cfg.n_test);
        io::save_dataset(out_dir, ds);
        std::size_t lesions = 0;
        for (const Case& c : ds.cases) lesions += c.lesions.size();
        std::printf("wrote %zu cases (%zu lesions) to %s\n", ds.cases.size(), lesions,
                    out_dir.string().c_str());
        return 0;
    }

    if (cmd_censor->parsed()) {
        Dataset ds = materialize_dataset(cfg);
        if (cfg.subsample_train > 0)
            ds = subsample_train_split(ds, cfg.subsample_train, cfg.seed);
        const CensorPlan plan = build_plan(cfg, ds);
        io::ensure_dir(out_dir);
        io::save_censor_plan(out_dir / "censor_plan.json", plan);
        std::printf("censor plan: mode=%s p=%g removed=%zu achieved_rate=%.4f -> %s\n",
                    censor_mode_name(plan.mode), plan.p, plan.removed.size(),
                    plan.achieved_rate, (out_dir / "censor_plan.json").string().c_str());
        return 0;
    }

    if (cmd_train->parsed()) {
        if (cell >= static_cast<int>(cfg.grid.size()))
            throw ConfigError("train: --cell " + std::to_string(cell) +
                              " out of range for a grid of " + std::to_string(cfg.grid.size()));
        Dataset ds = materialize_dataset(cfg);
        if (cfg.subsample_train > 0)
            ds = subsample_train_split(ds, cfg.subsample_train, cfg.seed);
        const CensorPlan plan = materialize_plan(cfg, ds);
        TrainConfig tc = cfg.train;
        tc.seed = cfg.train_seed();
        const TrainedModel<float> model =
            train<float>(ds, plan, cfg.grid[static_cast<std::size_t>(cell)], cfg.model, tc);
        io::save_model(out_dir / "model", model);
        std::printf("trained %s: selected epoch %d (val %.5f) -> %s\n",
                    cfg.grid[static_cast<std::size_t>(cell)].label().c_str(),
                    model.selected_epoch,
                    model.history[static_cast<std::size_t>(model.selected_epoch)].val_metric,
                    (out_dir / "model").string().c_str());
        return 0;
    }

    if (cmd_evaluate->parsed()) {
        if (cfg.model_path.empty())
            throw ConfigError("evaluate: config needs model_path pointing at a checkpoint");
        const TrainedModel<float> model = io::load_model(cfg.model_path);
        const Dataset ds = materialize_dataset(cfg);
        ExperimentResult r =
            evaluate_model(model, ds.cases_in(Split::test), cfg.eval, threads);
        r.cell = "evaluate";
        r.selected_epoch = model.selected_epoch;
        r.history = model.history;
        io::ensure_dir(out_dir);
        CensorPlan plan;  // evaluation itself never censors anything
        io::save_json(out_dir / "result.json",
                      result_to_json(r, to_json(cfg), plan, model.train_cfg.seed));
        io::save_json(out_dir / "detections.json", r.per_case);
        io::save_text(out_dir / "pr.csv", io::pr_curve_csv(r.pr));
        io::save_text(out_dir / "strata.csv", io::strata_csv(r.strata));
        write_cell_plots(out_dir, r, cfg.name);
        print_result_row(r);
        return 0;
    }

    if (cmd_experiment->parsed()) {
        const auto results = run_experiment(cfg, out_dir, force, threads);
        std::printf("experiment '%s' (%zu cells) -> %s\n", cfg.name.c_str(), results.size(),
                    out_dir.string().c_str());
        for (const auto& r : results) print_result_row(r);
        return 0;
    }

    if (cmd_sweep->parsed()) {
        const auto all = run_size_sweep(cfg, out_dir, force, threads);
        for (const auto& [count, results] : all) {
            std::printf("cohort %d:\n", count);
            for (const auto& r : results) print_result_row(r);
        }
        return 0;
    }

    if (cmd_plot->parsed()) {
        const int n = emit_plots(out_dir);
        std::printf("wrote %d plot files under %s\n", n, out_dir.string().c_str());
        return 0;
    }

    throw ConfigError("no verb given");
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const lesionlab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const lesionlab::ComputeError& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    }
}
