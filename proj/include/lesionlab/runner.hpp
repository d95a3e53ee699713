#ifndef LESIONLAB_RUNNER_HPP
#define LESIONLAB_RUNNER_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lesionlab/censor.hpp"
#include "lesionlab/detect.hpp"
#include "lesionlab/errors.hpp"
#include "lesionlab/io.hpp"
#include "lesionlab/losses.hpp"
#include "lesionlab/metrics.hpp"
#include "lesionlab/phantom.hpp"
#include "lesionlab/segnet.hpp"
#include "lesionlab/svg.hpp"

// Experiment orchestration: config-driven generate -> censor -> train ->
// evaluate pipelines over a grid of loss settings, with per-cell persistence,
// resumability, and deterministic outputs. Training always runs
// single-threaded; --threads only parallelizes per-case test inference,
// aggregated in a fixed order, so results never depend on the thread count.

namespace lesionlab {

namespace fs = std::filesystem;

struct EvalSettings {
    double binarize_threshold = kBinarizeThreshold;
    int connectivity = 26;
    double match_tol_mm = kMatchTolMm;
    bool duplicate_tp_as_fp = false;
    int entropy_bins = 100;
    std::vector<double> strata_edges_mm = {0.0, 2.0, 4.0, 6.0, 10.0};

    void validate() const {
        if (binarize_threshold < 0.0 || binarize_threshold > 1.0)
            throw ConfigError("eval: binarize_threshold must lie in [0,1]");
        if (connectivity != 6 && connectivity != 18 && connectivity != 26)
            throw ConfigError("eval: connectivity must be 6, 18 or 26");
        if (match_tol_mm <= 0.0) throw ConfigError("eval: match_tol_mm must be positive");
        if (entropy_bins < 1) throw ConfigError("eval: entropy_bins must be positive");
        if (strata_edges_mm.size() < 2 ||
            !std::is_sorted(strata_edges_mm.begin(), strata_edges_mm.end()))
            throw ConfigError("eval: strata_edges_mm needs >= 2 ascending edges");
    }
};

struct ExperimentConfig {
    int schema_version = 1;
    std::string name = "experiment";
    std::uint64_t seed = 1;  // master seed; censor/train streams derive from it
    PhantomSpec phantom;     // carries its own dataset seed
    int n_train = 30, n_val = 5, n_test = 15;
    CensorMode censor_mode = CensorMode::none;
    double censor_p = 0.0;
    std::vector<LossSpec> grid = {LossSpec{LossKind::class_weighted, 3.0, 0.0}};
    ModelConfig model;
    TrainConfig train;  // train.seed == 0 means "derive from the master seed"
    EvalSettings eval;
    int subsample_train = 0;           // 0 = use the whole train split
    std::vector<int> sweep_counts;     // for the sweep verb
    std::string dataset_path;          // optional: load instead of generating
    std::string plan_path;             // optional: load instead of censoring
    std::string model_path;            // optional: for the evaluate verb

    std::uint64_t censor_seed() const {
        return rng::derive_stream(seed, {rng::fnv1a64("censor")});
    }
    std::uint64_t train_seed() const {
        return train.seed ? train.seed : rng::derive_stream(seed, {rng::fnv1a64("train")});
    }

    void validate() const {
        phantom.validate();
        model.validate();
        train.validate();
        eval.validate();
        if (n_train < 1 || n_val < 1 || n_test < 1)
            throw ConfigError("experiment: all three splits must be nonempty");
        if (grid.empty()) throw ConfigError("experiment: loss grid must be nonempty");
        for (const auto& l : grid) l.validate();
        if (censor_mode != CensorMode::none && (censor_p < 0.0 || censor_p > 1.0))
            throw ConfigError("experiment: censor p must lie in [0,1]");
        if (subsample_train < 0 || subsample_train > n_train)
            throw ConfigError("experiment: subsample_train must lie in [0, n_train]");
        for (int c : sweep_counts)
            if (c < 1 || c > n_train)
                throw ConfigError("sweep: counts must lie in [1, n_train], got " +
                                  std::to_string(c));
        if (model.channels_per_slice != phantom.channels)
            throw ConfigError("experiment: model channels_per_slice must equal phantom channels");
    }
};

// Defaults sized so a full grid cell (train + evaluate) runs in about a
// minute of desktop CPU time while still producing 5-15 lesions per case.
inline ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    cfg.phantom.dims = {32, 32, 32};
    cfg.phantom.spacing = {1.0, 1.0, 1.0};
    cfg.phantom.channels = 4;
    cfg.phantom.lesions_min = 5;
    cfg.phantom.lesions_max = 15;
    cfg.phantom.radius_mm_lo = 1.2;
    cfg.phantom.radius_mm_hi = 4.0;
    cfg.phantom.test_bands = {{{5, 7}, {8, 11}, {12, 15}}};
    cfg.phantom.seed = 1;
    cfg.model.context_slices = 5;
    cfg.model.channels_per_slice = 4;
    cfg.model.layers = {{16, 3}, {16, 3}, {2, 1}};
    cfg.train.epochs = 10;
    cfg.train.lr = 0.05;
    cfg.train.l2 = 1e-4;
    cfg.train.lr_decay_gamma = 0.5;
    cfg.train.lr_decay_every = 4;
    return cfg;
}

inline io::json to_json(const EvalSettings& e) {
    io::json j;
    j["binarize_threshold"] = e.binarize_threshold;
    j["connectivity"] = e.connectivity;
    j["match_tol_mm"] = e.match_tol_mm;
    j["duplicate_tp_as_fp"] = e.duplicate_tp_as_fp;
    j["entropy_bins"] = e.entropy_bins;
    j["strata_edges_mm"] = e.strata_edges_mm;
    return j;
}

inline EvalSettings eval_settings_from_json(const io::json& j) {
    try {
        EvalSettings e;
        if (j.contains("binarize_threshold")) e.binarize_threshold = j.at("binarize_threshold");
        if (j.contains("connectivity")) e.connectivity = j.at("connectivity");
        if (j.contains("match_tol_mm")) e.match_tol_mm = j.at("match_tol_mm");
        if (j.contains("duplicate_tp_as_fp")) e.duplicate_tp_as_fp = j.at("duplicate_tp_as_fp");
        if (j.contains("entropy_bins")) e.entropy_bins = j.at("entropy_bins");
        if (j.contains("strata_edges_mm"))
            e.strata_edges_mm = j.at("strata_edges_mm").get<std::vector<double>>();
        e.validate();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("eval settings: ") + ex.what());
    }
}

inline io::json to_json(const ExperimentConfig& c) {
    io::json j;
    j["schema_version"] = c.schema_version;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["phantom"] = io::to_json(c.phantom);
    j["splits"] = {{"train", c.n_train}, {"validation", c.n_val}, {"test", c.n_test}};
    j["censor"] = {{"mode", censor_mode_name(c.censor_mode)}, {"p", c.censor_p}};
    j["grid"] = io::json::array();
    for (const auto& l : c.grid) j["grid"].push_back(io::to_json(l));
    j["model"] = io::to_json(c.model);
    j["train"] = io::to_json(c.train);
    j["eval"] = to_json(c.eval);
    j["subsample_train"] = c.subsample_train;
    j["sweep_counts"] = c.sweep_counts;
    if (!c.dataset_path.empty()) j["dataset_path"] = c.dataset_path;
    if (!c.plan_path.empty()) j["plan_path"] = c.plan_path;
    if (!c.model_path.empty()) j["model_path"] = c.model_path;
    return j;
}

inline ExperimentConfig experiment_config_from_json(const io::json& j) {
    try {
        ExperimentConfig c = default_experiment_config();
        if (j.contains("schema_version") && j.at("schema_version") != 1)
            throw ConfigError("experiment config: unsupported schema_version");
        if (j.contains("name")) c.name = j.at("name");
        if (j.contains("seed")) c.seed = j.at("seed");
        if (j.contains("phantom")) c.phantom = io::phantom_spec_from_json(j.at("phantom"));
        if (j.contains("splits")) {
            c.n_train = j.at("splits").at("train");
            c.n_val = j.at("splits").at("validation");
            c.n_test = j.at("splits").at("test");
        }
        if (j.contains("censor")) {
            c.censor_mode = censor_mode_from(j.at("censor").at("mode"));
            if (j.at("censor").contains("p")) c.censor_p = j.at("censor").at("p");
        }
        if (j.contains("grid")) {
            c.grid.clear();
            for (const auto& l : j.at("grid")) c.grid.push_back(io::loss_spec_from_json(l));
        }
        if (j.contains("model")) c.model = io::model_config_from_json(j.at("model"));
        if (j.contains("train")) c.train = io::train_config_from_json(j.at("train"));
        if (j.contains("eval")) c.eval = eval_settings_from_json(j.at("eval"));
        if (j.contains("subsample_train")) c.subsample_train = j.at("subsample_train");
        if (j.contains("sweep_counts"))
            c.sweep_counts = j.at("sweep_counts").get<std::vector<int>>();
        if (j.contains("dataset_path")) c.dataset_path = j.at("dataset_path");
        if (j.contains("plan_path")) c.plan_path = j.at("plan_path");
        if (j.contains("model_path")) c.model_path = j.at("model_path");
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("experiment config: ") + ex.what());
    }
}

inline ExperimentConfig load_experiment_config(const fs::path& path) {
    return experiment_config_from_json(io::load_json(path));
}

// ---------------------------------------------------------------------------
// Evaluation

struct ExperimentResult {
    std::string cell;  // directory label of the grid cell
    LossSpec loss;
    double map = 0.0, ci_lo = 0.0, ci_hi = 0.0;
    double max_sensitivity = 0.0;
    double tp_dice_mean = 0.0;
    int n_tp_detections = 0;
    int n_gt = 0;
    long n_fp_total = 0;
    double lesion_entropy = 0.0, normal_entropy = 0.0;
    std::vector<std::size_t> lesion_hist, normal_hist;
    PRCurve pr;
    std::vector<StrataBin> strata;
    int selected_epoch = 0;
    std::vector<EpochStats> history;
    io::json per_case = io::json::array();  // detections per test case
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int k = std::min<int>(threads, static_cast<int>(n));
    pool.reserve(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace detail

// Evaluates on uncensored ground truth: detection matching, pooled PR/mAP
// with its confidence interval, max sensitivity, TP DICE, probability
// histograms with entropies, and size strata.
inline ExperimentResult evaluate_model(const TrainedModel<float>& model,
                                       const std::vector<const Case*>& test_cases,
                                       const EvalSettings& eval, int threads = 1) {
    eval.validate();
    if (test_cases.empty()) throw ConfigError("evaluate: empty test split");

    std::vector<Vol3<float>> probs(test_cases.size());
    detail::parallel_for(test_cases.size(), threads, [&](std::size_t i) {
        probs[i] = predict_volume(model, test_cases[i]->volume);
    });

    ExperimentResult r;
    r.lesion_hist.assign(static_cast<std::size_t>(eval.entropy_bins), 0);
    r.normal_hist.assign(static_cast<std::size_t>(eval.entropy_bins), 0);
    std::vector<PooledDetection> pooled;
    std::vector<GtLesionRecord> records;
    double dice_sum = 0.0;

    for (std::size_t i = 0; i < test_cases.size(); ++i) {
        const Case& c = *test_cases[i];
        const Vol3<float>& prob = probs[i];

        const auto mask = binarize(prob, eval.binarize_threshold);
        const auto comps =
            make_components(connected_components_3d(mask, eval.connectivity), prob,
                            c.volume.spacing);
        const auto res = match(comps, c.lesions, c.volume.spacing, eval.match_tol_mm);

        io::json jc;
        jc["case"] = c.id;
        jc["n_gt"] = c.lesions.size();
        jc["detections"] = io::json::array();
        for (const auto& d : res.detections) {
            pooled.push_back({d.comp.confidence, d.tp, c.id, d.matched_lesion});
            jc["detections"].push_back({{"voxels", d.comp.voxels.size()},
                                        {"centroid_mm",
                                         {d.comp.centroid_mm[0], d.comp.centroid_mm[1],
                                          d.comp.centroid_mm[2]}},
                                        {"confidence", d.comp.confidence},
                                        {"tp", d.tp},
                                        {"lesion", d.matched_lesion}});
            if (d.tp) {
                ++r.n_tp_detections;
                const Lesion* gt = nullptr;
                for (const Lesion& l : c.lesions)
                    if (l.id == d.matched_lesion) gt = &l;
                dice_sum += tp_dice(d.comp.voxels, gt->voxels);
            }
        }
        r.per_case.push_back(std::move(jc));

        for (const Lesion& l : c.lesions)
            records.push_back({l.volume_mm3, res.gt_detected.at(l.id)});

        // Voxel-class histograms over predicted lesion probability.
        Vol3<std::uint8_t> gt_mask = rasterize_mask(c.lesions, c.volume.dims);
        for (std::size_t v = 0; v < prob.data.size(); ++v) {
            const double p = std::clamp(static_cast<double>(prob.data[v]), 0.0, 1.0);
            int b = static_cast<int>(p * eval.entropy_bins);
            if (b >= eval.entropy_bins) b = eval.entropy_bins - 1;
            (gt_mask.data[v] ? r.lesion_hist : r.normal_hist)[static_cast<std::size_t>(b)]++;
        }
    }

    r.n_gt = static_cast<int>(records.size());
    r.pr = pr_curve(pooled, r.n_gt, eval.duplicate_tp_as_fp);
    r.n_fp_total = r.pr.n_fp_total;
    r.map = mean_average_precision(r.pr);
    if (r.n_fp_total >= 1) {
        const auto ci = hanley_mcneil_ci(r.map, r.n_gt, r.n_fp_total);
        r.ci_lo = ci.first;
        r.ci_hi = ci.second;
    } else {
        r.ci_lo = r.ci_hi = r.map;  // degenerate FP-free sweep
    }
    r.max_sensitivity = max_sensitivity(pooled, r.n_gt);
    r.tp_dice_mean = r.n_tp_detections ? dice_sum / r.n_tp_detections : 0.0;
    r.lesion_entropy = histogram_entropy(r.lesion_hist);
    r.normal_entropy = histogram_entropy(r.normal_hist);
    r.strata = size_strata(records, eval.strata_edges_mm);
    return r;
}

// ---------------------------------------------------------------------------
// Result persistence

inline io::json result_to_json(const ExperimentResult& r, const io::json& config_snapshot,
                               const CensorPlan& plan, std::uint64_t train_seed) {
    io::json j;
    j["schema_version"] = 1;
    j["cell"] = r.cell;
    j["loss"] = io::to_json(r.loss);
    j["censor"] = {{"mode", censor_mode_name(plan.mode)},
                   {"p", plan.p},
                   {"seed", plan.seed},
                   {"achieved_rate", plan.achieved_rate},
                   {"removed", plan.removed.size()}};
    j["train_seed"] = train_seed;
    j["map"] = r.map;
    j["map_ci95"] = {r.ci_lo, r.ci_hi};
    j["max_sensitivity"] = r.max_sensitivity;
    j["tp_dice_mean"] = r.tp_dice_mean;
    j["n_tp_detections"] = r.n_tp_detections;
    j["n_gt"] = r.n_gt;
    j["n_fp_total"] = r.n_fp_total;
    j["entropy"] = {{"lesion", r.lesion_entropy},
                    {"normal", r.normal_entropy},
                    {"bins", r.lesion_hist.size()}};
    j["lesion_hist"] = r.lesion_hist;
    j["normal_hist"] = r.normal_hist;
    j["pr"] = io::json::array();
    for (const auto& p : r.pr.points) j["pr"].push_back({p.threshold, p.precision, p.recall});
    j["strata"] = io::json::array();
    for (const auto& b : r.strata) {
        io::json jb;
        jb["lo_mm"] = b.lo_mm;
        if (std::isfinite(b.hi_mm))
            jb["hi_mm"] = b.hi_mm;
        else
            jb["hi_mm"] = nullptr;
        jb["n_gt"] = b.n_gt;
        jb["n_detected"] = b.n_detected;
        j["strata"].push_back(jb);
    }
    j["selected_epoch"] = r.selected_epoch;
    j["history"] = io::json::array();
    for (const auto& e : r.history)
        j["history"].push_back(
            {{"train_loss", e.train_loss}, {"val_metric", e.val_metric}, {"lr", e.lr}});
    j["config"] = config_snapshot;
    return j;
}

inline ExperimentResult result_from_json(const io::json& j) {
    try {
        ExperimentResult r;
        r.cell = j.at("cell");
        r.loss = io::loss_spec_from_json(j.at("loss"));
        r.map = j.at("map");
        r.ci_lo = j.at("map_ci95").at(0);
        r.ci_hi = j.at("map_ci95").at(1);
        r.max_sensitivity = j.at("max_sensitivity");
        r.tp_dice_mean = j.at("tp_dice_mean");
        r.n_tp_detections = j.at("n_tp_detections");
        r.n_gt = j.at("n_gt");
        r.n_fp_total = j.at("n_fp_total");
        r.lesion_entropy = j.at("entropy").at("lesion");
        r.normal_entropy = j.at("entropy").at("normal");
        r.lesion_hist = j.at("lesion_hist").get<std::vector<std::size_t>>();
        r.normal_hist = j.at("normal_hist").get<std::vector<std::size_t>>();
        r.pr.n_gt = r.n_gt;
        r.pr.n_fp_total = r.n_fp_total;
        for (const auto& p : j.at("pr")) r.pr.points.push_back({p.at(0), p.at(1), p.at(2)});
        for (const auto& b : j.at("strata")) {
            StrataBin sb;
            sb.lo_mm = b.at("lo_mm");
            sb.hi_mm = b.at("hi_mm").is_null() ? std::numeric_limits<double>::infinity()
                                               : b.at("hi_mm").get<double>();
            sb.n_gt = b.at("n_gt");
            sb.n_detected = b.at("n_detected");
            r.strata.push_back(sb);
        }
        r.selected_epoch = j.at("selected_epoch");
        for (const auto& e : j.at("history"))
            r.history.push_back({e.at("train_loss"), e.at("val_metric"), e.at("lr")});
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("result: ") + ex.what());
    }
}

// Filesystem-safe grid-cell label, e.g. "01_lopsided_bootstrap_a3_b0p1".
inline std::string cell_label(std::size_t index, const LossSpec& loss) {
    char num[32];
    std::snprintf(num, sizeof(num), "%02zu", index);
    const auto g = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        std::string s(buf);
        for (char& ch : s)
            if (ch == '.') ch = 'p';
        return s;
    };
    return std::string(num) + "_" + loss_kind_name(loss.kind) + "_a" + g(loss.alpha) + "_b" +
           g(loss.beta);
}

inline void write_cell_plots(const fs::path& cell_dir, const ExperimentResult& r,
                             const std::string& name) {
    io::save_text(cell_dir / "pr.svg",
                  svg::pr_curve_svg(r.pr, name + " " + r.cell + " precision-recall"));
    io::save_text(cell_dir / "histogram.svg",
                  svg::probability_histogram_svg(r.lesion_hist, r.normal_hist,
                                                 name + " " + r.cell + " probability histogram"));
    io::save_text(cell_dir / "strata.svg",
                  svg::strata_svg(r.strata, name + " " + r.cell + " detection by lesion size"));
}

// ---------------------------------------------------------------------------
// Pipeline stages shared by the CLI verbs

inline Dataset materialize_dataset(const ExperimentConfig& cfg) {
    if (!cfg.dataset_path.empty()) return io::load_dataset(cfg.dataset_path);
    return generate_dataset(cfg.phantom, cfg.n_train, cfg.n_val, cfg.n_test);
}

// Deterministically selects `count` training cases (seeded choice, original
// order preserved). count == size or 0 selects everything unchanged.
inline Dataset subsample_train_split(const Dataset& ds, int count, std::uint64_t seed) {
    const auto train_cases = ds.cases_in(Split::train);
    const int n = static_cast<int>(train_cases.size());
    if (count < 0 || count > n)
        throw ConfigError("subsample: count must lie in [0, " + std::to_string(n) + "]");
    if (count == 0 || count == n) return ds;

    std::vector<int> idx(train_cases.size());
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    rng::Stream rs(rng::derive_stream(seed, {rng::fnv1a64("subsample"), (std::uint64_t)count}));
    rs.shuffle(idx);
    idx.resize(static_cast<std::size_t>(count));
    std::sort(idx.begin(), idx.end());

    Dataset out;
    out.spec = ds.spec;
    int train_pos = 0;
    std::size_t take = 0;
    for (const Case& c : ds.cases) {
        if (c.split == Split::train) {
            if (take < idx.size() && idx[take] == train_pos) {
                out.cases.push_back(c);
                ++take;
            }
            ++train_pos;
        } else {
            out.cases.push_back(c);
        }
    }
    return out;
}

// The censoring plan covers the train and validation annotations; the test
// split never enters a plan in any code path.
inline CensorPlan build_plan(const ExperimentConfig& cfg, const Dataset& ds) {
    std::vector<const Case*> annotated = ds.cases_in(Split::train);
    for (const Case* c : ds.cases_in(Split::validation)) annotated.push_back(c);
    switch (cfg.censor_mode) {
        case CensorMode::none: {
            CensorPlan plan;
            plan.mode = CensorMode::none;
            return plan;
        }
        case CensorMode::stochastic:
            return censor_stochastic(annotated, cfg.censor_p, cfg.censor_seed());
        case CensorMode::size_based:
            return censor_size_based(annotated, cfg.censor_p);
    }
    throw ConfigError("experiment: unknown censor mode");
}

inline CensorPlan materialize_plan(const ExperimentConfig& cfg, const Dataset& ds) {
    if (!cfg.plan_path.empty()) return io::load_censor_plan(cfg.plan_path);
    return build_plan(cfg, ds);
}

// ---------------------------------------------------------------------------
// Experiment grid

// Runs every grid cell: train on censored annotations, evaluate on the
// uncensored test split, persist result JSON, CSVs, detections, checkpoint
// and plots under out/cells/<label>/. Cells whose result.json already exists
// are loaded, not retrained, unless force is set.
inline std::vector<ExperimentResult> run_experiment(const ExperimentConfig& cfg,
                                                    const fs::path& out, bool force = false,
                                                    int threads = 1) {
    cfg.validate();
    io::ensure_dir(out / "cells");
    const io::json snapshot = to_json(cfg);
    io::save_json(out / "config.json", snapshot);

    Dataset ds = materialize_dataset(cfg);
    if (cfg.subsample_train > 0) ds = subsample_train_split(ds, cfg.subsample_train, cfg.seed);
    const CensorPlan plan = materialize_plan(cfg, ds);
    io::save_censor_plan(out / "censor_plan.json", plan);

    TrainConfig tc = cfg.train;
    tc.seed = cfg.train_seed();

    std::vector<ExperimentResult> results;
    for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        const LossSpec& loss = cfg.grid[i];
        const std::string label = cell_label(i, loss);
        const fs::path cell_dir = out / "cells" / label;
        const fs::path result_path = cell_dir / "result.json";

        if (!force && fs::exists(result_path)) {
            ExperimentResult r = result_from_json(io::load_json(result_path));
            results.push_back(std::move(r));
            continue;
        }

        io::ensure_dir(cell_dir);
        TrainedModel<float> model = train<float>(ds, plan, loss, cfg.model, tc);
        io::save_model(cell_dir / "model", model);

        ExperimentResult r = evaluate_model(model, ds.cases_in(Split::test), cfg.eval, threads);
        r.cell = label;
        r.loss = loss;
        r.selected_epoch = model.selected_epoch;
        r.history = model.history;

        io::save_json(result_path, result_to_json(r, snapshot, plan, tc.seed));
        io::save_json(cell_dir / "detections.json", r.per_case);
        io::save_text(cell_dir / "pr.csv", io::pr_curve_csv(r.pr));
        io::save_text(cell_dir / "strata.csv", io::strata_csv(r.strata));
        write_cell_plots(cell_dir, r, cfg.name);
        results.push_back(std::move(r));
    }
    return results;
}

// One full grid run per subsampled training-cohort size, under
// out/sweep_<count>/, plus a flat summary CSV.
inline std::vector<std::pair<int, std::vector<ExperimentResult>>> run_size_sweep(
    const ExperimentConfig& cfg, const fs::path& out, bool force = false, int threads = 1) {
    cfg.validate();
    if (cfg.sweep_counts.empty())
        throw ConfigError("sweep: config must list sweep_counts");
    io::ensure_dir(out);

    std::vector<std::pair<int, std::vector<ExperimentResult>>> all;
    for (int count : cfg.sweep_counts) {
        ExperimentConfig sub = cfg;
        sub.subsample_train = count;
        sub.sweep_counts.clear();
        char dir_name[32];
        std::snprintf(dir_name, sizeof(dir_name), "sweep_%03d", count);
        all.emplace_back(count, run_experiment(sub, out / dir_name, force, threads));
    }

    std::string csv =
        "count,cell,loss,alpha,beta,map,ci_lo,ci_hi,max_sensitivity,tp_dice_mean\n";
    for (const auto& [count, results] : all) {
        for (const auto& r : results) {
            csv += std::to_string(count) + "," + r.cell + "," + loss_kind_name(r.loss.kind) +
                   "," + io::number(r.loss.alpha) + "," + io::number(r.loss.beta) + "," +
                   io::number(r.map) + "," + io::number(r.ci_lo) + "," + io::number(r.ci_hi) +
                   "," + io::number(r.max_sensitivity) + "," + io::number(r.tp_dice_mean) + "\n";
        }
    }
    io::save_text(out / "sweep_summary.csv", csv);
    return all;
}

// Re-emits the three SVGs for every persisted cell under `out` (top-level
// cells plus any sweep subdirectories). Returns the number of files written.
inline int emit_plots(const fs::path& out) {
    std::vector<fs::path> cell_dirs;
    const auto scan = [&cell_dirs](const fs::path& cells) {
        if (!fs::is_directory(cells)) return;
        for (const auto& e : fs::directory_iterator(cells))
            if (e.is_directory() && fs::exists(e.path() / "result.json"))
                cell_dirs.push_back(e.path());
    };
    scan(out / "cells");
    if (fs::is_directory(out))
        for (const auto& e : fs::directory_iterator(out))
            if (e.is_directory() && e.path().filename().string().rfind("sweep_", 0) == 0)
                scan(e.path() / "cells");
    std::sort(cell_dirs.begin(), cell_dirs.end());

    int written = 0;
    for (const auto& dir : cell_dirs) {
        const io::json j = io::load_json(dir / "result.json");
        ExperimentResult r = result_from_json(j);
        std::string name = "experiment";
        if (j.contains("config") && j.at("config").contains("name"))
            name = j.at("config").at("name");
        write_cell_plots(dir, r, name);
        written += 3;
    }
    return written;
}

}  // namespace lesionlab

#endif  // LESIONLAB_RUNNER_HPP
