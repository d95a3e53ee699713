#ifndef LESIONLAB_IO_HPP
#define LESIONLAB_IO_HPP

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lesionlab/censor.hpp"
#include "lesionlab/errors.hpp"
#include "lesionlab/losses.hpp"
#include "lesionlab/metrics.hpp"
#include "lesionlab/phantom.hpp"
#include "lesionlab/segnet.hpp"
#include "lesionlab/volume.hpp"

// Persistence layer. Numeric rasters are raw little-endian arrays (float32
// or uint8); every raster has a JSON sidecar describing its geometry.
// Structured records (plans, configs, results, manifests) are JSON with
// insertion-ordered keys so identical inputs serialize to identical bytes.
//
// Byte layouts:
//   volume  <name>.f32    float32, index ((c*nz + z)*ny + y)*nx + x
//   labels  <name>.u8     uint8, index (z*ny + y)*nx + x; 0 = background,
//                         otherwise lesion id + 1
//   mask    <name>.u8     uint8, same index; 0/1
//   prob    <name>.f32    float32, same index
//   params  p###.f32      float32, row-major over the manifest shape

namespace lesionlab::io {

static_assert(std::endian::native == std::endian::little,
              "rasters are written as native little-endian bytes");

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Raw bytes and JSON files

template <typename T>
void write_raw(const fs::path& path, const T* data, std::size_t count) {
    static_assert(std::is_arithmetic_v<T>);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ComputeError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
    if (!f) throw ComputeError("short write to " + path.string());
}

template <typename T>
std::vector<T> read_raw(const fs::path& path, std::size_t expected_count) {
    static_assert(std::is_arithmetic_v<T>);
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw ConfigError("cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(f.tellg());
    if (bytes != expected_count * sizeof(T))
        throw ConfigError(path.string() + ": expected " +
                          std::to_string(expected_count * sizeof(T)) + " bytes, found " +
                          std::to_string(bytes));
    std::vector<T> out(expected_count);
    f.seekg(0);
    f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw ConfigError("short read from " + path.string());
    return out;
}

inline void save_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ComputeError("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw ComputeError("short write to " + path.string());
}

inline std::string load_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline void save_json(const fs::path& path, const json& j) { save_text(path, j.dump(2) + "\n"); }

inline json load_json(const fs::path& path) {
    try {
        return json::parse(load_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
}

// Shortest round-trip decimal form, identical to the JSON encoding.
inline std::string number(double v) { return json(v).dump(); }

// ---------------------------------------------------------------------------
// Config/record <-> JSON

inline json to_json(const PhantomSpec& s) {
    json j;
    j["dims"] = {s.dims.nx, s.dims.ny, s.dims.nz};
    j["spacing"] = {s.spacing.sx, s.spacing.sy, s.spacing.sz};
    j["channels"] = s.channels;
    j["lesions_min"] = s.lesions_min;
    j["lesions_max"] = s.lesions_max;
    j["radius_mm_lo"] = s.radius_mm_lo;
    j["radius_mm_hi"] = s.radius_mm_hi;
    j["radius2_mm_lo"] = s.radius2_mm_lo;
    j["radius2_mm_hi"] = s.radius2_mm_hi;
    j["radius2_fraction"] = s.radius2_fraction;
    j["radius2_contrast_lo"] = s.radius2_contrast_lo;
    j["radius2_contrast_hi"] = s.radius2_contrast_hi;
    j["contrast_lo"] = s.contrast_lo;
    j["contrast_hi"] = s.contrast_hi;
    j["contrast2_lo"] = s.contrast2_lo;
    j["contrast2_hi"] = s.contrast2_hi;
    j["contrast2_fraction"] = s.contrast2_fraction;
    j["background_amplitude"] = s.background_amplitude;
    j["noise_sigma"] = s.noise_sigma;
    j["mimics_min"] = s.mimics_min;
    j["mimics_max"] = s.mimics_max;
    j["mimic_radius_mm_lo"] = s.mimic_radius_mm_lo;
    j["mimic_radius_mm_hi"] = s.mimic_radius_mm_hi;
    j["mimic_contrast_lo"] = s.mimic_contrast_lo;
    j["mimic_contrast_hi"] = s.mimic_contrast_hi;
    j["mimic2_fraction"] = s.mimic2_fraction;
    j["mimic2_radius_mm_lo"] = s.mimic2_radius_mm_lo;
    j["mimic2_radius_mm_hi"] = s.mimic2_radius_mm_hi;
    j["mimic2_contrast_lo"] = s.mimic2_contrast_lo;
    j["mimic2_contrast_hi"] = s.mimic2_contrast_hi;
    j["seed"] = s.seed;
    j["test_bands"] = json::array();
    for (const auto& b : s.test_bands) j["test_bands"].push_back({b.first, b.second});
    return j;
}

inline PhantomSpec phantom_spec_from_json(const json& j) {
    try {
        PhantomSpec s;
        s.dims = {j.at("dims").at(0), j.at("dims").at(1), j.at("dims").at(2)};
        s.spacing = {j.at("spacing").at(0), j.at("spacing").at(1), j.at("spacing").at(2)};
        s.channels = j.at("channels");
        s.lesions_min = j.at("lesions_min");
        s.lesions_max = j.at("lesions_max");
        s.radius_mm_lo = j.at("radius_mm_lo");
        s.radius_mm_hi = j.at("radius_mm_hi");
        if (j.contains("radius2_mm_lo")) s.radius2_mm_lo = j.at("radius2_mm_lo");
        if (j.contains("radius2_mm_hi")) s.radius2_mm_hi = j.at("radius2_mm_hi");
        if (j.contains("radius2_fraction")) s.radius2_fraction = j.at("radius2_fraction");
        if (j.contains("radius2_contrast_lo")) s.radius2_contrast_lo = j.at("radius2_contrast_lo");
        if (j.contains("radius2_contrast_hi")) s.radius2_contrast_hi = j.at("radius2_contrast_hi");
        s.contrast_lo = j.at("contrast_lo");
        s.contrast_hi = j.at("contrast_hi");
        if (j.contains("contrast2_lo")) s.contrast2_lo = j.at("contrast2_lo");
        if (j.contains("contrast2_hi")) s.contrast2_hi = j.at("contrast2_hi");
        if (j.contains("contrast2_fraction")) s.contrast2_fraction = j.at("contrast2_fraction");
        s.background_amplitude = j.at("background_amplitude");
        s.noise_sigma = j.at("noise_sigma");
        if (j.contains("mimics_min")) s.mimics_min = j.at("mimics_min");
        if (j.contains("mimics_max")) s.mimics_max = j.at("mimics_max");
        if (j.contains("mimic_radius_mm_lo")) s.mimic_radius_mm_lo = j.at("mimic_radius_mm_lo");
        if (j.contains("mimic_radius_mm_hi")) s.mimic_radius_mm_hi = j.at("mimic_radius_mm_hi");
        if (j.contains("mimic_contrast_lo")) s.mimic_contrast_lo = j.at("mimic_contrast_lo");
        if (j.contains("mimic_contrast_hi")) s.mimic_contrast_hi = j.at("mimic_contrast_hi");
        if (j.contains("mimic2_fraction")) s.mimic2_fraction = j.at("mimic2_fraction");
        if (j.contains("mimic2_radius_mm_lo")) s.mimic2_radius_mm_lo = j.at("mimic2_radius_mm_lo");
        if (j.contains("mimic2_radius_mm_hi")) s.mimic2_radius_mm_hi = j.at("mimic2_radius_mm_hi");
        if (j.contains("mimic2_contrast_lo")) s.mimic2_contrast_lo = j.at("mimic2_contrast_lo");
        if (j.contains("mimic2_contrast_hi")) s.mimic2_contrast_hi = j.at("mimic2_contrast_hi");
        s.seed = j.at("seed");
        if (j.contains("test_bands")) {
            const auto& tb = j.at("test_bands");
            if (tb.size() != s.test_bands.size())
                throw ConfigError("phantom spec: test_bands must list " +
                                  std::to_string(s.test_bands.size()) + " bands");
            for (std::size_t i = 0; i < s.test_bands.size(); ++i)
                s.test_bands[i] = {tb.at(i).at(0), tb.at(i).at(1)};
        }
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("phantom spec: ") + e.what());
    }
}

inline json to_json(const LossSpec& s) {
    json j;
    j["kind"] = loss_kind_name(s.kind);
    j["alpha"] = s.alpha;
    j["beta"] = s.beta;
    return j;
}

inline LossSpec loss_spec_from_json(const json& j) {
    try {
        LossSpec s;
        s.kind = loss_kind_from(j.at("kind"));
        if (j.contains("alpha")) s.alpha = j.at("alpha");
        if (j.contains("beta")) s.beta = j.at("beta");
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("loss spec: ") + e.what());
    }
}

inline json to_json(const ModelConfig& m) {
    json j;
    j["context_slices"] = m.context_slices;
    j["channels_per_slice"] = m.channels_per_slice;
    j["layers"] = json::array();
    for (const auto& l : m.layers) j["layers"].push_back({{"filters", l.filters}, {"kernel", l.kernel}});
    j["output_bias_prior"] = m.output_bias_prior;
    return j;
}

inline ModelConfig model_config_from_json(const json& j) {
    try {
        ModelConfig m;
        if (j.contains("context_slices")) m.context_slices = j.at("context_slices");
        if (j.contains("channels_per_slice")) m.channels_per_slice = j.at("channels_per_slice");
        if (j.contains("layers")) {
            m.layers.clear();
            for (const auto& l : j.at("layers"))
                m.layers.push_back({l.at("filters"), l.at("kernel")});
        }
        if (j.contains("output_bias_prior")) m.output_bias_prior = j.at("output_bias_prior");
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
}

inline json to_json(const TrainConfig& t) {
    json j;
    j["epochs"] = t.epochs;
    j["batch_size"] = t.batch_size;
    j["lr"] = t.lr;
    j["l2"] = t.l2;
    j["lr_decay_gamma"] = t.lr_decay_gamma;
    j["lr_decay_every"] = t.lr_decay_every;
    j["momentum"] = t.momentum;
    j["frames_per_epoch"] = t.frames_per_epoch;
    j["bootstrap_warmup"] = t.bootstrap_warmup;
    j["warmup_alpha"] = t.warmup_alpha;
    j["seed"] = t.seed;
    j["selection"] = selection_metric_name(t.selection);
    return j;
}

inline TrainConfig train_config_from_json(const json& j) {
    try {
        TrainConfig t;
        if (j.contains("epochs")) t.epochs = j.at("epochs");
        if (j.contains("batch_size")) t.batch_size = j.at("batch_size");
        if (j.contains("lr")) t.lr = j.at("lr");
        if (j.contains("l2")) t.l2 = j.at("l2");
        if (j.contains("lr_decay_gamma")) t.lr_decay_gamma = j.at("lr_decay_gamma");
        if (j.contains("lr_decay_every")) t.lr_decay_every = j.at("lr_decay_every");
        if (j.contains("momentum")) t.momentum = j.at("momentum");
        if (j.contains("frames_per_epoch")) t.frames_per_epoch = j.at("frames_per_epoch");
        if (j.contains("bootstrap_warmup")) t.bootstrap_warmup = j.at("bootstrap_warmup");
        if (j.contains("warmup_alpha")) t.warmup_alpha = j.at("warmup_alpha");
        if (j.contains("seed")) t.seed = j.at("seed");
        if (j.contains("selection")) t.selection = selection_metric_from(j.at("selection"));
        t.validate();
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
}

inline json to_json(const CensorPlan& p) {
    json j;
    j["mode"] = censor_mode_name(p.mode);
    j["p"] = p.p;
    j["seed"] = p.seed;
    j["achieved_rate"] = p.achieved_rate;
    j["removed"] = json::array();
    for (const auto& [case_id, lesion_id] : p.removed)
        j["removed"].push_back({{"case", case_id}, {"lesion", lesion_id}});
    return j;
}

inline CensorPlan censor_plan_from_json(const json& j) {
    try {
        CensorPlan p;
        p.mode = censor_mode_from(j.at("mode"));
        p.p = j.at("p");
        p.seed = j.at("seed");
        p.achieved_rate = j.at("achieved_rate");
        for (const auto& r : j.at("removed"))
            p.removed.emplace_back(r.at("case").get<std::string>(), r.at("lesion").get<int>());
        if (!std::is_sorted(p.removed.begin(), p.removed.end()))
            throw ConfigError("censor plan: removed list must be sorted");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("censor plan: ") + e.what());
    }
}

inline void save_censor_plan(const fs::path& path, const CensorPlan& p) {
    save_json(path, to_json(p));
}

inline CensorPlan load_censor_plan(const fs::path& path) {
    return censor_plan_from_json(load_json(path));
}

// ---------------------------------------------------------------------------
// Rasters with sidecars

inline json sidecar(Dims d, Spacing sp, int channels, const char* dtype) {
    json j;
    j["dims"] = {d.nx, d.ny, d.nz};
    j["spacing"] = {sp.sx, sp.sy, sp.sz};
    j["channels"] = channels;
    j["dtype"] = dtype;
    j["order"] = "c,z,y,x (x fastest)";
    return j;
}

inline void check_sidecar_dtype(const json& j, const char* dtype, const fs::path& path) {
    if (j.at("dtype") != dtype)
        throw ConfigError(path.string() + ": dtype is " + j.at("dtype").get<std::string>() +
                          ", expected " + dtype);
}

// base -> base.f32 + base.json
inline void save_volume(const fs::path& base, const Volume4& v, std::uint64_t seed) {
    json j = sidecar(v.dims, v.spacing, v.channels, "float32");
    j["seed"] = seed;
    write_raw(fs::path(base.string() + ".f32"), v.data.data(), v.data.size());
    save_json(fs::path(base.string() + ".json"), j);
}

inline Volume4 load_volume(const fs::path& base) {
    const json j = load_json(fs::path(base.string() + ".json"));
    check_sidecar_dtype(j, "float32", base);
    Volume4 v({j.at("dims").at(0), j.at("dims").at(1), j.at("dims").at(2)},
              {j.at("spacing").at(0), j.at("spacing").at(1), j.at("spacing").at(2)},
              j.at("channels"));
    v.data = read_raw<float>(fs::path(base.string() + ".f32"), v.data.size());
    return v;
}

template <typename T>
void save_vol3(const fs::path& base, const Vol3<T>& v, Spacing sp) {
    static_assert(std::is_same_v<T, std::uint8_t> || std::is_same_v<T, float>);
    const char* dtype = std::is_same_v<T, std::uint8_t> ? "uint8" : "float32";
    const char* ext = std::is_same_v<T, std::uint8_t> ? ".u8" : ".f32";
    write_raw(fs::path(base.string() + ext), v.data.data(), v.data.size());
    save_json(fs::path(base.string() + ".json"), sidecar(v.dims, sp, 1, dtype));
}

template <typename T>
Vol3<T> load_vol3(const fs::path& base, Spacing* sp_out = nullptr) {
    static_assert(std::is_same_v<T, std::uint8_t> || std::is_same_v<T, float>);
    const char* dtype = std::is_same_v<T, std::uint8_t> ? "uint8" : "float32";
    const char* ext = std::is_same_v<T, std::uint8_t> ? ".u8" : ".f32";
    const json j = load_json(fs::path(base.string() + ".json"));
    check_sidecar_dtype(j, dtype, base);
    Vol3<T> v(Dims{j.at("dims").at(0), j.at("dims").at(1), j.at("dims").at(2)});
    v.data = read_raw<T>(fs::path(base.string() + ext), v.data.size());
    if (sp_out)
        *sp_out = {j.at("spacing").at(0), j.at("spacing").at(1), j.at("spacing").at(2)};
    return v;
}

// ---------------------------------------------------------------------------
// Cases and datasets
//
// A case persists as the intensity raster plus a lesion-id label raster;
// lesion voxel sets, volumes and centroids are reconstructed from the labels,
// so a load round-trips bit-identically.

inline Vol3<std::uint8_t> label_raster(const LesionSet& lesions, Dims dims) {
    Vol3<std::uint8_t> labels(dims, 0);
    for (const Lesion& l : lesions) {
        if (l.id < 0 || l.id > 254)
            throw ComputeError("label raster supports lesion ids 0..254, got " +
                               std::to_string(l.id));
        for (const auto& v : l.voxels)
            labels.at(v[0], v[1], v[2]) = static_cast<std::uint8_t>(l.id + 1);
    }
    return labels;
}

inline LesionSet lesions_from_labels(const Vol3<std::uint8_t>& labels, Spacing sp) {
    std::map<int, std::vector<std::array<int, 3>>> by_id;  // scan order = linear order
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
        if (!labels.data[i]) continue;
        by_id[labels.data[i] - 1].push_back(labels.dims.unindex(i));
    }
    LesionSet out;
    for (auto& [id, voxels] : by_id) {
        Lesion l;
        l.id = id;
        l.volume_mm3 = static_cast<double>(voxels.size()) * sp.voxel_mm3();
        double cx = 0, cy = 0, cz = 0;
        for (const auto& v : voxels) {
            const auto p = sp.center_mm(v[0], v[1], v[2]);
            cx += p[0];
            cy += p[1];
            cz += p[2];
        }
        const double n = static_cast<double>(voxels.size());
        l.centroid_mm = {cx / n, cy / n, cz / n};
        l.voxels = std::move(voxels);
        out.push_back(std::move(l));
    }
    return out;
}

inline void save_case(const fs::path& dir, const Case& c) {
    ensure_dir(dir);
    json j = sidecar(c.volume.dims, c.volume.spacing, c.volume.channels, "float32");
    j["id"] = c.id;
    j["split"] = split_name(c.split);
    j["case_seed"] = c.case_seed;
    j["count_lo"] = c.count_lo;
    j["count_hi"] = c.count_hi;
    j["lesions"] = json::array();
    for (const Lesion& l : c.lesions)
        j["lesions"].push_back({{"id", l.id},
                                {"voxel_count", l.voxels.size()},
                                {"volume_mm3", l.volume_mm3},
                                {"centroid_mm", {l.centroid_mm[0], l.centroid_mm[1], l.centroid_mm[2]}}});
    write_raw(dir / (c.id + ".f32"), c.volume.data.data(), c.volume.data.size());
    const auto labels = label_raster(c.lesions, c.volume.dims);
    write_raw(dir / (c.id + ".labels.u8"), labels.data.data(), labels.data.size());
    save_json(dir / (c.id + ".json"), j);
}

inline Case load_case(const fs::path& dir, const std::string& id) {
    const json j = load_json(dir / (id + ".json"));
    try {
        Case c;
        c.id = j.at("id");
        c.split = split_from(j.at("split"));
        c.case_seed = j.at("case_seed");
        c.count_lo = j.at("count_lo");
        c.count_hi = j.at("count_hi");
        c.volume = Volume4({j.at("dims").at(0), j.at("dims").at(1), j.at("dims").at(2)},
                           {j.at("spacing").at(0), j.at("spacing").at(1), j.at("spacing").at(2)},
                           j.at("channels"));
        c.volume.data = read_raw<float>(dir / (id + ".f32"), c.volume.data.size());
        Vol3<std::uint8_t> labels(c.volume.dims);
        labels.data = read_raw<std::uint8_t>(dir / (id + ".labels.u8"), labels.data.size());
        c.lesions = lesions_from_labels(labels, c.volume.spacing);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(dir.string() + "/" + id + ".json: " + e.what());
    }
}

inline void save_dataset(const fs::path& dir, const Dataset& ds) {
    ensure_dir(dir / "cases");
    json j;
    j["schema_version"] = 1;
    j["spec"] = to_json(ds.spec);
    j["cases"] = json::array();
    for (const Case& c : ds.cases) {
        j["cases"].push_back(c.id);
        save_case(dir / "cases", c);
    }
    save_json(dir / "dataset.json", j);
}

inline Dataset load_dataset(const fs::path& dir) {
    const json j = load_json(dir / "dataset.json");
    try {
        Dataset ds;
        ds.spec = phantom_spec_from_json(j.at("spec"));
        for (const auto& id : j.at("cases"))
            ds.cases.push_back(load_case(dir / "cases", id.get<std::string>()));
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(dir.string() + "/dataset.json: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Model checkpoints: one raster per parameter tensor + a manifest.

inline void save_model(const fs::path& dir, const TrainedModel<float>& m) {
    ensure_dir(dir);
    json j;
    j["schema_version"] = 1;
    j["model"] = to_json(m.model);
    j["train"] = to_json(m.train_cfg);
    j["selected_epoch"] = m.selected_epoch;
    j["history"] = json::array();
    for (const auto& e : m.history)
        j["history"].push_back(
            {{"train_loss", e.train_loss}, {"val_metric", e.val_metric}, {"lr", e.lr}});
    j["dtype"] = "float32";
    j["params"] = json::array();
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        char name[16];
        std::snprintf(name, sizeof(name), "p%03zu.f32", i);
        j["params"].push_back({{"file", name}, {"shape", m.params[i].shape}});
        write_raw(dir / name, m.params[i].data.data(), m.params[i].data.size());
    }
    save_json(dir / "manifest.json", j);
}

inline TrainedModel<float> load_model(const fs::path& dir) {
    const json j = load_json(dir / "manifest.json");
    try {
        check_sidecar_dtype(j, "float32", dir / "manifest.json");
        TrainedModel<float> m;
        m.model = model_config_from_json(j.at("model"));
        m.train_cfg = train_config_from_json(j.at("train"));
        m.selected_epoch = j.at("selected_epoch");
        for (const auto& e : j.at("history"))
            m.history.push_back({e.at("train_loss"), e.at("val_metric"), e.at("lr")});
        for (const auto& p : j.at("params")) {
            grad::Shape shape = p.at("shape").get<grad::Shape>();
            grad::Tensor<float> t = grad::Tensor<float>::zeros(shape);
            t.data = read_raw<float>(dir / p.at("file").get<std::string>(), t.data.size());
            m.params.push_back(std::move(t));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(dir.string() + "/manifest.json: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV emitters (deterministic shortest round-trip number formatting)

inline std::string pr_curve_csv(const PRCurve& pr) {
    std::string s = "threshold,precision,recall\n";
    for (const auto& p : pr.points)
        s += number(p.threshold) + "," + number(p.precision) + "," + number(p.recall) + "\n";
    return s;
}

inline std::string strata_csv(const std::vector<StrataBin>& bins) {
    std::string s = "diameter_lo_mm,diameter_hi_mm,n_gt,n_detected\n";
    for (const auto& b : bins) {
        s += number(b.lo_mm) + ",";
        s += std::isfinite(b.hi_mm) ? number(b.hi_mm) : std::string("inf");
        s += "," + std::to_string(b.n_gt) + "," + std::to_string(b.n_detected) + "\n";
    }
    return s;
}

}  // namespace lesionlab::io

#endif  // LESIONLAB_IO_HPP
