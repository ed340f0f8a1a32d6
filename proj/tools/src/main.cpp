// attribroi command-line driver: synthesize -> train -> distill -> explain ->
// aggregate -> consensus -> report, plus a numeric selftest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "attribroi/atlas.hpp"
#include "attribroi/dataset.hpp"
#include "attribroi/errors.hpp"
#include "attribroi/gradcheck.hpp"
#include "attribroi/metrics.hpp"
#include "attribroi/model.hpp"
#include "attribroi/ops.hpp"
#include "attribroi/rng.hpp"
#include "attribroi/serialize.hpp"
#include "attribroi/synth.hpp"
#include "attribroi/trainer.hpp"
#include "attribroi/xai.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace attribroi;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumeric = 4;

void write_run_config(const fs::path& out_dir, const json& resolved) {
    json doc = resolved;
    doc["schema_version"] = 1;
    atomic_write_file(out_dir / "run_config.json", doc.dump(2) + "\n");
}

json model_config_json(const ModelConfig& m) {
    return {{"image_size", m.image_size},
            {"channels", m.channels},
            {"patch_size", m.patch_size},
            {"stage_embed_dims", m.stage_embed_dims},
            {"stage_depths", m.stage_depths},
            {"heads_per_stage", m.heads_per_stage},
            {"mlp_ratio", m.mlp_ratio},
            {"num_classes", m.num_classes},
            {"seed", m.seed}};
}

json train_config_json(const TrainConfig& t) {
    json doc = {
        {"optimizer", t.optimizer == OptimizerKind::adam ? "adam" : "adamw"},
        {"learning_rate", t.learning_rate},
        {"weight_decay", t.weight_decay},
        {"schedule", t.schedule.kind == ScheduleKind::multistep ? "multistep" : "plateau"},
        {"multistep",
         {{"interval_epochs", t.schedule.multistep.interval_epochs},
          {"factor", t.schedule.multistep.factor}}},
        {"plateau",
         {{"factor", t.schedule.plateau.factor},
          {"patience_epochs", t.schedule.plateau.patience_epochs}}},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"val_fraction", t.val_fraction},
        {"seed", t.seed},
        {"use_class_weights", t.use_class_weights},
        {"augment",
         {{"centre_crop", t.augment.centre_crop},
          {"crop_size", t.augment.crop_size},
          {"sharpen", t.augment.sharpen},
          {"colour_variation", t.augment.colour_variation},
          {"contrast", t.augment.contrast}}},
    };
    if (t.distill) {
        doc["distill"] = {{"alpha", t.distill->alpha},
                          {"temperature", t.distill->temperature}};
    }
    return doc;
}

// ---- synth ------------------------------------------------------------------

struct SynthOpts {
    std::string out;
    SynthSpec spec;
    std::vector<std::size_t> signal = {3, 7, 11};
};

int run_synth(const SynthOpts& o) {
    SynthSpec spec = o.spec;
    spec.signal_rois.clear();
    for (std::size_t id : o.signal) {
        spec.signal_rois.push_back(static_cast<std::uint16_t>(id));
    }
    validate_synth(spec);

    const RoiAtlas atlas =
        generate_atlas(spec.image_size, spec.n_rois, spec.seed, spec.grid_parcels);
    const Dataset data = generate_dataset(spec, atlas);

    const fs::path out(o.out);
    fs::create_directories(out);
    save_dataset(data, out.string());
    save_atlas(atlas, (out / "atlas.pgm").string());
    write_run_config(out, {{"command", "synth"},
                           {"image_size", spec.image_size},
                           {"n_rois", spec.n_rois},
                           {"signal_rois", spec.signal_rois},
                           {"effect_size", spec.effect_size},
                           {"noise_sigma", spec.noise_sigma},
                           {"n_per_class", spec.n_per_class},
                           {"seed", spec.seed},
                           {"grid_parcels", spec.grid_parcels}});
    std::cout << "synth: " << data.size() << " samples, " << spec.n_rois
              << " rois -> " << out.string() << "\n";
    return 0;
}

// ---- train / distill ----------------------------------------------------------

struct TrainOpts {
    std::string data, out;
    std::string preset = "student";
    std::size_t divisor = 1;
    std::string optimizer, schedule;  // overrides when set
    double lr = 0.0, wd = -1.0;
    std::size_t epochs = 0, batch = 0;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
    bool no_class_weights = false;
    std::size_t crop = 0;
    bool sharpen = false, colour = false, contrast = false;
    ModelConfig model;
    bool image_size_set = false;
    // distill only
    std::string teacher;
    double alpha = 0.5, temperature = 1.0;
};

void add_train_flags(CLI::App* cmd, TrainOpts& o) {
    cmd->add_option("--data", o.data, "dataset directory")->required();
    cmd->add_option("--out", o.out, "output directory")->required();
    cmd->add_option("--preset", o.preset, "hyperparameter preset")
        ->check(CLI::IsMember(preset_names()));
    cmd->add_option("--divisor", o.divisor, "desk-scale epoch divisor");
    cmd->add_option("--optimizer", o.optimizer)->check(CLI::IsMember({"adam", "adamw"}));
    cmd->add_option("--schedule", o.schedule)
        ->check(CLI::IsMember({"multistep", "plateau"}));
    cmd->add_option("--lr", o.lr, "learning rate override");
    cmd->add_option("--wd", o.wd, "weight decay override");
    cmd->add_option("--epochs", o.epochs, "epoch override");
    cmd->add_option("--batch", o.batch, "batch size override");
    cmd->add_option("--val-fraction", o.val_fraction);
    cmd->add_option("--seed", o.seed);
    cmd->add_flag("--no-class-weights", o.no_class_weights);
    cmd->add_option("--crop", o.crop, "centre-crop size (enables the crop)");
    cmd->add_flag("--sharpen", o.sharpen);
    cmd->add_flag("--colour", o.colour);
    cmd->add_flag("--contrast", o.contrast);
    cmd->add_option("--image-size", o.model.image_size)
        ->each([&o](const std::string&) { o.image_size_set = true; });
    cmd->add_option("--channels", o.model.channels);
    cmd->add_option("--patch", o.model.patch_size);
    cmd->add_option("--stage-dims", o.model.stage_embed_dims)->delimiter(',');
    cmd->add_option("--stage-depths", o.model.stage_depths)->delimiter(',');
    cmd->add_option("--heads", o.model.heads_per_stage)->delimiter(',');
    cmd->add_option("--mlp-ratio", o.model.mlp_ratio);
    cmd->add_option("--classes", o.model.num_classes);
}

TrainConfig resolve_train_config(const TrainOpts& o, bool with_distill) {
    TrainConfig c = preset_config(o.preset, o.divisor);
    if (!o.optimizer.empty()) {
        c.optimizer = o.optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::adamw;
    }
    if (!o.schedule.empty()) {
        c.schedule.kind = o.schedule == "multistep" ? ScheduleKind::multistep
                                                    : ScheduleKind::plateau;
    }
    if (o.lr > 0.0) c.learning_rate = o.lr;
    if (o.wd >= 0.0) c.weight_decay = o.wd;
    if (o.epochs > 0) c.epochs = o.epochs;
    if (o.batch > 0) c.batch_size = o.batch;
    c.schedule.base_lr = c.learning_rate;
    c.val_fraction = o.val_fraction;
    c.seed = o.seed;
    c.use_class_weights = !o.no_class_weights;
    c.augment.centre_crop = o.crop > 0;
    c.augment.crop_size = o.crop;
    c.augment.sharpen = o.sharpen;
    c.augment.colour_variation = o.colour;
    c.augment.contrast = o.contrast;
    if (with_distill) c.distill = DistillConfig{o.alpha, o.temperature};
    return c;
}

int run_train(const TrainOpts& o, bool with_distill) {
    const Dataset data = load_dataset(o.data);
    if (data.empty()) throw ConfigError("train: dataset " + o.data + " is empty");

    ModelConfig mc = o.model;
    if (!o.image_size_set) mc.image_size = data.samples.front().image.shape()[0];
    if (o.crop > 0) mc.image_size = o.crop;
    mc.seed = o.seed;
    validate_config(mc);

    const TrainConfig tc = resolve_train_config(o, with_distill);
    validate_train(tc);

    Model model = init_model(mc);
    std::optional<Model> teacher;
    if (with_distill) {
        teacher = load_checkpoint(o.teacher);
    }

    const TrainResult result =
        train(model, data, tc, teacher ? &*teacher : nullptr);

    const fs::path out(o.out);
    fs::create_directories(out);
    save_checkpoint(model, out / "checkpoint.json");
    atomic_write_file(out / "epochs.jsonl", epoch_log_to_jsonl(result.log));
    const Metrics final_metrics = result.log.back().val_metrics;
    atomic_write_file(out / "metrics.json", metrics_to_json(final_metrics));

    json resolved = {{"command", with_distill ? "distill" : "train"},
                     {"data", o.data},
                     {"preset", o.preset},
                     {"divisor", o.divisor},
                     {"model", model_config_json(mc)},
                     {"train", train_config_json(tc)}};
    if (with_distill) resolved["teacher"] = o.teacher;
    write_run_config(out, resolved);

    std::cout << (with_distill ? "distill" : "train") << ": " << tc.epochs
              << " epochs, final val accuracy " << round2(final_metrics.accuracy())
              << "% -> " << out.string() << "\n";
    return 0;
}

// ---- explain -----------------------------------------------------------------

struct ExplainOpts {
    std::string model, data, atlas, out;
    std::string method = "all";
    int target_class = 1;
    std::size_t limit = 0;
    std::string shap_mode = "sampled";
    std::size_t budget = 0;
    std::string baseline = "mean";
    std::string saliency_reduce = "max";
    std::uint64_t seed = 0;
};

int run_explain(const ExplainOpts& o) {
    Model model = load_checkpoint(o.model);
    const Dataset data = load_dataset(o.data);
    if (data.empty()) throw ConfigError("explain: dataset " + o.data + " is empty");
    const RoiAtlas atlas = load_atlas(o.atlas);

    const bool want_saliency = o.method == "saliency" || o.method == "all";
    const bool want_gradcam = o.method == "gradcam" || o.method == "all";
    const bool want_shap = o.method == "shap" || o.method == "all";

    ShapleyConfig shap_config;
    shap_config.mode = o.shap_mode == "exact" ? ShapMode::exact : ShapMode::sampled;
    shap_config.baseline = o.baseline == "zero" ? ShapBaseline::constant_zero
                                                : ShapBaseline::dataset_mean;
    shap_config.seed = o.seed;
    const std::size_t n_rois = roi_ids(atlas).size();
    shap_config.sample_budget = o.budget > 0 ? o.budget : 8 * n_rois;

    std::optional<Tensor> baseline_mean;
    if (want_shap && shap_config.baseline == ShapBaseline::dataset_mean) {
        baseline_mean = mean_image(data);
    }
    const SaliencyReduction reduction = o.saliency_reduce == "mean"
                                            ? SaliencyReduction::mean_abs
                                            : SaliencyReduction::max_abs;

    const fs::path out(o.out);
    if (want_saliency) fs::create_directories(out / "saliency");
    if (want_gradcam) fs::create_directories(out / "gradcam");
    if (want_shap) fs::create_directories(out / "shap");

    const std::size_t count =
        o.limit > 0 ? std::min(o.limit, data.size()) : data.size();
    for (std::size_t i = 0; i < count; ++i) {
        const Sample& s = data.samples[i];
        const Tensor input = to_model_input(s.image, model.config.channels);
        if (want_saliency) {
            const AttributionMap map =
                saliency_map(model, input, o.target_class, reduction);
            save_attribution(map, (out / "saliency" / s.subject_id).string());
        }
        if (want_gradcam) {
            const AttributionMap map = grad_cam(model, input, o.target_class);
            save_attribution(map, (out / "gradcam" / s.subject_id).string());
        }
        if (want_shap) {
            const ShapExplanation shap = shap_values(
                model, s.image, o.target_class, atlas, shap_config, baseline_mean);
            save_attribution(shap.map, (out / "shap" / s.subject_id).string());
            json scores = json::array();
            for (std::size_t r = 0; r < shap.table.scores.size(); ++r) {
                const RoiScore& sc = shap.table.scores[r];
                json row = {{"id", sc.id},
                            {"phi", sc.mean},
                            {"share", sc.share},
                            {"rank", sc.rank}};
                if (!shap.std_err.empty()) row["std_err"] = shap.std_err[r];
                scores.push_back(row);
            }
            const json table = {{"schema_version", 1},
                                {"method", "shap"},
                                {"subject_id", s.subject_id},
                                {"target_class", o.target_class},
                                {"v_empty", shap.v_empty},
                                {"v_full", shap.v_full},
                                {"efficiency_gap", shap.efficiency_gap},
                                {"scores", scores}};
            atomic_write_file(out / "shap" / (s.subject_id + ".table.json"),
                              table.dump(2) + "\n");
        }
    }

    write_run_config(out, {{"command", "explain"},
                           {"model", o.model},
                           {"data", o.data},
                           {"atlas", o.atlas},
                           {"method", o.method},
                           {"target_class", o.target_class},
                           {"limit", o.limit},
                           {"subjects", count},
                           {"shap_mode", o.shap_mode},
                           {"sample_budget", shap_config.sample_budget},
                           {"baseline", o.baseline},
                           {"saliency_reduce", o.saliency_reduce},
                           {"seed", o.seed}});
    std::cout << "explain: " << count << " subjects (" << o.method << ") -> "
              << out.string() << "\n";
    return 0;
}

// ---- aggregate ----------------------------------------------------------------

struct AggregateOpts {
    std::string maps, atlas, out;
    std::size_t k = kDefaultTopK;
};

json table_json(const RoiScoreTable& table) {
    json scores = json::array();
    for (const RoiScore& s : table.scores) {
        scores.push_back(
            {{"id", s.id}, {"mean", s.mean}, {"share", s.share}, {"rank", s.rank}});
    }
    return {{"schema_version", 1},
            {"method", table.method},
            {"subject_id", table.subject_id},
            {"scores", scores}};
}

int run_aggregate(const AggregateOpts& o) {
    const RoiAtlas atlas = load_atlas(o.atlas);
    const fs::path maps_dir(o.maps);
    const fs::path out(o.out);

    json cohort_summary = json::object();
    std::size_t methods_found = 0;
    for (const std::string method : {"saliency", "gradcam", "shap"}) {
        const fs::path dir = maps_dir / method;
        if (!fs::is_directory(dir)) continue;
        ++methods_found;

        std::vector<std::string> stems;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() == ".atsr") {
                stems.push_back((dir / entry.path().stem()).string());
            }
        }
        std::sort(stems.begin(), stems.end());
        if (stems.empty()) {
            throw ConfigError("aggregate: no maps under " + dir.string());
        }

        fs::create_directories(out / method);
        std::vector<std::vector<std::uint16_t>> subject_tops;
        for (const std::string& stem : stems) {
            const AttributionMap map = load_attribution(stem);
            RoiScoreTable table = aggregate_roi(map, atlas);
            table.subject_id = fs::path(stem).stem().string();
            atomic_write_file(out / method / (table.subject_id + ".table.json"),
                              table_json(table).dump(2) + "\n");
            subject_tops.push_back(top_rois(table, std::min(o.k, table.scores.size())));
        }

        const std::vector<RoiFrequency> freqs = roi_frequency(subject_tops);
        std::vector<std::uint16_t> cohort_top;
        for (const RoiFrequency& f : freqs) {
            if (cohort_top.size() == o.k) break;
            cohort_top.push_back(f.id);
        }
        json freq_json = json::array();
        for (const RoiFrequency& f : freqs) {
            freq_json.push_back(
                {{"id", f.id}, {"count", f.count}, {"fraction", f.fraction}});
        }
        const json cohort = {{"schema_version", 1},
                             {"method", method},
                             {"subjects", stems.size()},
                             {"k", o.k},
                             {"top", cohort_top},
                             {"frequencies", freq_json}};
        atomic_write_file(out / (method + "_cohort.json"), cohort.dump(2) + "\n");
        cohort_summary[method] = cohort_top;
    }
    if (methods_found == 0) {
        throw ConfigError("aggregate: no method directories under " + o.maps);
    }

    write_run_config(out, {{"command", "aggregate"},
                           {"maps", o.maps},
                           {"atlas", o.atlas},
                           {"k", o.k},
                           {"cohort_top", cohort_summary}});
    std::cout << "aggregate: " << methods_found << " methods -> " << out.string()
              << "\n";
    return 0;
}

// ---- consensus ----------------------------------------------------------------

struct ConsensusOpts {
    std::string aggregate, atlas, out;
};

MethodTop load_cohort(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("consensus: missing " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    MethodTop top;
    top.method = doc.at("method").get<std::string>();
    for (const auto& id : doc.at("top")) {
        top.rois.push_back(id.get<std::uint16_t>());
    }
    for (const auto& f : doc.at("frequencies")) {
        top.frequencies.push_back({f.at("id").get<std::uint16_t>(),
                                   f.at("count").get<std::size_t>(),
                                   f.at("fraction").get<double>()});
    }
    return top;
}

int run_consensus(const ConsensusOpts& o) {
    const RoiAtlas atlas = load_atlas(o.atlas);
    const fs::path agg(o.aggregate);
    const MethodTop saliency = load_cohort(agg / "saliency_cohort.json");
    const MethodTop gradcam = load_cohort(agg / "gradcam_cohort.json");
    const MethodTop shap = load_cohort(agg / "shap_cohort.json");

    const ConsensusReport report = consensus(saliency, gradcam, shap, atlas);
    const fs::path out(o.out);
    fs::create_directories(out);
    atomic_write_file(out / "consensus.json", consensus_to_json(report));
    atomic_write_file(out / "consensus.txt", consensus_to_text(report));
    write_run_config(out, {{"command", "consensus"},
                           {"aggregate", o.aggregate},
                           {"atlas", o.atlas}});

    std::cout << "consensus: " << report.threeway.size() << " three-way rois -> "
              << out.string() << "\n";
    return 0;
}

// ---- report -------------------------------------------------------------------

struct ReportOpts {
    std::string metrics, consensus, out;
};

int run_report(const ReportOpts& o) {
    std::ifstream metrics_in(o.metrics);
    if (!metrics_in) throw ConfigError("report: missing " + o.metrics);
    json metrics;
    try {
        metrics_in >> metrics;
    } catch (const json::exception& e) {
        throw ParseError(o.metrics + ": " + e.what());
    }

    const fs::path cons_txt = fs::path(o.consensus) / "consensus.txt";
    std::ifstream cons_in(cons_txt);
    if (!cons_in) throw ConfigError("report: missing " + cons_txt.string());
    std::string consensus_text((std::istreambuf_iterator<char>(cons_in)),
                               std::istreambuf_iterator<char>());

    std::ostringstream text;
    text << "classification metrics\n";
    text << "  accuracy:        " << metrics.at("accuracy").get<double>() << "\n";
    text << "  precision:       " << metrics.at("precision").get<double>() << "\n";
    text << "  recall (TPR):    " << metrics.at("recall_tpr").get<double>() << "\n";
    text << "  specificity:     " << metrics.at("specificity_tnr").get<double>() << "\n";
    text << "  FPR:             " << metrics.at("fpr").get<double>() << "\n";
    text << "  F1 score:        " << metrics.at("f1_score").get<double>() << "\n";
    text << "\n" << consensus_text;

    const fs::path out(o.out);
    fs::create_directories(out);
    atomic_write_file(out / "report.txt", text.str());
    write_run_config(out, {{"command", "report"},
                           {"metrics", o.metrics},
                           {"consensus", o.consensus}});
    std::cout << "report -> " << (out / "report.txt").string() << "\n";
    return 0;
}

// ---- selftest -----------------------------------------------------------------

bool check(bool ok, const std::string& what) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << what << "\n";
    return ok;
}

int run_selftest() {
    bool all = true;
    std::mt19937_64 rng(mix_seed(7));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    {
        Tensor x = Tensor::zeros({6});
        for (double& v : x.data()) v = unit(rng);
        const double err =
            grad_check([](const Tensor& t) { return ops::sum(ops::mul(t, t)); }, x);
        all &= check(err < 1e-7, "gradient check: quadratic form (err " +
                                     std::to_string(err) + ")");
    }
    {
        Tensor x = Tensor::zeros({3, 4});
        for (double& v : x.data()) v = unit(rng);
        Tensor w = Tensor::zeros({4, 2});
        for (double& v : w.data()) v = unit(rng);
        const Tensor gamma = Tensor::full({4}, 1.1);
        const Tensor beta = Tensor::full({4}, 0.05);
        const double err = grad_check(
            [&](const Tensor& t) {
                return ops::sum(ops::matmul(ops::gelu(ops::layer_norm(t, gamma, beta)), w));
            },
            x);
        all &= check(err < 1e-5, "gradient check: layernorm-gelu-matmul (err " +
                                     std::to_string(err) + ")");
    }
    {
        Tensor logits = Tensor::zeros({5});
        for (double& v : logits.data()) v = unit(rng);
        const Tensor probe = Tensor::full({5}, 0.3);
        const double err = grad_check(
            [&](const Tensor& t) {
                return ops::sum(ops::mul(ops::softmax(t, 0), probe));
            },
            logits);
        all &= check(err < 1e-6,
                     "gradient check: softmax (err " + std::to_string(err) + ")");
    }

    {
        constexpr std::size_t n = 6;
        std::vector<double> v(1 << n);
        std::mt19937_64 game_rng(mix_seed(11));
        for (double& x : v) x = std::uniform_real_distribution<double>(0, 1)(game_rng);
        const auto game = [&](const std::vector<bool>& coalition) {
            std::size_t mask = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (coalition[i]) mask |= std::size_t{1} << i;
            }
            return v[mask];
        };
        const ShapleyResult r = shapley_exact(n, game);
        double total = 0.0;
        for (double phi : r.phi) total += phi;
        all &= check(std::abs(total - (r.v_full - r.v_empty)) < 1e-9,
                     "shapley: efficiency on a random 6-player game");

        const auto dummy_game = [&](const std::vector<bool>& coalition) {
            auto rest = coalition;
            rest[0] = false;
            return game(rest) + (coalition[0] ? 0.25 : 0.0);
        };
        const ShapleyResult rd = shapley_exact(n, dummy_game);
        all &= check(std::abs(rd.phi[0] - 0.25) < 1e-9,
                     "shapley: dummy player worth exactly its constant");

        const auto sym_game = [](const std::vector<bool>& coalition) {
            const int pair = static_cast<int>(coalition[1]) + static_cast<int>(coalition[2]);
            double x = 0.4 * pair + (coalition[0] ? 1.3 : 0.0);
            for (std::size_t i = 3; i < coalition.size(); ++i) {
                if (coalition[i]) x += 0.1 * static_cast<double>(i);
            }
            return x;
        };
        const ShapleyResult rs = shapley_exact(n, sym_game);
        all &= check(std::abs(rs.phi[1] - rs.phi[2]) < 1e-9,
                     "shapley: symmetric players get equal value");

        const auto game_b = [&](const std::vector<bool>& coalition) {
            return 2.0 * game(coalition) + sym_game(coalition);
        };
        const ShapleyResult ra = shapley_exact(n, game_b);
        bool additive = true;
        for (std::size_t i = 0; i < n; ++i) {
            additive &= std::abs(ra.phi[i] - (2.0 * r.phi[i] + rs.phi[i])) < 1e-9;
        }
        all &= check(additive, "shapley: additivity over game sums");
    }

    std::cout << (all ? "selftest passed" : "selftest FAILED") << "\n";
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical-vit distillation + ROI attribution toolkit"};
    app.require_subcommand(1);

    SynthOpts synth_opts;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a planted-signal dataset");
    synth_cmd->add_option("--out", synth_opts.out)->required();
    synth_cmd->add_option("--size", synth_opts.spec.image_size);
    synth_cmd->add_option("--rois", synth_opts.spec.n_rois);
    synth_cmd->add_option("--signal", synth_opts.signal)->delimiter(',');
    synth_cmd->add_option("--n", synth_opts.spec.n_per_class);
    synth_cmd->add_option("--seed", synth_opts.spec.seed);
    synth_cmd->add_option("--effect", synth_opts.spec.effect_size);
    synth_cmd->add_option("--noise", synth_opts.spec.noise_sigma);
    synth_cmd->add_flag("--grid", synth_opts.spec.grid_parcels, "grid parcels");

    TrainOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "fine-tune a model");
    add_train_flags(train_cmd, train_opts);

    TrainOpts distill_opts;
    CLI::App* distill_cmd =
        app.add_subcommand("distill", "fine-tune a student against a teacher");
    add_train_flags(distill_cmd, distill_opts);
    distill_cmd->add_option("--teacher", distill_opts.teacher, "teacher checkpoint")
        ->required();
    distill_cmd->add_option("--alpha", distill_opts.alpha, "model-loss weight");
    distill_cmd->add_option("--temperature", distill_opts.temperature);

    ExplainOpts explain_opts;
    CLI::App* explain_cmd = app.add_subcommand("explain", "attribution maps");
    explain_cmd->add_option("--model", explain_opts.model)->required();
    explain_cmd->add_option("--data", explain_opts.data)->required();
    explain_cmd->add_option("--atlas", explain_opts.atlas)->required();
    explain_cmd->add_option("--out", explain_opts.out)->required();
    explain_cmd->add_option("--method", explain_opts.method)
        ->check(CLI::IsMember({"saliency", "gradcam", "shap", "all"}));
    explain_cmd->add_option("--class", explain_opts.target_class);
    explain_cmd->add_option("--limit", explain_opts.limit, "0 = every subject");
    explain_cmd->add_option("--shap-mode", explain_opts.shap_mode)
        ->check(CLI::IsMember({"exact", "sampled"}));
    explain_cmd->add_option("--budget", explain_opts.budget,
                            "marginal evaluations (0 = 8 per roi)");
    explain_cmd->add_option("--baseline", explain_opts.baseline)
        ->check(CLI::IsMember({"mean", "zero"}));
    explain_cmd->add_option("--saliency-reduce", explain_opts.saliency_reduce)
        ->check(CLI::IsMember({"max", "mean"}));
    explain_cmd->add_option("--seed", explain_opts.seed);

    AggregateOpts agg_opts;
    CLI::App* agg_cmd = app.add_subcommand("aggregate", "per-roi score tables");
    agg_cmd->add_option("--maps", agg_opts.maps)->required();
    agg_cmd->add_option("--atlas", agg_opts.atlas)->required();
    agg_cmd->add_option("--out", agg_opts.out)->required();
    agg_cmd->add_option("--k", agg_opts.k, "top-k list length");

    ConsensusOpts cons_opts;
    CLI::App* cons_cmd = app.add_subcommand("consensus", "cross-method intersections");
    cons_cmd->add_option("--aggregate", cons_opts.aggregate)->required();
    cons_cmd->add_option("--atlas", cons_opts.atlas)->required();
    cons_cmd->add_option("--out", cons_opts.out)->required();

    ReportOpts report_opts;
    CLI::App* report_cmd = app.add_subcommand("report", "metrics + consensus bundle");
    report_cmd->add_option("--metrics", report_opts.metrics)->required();
    report_cmd->add_option("--consensus", report_opts.consensus)->required();
    report_cmd->add_option("--out", report_opts.out)->required();

    CLI::App* selftest_cmd =
        app.add_subcommand("selftest", "gradient and shapley-axiom checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*synth_cmd) return run_synth(synth_opts);
        if (*train_cmd) return run_train(train_opts, false);
        if (*distill_cmd) return run_train(distill_opts, true);
        if (*explain_cmd) return run_explain(explain_opts);
        if (*agg_cmd) return run_aggregate(agg_opts);
        if (*cons_cmd) return run_consensus(cons_opts);
        if (*report_cmd) return run_report(report_opts);
        if (*selftest_cmd) return run_selftest();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TrainAbort& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
