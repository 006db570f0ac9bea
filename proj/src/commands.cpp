#include "latdis/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "latdis/checkpoint.hpp"
#include "latdis/dataset_io.hpp"
#include "latdis/detector.hpp"
#include "latdis/errors.hpp"
#include "latdis/metrics.hpp"
#include "latdis/parallel.hpp"
#include "latdis/rng.hpp"
#include "latdis/vae_train.hpp"

namespace latdis {

namespace {

using nlohmann::json;

constexpr std::uint64_t kTrainTag = 0x54524E00ULL;
constexpr std::uint64_t kCvTag = 0x43560000ULL;

std::string slice_id_of(const SliceImage& img) {
    return "s" + std::to_string(img.subject) + "_k" + std::to_string(img.slice_index);
}

std::size_t count_lesions(const DatasetSplit& split) {
    std::size_t n = 0;
    for (const auto* part : {&split.train, &split.validation, &split.test})
        for (const auto& ls : *part) n += ls.image.lesion_px > 0;
    return n;
}

json split_counts(const DatasetSplit& split) {
    return json{{"train", split.train.size()},
                {"validation", split.validation.size()},
                {"test", split.test.size()},
                {"lesion_slices", count_lesions(split)}};
}

std::vector<const LabeledSlice*> select_split(const DatasetSplit& data,
                                              const std::string& split) {
    std::vector<const LabeledSlice*> out;
    auto add = [&](const std::vector<LabeledSlice>& part) {
        for (const auto& ls : part) out.push_back(&ls);
    };
    if (split == "all" || split == "train") add(data.train);
    if (split == "all" || split == "val" || split == "valtest") add(data.validation);
    if (split == "all" || split == "test" || split == "valtest") add(data.test);
    if (split != "all" && split != "train" && split != "val" && split != "test" &&
        split != "valtest")
        throw ConfigError("unknown split '" + split + "', expected train|val|test|valtest|all");
    return out;
}

// One parsed score record; a missing value is NaN.
struct ScoreRecord {
    std::string slice_id;
    std::uint32_t lesion_px = 0;
    double latent = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
};

std::vector<ScoreRecord> read_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scores file '" + path + "'");
    std::vector<ScoreRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
        }
        ScoreRecord rec;
        rec.slice_id = j.value("slice_id", "line" + std::to_string(lineno));
        rec.lesion_px = j.value("lesion_px", 0u);
        if (j.contains("latent")) rec.latent = j.at("latent").get<double>();
        if (j.contains("residual")) rec.residual = j.at("residual").get<double>();
        if (j.contains("score") && j.contains("scorer")) {
            const std::string kind = j.at("scorer").get<std::string>();
            if (kind == "latent") rec.latent = j.at("score").get<double>();
            if (kind == "residual") rec.residual = j.at("score").get<double>();
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw DataError(path + ": no score records");
    return records;
}

std::vector<double> scores_of_kind(const std::vector<ScoreRecord>& records,
                                   const std::string& kind, const std::string& path) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        const double v = kind == "latent" ? r.latent : r.residual;
        if (std::isnan(v))
            throw DataError(path + ": record '" + r.slice_id + "' has no " + kind + " score");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> requested_scorers(const std::string& scorer) {
    if (scorer == "all") return {"latent", "residual"};
    if (scorer == "latent" || scorer == "residual") return {scorer};
    throw ConfigError("unknown scorer '" + scorer + "', expected latent|residual|all");
}

json fold_json(const FoldMetrics& f) {
    return json{{"roc_auc", f.roc_auc},
                {"accuracy", f.accuracy},
                {"f1", f.f1},
                {"percentile", f.percentile},
                {"threshold", f.threshold}};
}

}  // namespace

void cmd_generate(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    auto [healthy, unlabelled] = make_dataset(cfg.phantom);

    const auto dir = std::filesystem::path(cfg.output_dir);
    save_dataset(healthy, (dir / "healthy.ldsd").string());
    save_dataset(unlabelled, (dir / "unlabelled.ldsd").string());

    json manifest{{"seed", cfg.seed},
                  {"phantom",
                   {{"native_resolution", cfg.phantom.native_resolution},
                    {"output_resolution", cfg.phantom.output_resolution},
                    {"subjects_per_cohort", cfg.phantom.subjects_per_cohort},
                    {"slices_per_subject", cfg.phantom.slices_per_subject},
                    {"lesion_probability", cfg.phantom.lesion_probability},
                    {"seed", cfg.phantom.seed}}},
                  {"healthy", split_counts(healthy)},
                  {"unlabelled", split_counts(unlabelled)},
                  {"files", {{"healthy", "healthy.ldsd"}, {"unlabelled", "unlabelled.ldsd"}}}};
    atomic_write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

void cmd_train(const RunConfig& cfg, const TrainOptions& opt) {
    const bool is_healthy = opt.cohort == "healthy";
    if (!is_healthy && opt.cohort != "unlabelled")
        throw ConfigError("unknown cohort '" + opt.cohort + "', expected healthy or unlabelled");
    if (opt.out_path.empty()) throw ConfigError("train: missing checkpoint output path");

    const ModelConfig& mc = is_healthy ? cfg.vae_h : cfg.vae;
    TrainConfig tc = mc.train;
    if (!opt.variant.empty()) tc.variant = parse_variant(opt.variant);
    tc.seed = derive_seed(cfg.seed, kTrainTag, is_healthy ? 0 : 1);
    tc.threads = cfg.threads;

    const std::string data_path =
        opt.data_path.empty()
            ? (std::filesystem::path(cfg.output_dir) / (opt.cohort + ".ldsd")).string()
            : opt.data_path;
    DatasetSplit data = load_dataset(data_path);
    if (data.train.empty()) throw DataError(data_path + ": dataset has no training slices");
    if (data.train.front().image.height != mc.arch.input_extent)
        throw DataError(data_path + ": slice extent " +
                        std::to_string(data.train.front().image.height) +
                        " does not match configured input extent " +
                        std::to_string(mc.arch.input_extent));

    VaeModel model = VaeModel::create(mc.arch, derive_seed(tc.seed, 0x494E4954ULL));
    auto curve = train(model, data.train, data.validation, tc);

    CheckpointMeta meta;
    meta.epochs_run = static_cast<std::uint32_t>(curve.size());
    meta.final_loss = curve.empty() ? 0.0 : curve.back().train_loss;
    meta.seed = tc.seed;
    save_checkpoint(model, meta, opt.out_path);

    std::string curve_text;
    for (const auto& rec : curve) {
        json line{{"epoch", rec.epoch},
                  {"train_loss", rec.train_loss},
                  {"val_loss", rec.val_loss}};
        curve_text += line.dump() + "\n";
    }
    atomic_write_file(opt.out_path + ".loss.jsonl", curve_text);
}

void cmd_score(const RunConfig& cfg, const ScoreOptions& opt) {
    const auto scorers = requested_scorers(opt.scorer);
    const bool want_latent =
        std::find(scorers.begin(), scorers.end(), "latent") != scorers.end();
    const bool want_residual =
        std::find(scorers.begin(), scorers.end(), "residual") != scorers.end();

    auto [vae_h, meta_h] = load_checkpoint(opt.vae_h_path);
    VaeModel vae;
    if (want_latent) {
        if (opt.vae_path.empty())
            throw ConfigError("score: --vae checkpoint is required for the latent scorer");
        std::tie(vae, std::ignore) = load_checkpoint(opt.vae_path);
        if (vae.arch.input_extent != vae_h.arch.input_extent)
            throw DataError("score: checkpoints disagree on input extent");
    }

    DatasetSplit data = load_dataset(opt.data_path);
    auto slices = select_split(data, opt.split);
    if (slices.empty()) throw DataError(opt.data_path + ": selected split is empty");
    if (slices.front()->image.height != vae_h.arch.input_extent ||
        slices.front()->image.width != vae_h.arch.input_extent)
        throw DataError(opt.data_path + ": slice geometry does not match checkpoint");

    struct Row {
        double latent = 0.0, residual = 0.0;
    };
    std::vector<Row> rows(slices.size());
    parallel_for(slices.size(), cfg.threads, [&](std::size_t i) {
        const auto& ls = *slices[i];
        const SliceImage x_h = reconstruct(vae_h, ls.image, ls.mask);
        if (want_latent) rows[i].latent = latent_score_from(vae, ls.image, x_h);
        if (want_residual) rows[i].residual = residual_score_from(ls.image, x_h, ls.mask);
    });

    std::string out_text;
    for (std::size_t i = 0; i < slices.size(); ++i) {
        const auto& img = slices[i]->image;
        json line{{"slice_id", slice_id_of(img)},
                  {"subject", img.subject},
                  {"slice_index", img.slice_index},
                  {"lesion_px", img.lesion_px},
                  {"scorer", opt.scorer}};
        if (want_latent) line["latent"] = rows[i].latent;
        if (want_residual) line["residual"] = rows[i].residual;
        if (scorers.size() == 1) line["score"] = scorers[0] == "latent" ? rows[i].latent
                                                                        : rows[i].residual;
        out_text += line.dump() + "\n";
    }
    atomic_write_file(opt.out_path, out_text);
}

void cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opt) {
    const auto records = read_scores(opt.scores_path);
    const auto healthy_records = read_scores(opt.healthy_val_path);
    const auto scorers = requested_scorers(opt.scorer);
    const auto grid = cfg.detector.grid();

    std::vector<std::uint32_t> lesion_px;
    lesion_px.reserve(records.size());
    for (const auto& r : records) lesion_px.push_back(r.lesion_px);

    json results = json::array();
    for (std::size_t ti = 0; ti < cfg.size_thresholds.size(); ++ti) {
        const double threshold_px = cfg.size_thresholds[ti];
        const auto labels = label_slices(lesion_px, threshold_px);
        for (const auto& scorer : scorers) {
            const auto all_scores = scores_of_kind(records, scorer, opt.scores_path);
            const auto healthy_scores =
                scores_of_kind(healthy_records, scorer, opt.healthy_val_path);

            std::vector<double> kept_scores;
            std::vector<int> kept_labels;
            std::size_t excluded = 0;
            for (std::size_t i = 0; i < records.size(); ++i) {
                if (labels[i].excluded) {
                    ++excluded;
                    continue;
                }
                kept_scores.push_back(all_scores[i]);
                kept_labels.push_back(labels[i].label);
            }

            // one partition per size threshold, shared across scorers
            Rng cv_rng(derive_seed(cfg.seed, kCvTag, ti));
            EvalReport report = cross_validate(healthy_scores, kept_scores, kept_labels,
                                               cfg.detector.folds, grid, cv_rng);

            json folds = json::array();
            for (const auto& f : report.folds) folds.push_back(fold_json(f));
            results.push_back(json{{"size_threshold", threshold_px},
                                   {"scorer", scorer},
                                   {"evaluated", kept_scores.size()},
                                   {"excluded", excluded},
                                   {"folds", folds},
                                   {"mean",
                                    {{"roc_auc", report.mean.roc_auc},
                                     {"accuracy", report.mean.accuracy},
                                     {"f1", report.mean.f1}}},
                                   {"std",
                                    {{"roc_auc", report.stddev.roc_auc},
                                     {"accuracy", report.stddev.accuracy},
                                     {"f1", report.stddev.f1}}}});
        }
    }

    json report{{"seed", cfg.seed},
                {"folds", cfg.detector.folds},
                {"percentile_grid",
                 {{"min", cfg.detector.percentile_min},
                  {"max", cfg.detector.percentile_max},
                  {"step", cfg.detector.percentile_step}}},
                {"size_thresholds", cfg.size_thresholds},
                {"scores_file", std::filesystem::path(opt.scores_path).filename().string()},
                {"healthy_val_file",
                 std::filesystem::path(opt.healthy_val_path).filename().string()},
                {"results", results}};
    atomic_write_file(opt.out_path, report.dump(2) + "\n");

    if (!opt.dump_residuals_dir.empty()) {
        if (opt.vae_h_path.empty() || opt.data_path.empty())
            throw ConfigError(
                "evaluate: --dump-residuals needs --vae-h and --data to rebuild reconstructions");
        auto [vae_h, meta] = load_checkpoint(opt.vae_h_path);
        DatasetSplit data = load_dataset(opt.data_path);
        std::filesystem::create_directories(opt.dump_residuals_dir);

        // |x - x_h| lives in [0,2]; store shifted by -1 to fit the dataset
        // format's [-1,1] pixel range.
        auto dump_part = [&](std::vector<LabeledSlice>& part) {
            parallel_for(part.size(), cfg.threads, [&](std::size_t i) {
                LabeledSlice& ls = part[i];
                const SliceImage x_h = reconstruct(vae_h, ls.image, ls.mask);
                for (std::size_t p = 0; p < ls.image.pixels.size(); ++p)
                    ls.image.pixels[p] =
                        std::abs(ls.image.pixels[p] - x_h.pixels[p]) - 1.0f;
            });
        };
        dump_part(data.train);
        dump_part(data.validation);
        dump_part(data.test);
        save_dataset(data,
                     (std::filesystem::path(opt.dump_residuals_dir) / "residuals.ldsd").string());
    }
}

}  // namespace latdis
