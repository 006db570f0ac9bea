#pragma once

#include <string>

#include "latdis/config.hpp"

namespace latdis {

// Pipeline commands behind the CLI. All of them validate inputs before
// producing side effects and write outputs atomically (temp file +
// rename), so a failing run leaves nothing half-written.

// Writes <output_dir>/healthy.ldsd, <output_dir>/unlabelled.ldsd and a
// manifest.json with counts and seeds.
void cmd_generate(const RunConfig& cfg);

struct TrainOptions {
    std::string cohort;            // healthy | unlabelled
    std::string variant;           // empty = config value
    std::string data_path;         // empty = <output_dir>/<cohort>.ldsd
    std::string out_path;          // checkpoint; loss curve goes to <out>.loss.jsonl
};

void cmd_train(const RunConfig& cfg, const TrainOptions& opt);

struct ScoreOptions {
    std::string vae_h_path;
    std::string vae_path;          // may be empty for --scorer residual
    std::string data_path;
    std::string out_path;          // JSONL, one record per slice
    std::string scorer = "all";    // latent | residual | all
    std::string split = "all";     // train | val | test | valtest | all
};

void cmd_score(const RunConfig& cfg, const ScoreOptions& opt);

struct EvaluateOptions {
    std::string scores_path;       // unlabelled cohort scores (JSONL)
    std::string healthy_val_path;  // healthy validation scores (JSONL)
    std::string out_path;          // report JSON
    std::string scorer = "all";
    std::string dump_residuals_dir;  // optional; needs vae_h_path and data_path
    std::string vae_h_path;
    std::string data_path;
};

void cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opt);

}  // namespace latdis
