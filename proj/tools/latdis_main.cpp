#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "latdis/commands.hpp"
#include "latdis/errors.hpp"

namespace {

// LD_SEED overrides the config seed when set.
latdis::RunConfig load_config(const std::string& path) {
    latdis::RunConfig cfg = latdis::RunConfig::from_file(path);
    if (const char* env = std::getenv("LD_SEED")) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument("trailing junk");
            cfg.seed = v;
        } catch (const std::exception&) {
            throw latdis::ConfigError(std::string("LD_SEED: '") + env +
                                      "' is not an unsigned integer");
        }
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-VAE latent-dissimilarity anomaly detection on synthetic phantom slices"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration")->required();

    auto* generate = app.add_subcommand("generate", "Generate phantom datasets");

    latdis::TrainOptions train_opt;
    auto* train = app.add_subcommand("train", "Train one VAE cohort");
    train->add_option("--cohort", train_opt.cohort, "healthy|unlabelled")->required();
    train->add_option("--variant", train_opt.variant, "plain|ce-dvae|ce-reg (default: config)");
    train->add_option("--data", train_opt.data_path, "dataset file (default: output_dir)");
    train->add_option("--out", train_opt.out_path, "checkpoint output path")->required();

    latdis::ScoreOptions score_opt;
    auto* score = app.add_subcommand("score", "Score slices with trained models");
    score->add_option("--vae-h", score_opt.vae_h_path, "healthy-cohort checkpoint")->required();
    score->add_option("--vae", score_opt.vae_path, "unlabelled-cohort checkpoint");
    score->add_option("--data", score_opt.data_path, "dataset file")->required();
    score->add_option("--out", score_opt.out_path, "scores JSONL output")->required();
    score->add_option("--scorer", score_opt.scorer, "latent|residual|all (default all)");
    score->add_option("--split", score_opt.split, "train|val|test|valtest|all (default all)");

    latdis::EvaluateOptions eval_opt;
    auto* evaluate = app.add_subcommand("evaluate", "Cross-validated evaluation report");
    evaluate->add_option("--scores", eval_opt.scores_path, "unlabelled scores JSONL")->required();
    evaluate->add_option("--healthy-val", eval_opt.healthy_val_path,
                         "healthy validation scores JSONL")
        ->required();
    evaluate->add_option("--out", eval_opt.out_path, "report JSON output")->required();
    evaluate->add_option("--scorer", eval_opt.scorer, "latent|residual|all (default all)");
    evaluate->add_option("--dump-residuals", eval_opt.dump_residuals_dir,
                         "directory for |x - x_h| residual images");
    evaluate->add_option("--vae-h", eval_opt.vae_h_path, "checkpoint for the residual dump");
    evaluate->add_option("--data", eval_opt.data_path, "dataset for the residual dump");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        latdis::RunConfig cfg = load_config(config_path);
        if (generate->parsed()) latdis::cmd_generate(cfg);
        if (train->parsed()) latdis::cmd_train(cfg, train_opt);
        if (score->parsed()) latdis::cmd_score(cfg, score_opt);
        if (evaluate->parsed()) latdis::cmd_evaluate(cfg, eval_opt);
        return 0;
    } catch (const latdis::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const latdis::DivergenceError& e) {
        std::cerr << "numeric divergence: " << e.what() << "\n";
        return 4;
    } catch (const latdis::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
