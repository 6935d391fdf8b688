#pragma once

#include <string>

#include "json.hpp"
#include "wdlab/datagen.hpp"
#include "wdlab/diagnostics.hpp"
#include "wdlab/inspect.hpp"
#include "wdlab/merging.hpp"
#include "wdlab/optimize.hpp"

namespace wdlab::experiments {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Schema helpers: every config object is validated key-by-key; unknown keys
// are rejected with the offending field path.
void require_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                  const std::string& path);

model::Architecture parse_architecture(const nlohmann::json& j, const std::string& path);
datagen::TaskSpec parse_task(const nlohmann::json& j, const std::string& path);
optimize::TrainConfig parse_train(const nlohmann::json& j, const std::string& path);
optimize::GFConfig parse_gf(const nlohmann::json& j, const std::string& path);
optimize::InitKind parse_init_kind(const std::string& s, const std::string& path);

std::uint64_t config_hash(const std::string& config_text);

struct RunContext {
    nlohmann::json config;
    std::string out_dir;
    std::uint64_t hash = 0;
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
    int jobs = 1;
};

// Subcommand drivers; artifacts land in ctx.out_dir. Throws ConfigError for
// schema violations and optimize::DivergenceError for runtime divergence.
void cmd_train(const RunContext& ctx);
void cmd_polish(const RunContext& ctx);
void cmd_gf(const RunContext& ctx);
void cmd_merge(const RunContext& ctx);
void cmd_rank_sweep(const RunContext& ctx);
void cmd_inspect(const RunContext& ctx);
void cmd_gen_data(const RunContext& ctx);

// Exit codes: 0 ok, 2 schema violation, 3 divergence.
int run(const std::string& command, const std::string& config_path,
        const std::string& out_dir, const std::uint64_t* seed_override, int jobs);

// Plot-data emission (one CSV per figure panel).
void emit_trajectory_csv(const optimize::Trajectory& traj, const std::string& path,
                         std::uint64_t hash, std::uint64_t seed);

struct MergeCurves {
    std::vector<double> step;
    std::vector<double> loss_a_model_a, loss_a_merged;
    std::vector<double> loss_b_model_b, loss_b_merged;
};
void emit_merge_csv(const MergeCurves& curves, const std::string& path,
                    std::uint64_t hash, std::uint64_t seed);

struct SweepRow {
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double avg_inv_stable_rank = 0.0;
    double classification_error = 0.0;
    double margin_error = 0.0;
    double avg_loss = 0.0;
};
void emit_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path,
                    std::uint64_t hash);

// Shared measurement helpers.
double classification_error(const model::Params& p, const model::Architecture& arch,
                            const model::Dataset& data);
double margin_error(const model::Params& p, const model::Architecture& arch,
                    const model::Dataset& data);
double avg_inverse_stable_rank(const model::Params& p);

SweepRow sweep_point(const model::Architecture& arch, const datagen::TaskSpec& task,
                     const optimize::TrainConfig& base, double lambda,
                     std::uint64_t seed);

}  // namespace wdlab::experiments
