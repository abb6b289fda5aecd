#pragma once

#include "blockbuild/adam.hpp"
#include "blockbuild/corpus.hpp"
#include "blockbuild/model.hpp"
#include "blockbuild/tokenizer.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blockbuild {

struct NonFiniteLoss : NumericError {
    using NumericError::NumericError;
};
struct GoldNotFeasible : DataError {
    using DataError::DataError;
};
struct StepOutOfRange : DataError {
    using DataError::DataError;
};

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

struct LrSchedule {
    long long total_steps = 0;
    long long warmup_steps = 0;
    double peak_lr = 1e-4;
};

/// Linear 0 -> peak over [0, warmup_steps], then linear peak -> 0 over
/// [warmup_steps, total_steps]. lr_at(warmup_steps) == peak_lr exactly.
double lr_at(const LrSchedule& schedule, long long step);

LrSchedule make_schedule(long long total_steps, double warmup_fraction, double peak_lr);

// ---------------------------------------------------------------------------
// Configs and curves
// ---------------------------------------------------------------------------

struct PretrainConfig {
    int epochs = 100;
    double peak_lr = 1e-4;
    double warmup_fraction = 0.1;
    int batch_size = 8;
    double mask_prob = 0.15;
    std::uint64_t seed = 42;
    double valid_fraction = 0.1;
};

struct FinetuneConfig {
    int epochs = 20;
    double peak_lr = 1e-4;
    double warmup_fraction = 0.1;
    int batch_size = 8;
    std::uint64_t seed = 42;
    long long max_steps = 0; // optimizer-step cap; 0 = run all epochs
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double seconds = 0.0;
};

using LossCurve = std::vector<EpochRecord>;

void write_loss_curve_csv(const LossCurve& curve, const std::filesystem::path& path);
void write_lr_csv(const LrSchedule& schedule, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Context construction (shared by training, decoding, evaluation)
// ---------------------------------------------------------------------------

/// Dialogue text preceding a builder turn: whole utterances, most recent
/// first, until the token budget is filled; joined in chronological order.
std::string context_text_for_turn(const Episode& episode, int turn_index, int token_budget);

/// Seeded-shuffle split of [0, n); valid takes floor(n * valid_fraction).
/// Returns (train, valid) index lists.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_train_valid(std::size_t n, double valid_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Options shared by both trainers
// ---------------------------------------------------------------------------

struct TrainOptions {
    int threads = 1;
    bool deterministic_timing = false;          // write 0 in the seconds column
    std::filesystem::path snapshot_path;        // per-epoch resumable state, empty = off
    std::filesystem::path resume_path;          // continue from a snapshot, empty = off
};

struct PretrainResult {
    Checkpoint checkpoint;
    LossCurve curve;
    LrSchedule schedule;
};

// Epoch-boundary snapshot: parameters, optimizer moments, step counters and
// the curve so far. All per-epoch randomness is derived from (seed, epoch),
// so resuming continues bit-identically to an uninterrupted run.
void save_training_state(const std::filesystem::path& path, const ModelConfig& config,
                         const ParamSet<float>& params, const AdamState& adam,
                         long long global_step, int completed_epochs, const LossCurve& curve);
void resume_training_state(const std::filesystem::path& path, const ModelConfig& config,
                           ParamSet<float>& params, AdamState& adam, long long& global_step,
                           int& start_epoch, LossCurve& curve);

/// The first training phase: dynamic masking, cross-entropy on masked
/// positions only, Adam with the warmup/decay schedule. Deterministic in
/// (texts, vocab, configs); per-epoch randomness is derived from the seed and
/// epoch index, which is what makes epoch-boundary resume exact.
PretrainResult pretrain_mlm(const std::vector<std::string>& texts, const Vocabulary& vocab,
                            const ModelConfig& model_config, const PretrainConfig& config,
                            const TrainOptions& options = {});

struct FinetuneResult {
    ParamSet<float> params;
    LossCurve curve;
    LrSchedule schedule;
};

/// The second phase: teacher-forced builder training over gold action
/// sequences of Train-split episodes, validation loss over Valid-split
/// episodes. Each turn contributes one step per gold action plus a Stop step.
FinetuneResult train_builder(const std::vector<Episode>& episodes, ParamSet<float> init,
                             const ModelConfig& model_config, const Vocabulary& vocab,
                             const FinetuneConfig& config, const TrainOptions& options = {});

/// Teacher-forced builder cross-entropy (mean per step) without updates.
double builder_loss(const ModelConfig& config, const ParamSet<float>& params,
                    const Vocabulary& vocab, const std::vector<Episode>& episodes);

/// Greedy decoding of one builder turn from its dialogue context and grid.
/// Applies each chosen action to a working grid; stops at Stop or max_steps.
ActionSeq decode_actions(const ModelConfig& config, const ParamSet<float>& params,
                         const Vocabulary& vocab, const Episode& episode, int turn_index,
                         const Grid& grid_at_turn, int max_steps);

// Deterministic contiguous-range parallel map; fn(worker, i) must only touch
// slot i and worker-local state.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(int, std::size_t)>& fn);

} // namespace blockbuild
