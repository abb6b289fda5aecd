#include "blockbuild/training.hpp"

#include "blockbuild/wire.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <thread>

namespace blockbuild {

namespace {

// independent rng stream salts
constexpr std::uint64_t kSplitSalt = 1;
constexpr std::uint64_t kOrderSalt = 2;
constexpr std::uint64_t kMaskSalt = 3;
constexpr std::uint64_t kValidMaskSalt = 4;
constexpr std::uint64_t kDropoutSalt = 5;

std::uint64_t epoch_item(std::uint64_t epoch, std::uint64_t item) {
    return (epoch << 32) | item;
}

template <class T>
void seeded_shuffle(std::vector<T>& v, SplitMix& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(static_cast<int>(i)));
        std::swap(v[i - 1], v[j]);
    }
}

double now_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

} // namespace

void parallel_for(std::size_t n, int threads, const std::function<void(int, std::size_t)>& fn) {
    if (n == 0) return;
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(0, i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::size_t lo = static_cast<std::size_t>(w) * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&fn, w, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) fn(w, i);
        });
    }
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

double lr_at(const LrSchedule& s, long long step) {
    if (step < 0 || step > s.total_steps) {
        throw StepOutOfRange("lr_at: step " + std::to_string(step) + " outside [0, " +
                             std::to_string(s.total_steps) + "]");
    }
    if (step == s.warmup_steps) return s.peak_lr;
    if (step < s.warmup_steps) {
        return s.peak_lr * (static_cast<double>(step) / static_cast<double>(s.warmup_steps));
    }
    const long long decay = s.total_steps - s.warmup_steps;
    if (decay == 0) return 0.0;
    return s.peak_lr * (static_cast<double>(s.total_steps - step) / static_cast<double>(decay));
}

LrSchedule make_schedule(long long total_steps, double warmup_fraction, double peak_lr) {
    LrSchedule s;
    s.total_steps = total_steps;
    s.warmup_steps = static_cast<long long>(std::floor(warmup_fraction * static_cast<double>(total_steps)));
    s.peak_lr = peak_lr;
    return s;
}

void write_loss_curve_csv(const LossCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write curve file " + path.string());
    out << "epoch,train_loss,valid_loss,seconds\n" << std::setprecision(17);
    for (const EpochRecord& r : curve) {
        out << r.epoch << "," << r.train_loss << "," << r.valid_loss << "," << r.seconds << "\n";
    }
}

void write_lr_csv(const LrSchedule& schedule, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write lr file " + path.string());
    out << "step,lr\n" << std::setprecision(17);
    for (long long step = 0; step <= schedule.total_steps; ++step) {
        out << step << "," << lr_at(schedule, step) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Context construction
// ---------------------------------------------------------------------------

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_train_valid(std::size_t n, double valid_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    SplitMix rng(mix_seed(seed, kSplitSalt, 0));
    seeded_shuffle(order, rng);
    const std::size_t n_valid =
        static_cast<std::size_t>(static_cast<double>(n) * valid_fraction);
    std::vector<std::size_t> valid(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
    return {std::move(train), std::move(valid)};
}

std::string context_text_for_turn(const Episode& episode, int turn_index, int token_budget) {
    int used = 0;
    int first = turn_index;
    for (int i = turn_index - 1; i >= 0; --i) {
        const int len =
            static_cast<int>(split_tokens(episode.dialogue[static_cast<std::size_t>(i)].text).size());
        if (first < turn_index && used + len > token_budget) break;
        first = i;
        used += len;
    }
    std::string out;
    for (int i = first; i < turn_index; ++i) {
        if (!out.empty()) out += ' ';
        out += episode.dialogue[static_cast<std::size_t>(i)].text;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batched forward/backward with deterministic gradient reduction
// ---------------------------------------------------------------------------

namespace {

// Builds the loss graph for one example against the given (thread-local)
// parameter set; returns the summed loss node and the step/token count.
using BuildLossFn =
    std::function<std::pair<Tensor, long long>(const ParamSet<float>&, std::size_t)>;

struct BatchOutcome {
    std::vector<std::vector<float>> grads; // folded in example order
    double nll = 0.0;
    long long count = 0;
};

BatchOutcome run_batch(ParamSet<float>& params, const std::vector<std::size_t>& batch, int threads,
                       const BuildLossFn& build_loss) {
    struct Slot {
        std::vector<std::vector<float>> grads;
        double nll = 0.0;
        long long count = 0;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(batch.size());

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(batch.size())));
    std::vector<ParamSet<float>> locals;
    if (workers > 1) {
        locals.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            locals.push_back(clone_params(params));
            locals.back().set_requires_grad(true);
        }
    } else {
        params.set_requires_grad(true);
    }

    parallel_for(batch.size(), workers, [&](int worker, std::size_t i) {
        ParamSet<float>& local = workers > 1 ? locals[static_cast<std::size_t>(worker)] : params;
        try {
            local.zero_grad();
            auto [loss, count] = build_loss(local, batch[i]);
            Slot& slot = slots[i];
            slot.count = count;
            if (loss.defined()) {
                slot.nll = static_cast<double>(loss.data()[0]);
                backward(loss);
            }
            slot.grads.reserve(local.tensors.size());
            for (const Tensor& t : local.tensors) slot.grads.push_back(t.grad());
        } catch (...) {
            slots[i].error = std::current_exception();
        }
    });

    BatchOutcome out;
    out.grads.reserve(params.tensors.size());
    for (const Tensor& t : params.tensors) out.grads.emplace_back(t.data().size(), 0.0f);
    for (std::size_t i = 0; i < slots.size(); ++i) {
        Slot& slot = slots[i];
        if (slot.error) std::rethrow_exception(slot.error);
        for (std::size_t pi = 0; pi < out.grads.size(); ++pi) {
            auto& dst = out.grads[pi];
            const auto& src = slot.grads[pi];
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
        out.nll += slot.nll;
        out.count += slot.count;
    }
    if (out.count > 0) {
        const double inv = 1.0 / static_cast<double>(out.count);
        for (auto& g : out.grads) {
            for (float& v : g) v = static_cast<float>(v * inv);
        }
    }
    return out;
}

long long count_labels(const std::vector<int>& labels) {
    long long n = 0;
    for (int l : labels) n += l != kIgnoreLabel;
    return n;
}

} // namespace

// ---------------------------------------------------------------------------
// Training-state snapshots
// ---------------------------------------------------------------------------

namespace {
constexpr char kStateMagic[4] = {'B', 'B', 'T', 'S'};
constexpr std::uint32_t kStateVersion = 1;
} // namespace

void save_training_state(const std::filesystem::path& path, const ModelConfig& config,
                         const ParamSet<float>& params, const AdamState& adam,
                         long long global_step, int completed_epochs, const LossCurve& curve) {
    std::string out;
    out.append(kStateMagic, 4);
    wire::put_u32(out, kStateVersion);
    wire::put_str(out, config_to_json(config));
    wire::put_u64(out, static_cast<std::uint64_t>(completed_epochs));
    wire::put_u64(out, static_cast<std::uint64_t>(global_step));
    wire::put_u64(out, static_cast<std::uint64_t>(adam.step_count()));
    wire::put_u64(out, params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        wire::put_str(out, params.names[i]);
        wire::put_u64(out, static_cast<std::uint64_t>(params.tensors[i].numel()));
        for (float v : params.tensors[i].data()) wire::put_f32(out, v);
        for (float v : adam.moment1()[i]) wire::put_f32(out, v);
        for (float v : adam.moment2()[i]) wire::put_f32(out, v);
    }
    wire::put_u64(out, curve.size());
    for (const EpochRecord& r : curve) {
        wire::put_u32(out, static_cast<std::uint32_t>(r.epoch));
        wire::put_f64(out, r.train_loss);
        wire::put_f64(out, r.valid_loss);
        wire::put_f64(out, r.seconds);
    }

    const std::filesystem::path tmp = path.string() + ".tmp";
    std::ofstream file(tmp, std::ios::binary);
    if (!file || !file.write(out.data(), static_cast<std::streamsize>(out.size()))) {
        throw IoError("cannot write training state " + tmp.string());
    }
    file.close();
    std::filesystem::rename(tmp, path);
}

void resume_training_state(const std::filesystem::path& path, const ModelConfig& config,
                           ParamSet<float>& params, AdamState& adam, long long& global_step,
                           int& start_epoch, LossCurve& curve) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open training state " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    wire::Reader in(std::move(bytes), "training state " + path.string());

    if (in.raw(4) != std::string(kStateMagic, 4)) {
        throw IoError("training state " + path.string() + " has a bad magic header");
    }
    if (in.u32() != kStateVersion) throw VersionMismatch("unsupported training-state version");
    const ModelConfig saved = config_from_json(in.str());
    if (!(saved == config)) {
        throw IncompatibleBackbone("training state was produced with a different model config");
    }
    start_epoch = static_cast<int>(in.u64());
    global_step = static_cast<long long>(in.u64());
    adam.set_step_count(static_cast<long long>(in.u64()));
    const std::uint64_t count = in.u64();
    if (count != params.size()) {
        throw ManifestMismatch("training state lists " + std::to_string(count) +
                               " parameters, expected " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string name = in.str();
        if (name != params.names[i]) {
            throw ManifestMismatch("training-state parameter \"" + name + "\", expected \"" +
                                   params.names[i] + "\"");
        }
        const std::uint64_t n = in.u64();
        if (n != static_cast<std::uint64_t>(params.tensors[i].numel())) {
            throw ManifestMismatch("training-state parameter " + name + " has " +
                                   std::to_string(n) + " values");
        }
        for (auto& v : params.tensors[i].data()) v = in.f32();
        for (auto& v : adam.moment1()[i]) v = in.f32();
        for (auto& v : adam.moment2()[i]) v = in.f32();
    }
    curve.clear();
    const std::uint64_t rows = in.u64();
    for (std::uint64_t r = 0; r < rows; ++r) {
        EpochRecord rec;
        rec.epoch = static_cast<int>(in.u32());
        rec.train_loss = in.f64();
        rec.valid_loss = in.f64();
        rec.seconds = in.f64();
        curve.push_back(rec);
    }
}

// ---------------------------------------------------------------------------
// MLM pretraining
// ---------------------------------------------------------------------------

namespace {

struct MlmData {
    std::vector<Encoding> encodings;
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
};

MlmData prepare_mlm(const std::vector<std::string>& texts, const Vocabulary& vocab,
                    const ModelConfig& mcfg, const PretrainConfig& cfg) {
    MlmData data;
    data.encodings.reserve(texts.size());
    for (const std::string& t : texts) data.encodings.push_back(encode(vocab, t, mcfg.max_seq_len));
    std::tie(data.train, data.valid) = split_train_valid(texts.size(), cfg.valid_fraction, cfg.seed);
    return data;
}

double mlm_eval_loss(const ModelConfig& mcfg, const ParamSet<float>& params,
                     const Vocabulary& vocab, const MlmData& data, const PretrainConfig& cfg,
                     int threads) {
    if (data.valid.empty()) return 0.0;
    const ParamSet<float> frozen = clone_params(params);

    std::vector<std::pair<double, long long>> slots(data.valid.size());
    parallel_for(data.valid.size(), threads, [&](int, std::size_t i) {
        const std::size_t idx = data.valid[i];
        // fixed validation masks: one stream per example, independent of epoch
        SplitMix mask_rng(mix_seed(cfg.seed, kValidMaskSalt, idx));
        const MaskingOutput mo =
            mask_tokens(data.encodings[idx], cfg.mask_prob, mask_rng, vocab);
        const Encoding masked{mo.masked_ids, data.encodings[idx].attention_mask};
        const Tensor hidden = encode_text(mcfg, frozen, masked);
        const Tensor logits = mlm_logits(mcfg, frozen, hidden);
        const Tensor loss = cross_entropy(logits, mo.labels, Reduction::Sum);
        slots[i] = {static_cast<double>(loss.data()[0]), count_labels(mo.labels)};
    });
    double nll = 0.0;
    long long count = 0;
    for (const auto& [l, c] : slots) {
        nll += l;
        count += c;
    }
    return count > 0 ? nll / static_cast<double>(count) : 0.0;
}

} // namespace

PretrainResult pretrain_mlm(const std::vector<std::string>& texts, const Vocabulary& vocab,
                            const ModelConfig& model_config, const PretrainConfig& config,
                            const TrainOptions& options) {
    if (texts.empty()) throw EmptyCorpus("pretraining corpus is empty");
    if (config.epochs < 1) throw InvalidConfig("pretrain epochs must be >= 1");
    if (!(config.peak_lr > 0.0)) throw InvalidConfig("peak_lr must be positive");
    if (!(config.warmup_fraction >= 0.0 && config.warmup_fraction < 1.0)) {
        throw InvalidConfig("warmup_fraction must be in [0, 1)");
    }
    if (config.batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
    if (!(config.mask_prob >= 0.0 && config.mask_prob <= 1.0)) {
        throw InvalidConfig("mask_prob must be in [0, 1]");
    }
    if (!(config.valid_fraction >= 0.0 && config.valid_fraction < 1.0)) {
        throw InvalidConfig("valid_fraction must be in [0, 1)");
    }
    if (model_config.vocab_size != vocab.size()) {
        throw InvalidConfig("model vocab_size " + std::to_string(model_config.vocab_size) +
                            " does not match vocabulary size " + std::to_string(vocab.size()));
    }
    validate(model_config);

    const MlmData data = prepare_mlm(texts, vocab, model_config, config);
    const long long steps_per_epoch =
        (static_cast<long long>(data.train.size()) + config.batch_size - 1) / config.batch_size;
    const LrSchedule schedule = make_schedule(config.epochs * steps_per_epoch,
                                              config.warmup_fraction, config.peak_lr);

    ParamSet<float> params = init_params<float>(model_config, model_config.seed);
    AdamState adam(params.tensors);
    long long global_step = 0;
    int start_epoch = 0;
    LossCurve curve;

    if (!options.resume_path.empty()) {
        resume_training_state(options.resume_path, model_config, params, adam, global_step,
                              start_epoch, curve);
    }

    for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
        const double t0 = now_seconds();
        std::vector<std::size_t> order = data.train;
        SplitMix order_rng(mix_seed(config.seed, kOrderSalt, static_cast<std::uint64_t>(epoch)));
        seeded_shuffle(order, order_rng);

        double epoch_nll = 0.0;
        long long epoch_count = 0;
        for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(config.batch_size));
            const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                                 order.begin() + static_cast<std::ptrdiff_t>(end));
            BatchOutcome outcome = run_batch(
                params, batch, options.threads,
                [&](const ParamSet<float>& local, std::size_t idx) -> std::pair<Tensor, long long> {
                    SplitMix mask_rng(mix_seed(config.seed, kMaskSalt,
                                               epoch_item(static_cast<std::uint64_t>(epoch), idx)));
                    const MaskingOutput mo =
                        mask_tokens(data.encodings[idx], config.mask_prob, mask_rng, vocab);
                    const Encoding masked{mo.masked_ids, data.encodings[idx].attention_mask};
                    SplitMix drop_rng(mix_seed(config.seed, kDropoutSalt,
                                               epoch_item(static_cast<std::uint64_t>(epoch), idx)));
                    RandomSource* dr = model_config.dropout > 0.0 ? &drop_rng : nullptr;
                    const Tensor hidden = encode_text(model_config, local, masked, dr);
                    const Tensor logits = mlm_logits(model_config, local, hidden);
                    return {cross_entropy(logits, mo.labels, Reduction::Sum),
                            count_labels(mo.labels)};
                });
            const double batch_loss =
                outcome.count > 0 ? outcome.nll / static_cast<double>(outcome.count) : 0.0;
            if (!std::isfinite(batch_loss)) {
                throw NonFiniteLoss("non-finite pretraining loss at epoch " +
                                    std::to_string(epoch + 1) + ", step " +
                                    std::to_string(global_step + 1));
            }
            ++global_step;
            adam.step(params.tensors, outcome.grads, lr_at(schedule, global_step));
            epoch_nll += outcome.nll;
            epoch_count += outcome.count;
        }

        params.set_requires_grad(false);
        const double valid_loss =
            mlm_eval_loss(model_config, params, vocab, data, config, options.threads);

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.train_loss = epoch_count > 0 ? epoch_nll / static_cast<double>(epoch_count) : 0.0;
        rec.valid_loss = valid_loss;
        rec.seconds = options.deterministic_timing ? 0.0 : now_seconds() - t0;
        curve.push_back(rec);

        if (!options.snapshot_path.empty()) {
            save_training_state(options.snapshot_path, model_config, params, adam, global_step,
                                epoch + 1, curve);
        }
    }

    PretrainResult result;
    result.checkpoint.config = model_config;
    result.checkpoint.params = std::move(params);
    result.curve = std::move(curve);
    result.schedule = schedule;
    return result;
}

// ---------------------------------------------------------------------------
// Builder fine-tuning
// ---------------------------------------------------------------------------

namespace {

struct TurnExample {
    Encoding context;
    Grid grid_before;
    const ActionSeq* gold = nullptr;
};

std::vector<TurnExample> build_turn_examples(const std::vector<Episode>& episodes, Split split,
                                             const ModelConfig& mcfg, const Vocabulary& vocab) {
    std::vector<TurnExample> out;
    for (const Episode& ep : episodes) {
        if (ep.split != split) continue;
        Grid grid = ep.initial_world;
        for (const GoldTurn& turn : ep.gold_turns) {
            TurnExample te;
            te.context = encode(
                vocab, context_text_for_turn(ep, turn.turn_index, mcfg.max_seq_len - 2),
                mcfg.max_seq_len);
            te.grid_before = grid;
            te.gold = &turn.actions;
            out.push_back(std::move(te));
            grid = replay(grid, turn.actions);
        }
    }
    return out;
}

int candidate_index(const std::vector<Action>& candidates, const Action& a) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i] == a) return static_cast<int>(i);
    }
    return -1;
}

// Teacher-forced loss graph over one turn: one step per gold action plus the
// closing Stop step. Count = number of steps.
std::pair<Tensor, long long> turn_loss_graph(const ModelConfig& mcfg, const ParamSet<float>& params,
                                             const TurnExample& te, RandomSource* drop_rng) {
    const Tensor hidden = encode_text(mcfg, params, te.context, drop_rng);
    Grid grid = te.grid_before;
    Tensor total;
    long long steps = 0;
    ActionSeq sequence = *te.gold;
    sequence.push_back(Action::stop());
    for (const Action& a : sequence) {
        const std::vector<Action> candidates = feasible(grid);
        const int target = candidate_index(candidates, a);
        if (target < 0) {
            throw GoldNotFeasible("gold action " + to_string(a) + " is not feasible");
        }
        const Tensor world = encode_world(mcfg, params, grid);
        const Tensor scores = builder_step_logits(mcfg, params, hidden, world, candidates);
        const Tensor step_loss = cross_entropy(scores, std::vector<int>{target}, Reduction::Sum);
        total = total.defined() ? add(total, step_loss) : step_loss;
        ++steps;
        if (a.kind != ActionKind::Stop) grid = apply(grid, a);
    }
    return {total, steps};
}

double builder_eval_loss(const ModelConfig& mcfg, const ParamSet<float>& params,
                         const std::vector<TurnExample>& turns, int threads) {
    if (turns.empty()) return 0.0;
    const ParamSet<float> frozen = clone_params(params);

    std::vector<std::pair<double, long long>> slots(turns.size());
    parallel_for(turns.size(), threads, [&](int, std::size_t i) {
        auto [loss, steps] = turn_loss_graph(mcfg, frozen, turns[i], nullptr);
        slots[i] = {static_cast<double>(loss.data()[0]), steps};
    });
    double nll = 0.0;
    long long count = 0;
    for (const auto& [l, c] : slots) {
        nll += l;
        count += c;
    }
    return count > 0 ? nll / static_cast<double>(count) : 0.0;
}

} // namespace

FinetuneResult train_builder(const std::vector<Episode>& episodes, ParamSet<float> init,
                             const ModelConfig& model_config, const Vocabulary& vocab,
                             const FinetuneConfig& config, const TrainOptions& options) {
    if (config.epochs < 0) throw InvalidConfig("finetune epochs must be >= 0");
    if (!(config.peak_lr > 0.0)) throw InvalidConfig("peak_lr must be positive");
    if (!(config.warmup_fraction >= 0.0 && config.warmup_fraction < 1.0)) {
        throw InvalidConfig("warmup_fraction must be in [0, 1)");
    }
    if (config.batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
    if (config.max_steps < 0) throw InvalidConfig("max_steps must be >= 0");
    if (model_config.vocab_size != vocab.size()) {
        throw InvalidConfig("model vocab_size does not match vocabulary size");
    }
    validate(model_config);

    const std::vector<TurnExample> train_turns =
        build_turn_examples(episodes, Split::Train, model_config, vocab);
    const std::vector<TurnExample> valid_turns =
        build_turn_examples(episodes, Split::Valid, model_config, vocab);

    FinetuneResult result;
    result.params = std::move(init);
    if (config.epochs == 0) return result;
    if (train_turns.empty()) throw DataError("no builder turns in the train split");

    const long long steps_per_epoch =
        (static_cast<long long>(train_turns.size()) + config.batch_size - 1) / config.batch_size;
    long long total_steps = config.epochs * steps_per_epoch;
    if (config.max_steps > 0) total_steps = std::min(total_steps, config.max_steps);
    const LrSchedule schedule =
        make_schedule(total_steps, config.warmup_fraction, config.peak_lr);

    AdamState adam(result.params.tensors);
    long long global_step = 0;

    for (int epoch = 0; epoch < config.epochs && global_step < total_steps; ++epoch) {
        const double t0 = now_seconds();
        std::vector<std::size_t> order(train_turns.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        SplitMix order_rng(mix_seed(config.seed, kOrderSalt, static_cast<std::uint64_t>(epoch)));
        seeded_shuffle(order, order_rng);

        double epoch_nll = 0.0;
        long long epoch_count = 0;
        for (std::size_t pos = 0; pos < order.size() && global_step < total_steps;
             pos += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), pos + static_cast<std::size_t>(config.batch_size));
            const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                                 order.begin() + static_cast<std::ptrdiff_t>(end));
            BatchOutcome outcome = run_batch(
                result.params, batch, options.threads,
                [&](const ParamSet<float>& local, std::size_t idx) -> std::pair<Tensor, long long> {
                    SplitMix drop_rng(mix_seed(config.seed, kDropoutSalt,
                                               epoch_item(static_cast<std::uint64_t>(epoch), idx)));
                    RandomSource* dr = model_config.dropout > 0.0 ? &drop_rng : nullptr;
                    return turn_loss_graph(model_config, local, train_turns[idx], dr);
                });
            const double batch_loss =
                outcome.count > 0 ? outcome.nll / static_cast<double>(outcome.count) : 0.0;
            if (!std::isfinite(batch_loss)) {
                throw NonFiniteLoss("non-finite builder loss at epoch " + std::to_string(epoch + 1) +
                                    ", step " + std::to_string(global_step + 1));
            }
            ++global_step;
            adam.step(result.params.tensors, outcome.grads, lr_at(schedule, global_step));
            epoch_nll += outcome.nll;
            epoch_count += outcome.count;
        }

        result.params.set_requires_grad(false);
        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.train_loss = epoch_count > 0 ? epoch_nll / static_cast<double>(epoch_count) : 0.0;
        rec.valid_loss =
            builder_eval_loss(model_config, result.params, valid_turns, options.threads);
        rec.seconds = options.deterministic_timing ? 0.0 : now_seconds() - t0;
        result.curve.push_back(rec);
    }
    result.schedule = schedule;
    return result;
}

double builder_loss(const ModelConfig& config, const ParamSet<float>& params,
                    const Vocabulary& vocab, const std::vector<Episode>& episodes) {
    std::vector<TurnExample> turns;
    for (Split split : {Split::Train, Split::Valid, Split::Test}) {
        auto part = build_turn_examples(episodes, split, config, vocab);
        for (auto& t : part) turns.push_back(std::move(t));
    }
    return builder_eval_loss(config, params, turns, 1);
}

ActionSeq decode_actions(const ModelConfig& config, const ParamSet<float>& params,
                         const Vocabulary& vocab, const Episode& episode, int turn_index,
                         const Grid& grid_at_turn, int max_steps) {
    const Encoding context = encode(
        vocab, context_text_for_turn(episode, turn_index, config.max_seq_len - 2),
        config.max_seq_len);
    const Tensor hidden = encode_text(config, params, context);

    ActionSeq out;
    Grid grid = grid_at_turn;
    for (int step = 0; step < max_steps; ++step) {
        const std::vector<Action> candidates = feasible(grid);
        const Tensor world = encode_world(config, params, grid);
        const Tensor scores = builder_step_logits(config, params, hidden, world, candidates);
        int best = 0;
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            if (scores.data()[i] > scores.data()[static_cast<std::size_t>(best)]) {
                best = static_cast<int>(i);
            }
        }
        const Action chosen = candidates[static_cast<std::size_t>(best)];
        if (chosen.kind == ActionKind::Stop) break;
        out.push_back(chosen);
        grid = apply(grid, chosen);
    }
    return out;
}

} // namespace blockbuild
