#include "blockbuild/cli.hpp"

#include "blockbuild/corpus.hpp"
#include "blockbuild/eval.hpp"
#include "blockbuild/model.hpp"
#include "blockbuild/runconfig.hpp"
#include "blockbuild/tokenizer.hpp"
#include "blockbuild/training.hpp"

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

namespace blockbuild {

namespace {

// One dotted flag per config key on every subcommand, applied after the
// config file so flags win.
struct ConfigFlags {
    std::string config_path;
    std::vector<std::pair<CLI::Option*, std::string>> values; // aligned with schema order

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value config file");
        const auto& schema = config_schema();
        values.resize(schema.size());
        for (std::size_t i = 0; i < schema.size(); ++i) {
            values[i].first =
                cmd->add_option("--" + schema[i].key, values[i].second, schema[i].description);
        }
    }

    RunConfig resolve() const {
        RunConfig rc;
        if (!config_path.empty()) apply_config_file(rc, config_path);
        const auto& schema = config_schema();
        for (std::size_t i = 0; i < schema.size(); ++i) {
            if (values[i].first->count() > 0) {
                apply_override(rc, schema[i].key, values[i].second);
            }
        }
        return rc;
    }
};

void echo_config(const RunConfig& rc, const std::filesystem::path& beside_output) {
    const std::string text = render_effective_config(rc);
    std::cout << "# effective config\n" << text;
    if (!beside_output.empty()) {
        const std::filesystem::path sidecar = beside_output.string() + ".config";
        std::ofstream out(sidecar, std::ios::binary);
        if (!out) throw IoError("cannot write config sidecar " + sidecar.string());
        out << text;
    }
}

Vocabulary resolve_vocab(const std::string& vocab_path, const std::vector<Episode>& episodes,
                         const RunConfig& rc) {
    if (!vocab_path.empty()) return load_vocab(vocab_path);
    // No vocabulary file given: rebuild deterministically from the train split.
    std::vector<Episode> train;
    for (const Episode& ep : episodes) {
        if (ep.split == Split::Train) train.push_back(ep);
    }
    return build_vocab(extract_mlm_texts(train), rc.vocab_min_freq, rc.vocab_max_size);
}

std::filesystem::path default_lr_path(const std::filesystem::path& curves) {
    std::filesystem::path p = curves;
    p.replace_filename("lr.csv");
    return p;
}

int run_build_vocab(const std::string& corpus_path, const std::string& out_path, int min_freq,
                    int max_size, const RunConfig& rc) {
    RunConfig effective = rc;
    if (min_freq > 0) effective.vocab_min_freq = min_freq;
    if (max_size > 0) effective.vocab_max_size = max_size;
    const std::vector<Episode> episodes =
        load_corpus(corpus_path, Split::Train, effective.model.grid, effective.corpus_lenient);
    const Vocabulary vocab = build_vocab(extract_mlm_texts(episodes), effective.vocab_min_freq,
                                         effective.vocab_max_size);
    save_vocab(vocab, out_path);
    echo_config(effective, out_path);
    std::cout << "vocabulary: " << vocab.size() << " tokens -> " << out_path << "\n";
    return 0;
}

int run_pretrain(const std::string& corpus_path, const std::string& vocab_path,
                 const std::string& out_ckpt, const std::string& curves_path,
                 std::string lr_path, const std::string& snapshot, const std::string& resume,
                 const RunConfig& rc) {
    const std::vector<Episode> episodes =
        load_corpus(corpus_path, Split::Train, rc.model.grid, rc.corpus_lenient);
    const Vocabulary vocab = load_vocab(vocab_path);
    ModelConfig mcfg = rc.model;
    mcfg.vocab_size = vocab.size();

    TrainOptions options;
    options.threads = rc.threads;
    options.deterministic_timing = rc.timing_deterministic;
    options.snapshot_path = snapshot;
    options.resume_path = resume;

    const PretrainResult result =
        pretrain_mlm(extract_mlm_texts(episodes), vocab, mcfg, rc.pretrain, options);
    save_checkpoint(result.checkpoint.params, result.checkpoint.config, out_ckpt);
    write_loss_curve_csv(result.curve, curves_path);
    if (lr_path.empty()) lr_path = default_lr_path(curves_path).string();
    write_lr_csv(result.schedule, lr_path);
    echo_config(rc, out_ckpt);
    if (!result.curve.empty()) {
        std::cout << "pretrain: " << result.curve.size() << " epochs, final train loss "
                  << result.curve.back().train_loss << ", valid loss "
                  << result.curve.back().valid_loss << "\n";
    }
    std::cout << "checkpoint -> " << out_ckpt << "\n";
    return 0;
}

int run_finetune(const std::string& corpus_path, const std::string& init_ckpt,
                 const std::string& vocab_path, const std::string& out_ckpt,
                 const std::string& curves_path, const RunConfig& rc) {
    const std::vector<Episode> episodes =
        load_corpus_all(corpus_path, rc.model.grid, rc.corpus_lenient);
    const Vocabulary vocab = resolve_vocab(vocab_path, episodes, rc);
    ModelConfig mcfg = rc.model;
    mcfg.vocab_size = vocab.size();

    ParamSet<float> init;
    if (!init_ckpt.empty()) {
        init = init_builder_from_mlm(load_checkpoint(init_ckpt), mcfg, mcfg.seed);
    } else {
        init = init_params<float>(mcfg, mcfg.seed); // random-init ablation
    }

    TrainOptions options;
    options.threads = rc.threads;
    options.deterministic_timing = rc.timing_deterministic;

    FinetuneResult result =
        train_builder(episodes, std::move(init), mcfg, vocab, rc.finetune, options);
    save_checkpoint(result.params, mcfg, out_ckpt);
    if (!curves_path.empty()) write_loss_curve_csv(result.curve, curves_path);
    echo_config(rc, out_ckpt);
    if (!result.curve.empty()) {
        std::cout << "finetune: " << result.curve.size() << " epochs, final train loss "
                  << result.curve.back().train_loss << ", valid loss "
                  << result.curve.back().valid_loss << "\n";
    }
    std::cout << "checkpoint -> " << out_ckpt << "\n";
    return 0;
}

int run_evaluate(const std::string& corpus_path, const std::string& ckpt_path,
                 const std::string& split_name_arg, const std::string& report_path,
                 const std::string& vocab_path, const RunConfig& rc) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const std::vector<Episode> all =
        load_corpus_all(corpus_path, ckpt.config.grid, rc.corpus_lenient);
    const Split split = parse_split(split_name_arg);
    std::vector<Episode> episodes;
    for (const Episode& ep : all) {
        if (ep.split == split) episodes.push_back(ep);
    }
    const Vocabulary vocab = resolve_vocab(vocab_path, all, rc);
    if (vocab.size() != ckpt.config.vocab_size) {
        throw DataError("vocabulary size " + std::to_string(vocab.size()) +
                        " does not match checkpoint vocab_size " +
                        std::to_string(ckpt.config.vocab_size));
    }

    const Metrics metrics = evaluate_model(ckpt.config, ckpt.params, vocab, episodes,
                                           rc.eval_max_steps, rc.threads);
    const std::string name = std::filesystem::path(ckpt_path).stem().string();
    const std::vector<std::pair<std::string, Metrics>> rows = {{name, metrics}};
    std::cout << report_table(rows);
    if (!report_path.empty()) {
        write_metrics_csv(rows, report_path);
        echo_config(rc, report_path);
    } else {
        echo_config(rc, "");
    }
    return 0;
}

int run_replay(const std::string& corpus_path, const std::string& episode_id,
               const RunConfig& rc) {
    const std::vector<Episode> all =
        load_corpus_all(corpus_path, rc.model.grid, rc.corpus_lenient);
    const Episode* episode = nullptr;
    for (const Episode& ep : all) {
        if (ep.id == episode_id) {
            episode = &ep;
            break;
        }
    }
    if (episode == nullptr) throw DataError("episode \"" + episode_id + "\" not found");

    auto print_grid = [](const Grid& g) {
        std::cout << "  blocks: " << g.block_count() << "\n";
        for (const auto& [cell, color] : g.blocks()) {
            std::cout << "    " << to_string(cell) << " " << color_name(color) << "\n";
        }
    };

    std::cout << "episode " << episode->id << " (" << split_name(episode->split) << "), "
              << episode->dialogue.size() << " utterances\n";
    std::cout << "initial world\n";
    print_grid(episode->initial_world);

    Grid grid = episode->initial_world;
    for (const GoldTurn& turn : episode->gold_turns) {
        std::cout << "turn " << turn.turn_index << "\n";
        for (int i = std::max(0, turn.turn_index - 2); i < turn.turn_index; ++i) {
            const Utterance& u = episode->dialogue[static_cast<std::size_t>(i)];
            std::cout << "  [" << speaker_name(u.speaker) << "] " << u.text << "\n";
        }
        const Grid after = replay(grid, turn.actions);
        const NetChange change = diff(grid, after);
        for (const auto& [cell, color] : change.added) {
            std::cout << "  + " << to_string(cell) << " " << color_name(color) << "\n";
        }
        for (const auto& [cell, color] : change.removed) {
            std::cout << "  - " << to_string(cell) << " " << color_name(color) << "\n";
        }
        grid = after;
        print_grid(grid);
    }
    return 0;
}

} // namespace

int cli_run(const std::vector<std::string>& args) {
    CLI::App app{"continued-pretraining pipeline for a dialogue-driven block builder"};
    app.require_subcommand(1);

    struct {
        std::string corpus, out;
        int min_freq = 0, max_size = 0;
        ConfigFlags cfg;
    } bv;
    auto* bv_cmd = app.add_subcommand("build-vocab", "build a vocabulary from the train split");
    bv_cmd->add_option("--corpus", bv.corpus, "episode corpus (jsonl)")->required();
    bv_cmd->add_option("--out", bv.out, "vocabulary output path")->required();
    bv_cmd->add_option("--min-freq", bv.min_freq, "minimum token frequency");
    bv_cmd->add_option("--max-size", bv.max_size, "vocabulary size cap");
    bv.cfg.attach(bv_cmd);

    struct {
        std::string corpus, vocab, out_ckpt, curves, lr_csv, snapshot, resume;
        ConfigFlags cfg;
    } pt;
    auto* pt_cmd = app.add_subcommand("pretrain", "masked-language-model pretraining");
    pt_cmd->add_option("--corpus", pt.corpus, "episode corpus (jsonl)")->required();
    pt_cmd->add_option("--vocab", pt.vocab, "vocabulary file")->required();
    pt_cmd->add_option("--out-checkpoint", pt.out_ckpt, "checkpoint output path")->required();
    pt_cmd->add_option("--curves", pt.curves, "loss-curve csv output path")->required();
    pt_cmd->add_option("--lr-csv", pt.lr_csv, "lr schedule csv (default: lr.csv beside curves)");
    pt_cmd->add_option("--snapshot", pt.snapshot, "write resumable state here each epoch");
    pt_cmd->add_option("--resume", pt.resume, "resume from a state snapshot");
    pt.cfg.attach(pt_cmd);

    struct {
        std::string corpus, init_ckpt, vocab, out_ckpt, curves;
        ConfigFlags cfg;
    } ft;
    auto* ft_cmd = app.add_subcommand("finetune", "builder fine-tuning (teacher forcing)");
    ft_cmd->add_option("--corpus", ft.corpus, "episode corpus (jsonl)")->required();
    ft_cmd->add_option("--init-checkpoint", ft.init_ckpt,
                       "pretrained checkpoint (omit for the random-init ablation)");
    ft_cmd->add_option("--vocab", ft.vocab, "vocabulary file (default: rebuilt from train split)");
    ft_cmd->add_option("--out-checkpoint", ft.out_ckpt, "checkpoint output path")->required();
    ft_cmd->add_option("--curves", ft.curves, "loss-curve csv output path");
    ft.cfg.attach(ft_cmd);

    struct {
        std::string corpus, ckpt, split = "test", report, vocab;
        ConfigFlags cfg;
    } ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "net-action recall/precision/F1");
    ev_cmd->add_option("--corpus", ev.corpus, "episode corpus (jsonl)")->required();
    ev_cmd->add_option("--checkpoint", ev.ckpt, "builder checkpoint")->required();
    ev_cmd->add_option("--split", ev.split, "train | valid | test");
    ev_cmd->add_option("--report", ev.report, "metrics csv output path");
    ev_cmd->add_option("--vocab", ev.vocab, "vocabulary file (default: rebuilt from train split)");
    ev.cfg.attach(ev_cmd);

    struct {
        std::string corpus, episode;
        ConfigFlags cfg;
    } rp;
    auto* rp_cmd = app.add_subcommand("replay", "print turn-by-turn grids and net changes");
    rp_cmd->add_option("--corpus", rp.corpus, "episode corpus (jsonl)")->required();
    rp_cmd->add_option("--episode", rp.episode, "episode id")->required();
    rp.cfg.attach(rp_cmd);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (bv_cmd->parsed()) {
            return run_build_vocab(bv.corpus, bv.out, bv.min_freq, bv.max_size, bv.cfg.resolve());
        }
        if (pt_cmd->parsed()) {
            return run_pretrain(pt.corpus, pt.vocab, pt.out_ckpt, pt.curves, pt.lr_csv,
                                pt.snapshot, pt.resume, pt.cfg.resolve());
        }
        if (ft_cmd->parsed()) {
            return run_finetune(ft.corpus, ft.init_ckpt, ft.vocab, ft.out_ckpt, ft.curves,
                                ft.cfg.resolve());
        }
        if (ev_cmd->parsed()) {
            return run_evaluate(ev.corpus, ev.ckpt, ev.split, ev.report, ev.vocab,
                                ev.cfg.resolve());
        }
        if (rp_cmd->parsed()) {
            return run_replay(rp.corpus, rp.episode, rp.cfg.resolve());
        }
        std::cerr << app.help();
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace blockbuild
