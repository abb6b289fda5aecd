#include "blockbuild/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace blockbuild {

namespace {

long long parse_ll(const std::string& key, const std::string& value) {
    long long out = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) {
        throw UsageError("config key " + key + ": \"" + value + "\" is not an integer");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) {
        throw UsageError("config key " + key + ": \"" + value + "\" is not an unsigned integer");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        throw UsageError("config key " + key + ": \"" + value + "\" is not a number");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw UsageError("config key " + key + ": \"" + value + "\" is not a boolean");
}

std::string render_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

template <class T>
ConfigKey int_key(std::string key, std::string desc, T RunConfig::* field) {
    return ConfigKey{
        key, std::move(desc),
        [key, field](RunConfig& c, const std::string& v) {
            c.*field = static_cast<T>(parse_ll(key, v));
        },
        [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

ConfigKey bool_key(std::string key, std::string desc, bool RunConfig::* field) {
    return ConfigKey{key, std::move(desc),
                     [key, field](RunConfig& c, const std::string& v) {
                         c.*field = parse_bool(key, v);
                     },
                     [field](const RunConfig& c) { return c.*field ? "true" : "false"; }};
}

std::vector<ConfigKey> make_schema() {
    std::vector<ConfigKey> s;
    auto add = [&s](std::string key, std::string desc, auto setter, auto getter) {
        s.push_back(ConfigKey{std::move(key), std::move(desc), setter, getter});
    };

    auto model_int = [&](std::string key, std::string desc, int ModelConfig::* field) {
        add(key, std::move(desc),
            [key, field](RunConfig& c, const std::string& v) {
                c.model.*field = static_cast<int>(parse_ll(key, v));
            },
            [field](const RunConfig& c) { return std::to_string(c.model.*field); });
    };
    model_int("model.n_layers", "transformer encoder layers", &ModelConfig::n_layers);
    model_int("model.n_heads", "attention heads", &ModelConfig::n_heads);
    model_int("model.d_model", "hidden width", &ModelConfig::d_model);
    model_int("model.d_ff", "feed-forward width", &ModelConfig::d_ff);
    model_int("model.max_seq_len", "encoder sequence length", &ModelConfig::max_seq_len);
    model_int("model.n_colors", "block colors known to the model", &ModelConfig::n_colors);
    add("model.grid_w", "grid width (x)",
        [](RunConfig& c, const std::string& v) {
            c.model.grid.w = static_cast<int>(parse_ll("model.grid_w", v));
        },
        [](const RunConfig& c) { return std::to_string(c.model.grid.w); });
    add("model.grid_h", "grid height (y)",
        [](RunConfig& c, const std::string& v) {
            c.model.grid.h = static_cast<int>(parse_ll("model.grid_h", v));
        },
        [](const RunConfig& c) { return std::to_string(c.model.grid.h); });
    add("model.grid_d", "grid depth (z)",
        [](RunConfig& c, const std::string& v) {
            c.model.grid.d = static_cast<int>(parse_ll("model.grid_d", v));
        },
        [](const RunConfig& c) { return std::to_string(c.model.grid.d); });
    add("model.dropout", "dropout probability",
        [](RunConfig& c, const std::string& v) {
            c.model.dropout = parse_double("model.dropout", v);
        },
        [](const RunConfig& c) { return render_double(c.model.dropout); });
    add("model.seed", "parameter-init seed",
        [](RunConfig& c, const std::string& v) { c.model.seed = parse_u64("model.seed", v); },
        [](const RunConfig& c) { return std::to_string(c.model.seed); });

    auto pre_int = [&](std::string key, std::string desc, int PretrainConfig::* field) {
        add(key, std::move(desc),
            [key, field](RunConfig& c, const std::string& v) {
                c.pretrain.*field = static_cast<int>(parse_ll(key, v));
            },
            [field](const RunConfig& c) { return std::to_string(c.pretrain.*field); });
    };
    auto pre_double = [&](std::string key, std::string desc, double PretrainConfig::* field) {
        add(key, std::move(desc),
            [key, field](RunConfig& c, const std::string& v) {
                c.pretrain.*field = parse_double(key, v);
            },
            [field](const RunConfig& c) { return render_double(c.pretrain.*field); });
    };
    pre_int("pretrain.epochs", "pretraining epochs", &PretrainConfig::epochs);
    pre_double("pretrain.peak_lr", "peak learning rate", &PretrainConfig::peak_lr);
    pre_double("pretrain.warmup_fraction", "warmup fraction of total steps",
               &PretrainConfig::warmup_fraction);
    pre_int("pretrain.batch_size", "sequences per optimizer step", &PretrainConfig::batch_size);
    pre_double("pretrain.mask_prob", "token selection probability", &PretrainConfig::mask_prob);
    add("pretrain.seed", "pretraining data/mask seed",
        [](RunConfig& c, const std::string& v) {
            c.pretrain.seed = parse_u64("pretrain.seed", v);
        },
        [](const RunConfig& c) { return std::to_string(c.pretrain.seed); });
    pre_double("pretrain.valid_fraction", "fraction of texts held out", &PretrainConfig::valid_fraction);

    auto fin_int = [&](std::string key, std::string desc, int FinetuneConfig::* field) {
        add(key, std::move(desc),
            [key, field](RunConfig& c, const std::string& v) {
                c.finetune.*field = static_cast<int>(parse_ll(key, v));
            },
            [field](const RunConfig& c) { return std::to_string(c.finetune.*field); });
    };
    auto fin_double = [&](std::string key, std::string desc, double FinetuneConfig::* field) {
        add(key, std::move(desc),
            [key, field](RunConfig& c, const std::string& v) {
                c.finetune.*field = parse_double(key, v);
            },
            [field](const RunConfig& c) { return render_double(c.finetune.*field); });
    };
    fin_int("finetune.epochs", "fine-tuning epochs", &FinetuneConfig::epochs);
    fin_double("finetune.peak_lr", "peak learning rate", &FinetuneConfig::peak_lr);
    fin_double("finetune.warmup_fraction", "warmup fraction of total steps",
               &FinetuneConfig::warmup_fraction);
    fin_int("finetune.batch_size", "builder turns per optimizer step", &FinetuneConfig::batch_size);
    add("finetune.seed", "fine-tuning data seed",
        [](RunConfig& c, const std::string& v) {
            c.finetune.seed = parse_u64("finetune.seed", v);
        },
        [](const RunConfig& c) { return std::to_string(c.finetune.seed); });
    add("finetune.max_steps", "optimizer-step cap (0 = all epochs)",
        [](RunConfig& c, const std::string& v) {
            c.finetune.max_steps = parse_ll("finetune.max_steps", v);
        },
        [](const RunConfig& c) { return std::to_string(c.finetune.max_steps); });

    s.push_back(int_key("vocab.min_freq", "minimum token frequency", &RunConfig::vocab_min_freq));
    s.push_back(int_key("vocab.max_size", "vocabulary size cap", &RunConfig::vocab_max_size));
    s.push_back(int_key("eval.max_steps", "decode-step cap per builder turn",
                        &RunConfig::eval_max_steps));
    s.push_back(bool_key("corpus.lenient", "skip invalid episodes with a warning",
                         &RunConfig::corpus_lenient));
    s.push_back(bool_key("timing.deterministic", "write 0 in curve seconds columns",
                         &RunConfig::timing_deterministic));
    s.push_back(int_key("threads", "worker threads (bit-identical results)", &RunConfig::threads));
    return s;
}

} // namespace

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = make_schema();
    return schema;
}

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
    for (const ConfigKey& k : config_schema()) {
        if (k.key == key) {
            k.set(config, value);
            return;
        }
    }
    throw UsageError("unknown config key \"" + key + "\"");
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto strip = [](std::string s) {
            const std::size_t b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const std::size_t e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path.string() + ":" + std::to_string(line_no) +
                             ": expected `key = value`");
        }
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        try {
            apply_override(config, key, value);
        } catch (const UsageError& e) {
            throw UsageError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::string render_effective_config(const RunConfig& config) {
    std::string out;
    for (const ConfigKey& k : config_schema()) {
        out += k.key;
        out += " = ";
        out += k.get(config);
        out += "\n";
    }
    return out;
}

} // namespace blockbuild
