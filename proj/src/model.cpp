#include "blockbuild/model.hpp"

#include <json.hpp>

namespace blockbuild {

using nlohmann::json;

void validate(const ModelConfig& c) {
    if (c.n_layers < 1) throw InvalidConfig("n_layers must be >= 1");
    if (c.n_heads < 1) throw InvalidConfig("n_heads must be >= 1");
    if (c.d_model < 1 || c.d_model % c.n_heads != 0) {
        throw InvalidConfig("d_model (" + std::to_string(c.d_model) +
                            ") must be positive and divisible by n_heads (" +
                            std::to_string(c.n_heads) + ")");
    }
    if (c.d_ff < 1) throw InvalidConfig("d_ff must be >= 1");
    if (c.vocab_size < 5) throw InvalidConfig("vocab_size must be >= 5");
    if (c.max_seq_len < 2) throw InvalidConfig("max_seq_len must be >= 2");
    if (c.grid.w < 1 || c.grid.h < 1 || c.grid.d < 1) {
        throw InvalidConfig("grid dims must be positive");
    }
    if (c.n_colors < 1 || c.n_colors > kNumBlockColors) {
        throw InvalidConfig("n_colors must be in [1, " + std::to_string(kNumBlockColors) + "]");
    }
    if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw InvalidConfig("dropout must be in [0, 1)");
}

const char* param_tag_name(ParamTag tag) {
    switch (tag) {
        case ParamTag::Encoder: return "encoder";
        case ParamTag::MlmHead: return "mlm_head";
        case ParamTag::WorldEncoder: return "world_encoder";
        case ParamTag::BuilderHead: return "builder_head";
    }
    return "?";
}

std::vector<ParamSpec> param_manifest(const ModelConfig& c) {
    validate(c);
    std::vector<ParamSpec> out;
    auto add = [&out](std::string name, ParamTag tag, std::vector<int> shape, ParamInit init) {
        out.push_back(ParamSpec{std::move(name), tag, std::move(shape), init});
    };
    const int d = c.d_model;

    add("encoder.tok_emb", ParamTag::Encoder, {c.vocab_size, d}, ParamInit::Normal);
    add("encoder.pos_emb", ParamTag::Encoder, {c.max_seq_len, d}, ParamInit::Normal);
    for (int i = 0; i < c.n_layers; ++i) {
        const std::string base = "encoder.layer" + std::to_string(i) + ".";
        add(base + "ln1.gain", ParamTag::Encoder, {d}, ParamInit::One);
        add(base + "ln1.bias", ParamTag::Encoder, {d}, ParamInit::Zero);
        add(base + "attn.wq", ParamTag::Encoder, {d, d}, ParamInit::Normal);
        add(base + "attn.bq", ParamTag::Encoder, {d}, ParamInit::Zero);
        add(base + "attn.wk", ParamTag::Encoder, {d, d}, ParamInit::Normal);
        add(base + "attn.bk", ParamTag::Encoder, {d}, ParamInit::Zero);
        add(base + "attn.wv", ParamTag::Encoder, {d, d}, ParamInit::Normal);
        add(base + "attn.bv", ParamTag::Encoder, {d}, ParamInit::Zero);
        add(base + "attn.wo", ParamTag::Encoder, {d, d}, ParamInit::Normal);
        add(base + "attn.bo", ParamTag::Encoder, {d}, ParamInit::Zero);
        add(base + "ln2.gain", ParamTag::Encoder, {d}, ParamInit::One);
        add(base + "ln2.bias", ParamTag::Encoder, {d}, ParamInit::Zero);
        add(base + "ffn.w1", ParamTag::Encoder, {d, c.d_ff}, ParamInit::Normal);
        add(base + "ffn.b1", ParamTag::Encoder, {c.d_ff}, ParamInit::Zero);
        add(base + "ffn.w2", ParamTag::Encoder, {c.d_ff, d}, ParamInit::Normal);
        add(base + "ffn.b2", ParamTag::Encoder, {d}, ParamInit::Zero);
    }
    add("encoder.ln_final.gain", ParamTag::Encoder, {d}, ParamInit::One);
    add("encoder.ln_final.bias", ParamTag::Encoder, {d}, ParamInit::Zero);

    add("mlm_head.bias", ParamTag::MlmHead, {c.vocab_size}, ParamInit::Zero);

    add("world.occ_emb", ParamTag::WorldEncoder, {c.n_colors + 1, d}, ParamInit::Normal);
    add("world.pos_x", ParamTag::WorldEncoder, {c.grid.w, d}, ParamInit::Normal);
    add("world.pos_y", ParamTag::WorldEncoder, {c.grid.h, d}, ParamInit::Normal);
    add("world.pos_z", ParamTag::WorldEncoder, {c.grid.d, d}, ParamInit::Normal);
    add("world.proj.w", ParamTag::WorldEncoder, {d, d}, ParamInit::Normal);
    add("world.proj.b", ParamTag::WorldEncoder, {d}, ParamInit::Zero);

    add("builder.score.w", ParamTag::BuilderHead, {d, d}, ParamInit::Normal);
    add("builder.stop_vec", ParamTag::BuilderHead, {d}, ParamInit::Normal);
    add("builder.color_emb", ParamTag::BuilderHead, {c.n_colors, d}, ParamInit::Normal);
    return out;
}

std::int64_t param_count(const ModelConfig& config) {
    std::int64_t n = 0;
    for (const ParamSpec& spec : param_manifest(config)) n += shape_numel(spec.shape);
    return n;
}

ParamSet<double> to_double(const ParamSet<float>& src) {
    ParamSet<double> out;
    out.names = src.names;
    out.tags = src.tags;
    out.index = src.index;
    out.tensors.reserve(src.tensors.size());
    for (const auto& t : src.tensors) {
        std::vector<double> data(t.data().begin(), t.data().end());
        out.tensors.push_back(Tensor64::from_data(t.shape(), std::move(data)));
    }
    return out;
}

std::string config_to_json(const ModelConfig& c) {
    json j;
    j["n_layers"] = c.n_layers;
    j["n_heads"] = c.n_heads;
    j["d_model"] = c.d_model;
    j["d_ff"] = c.d_ff;
    j["vocab_size"] = c.vocab_size;
    j["max_seq_len"] = c.max_seq_len;
    j["grid_w"] = c.grid.w;
    j["grid_h"] = c.grid.h;
    j["grid_d"] = c.grid.d;
    j["n_colors"] = c.n_colors;
    j["dropout"] = c.dropout;
    j["seed"] = c.seed;
    return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw IoError("checkpoint config is not valid JSON");
    ModelConfig c;
    try {
        c.n_layers = j.at("n_layers").get<int>();
        c.n_heads = j.at("n_heads").get<int>();
        c.d_model = j.at("d_model").get<int>();
        c.d_ff = j.at("d_ff").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.max_seq_len = j.at("max_seq_len").get<int>();
        c.grid.w = j.at("grid_w").get<int>();
        c.grid.h = j.at("grid_h").get<int>();
        c.grid.d = j.at("grid_d").get<int>();
        c.n_colors = j.at("n_colors").get<int>();
        c.dropout = j.at("dropout").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint config: ") + e.what());
    }
    return c;
}

ParamSet<float> init_builder_from_mlm(const Checkpoint& checkpoint, const ModelConfig& config,
                                      std::uint64_t seed) {
    const ModelConfig& a = checkpoint.config;
    if (a.n_layers != config.n_layers || a.n_heads != config.n_heads ||
        a.d_model != config.d_model || a.d_ff != config.d_ff ||
        a.vocab_size != config.vocab_size || a.max_seq_len != config.max_seq_len) {
        throw IncompatibleBackbone(
            "checkpoint encoder (layers=" + std::to_string(a.n_layers) +
            ", heads=" + std::to_string(a.n_heads) + ", d_model=" + std::to_string(a.d_model) +
            ", d_ff=" + std::to_string(a.d_ff) + ", vocab=" + std::to_string(a.vocab_size) +
            ", seq=" + std::to_string(a.max_seq_len) + ") does not match the requested config");
    }
    ParamSet<float> params = init_params<float>(config, seed);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params.tags[i] != ParamTag::Encoder) continue;
        const Tensor& src = checkpoint.params[params.names[i]];
        if (src.shape() != params.tensors[i].shape()) {
            throw IncompatibleBackbone("encoder parameter " + params.names[i] + " has shape " +
                                       shape_string(src.shape()) + ", expected " +
                                       shape_string(params.tensors[i].shape()));
        }
        params.tensors[i].data() = src.data();
    }
    return params;
}

} // namespace blockbuild
