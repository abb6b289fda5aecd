#pragma once

#include "blockbuild/gridworld.hpp"
#include "blockbuild/ops.hpp"
#include "blockbuild/rng.hpp"
#include "blockbuild/tokenizer.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace blockbuild {

struct InvalidConfig : UsageError {
    using UsageError::UsageError;
};

struct EmptyFeasibleSet : DataError {
    using DataError::DataError;
};

struct ModelConfig {
    int n_layers = 2;
    int n_heads = 4;
    int d_model = 64;
    int d_ff = 128;
    int vocab_size = 5;
    int max_seq_len = 32;
    Dims grid{};
    int n_colors = kNumBlockColors;
    double dropout = 0.0;
    std::uint64_t seed = 42;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& config); // throws InvalidConfig

// ---------------------------------------------------------------------------
// Parameter manifest
// ---------------------------------------------------------------------------

enum class ParamTag : std::uint8_t { Encoder = 0, MlmHead = 1, WorldEncoder = 2, BuilderHead = 3 };

const char* param_tag_name(ParamTag tag);

enum class ParamInit : std::uint8_t { Normal, Zero, One };

struct ParamSpec {
    std::string name;
    ParamTag tag;
    std::vector<int> shape;
    ParamInit init;
};

/// Deterministic name -> shape manifest; fully determined by the config.
std::vector<ParamSpec> param_manifest(const ModelConfig& config);

std::int64_t param_count(const ModelConfig& config);

template <class Real>
struct ParamSet {
    std::vector<std::string> names;
    std::vector<ParamTag> tags;
    std::vector<TensorT<Real>> tensors;
    std::unordered_map<std::string, std::size_t> index;

    const TensorT<Real>& operator[](const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw DataError("unknown parameter \"" + name + "\"");
        return tensors[it->second];
    }
    TensorT<Real>& at(const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw DataError("unknown parameter \"" + name + "\"");
        return tensors[it->second];
    }

    std::size_t size() const { return tensors.size(); }

    void set_requires_grad(bool v) {
        for (auto& t : tensors) t.set_requires_grad(v);
    }
    void zero_grad() {
        for (auto& t : tensors) t.zero_grad();
    }
};

/// Embeddings and weights ~ Normal(0, 0.02), biases zero, norm gains one.
/// Draws happen in manifest order from a single stream, so the result is a
/// pure function of (config, seed).
template <class Real>
ParamSet<Real> init_params(const ModelConfig& config, std::uint64_t seed) {
    validate(config);
    SplitMix rng(seed);
    ParamSet<Real> out;
    for (const ParamSpec& spec : param_manifest(config)) {
        TensorT<Real> t = TensorT<Real>::zeros(spec.shape);
        switch (spec.init) {
            case ParamInit::Normal:
                for (Real& v : t.data()) v = static_cast<Real>(gaussian(rng) * 0.02);
                break;
            case ParamInit::Zero:
                break;
            case ParamInit::One:
                for (Real& v : t.data()) v = Real(1);
                break;
        }
        out.index.emplace(spec.name, out.tensors.size());
        out.names.push_back(spec.name);
        out.tags.push_back(spec.tag);
        out.tensors.push_back(std::move(t));
    }
    return out;
}

template <class Real>
ParamSet<Real> clone_params(const ParamSet<Real>& src) {
    ParamSet<Real> out;
    out.names = src.names;
    out.tags = src.tags;
    out.index = src.index;
    out.tensors.reserve(src.tensors.size());
    for (const auto& t : src.tensors) {
        out.tensors.push_back(TensorT<Real>::from_data(t.shape(), t.data()));
    }
    return out;
}

ParamSet<double> to_double(const ParamSet<float>& src);

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

/// Pre-norm transformer encoder over one encoded sequence. PAD key positions
/// are excluded from attention with an additive -1e9 before softmax. Pass a
/// rng to enable dropout (training); leave null for deterministic inference.
template <class Real>
TensorT<Real> encode_text(const ModelConfig& config, const ParamSet<Real>& params,
                          const Encoding& enc, RandomSource* dropout_rng = nullptr) {
    const int s = config.max_seq_len;
    const int d = config.d_model;
    if (static_cast<int>(enc.ids.size()) != s || static_cast<int>(enc.attention_mask.size()) != s) {
        throw ShapeMismatch("encode_text: encoding length " + std::to_string(enc.ids.size()) +
                            " does not match max_seq_len " + std::to_string(s));
    }
    const bool drop = dropout_rng != nullptr && config.dropout > 0.0;
    auto maybe_drop = [&](TensorT<Real> t) {
        return drop ? dropout(t, config.dropout, *dropout_rng) : t;
    };

    TensorT<Real> mask_row = TensorT<Real>::zeros({s});
    for (int i = 0; i < s; ++i) {
        if (enc.attention_mask[static_cast<std::size_t>(i)] == 0) {
            mask_row.data()[static_cast<std::size_t>(i)] = Real(-1e9);
        }
    }

    TensorT<Real> x = add(gather_rows(params["encoder.tok_emb"], enc.ids), params["encoder.pos_emb"]);
    x = maybe_drop(x);

    const int dh = d / config.n_heads;
    const Real att_scale = Real(1) / static_cast<Real>(std::sqrt(static_cast<double>(dh)));
    for (int layer = 0; layer < config.n_layers; ++layer) {
        const std::string base = "encoder.layer" + std::to_string(layer) + ".";
        TensorT<Real> h = layer_norm(x, params[base + "ln1.gain"], params[base + "ln1.bias"]);
        TensorT<Real> q = add_row(matmul(h, params[base + "attn.wq"]), params[base + "attn.bq"]);
        TensorT<Real> k = add_row(matmul(h, params[base + "attn.wk"]), params[base + "attn.bk"]);
        TensorT<Real> v = add_row(matmul(h, params[base + "attn.wv"]), params[base + "attn.bv"]);
        std::vector<TensorT<Real>> heads;
        heads.reserve(static_cast<std::size_t>(config.n_heads));
        for (int hd = 0; hd < config.n_heads; ++hd) {
            TensorT<Real> qh = slice_cols(q, hd * dh, dh);
            TensorT<Real> kh = slice_cols(k, hd * dh, dh);
            TensorT<Real> vh = slice_cols(v, hd * dh, dh);
            TensorT<Real> scores = add_row(scale(matmul_nt(qh, kh), att_scale), mask_row);
            TensorT<Real> probs = maybe_drop(softmax(scores));
            heads.push_back(matmul(probs, vh));
        }
        TensorT<Real> attn =
            add_row(matmul(concat_cols(heads), params[base + "attn.wo"]), params[base + "attn.bo"]);
        x = add(x, maybe_drop(attn));

        TensorT<Real> h2 = layer_norm(x, params[base + "ln2.gain"], params[base + "ln2.bias"]);
        TensorT<Real> f1 = gelu(add_row(matmul(h2, params[base + "ffn.w1"]), params[base + "ffn.b1"]));
        TensorT<Real> f2 = add_row(matmul(f1, params[base + "ffn.w2"]), params[base + "ffn.b2"]);
        x = add(x, maybe_drop(f2));
    }
    return layer_norm(x, params["encoder.ln_final.gain"], params["encoder.ln_final.bias"]);
}

/// Output projection tied to the token embedding, plus a vocab bias.
template <class Real>
TensorT<Real> mlm_logits(const ModelConfig& config, const ParamSet<Real>& params,
                         const TensorT<Real>& hidden) {
    if (hidden.rows() != config.max_seq_len || hidden.cols() != config.d_model) {
        throw ShapeMismatch("mlm_logits: hidden " + shape_string(hidden.shape()));
    }
    return add_row(matmul_nt(hidden, params["encoder.tok_emb"]), params["mlm_head.bias"]);
}

/// Per-cell states: occupancy-class embedding plus per-axis position
/// embeddings, through one linear + GELU layer. Cells in canonical order.
template <class Real>
TensorT<Real> encode_world(const ModelConfig& config, const ParamSet<Real>& params,
                           const Grid& grid) {
    if (grid.dims() != config.grid) {
        throw DimsMismatch("encode_world: grid dims do not match the model config");
    }
    const int n = grid.dims().cells();
    std::vector<int> occ(static_cast<std::size_t>(n));
    std::vector<int> xs(static_cast<std::size_t>(n));
    std::vector<int> ys(static_cast<std::size_t>(n));
    std::vector<int> zs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Cell c = grid.cell_at(i);
        int cls = 0;
        if (grid.occupied(c)) {
            const int color = static_cast<int>(grid.color_at(c));
            if (color >= config.n_colors) {
                throw DimsMismatch("encode_world: block color " +
                                   std::string(color_name(grid.color_at(c))) +
                                   " outside the model's n_colors");
            }
            cls = 1 + color;
        }
        occ[static_cast<std::size_t>(i)] = cls;
        xs[static_cast<std::size_t>(i)] = c.x;
        ys[static_cast<std::size_t>(i)] = c.y;
        zs[static_cast<std::size_t>(i)] = c.z;
    }
    TensorT<Real> e = add(add(gather_rows(params["world.occ_emb"], occ),
                              gather_rows(params["world.pos_x"], xs)),
                          add(gather_rows(params["world.pos_y"], ys),
                              gather_rows(params["world.pos_z"], zs)));
    return gelu(add_row(matmul(e, params["world.proj.w"]), params["world.proj.b"]));
}

/// Representation matrix for candidate actions: cell state (+ color embedding
/// for Place), or the learned stop vector. One row per candidate.
template <class Real>
TensorT<Real> action_repr_matrix(const TensorT<Real>& world_states, const TensorT<Real>& color_emb,
                                 const TensorT<Real>& stop_vec, const std::vector<Action>& actions,
                                 const Dims& dims) {
    const int d = world_states.cols();
    const int n = static_cast<int>(actions.size());
    auto cell_index = [&dims](const Cell& c) { return (c.x * dims.h + c.y) * dims.d + c.z; };

    std::vector<Real> data(static_cast<std::size_t>(n) * d, Real(0));
    for (int i = 0; i < n; ++i) {
        Real* row = data.data() + static_cast<std::size_t>(i) * d;
        const Action& a = actions[static_cast<std::size_t>(i)];
        switch (a.kind) {
            case ActionKind::Stop:
                for (int j = 0; j < d; ++j) row[j] = stop_vec.data()[static_cast<std::size_t>(j)];
                break;
            case ActionKind::Place: {
                const Real* cellp =
                    world_states.data().data() + static_cast<std::size_t>(cell_index(a.cell)) * d;
                const Real* colp = color_emb.data().data() +
                                   static_cast<std::size_t>(static_cast<int>(a.color)) * d;
                for (int j = 0; j < d; ++j) row[j] = cellp[j] + colp[j];
                break;
            }
            case ActionKind::Remove: {
                const Real* cellp =
                    world_states.data().data() + static_cast<std::size_t>(cell_index(a.cell)) * d;
                for (int j = 0; j < d; ++j) row[j] = cellp[j];
                break;
            }
        }
    }
    TensorT<Real> out =
        detail::op_result<Real>({n, d}, std::move(data), {world_states, color_emb, stop_vec});
    if (out.requires_grad()) {
        auto wn = world_states.node(), cn = color_emb.node(), sn = stop_vec.node();
        auto* on = out.node().get();
        auto acts = actions;
        auto dims2 = dims;
        out.node()->backward_fn = [wn, cn, sn, on, acts, dims2, d] {
            auto cell_index = [&dims2](const Cell& c) { return (c.x * dims2.h + c.y) * dims2.d + c.z; };
            for (std::size_t i = 0; i < acts.size(); ++i) {
                const Real* g = on->grad.data() + i * static_cast<std::size_t>(d);
                const Action& a = acts[i];
                switch (a.kind) {
                    case ActionKind::Stop:
                        if (sn->requires_grad) {
                            for (int j = 0; j < d; ++j) sn->grad[static_cast<std::size_t>(j)] += g[j];
                        }
                        break;
                    case ActionKind::Place:
                        if (cn->requires_grad) {
                            Real* dst = cn->grad.data() +
                                        static_cast<std::size_t>(static_cast<int>(a.color)) * d;
                            for (int j = 0; j < d; ++j) dst[j] += g[j];
                        }
                        [[fallthrough]];
                    case ActionKind::Remove:
                        if (wn->requires_grad) {
                            Real* dst =
                                wn->grad.data() + static_cast<std::size_t>(cell_index(a.cell)) * d;
                            for (int j = 0; j < d; ++j) dst[j] += g[j];
                        }
                        break;
                }
            }
        };
    }
    return out;
}

/// Bilinear scores between the dialogue summary (hidden state at CLS) and
/// each candidate action representation. Shape [1, |candidates|], order
/// matching the canonical candidate order.
template <class Real>
TensorT<Real> builder_step_logits(const ModelConfig& config, const ParamSet<Real>& params,
                                  const TensorT<Real>& text_hidden,
                                  const TensorT<Real>& world_states,
                                  const std::vector<Action>& candidates) {
    if (candidates.empty()) {
        throw EmptyFeasibleSet("builder_step_logits: empty candidate set");
    }
    TensorT<Real> summary = slice_rows(text_hidden, 0, 1);
    TensorT<Real> projected = matmul(summary, params["builder.score.w"]);
    TensorT<Real> reprs = action_repr_matrix(world_states, params["builder.color_emb"],
                                             params["builder.stop_vec"], candidates, config.grid);
    return matmul_nt(projected, reprs);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct IoError : DataError {
    using DataError::DataError;
};
struct VersionMismatch : DataError {
    using DataError::DataError;
};
struct ManifestMismatch : DataError {
    using DataError::DataError;
};
struct IncompatibleBackbone : DataError {
    using DataError::DataError;
};

struct Checkpoint {
    ModelConfig config;
    ParamSet<float> params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParamSet<float>& params, const ModelConfig& config,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

/// The hand-off step: encoder parameters copied bit-exactly from the
/// checkpoint, world encoder and builder head freshly initialized from the
/// seed, MLM head discarded (left at its fresh initialization).
ParamSet<float> init_builder_from_mlm(const Checkpoint& checkpoint, const ModelConfig& config,
                                      std::uint64_t seed);

} // namespace blockbuild
