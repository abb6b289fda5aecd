#include "blockbuild/model.hpp"
#include "blockbuild/wire.hpp"

#include <fstream>

namespace blockbuild {

namespace {

constexpr char kMagic[4] = {'B', 'B', 'C', 'K'};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open checkpoint file " + path.string());
    return std::string((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
}

} // namespace

void save_checkpoint(const ParamSet<float>& params, const ModelConfig& config,
                     const std::filesystem::path& path) {
    std::string out;
    out.append(kMagic, 4);
    wire::put_u32(out, kCheckpointVersion);
    wire::put_str(out, config_to_json(config));

    wire::put_u64(out, params.size());
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& t = params.tensors[i];
        wire::put_str(out, params.names[i]);
        out.push_back(static_cast<char>(params.tags[i]));
        wire::put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
        for (int dim : t.shape()) wire::put_u32(out, static_cast<std::uint32_t>(dim));
        wire::put_u64(out, offset);
        offset += static_cast<std::uint64_t>(t.numel()) * 4;
    }
    wire::put_u64(out, offset);
    for (const Tensor& t : params.tensors) {
        for (float v : t.data()) wire::put_f32(out, v);
    }

    std::ofstream file(path, std::ios::binary);
    if (!file || !file.write(out.data(), static_cast<std::streamsize>(out.size()))) {
        throw IoError("cannot write checkpoint file " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    wire::Reader in(read_file(path), "checkpoint file " + path.string());
    try {
        if (in.raw(4) != std::string(kMagic, 4)) {
            throw IoError("checkpoint file " + path.string() + " has a bad magic header");
        }
        const std::uint32_t version = in.u32();
        if (version != kCheckpointVersion) {
            throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                                  std::to_string(kCheckpointVersion));
        }

        Checkpoint ckpt;
        ckpt.config = config_from_json(in.str());
        try {
            validate(ckpt.config);
        } catch (const InvalidConfig& e) {
            throw IoError("checkpoint config invalid: " + std::string(e.what()));
        }

        const std::vector<ParamSpec> expected = param_manifest(ckpt.config);
        const std::uint64_t count = in.u64();
        if (count != expected.size()) {
            throw ManifestMismatch("checkpoint lists " + std::to_string(count) +
                                   " parameters, expected " + std::to_string(expected.size()));
        }

        struct Entry {
            std::string name;
            std::vector<int> shape;
        };
        std::vector<Entry> entries;
        entries.reserve(expected.size());
        std::uint64_t running = 0;
        for (std::size_t i = 0; i < expected.size(); ++i) {
            Entry e;
            e.name = in.str();
            const ParamTag tag = static_cast<ParamTag>(in.raw(1)[0]);
            const std::uint32_t ndim = in.u32();
            for (std::uint32_t k = 0; k < ndim; ++k) e.shape.push_back(static_cast<int>(in.u32()));
            const std::uint64_t offset = in.u64();

            const ParamSpec& spec = expected[i];
            if (e.name != spec.name) {
                throw ManifestMismatch("manifest entry " + std::to_string(i) + " is \"" + e.name +
                                       "\", expected \"" + spec.name + "\"");
            }
            if (e.shape != spec.shape) {
                throw ManifestMismatch("parameter " + e.name + " has shape " +
                                       shape_string(e.shape) + ", expected " +
                                       shape_string(spec.shape));
            }
            if (tag != spec.tag) {
                throw ManifestMismatch("parameter " + e.name + " is tagged " + param_tag_name(tag) +
                                       ", expected " + param_tag_name(spec.tag));
            }
            if (offset != running) {
                throw ManifestMismatch("parameter " + e.name + " at payload offset " +
                                       std::to_string(offset) + ", expected " +
                                       std::to_string(running));
            }
            running += static_cast<std::uint64_t>(shape_numel(e.shape)) * 4;
            entries.push_back(std::move(e));
        }

        const std::uint64_t payload = in.u64();
        if (payload != running) {
            throw IoError("checkpoint payload size " + std::to_string(payload) + ", expected " +
                          std::to_string(running));
        }

        for (const Entry& e : entries) {
            const std::int64_t n = shape_numel(e.shape);
            std::vector<float> data(static_cast<std::size_t>(n));
            for (std::int64_t k = 0; k < n; ++k) data[static_cast<std::size_t>(k)] = in.f32();
            ckpt.params.index.emplace(e.name, ckpt.params.tensors.size());
            ckpt.params.names.push_back(e.name);
            ckpt.params.tags.push_back(expected[ckpt.params.tensors.size()].tag);
            ckpt.params.tensors.push_back(Tensor::from_data(e.shape, std::move(data)));
        }
        if (!in.exhausted()) {
            throw IoError("checkpoint file " + path.string() + " has trailing bytes");
        }
        return ckpt;
    } catch (const VersionMismatch&) {
        throw;
    } catch (const ManifestMismatch&) {
        throw;
    } catch (const IoError&) {
        throw;
    } catch (const DataError& e) {
        throw IoError(e.what()); // truncation and similar low-level read failures
    }
}

} // namespace blockbuild
