#include "c2bn/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "c2bn/binio.hpp"
#include "c2bn/error.hpp"

namespace c2bn::vae {
namespace {

constexpr std::string_view kMagic = "C2BNVAEC";

void write_config(std::ostream& out, const ModelConfig& c) {
    using namespace binio;
    write_u64(out, c.feature_dim);
    write_u64(out, c.num_classes);
    write_u64(out, c.latent_dim);
    write_u64(out, c.hidden_widths.size());
    for (std::size_t w : c.hidden_widths) write_u64(out, w);
    write_f64(out, c.lr);
    write_u64(out, c.epochs);
    write_u64(out, c.batch_size);
    write_f64(out, c.kl_weight);
    write_u32(out, c.norm == NormKind::conditional ? 0 : 1);
    write_u32(out, c.cbn_placement == CbnPlacement::encoder_and_decoder ? 0 : 1);
    write_f64(out, c.leaky_slope);
    write_f64(out, c.norm_eps);
    write_f64(out, c.norm_momentum);
    write_u64(out, c.seed);
}

ModelConfig read_config(std::istream& in) {
    using namespace binio;
    ModelConfig c;
    c.feature_dim = read_u64(in);
    c.num_classes = read_u64(in);
    c.latent_dim = read_u64(in);
    const std::uint64_t depth = read_u64(in);
    if (depth > 4096) throw FormatError("checkpoint: implausible hidden layer count");
    c.hidden_widths.resize(depth);
    for (auto& w : c.hidden_widths) w = read_u64(in);
    c.lr = read_f64(in);
    c.epochs = read_u64(in);
    c.batch_size = read_u64(in);
    c.kl_weight = read_f64(in);
    const std::uint32_t norm = read_u32(in);
    const std::uint32_t placement = read_u32(in);
    if (norm > 1 || placement > 1) throw FormatError("checkpoint: bad normalization descriptor");
    c.norm = norm == 0 ? NormKind::conditional : NormKind::batch;
    c.cbn_placement = placement == 0 ? CbnPlacement::encoder_and_decoder : CbnPlacement::decoder_only;
    c.leaky_slope = read_f64(in);
    c.norm_eps = read_f64(in);
    c.norm_momentum = read_f64(in);
    c.seed = read_u64(in);
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: invalid config: ") + e.what());
    }
    return c;
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& checkpoint, std::ostream& out,
                     const std::string& manifest) {
    if (checkpoint.schema_fingerprint.empty()) {
        throw ConfigError("save_checkpoint: checkpoint has no schema fingerprint");
    }
    binio::write_magic(out, kMagic);
    binio::write_u32(out, kCheckpointVersion);
    binio::write_string(out, manifest);
    binio::write_string(out, checkpoint.schema_fingerprint);
    write_config(out, checkpoint.config());
    const auto params = checkpoint.model.named_parameters();
    const auto buffers = checkpoint.model.named_buffers();
    binio::write_u64(out, params.size() + buffers.size());
    for (const auto* list : {&params, &buffers}) {
        for (const auto& [name, m] : *list) {
            binio::write_string(out, name);
            binio::write_matrix(out, *m);
        }
    }
}

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path,
                     const std::string& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    save_checkpoint(checkpoint, out, manifest);
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

ModelCheckpoint load_checkpoint(std::istream& in) {
    binio::expect_magic(in, kMagic, "checkpoint");
    const std::uint32_t version = binio::read_u32(in);
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    ModelCheckpoint ck;
    ck.format_version = version;
    binio::read_string(in);  // manifest
    ck.schema_fingerprint = binio::read_string(in);
    if (ck.schema_fingerprint.empty()) throw FormatError("checkpoint: empty schema fingerprint");
    ck.model = C2bnvae::initialize(read_config(in));

    auto params = ck.model.named_parameters();
    auto buffers = ck.model.named_buffers();
    params.insert(params.end(), buffers.begin(), buffers.end());
    const std::uint64_t count = binio::read_u64(in);
    if (count != params.size()) {
        throw FormatError("checkpoint: holds " + std::to_string(count) + " blocks, config implies " +
                          std::to_string(params.size()));
    }
    for (auto& [name, dst] : params) {
        const std::string got = binio::read_string(in);
        if (got != name) {
            throw FormatError("checkpoint: expected block '" + name + "', found '" + got + "'");
        }
        Matrix m = binio::read_matrix(in);
        if (m.rows() != dst->rows() || m.cols() != dst->cols()) {
            throw FormatError("checkpoint: block '" + name + "' has shape " + shape_of(m) +
                              ", config implies " + shape_of(*dst));
        }
        *dst = std::move(m);
    }
    return ck;
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    return load_checkpoint(in);
}

void require_matching_schema(const ModelCheckpoint& checkpoint, const EncodedDataset& dataset) {
    if (checkpoint.schema_fingerprint != dataset.schema_fingerprint) {
        throw FingerprintMismatch("checkpoint was trained on schema " +
                                  checkpoint.schema_fingerprint + " but the dataset uses " +
                                  (dataset.schema_fingerprint.empty() ? std::string("<none>")
                                                                      : dataset.schema_fingerprint));
    }
    if (checkpoint.config().feature_dim != dataset.feature_dim()) {
        throw ShapeError("checkpoint generates " + std::to_string(checkpoint.config().feature_dim) +
                         " features, dataset has " + std::to_string(dataset.feature_dim()));
    }
}

}  // namespace c2bn::vae
