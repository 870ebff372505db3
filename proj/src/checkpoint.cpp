#include "radcap/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "radcap/config_json.hpp"

namespace radcap {

// ---- config <-> json -------------------------------------------------

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"d_model", c.d_model},
         {"n_heads", c.n_heads},
         {"n_enc_layers", c.n_enc_layers},
         {"n_dec_layers", c.n_dec_layers},
         {"d_ff", c.d_ff},
         {"vocab_size", c.vocab_size},
         {"max_len", c.max_len},
         {"dropout_rate", c.dropout_rate},
         {"use_positional", c.use_positional},
         {"ln_eps", c.ln_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_enc_layers = j.value("n_enc_layers", c.n_enc_layers);
    c.n_dec_layers = j.value("n_dec_layers", c.n_dec_layers);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_len = j.value("max_len", c.max_len);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.use_positional = j.value("use_positional", c.use_positional);
    c.ln_eps = j.value("ln_eps", c.ln_eps);
}

void to_json(nlohmann::json& j, const QFormerConfig& c) {
    j = {{"n_queries", c.n_queries}, {"d_q", c.d_q},     {"n_blocks", c.n_blocks},
         {"n_heads", c.n_heads},     {"d_ff", c.d_ff},   {"d_img", c.d_img},
         {"dropout_rate", c.dropout_rate}, {"ln_eps", c.ln_eps}};
}

void from_json(const nlohmann::json& j, QFormerConfig& c) {
    c.n_queries = j.value("n_queries", c.n_queries);
    c.d_q = j.value("d_q", c.d_q);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.d_img = j.value("d_img", c.d_img);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.ln_eps = j.value("ln_eps", c.ln_eps);
}

void to_json(nlohmann::json& j, const FusionConfig& c) {
    j = {{"d_region", c.d_region},
         {"d_model", c.d_model},
         {"patch_size", c.patch_size},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, FusionConfig& c) {
    c.d_region = j.value("d_region", c.d_region);
    c.d_model = j.value("d_model", c.d_model);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.seed = j.value("seed", c.seed);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"learning_rate", c.learning_rate},
         {"batch_size", c.batch_size},
         {"patience", c.patience},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"adam_eps", c.adam_eps},
         {"max_epochs", c.max_epochs},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.patience = j.value("patience", c.patience);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.seed = j.value("seed", c.seed);
}

// ---- binary container -------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'C', 'A', 'P', 'C', 'K', 'P', '1'};

void write_u32_le(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_doubles_le(std::ostream& out, const std::vector<double>& values) {
    std::vector<unsigned char> buf(values.size() * 8);
    for (size_t i = 0; i < values.size(); ++i) {
        uint64_t bits;
        std::memcpy(&bits, &values[i], 8);
        for (int k = 0; k < 8; ++k) buf[i * 8 + k] = static_cast<unsigned char>(bits >> (8 * k));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void read_doubles_le(std::istream& in, std::vector<double>& values) {
    std::vector<unsigned char> buf(values.size() * 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(in.gcount()) != buf.size())
        throw std::runtime_error("checkpoint: truncated tensor data");
    for (size_t i = 0; i < values.size(); ++i) {
        uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<uint64_t>(buf[i * 8 + k]) << (8 * k);
        std::memcpy(&values[i], &bits, 8);
    }
}

}  // namespace

NamedTensors Checkpoint::tensors() {
    NamedTensors out;
    out.emplace_back("visual.projection", &visual_projection);
    out.emplace_back("object.w_region", &object_projection.w_region);
    out.emplace_back("object.b_region", &object_projection.b_region);
    out.emplace_back("object.w_box", &object_projection.w_box);
    out.emplace_back("object.b_box", &object_projection.b_box);
    if (kind == "encoder_decoder") {
        collect_tensors(encdec, "", out);
    } else if (kind == "qformer") {
        out.emplace_back("queries", &queries.embeddings);
        for (size_t b = 0; b < qformer_params.blocks.size(); ++b)
            collect_tensors(qformer_params.blocks[b], "qformer.block" + std::to_string(b), out);
        collect_tensors(qf_decoder, "decoder", out);
    } else {
        throw std::invalid_argument("checkpoint: unknown model kind '" + kind + "'");
    }
    return out;
}

void save_checkpoint(Checkpoint& ckpt, const std::filesystem::path& path) {
    NamedTensors tensors = ckpt.tensors();

    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& [name, t] : tensors)
        manifest.push_back({{"name", name}, {"rows", t->rows}, {"cols", t->cols}});

    nlohmann::json header = {{"format_version", Checkpoint::kFormatVersion},
                             {"kind", ckpt.kind},
                             {"model", ckpt.model},
                             {"fusion", ckpt.fusion},
                             {"use_object_features", ckpt.use_object_features},
                             {"seed", ckpt.seed},
                             {"vocab", ckpt.vocab_tokens},
                             {"tensors", manifest}};
    if (ckpt.kind == "qformer") header["qformer"] = ckpt.qformer;

    const std::string header_str = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open checkpoint for writing");
    out.write(kMagic, 8);
    write_u32_le(out, static_cast<uint32_t>(header_str.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, t] : tensors) {
        (void)name;
        write_doubles_le(out, t->data);
    }
    if (!out) throw std::runtime_error(path.string() + ": checkpoint write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path.string() + ": cannot open checkpoint");
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error(path.string() + ": not a checkpoint file (bad magic)");
    const uint32_t header_len = read_u32_le(in);
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), header_len);
    if (static_cast<uint32_t>(in.gcount()) != header_len)
        throw std::runtime_error(path.string() + ": truncated checkpoint header");

    const nlohmann::json header = nlohmann::json::parse(header_str);
    if (header.at("format_version").get<int>() != Checkpoint::kFormatVersion)
        throw std::runtime_error(path.string() + ": unsupported checkpoint format version");

    Checkpoint ckpt;
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.model = header.at("model").get<ModelConfig>();
    ckpt.fusion = header.at("fusion").get<FusionConfig>();
    ckpt.use_object_features = header.at("use_object_features").get<bool>();
    ckpt.seed = header.at("seed").get<uint64_t>();
    ckpt.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
    if (ckpt.kind == "qformer") ckpt.qformer = header.at("qformer").get<QFormerConfig>();

    // Size the parameter structures from the configs, then check the
    // manifest matches before reading the blocks.
    std::mt19937_64 rng(0);
    ckpt.visual_projection = Matrix(ckpt.fusion.patch_size * ckpt.fusion.patch_size,
                                    ckpt.fusion.d_model);
    ckpt.object_projection.w_region = Matrix(ckpt.fusion.d_region, ckpt.fusion.d_model);
    ckpt.object_projection.b_region = Matrix(1, ckpt.fusion.d_model);
    ckpt.object_projection.w_box = Matrix(4, ckpt.fusion.d_model);
    ckpt.object_projection.b_box = Matrix(1, ckpt.fusion.d_model);
    if (ckpt.kind == "encoder_decoder") {
        ckpt.encdec = init_encdec(ckpt.model, rng);
    } else if (ckpt.kind == "qformer") {
        ckpt.queries = QueryBank::init(ckpt.qformer, rng);
        ckpt.qformer_params = QFormerParams::init(ckpt.qformer, rng);
        ckpt.qf_decoder = init_decoder_stack(ckpt.model, ckpt.qformer.d_q, rng);
    } else {
        throw std::runtime_error(path.string() + ": unknown model kind '" + ckpt.kind + "'");
    }

    NamedTensors tensors = ckpt.tensors();
    const auto& manifest = header.at("tensors");
    if (manifest.size() != tensors.size())
        throw std::runtime_error(path.string() + ": tensor manifest size mismatch");
    for (size_t i = 0; i < tensors.size(); ++i) {
        const auto& entry = manifest[i];
        if (entry.at("name").get<std::string>() != tensors[i].first ||
            entry.at("rows").get<int>() != tensors[i].second->rows ||
            entry.at("cols").get<int>() != tensors[i].second->cols)
            throw std::runtime_error(path.string() + ": tensor manifest mismatch at '" +
                                     tensors[i].first + "'");
    }
    for (auto& [name, t] : tensors) {
        (void)name;
        read_doubles_le(in, t->data);
    }
    return ckpt;
}

}  // namespace radcap
