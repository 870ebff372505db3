#ifndef RADCAP_CHECKPOINT_HPP
#define RADCAP_CHECKPOINT_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "radcap/fusion.hpp"
#include "radcap/model.hpp"
#include "radcap/qformer.hpp"

namespace radcap {

// Versioned checkpoint container: 8-byte magic "RCAPCKP1", little-endian
// uint32 header length, JSON header (configs, vocab, tensor manifest),
// then the tensors as raw little-endian float64 blocks in manifest order.
// Round-trips are bit-exact.
struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    std::string kind;  // "encoder_decoder" | "qformer"
    ModelConfig model;
    QFormerConfig qformer;  // used when kind == "qformer"
    FusionConfig fusion;
    bool use_object_features = true;
    uint64_t seed = 42;
    std::vector<std::string> vocab_tokens;  // non-reserved, id order

    // Frozen feature pipeline, stored so captioning new images reproduces
    // training-time features exactly.
    Matrix visual_projection;
    ObjectProjection object_projection;

    // Trainable parameters; which set is meaningful depends on kind.
    EncDecParams encdec;
    QueryBank queries;
    QFormerParams qformer_params;
    DecoderStackParams qf_decoder;

    // Serialization order of every tensor in the file.
    NamedTensors tensors();
};

void save_checkpoint(Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace radcap

#endif
