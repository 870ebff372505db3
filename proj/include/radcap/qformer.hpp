#ifndef RADCAP_QFORMER_HPP
#define RADCAP_QFORMER_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "radcap/model.hpp"
#include "radcap/tensor.hpp"

namespace radcap {

struct QFormerConfig {
    int n_queries = 64;
    int d_q = 768;
    int n_blocks = 2;
    int n_heads = 8;
    int d_ff = 2048;
    int d_img = 0;  // width of the frozen image features
    double dropout_rate = 0.2;
    double ln_eps = 1e-5;

    void validate() const;
    BlockConfig block_config() const { return {n_heads, dropout_rate, ln_eps}; }
};

// Learnable query embeddings, n_queries x d_q.
struct QueryBank {
    Matrix embeddings;

    static QueryBank init(const QFormerConfig& cfg, std::mt19937_64& rng);
};

// Each block: query self-attention, cross-attention with the queries as Q
// and the frozen image features as K/V, then FFN; residual+LN everywhere.
struct QFormerParams {
    std::vector<DecoderLayerParams> blocks;

    static QFormerParams init(const QFormerConfig& cfg, std::mt19937_64& rng);
};

struct QFormerCache {
    std::vector<DecLayerCache> blocks;
};

// Output always has n_queries rows regardless of how many image-feature
// rows come in. Rejects image_features whose width differs from d_img.
Matrix qformer_forward(const Matrix& image_features, const QueryBank& queries,
                       const QFormerParams& params, const QFormerConfig& cfg,
                       bool train_mode = false, std::mt19937_64* rng = nullptr,
                       QFormerCache* cache = nullptr, AttentionRecorder* rec = nullptr);

// Accumulates block grads into gp and query-embedding grads into dqueries
// (n_queries x d_q). The image features are frozen inputs; no gradient is
// propagated to them.
void qformer_backward(const QFormerParams& params, const QFormerConfig& cfg,
                      const QFormerCache& cache, const Matrix& dout, QFormerParams& gp,
                      Matrix& dqueries);

// Q-Former output as encoder memory for the decoder stack, then greedy
// decoding. Rejects a d_q that does not match the decoder d_model.
std::vector<int> caption_with_qformer(const Matrix& image_features, const QueryBank& queries,
                                      const QFormerParams& params, const QFormerConfig& qcfg,
                                      const DecoderStackParams& decoder, const ModelConfig& dec_cfg,
                                      int max_len);

}  // namespace radcap

#endif
