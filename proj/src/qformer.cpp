#include "radcap/qformer.hpp"

#include <stdexcept>
#include <string>

namespace radcap {

void QFormerConfig::validate() const {
    if (n_queries < 1) throw std::invalid_argument("n_queries must be >= 1");
    if (d_q < 1) throw std::invalid_argument("d_q must be >= 1");
    if (n_blocks < 0) throw std::invalid_argument("n_blocks must be >= 0");
    if (n_heads < 1 || d_q % n_heads != 0)
        throw std::invalid_argument("d_q (" + std::to_string(d_q) +
                                    ") must be divisible by n_heads (" + std::to_string(n_heads) +
                                    ")");
    if (d_ff < 1) throw std::invalid_argument("d_ff must be >= 1");
    if (d_img < 1) throw std::invalid_argument("d_img must be set");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw std::invalid_argument("dropout_rate must be in [0,1)");
}

QueryBank QueryBank::init(const QFormerConfig& cfg, std::mt19937_64& rng) {
    QueryBank bank;
    bank.embeddings = Matrix(cfg.n_queries, cfg.d_q);
    fill_uniform(bank.embeddings, rng, 0.1);
    return bank;
}

QFormerParams QFormerParams::init(const QFormerConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    QFormerParams p;
    for (int b = 0; b < cfg.n_blocks; ++b)
        p.blocks.push_back(init_decoder_layer(cfg.d_q, cfg.d_ff, cfg.d_img, rng));
    return p;
}

Matrix qformer_forward(const Matrix& image_features, const QueryBank& queries,
                       const QFormerParams& params, const QFormerConfig& cfg, bool train_mode,
                       std::mt19937_64* rng, QFormerCache* cache, AttentionRecorder* rec) {
    if (image_features.cols != cfg.d_img)
        throw std::invalid_argument("qformer: image feature width " + shape_str(image_features) +
                                    " does not match d_img " + std::to_string(cfg.d_img));
    if (queries.embeddings.rows != cfg.n_queries || queries.embeddings.cols != cfg.d_q)
        throw std::invalid_argument("qformer: query bank " + shape_str(queries.embeddings) +
                                    " does not match configured " + std::to_string(cfg.n_queries) +
                                    "x" + std::to_string(cfg.d_q));
    const BlockConfig bc = cfg.block_config();
    Matrix x = queries.embeddings;
    if (cache) cache->blocks.resize(params.blocks.size());
    for (size_t b = 0; b < params.blocks.size(); ++b)
        x = decoder_layer_forward(params.blocks[b], bc, x, image_features, nullptr, train_mode, rng,
                                  cache ? &cache->blocks[b] : nullptr, rec);
    return x;
}

void qformer_backward(const QFormerParams& params, const QFormerConfig& cfg,
                      const QFormerCache& cache, const Matrix& dout, QFormerParams& gp,
                      Matrix& dqueries) {
    const BlockConfig bc = cfg.block_config();
    Matrix dx = dout;
    Matrix dimage;  // discarded, features are frozen
    for (size_t b = params.blocks.size(); b-- > 0;) {
        const Matrix& img_in = cache.blocks[b].cross.xk;
        if (dimage.rows != img_in.rows || dimage.cols != img_in.cols)
            dimage = Matrix(img_in.rows, img_in.cols);
        dx = decoder_layer_backward(params.blocks[b], bc, cache.blocks[b], dx, gp.blocks[b], dimage);
    }
    for (size_t i = 0; i < dx.data.size(); ++i) dqueries.data[i] += dx.data[i];
}

std::vector<int> caption_with_qformer(const Matrix& image_features, const QueryBank& queries,
                                      const QFormerParams& params, const QFormerConfig& qcfg,
                                      const DecoderStackParams& decoder, const ModelConfig& dec_cfg,
                                      int max_len) {
    if (qcfg.d_q != dec_cfg.d_model)
        throw std::invalid_argument("qformer output width " + std::to_string(qcfg.d_q) +
                                    " does not match decoder d_model " +
                                    std::to_string(dec_cfg.d_model) + "; no bridge configured");
    const Matrix memory = qformer_forward(image_features, queries, params, qcfg);
    return greedy_decode(memory, decoder, dec_cfg, max_len);
}

}  // namespace radcap
