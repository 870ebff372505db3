#include "radcap/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radcap {

void ModelConfig::validate() const {
    if (d_model < 1) throw std::invalid_argument("d_model must be >= 1");
    if (n_heads < 1) throw std::invalid_argument("n_heads must be >= 1");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("d_model (" + std::to_string(d_model) +
                                    ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
    if (n_enc_layers < 0 || n_dec_layers < 0) throw std::invalid_argument("layer counts must be >= 0");
    if (d_ff < 1) throw std::invalid_argument("d_ff must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw std::invalid_argument("dropout_rate must be in [0,1)");
    if (max_len < 2) throw std::invalid_argument("max_len must be >= 2");
    if (!(ln_eps > 0.0)) throw std::invalid_argument("ln_eps must be positive");
}

// ---- initialization -------------------------------------------------

AttentionParams init_attention(int d_q_in, int d_kv_in, int d, std::mt19937_64& rng) {
    AttentionParams p;
    p.wq = Matrix(d_q_in, d);
    p.wk = Matrix(d_kv_in, d);
    p.wv = Matrix(d_kv_in, d);
    p.wo = Matrix(d, d);
    xavier_uniform(p.wq, rng);
    xavier_uniform(p.wk, rng);
    xavier_uniform(p.wv, rng);
    xavier_uniform(p.wo, rng);
    return p;
}

LayerNormParams init_layer_norm(int d) {
    LayerNormParams p;
    p.gamma = Matrix(1, d, 1.0);
    p.beta = Matrix(1, d, 0.0);
    return p;
}

FfnParams init_ffn(int d, int d_ff, std::mt19937_64& rng) {
    FfnParams p;
    p.w1 = Matrix(d, d_ff);
    p.b1 = Matrix(1, d_ff);
    p.w2 = Matrix(d_ff, d);
    p.b2 = Matrix(1, d);
    xavier_uniform(p.w1, rng);
    xavier_uniform(p.w2, rng);
    return p;
}

EncoderLayerParams init_encoder_layer(const ModelConfig& cfg, std::mt19937_64& rng) {
    EncoderLayerParams p;
    p.self_attn = init_attention(cfg.d_model, cfg.d_model, cfg.d_model, rng);
    p.ln1 = init_layer_norm(cfg.d_model);
    p.ffn = init_ffn(cfg.d_model, cfg.d_ff, rng);
    p.ln2 = init_layer_norm(cfg.d_model);
    return p;
}

DecoderLayerParams init_decoder_layer(int d, int d_ff, int d_memory, std::mt19937_64& rng) {
    DecoderLayerParams p;
    p.self_attn = init_attention(d, d, d, rng);
    p.ln1 = init_layer_norm(d);
    p.cross_attn = init_attention(d, d_memory, d, rng);
    p.ln2 = init_layer_norm(d);
    p.ffn = init_ffn(d, d_ff, rng);
    p.ln3 = init_layer_norm(d);
    return p;
}

DecoderStackParams init_decoder_stack(const ModelConfig& cfg, int d_memory, std::mt19937_64& rng) {
    if (cfg.vocab_size < 5)
        throw std::invalid_argument("vocab_size must cover the reserved ids (got " +
                                    std::to_string(cfg.vocab_size) + ")");
    DecoderStackParams p;
    p.embedding = Matrix(cfg.vocab_size, cfg.d_model);
    fill_uniform(p.embedding, rng, 0.1);
    for (int l = 0; l < cfg.n_dec_layers; ++l)
        p.layers.push_back(init_decoder_layer(cfg.d_model, cfg.d_ff, d_memory, rng));
    p.w_out = Matrix(cfg.d_model, cfg.vocab_size);
    xavier_uniform(p.w_out, rng);
    p.b_out = Matrix(1, cfg.vocab_size);
    return p;
}

EncDecParams init_encdec(const ModelConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    EncDecParams p;
    for (int l = 0; l < cfg.n_enc_layers; ++l) p.encoder.push_back(init_encoder_layer(cfg, rng));
    p.decoder = init_decoder_stack(cfg, cfg.d_model, rng);
    return p;
}

// ---- zeros_like ------------------------------------------------------

static Matrix zero_matrix_like(const Matrix& m) { return Matrix(m.rows, m.cols); }

AttentionParams zeros_like(const AttentionParams& p) {
    return {zero_matrix_like(p.wq), zero_matrix_like(p.wk), zero_matrix_like(p.wv),
            zero_matrix_like(p.wo)};
}

LayerNormParams zeros_like(const LayerNormParams& p) {
    return {zero_matrix_like(p.gamma), zero_matrix_like(p.beta)};
}

FfnParams zeros_like(const FfnParams& p) {
    return {zero_matrix_like(p.w1), zero_matrix_like(p.b1), zero_matrix_like(p.w2),
            zero_matrix_like(p.b2)};
}

EncoderLayerParams zeros_like(const EncoderLayerParams& p) {
    return {zeros_like(p.self_attn), zeros_like(p.ln1), zeros_like(p.ffn), zeros_like(p.ln2)};
}

DecoderLayerParams zeros_like(const DecoderLayerParams& p) {
    return {zeros_like(p.self_attn), zeros_like(p.ln1), zeros_like(p.cross_attn), zeros_like(p.ln2),
            zeros_like(p.ffn), zeros_like(p.ln3)};
}

DecoderStackParams zeros_like(const DecoderStackParams& p) {
    DecoderStackParams z;
    z.embedding = zero_matrix_like(p.embedding);
    for (const auto& l : p.layers) z.layers.push_back(zeros_like(l));
    z.w_out = zero_matrix_like(p.w_out);
    z.b_out = zero_matrix_like(p.b_out);
    return z;
}

EncDecParams zeros_like(const EncDecParams& p) {
    EncDecParams z;
    for (const auto& l : p.encoder) z.encoder.push_back(zeros_like(l));
    z.decoder = zeros_like(p.decoder);
    return z;
}

// ---- tensor enumeration ----------------------------------------------

void collect_tensors(AttentionParams& p, const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".wq", &p.wq);
    out.emplace_back(prefix + ".wk", &p.wk);
    out.emplace_back(prefix + ".wv", &p.wv);
    out.emplace_back(prefix + ".wo", &p.wo);
}

void collect_tensors(LayerNormParams& p, const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".gamma", &p.gamma);
    out.emplace_back(prefix + ".beta", &p.beta);
}

void collect_tensors(FfnParams& p, const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".w1", &p.w1);
    out.emplace_back(prefix + ".b1", &p.b1);
    out.emplace_back(prefix + ".w2", &p.w2);
    out.emplace_back(prefix + ".b2", &p.b2);
}

void collect_tensors(EncoderLayerParams& p, const std::string& prefix, NamedTensors& out) {
    collect_tensors(p.self_attn, prefix + ".self_attn", out);
    collect_tensors(p.ln1, prefix + ".ln1", out);
    collect_tensors(p.ffn, prefix + ".ffn", out);
    collect_tensors(p.ln2, prefix + ".ln2", out);
}

void collect_tensors(DecoderLayerParams& p, const std::string& prefix, NamedTensors& out) {
    collect_tensors(p.self_attn, prefix + ".self_attn", out);
    collect_tensors(p.ln1, prefix + ".ln1", out);
    collect_tensors(p.cross_attn, prefix + ".cross_attn", out);
    collect_tensors(p.ln2, prefix + ".ln2", out);
    collect_tensors(p.ffn, prefix + ".ffn", out);
    collect_tensors(p.ln3, prefix + ".ln3", out);
}

void collect_tensors(DecoderStackParams& p, const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".embedding", &p.embedding);
    for (size_t l = 0; l < p.layers.size(); ++l)
        collect_tensors(p.layers[l], prefix + ".layer" + std::to_string(l), out);
    out.emplace_back(prefix + ".w_out", &p.w_out);
    out.emplace_back(prefix + ".b_out", &p.b_out);
}

void collect_tensors(EncDecParams& p, const std::string& prefix, NamedTensors& out) {
    for (size_t l = 0; l < p.encoder.size(); ++l)
        collect_tensors(p.encoder[l], prefix + "encoder.layer" + std::to_string(l), out);
    collect_tensors(p.decoder, prefix + "decoder", out);
}

// ---- small helpers ---------------------------------------------------

namespace {

Matrix add_row_broadcast(const Matrix& m, const Matrix& row) {
    Matrix out = m;
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out.at(i, j) += row.at(0, j);
    return out;
}

Matrix col_sums(const Matrix& m) {
    Matrix out(1, m.cols);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out.at(0, j) += m.at(i, j);
    return out;
}

Matrix slice_cols(const Matrix& m, int begin, int count) {
    Matrix out(m.rows, count);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < count; ++j) out.at(i, j) = m.at(i, begin + j);
    return out;
}

void add_into_cols(Matrix& dst, const Matrix& src, int begin) {
    for (int i = 0; i < src.rows; ++i)
        for (int j = 0; j < src.cols; ++j) dst.at(i, begin + j) += src.at(i, j);
}

void accumulate(Matrix& dst, const Matrix& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// dS = A .* (dA - rowwise_dot(A, dA))
Matrix softmax_rows_backward(const Matrix& da, const Matrix& a) {
    Matrix out(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < a.cols; ++j) dot += a.at(i, j) * da.at(i, j);
        for (int j = 0; j < a.cols; ++j) out.at(i, j) = a.at(i, j) * (da.at(i, j) - dot);
    }
    return out;
}

}  // namespace

// ---- attention -------------------------------------------------------

Matrix multi_head_attention(const Matrix& q_in, const Matrix& k_in, const Matrix& v_in,
                            const Matrix* mask, const AttentionParams& p, int n_heads,
                            AttnCache* cache, AttentionRecorder* rec) {
    if (q_in.cols != p.wq.rows || k_in.cols != p.wk.rows || v_in.cols != p.wv.rows)
        throw std::invalid_argument("attention input/projection mismatch: q" + shape_str(q_in) +
                                    " wq" + shape_str(p.wq) + " k" + shape_str(k_in) + " wk" +
                                    shape_str(p.wk));
    if (k_in.rows != v_in.rows)
        throw std::invalid_argument("attention key/value row mismatch: " + shape_str(k_in) + " vs " +
                                    shape_str(v_in));
    const int d = p.wq.cols;
    if (d % n_heads != 0)
        throw std::invalid_argument("attention width " + std::to_string(d) +
                                    " not divisible by n_heads " + std::to_string(n_heads));
    if (mask && (mask->rows != q_in.rows || mask->cols != k_in.rows))
        throw std::invalid_argument("attention mask shape " + shape_str(*mask) + " does not match " +
                                    std::to_string(q_in.rows) + "x" + std::to_string(k_in.rows));

    const int d_head = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

    Matrix q = matmul(q_in, p.wq);
    Matrix k = matmul(k_in, p.wk);
    Matrix v = matmul(v_in, p.wv);

    Matrix concat(q_in.rows, d);
    std::vector<Matrix> attn_weights;
    attn_weights.reserve(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        const int off = h * d_head;
        Matrix qh = slice_cols(q, off, d_head);
        Matrix kh = slice_cols(k, off, d_head);
        Matrix vh = slice_cols(v, off, d_head);
        Matrix scores = scaled(matmul(qh, transpose(kh)), scale);
        if (mask) scores = add(scores, *mask);
        Matrix a = softmax_rows(scores);
        if (rec) rec->weights.push_back(a);
        Matrix oh = matmul(a, vh);
        add_into_cols(concat, oh, off);
        attn_weights.push_back(std::move(a));
    }
    Matrix y = matmul(concat, p.wo);

    if (cache) {
        cache->xq = q_in;
        cache->xk = k_in;
        cache->xv = v_in;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attn = std::move(attn_weights);
        cache->concat = std::move(concat);
    }
    return y;
}

Matrix multi_head_attention_backward(const Matrix& dy, const AttnCache& c, const AttentionParams& p,
                                     int n_heads, AttentionParams& gp, Matrix& dk_in, Matrix& dv_in) {
    const int d = p.wq.cols;
    const int d_head = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

    accumulate(gp.wo, matmul(transpose(c.concat), dy));
    Matrix dconcat = matmul(dy, transpose(p.wo));

    Matrix dq(c.q.rows, d), dk(c.k.rows, d), dv(c.v.rows, d);
    for (int h = 0; h < n_heads; ++h) {
        const int off = h * d_head;
        Matrix doh = slice_cols(dconcat, off, d_head);
        const Matrix& a = c.attn[static_cast<size_t>(h)];
        Matrix qh = slice_cols(c.q, off, d_head);
        Matrix kh = slice_cols(c.k, off, d_head);
        Matrix vh = slice_cols(c.v, off, d_head);

        Matrix da = matmul(doh, transpose(vh));
        Matrix dvh = matmul(transpose(a), doh);
        Matrix ds = softmax_rows_backward(da, a);
        Matrix dqh = scaled(matmul(ds, kh), scale);
        Matrix dkh = scaled(matmul(transpose(ds), qh), scale);

        add_into_cols(dq, dqh, off);
        add_into_cols(dk, dkh, off);
        add_into_cols(dv, dvh, off);
    }

    accumulate(gp.wq, matmul(transpose(c.xq), dq));
    accumulate(gp.wk, matmul(transpose(c.xk), dk));
    accumulate(gp.wv, matmul(transpose(c.xv), dv));

    accumulate(dk_in, matmul(dk, transpose(p.wk)));
    accumulate(dv_in, matmul(dv, transpose(p.wv)));
    return matmul(dq, transpose(p.wq));
}

// ---- feed-forward ----------------------------------------------------

Matrix ffn(const Matrix& x, const FfnParams& p, FfnCache* cache) {
    if (x.cols != p.w1.rows)
        throw std::invalid_argument("ffn input width " + shape_str(x) + " does not match w1 " +
                                    shape_str(p.w1));
    Matrix z = add_row_broadcast(matmul(x, p.w1), p.b1);
    Matrix h = z;
    for (double& v : h.data) v = v > 0.0 ? v : 0.0;
    Matrix y = add_row_broadcast(matmul(h, p.w2), p.b2);
    if (cache) {
        cache->x = x;
        cache->z = std::move(z);
    }
    return y;
}

Matrix ffn_backward(const Matrix& dy, const FfnCache& c, const FfnParams& p, FfnParams& gp) {
    Matrix h = c.z;
    for (double& v : h.data) v = v > 0.0 ? v : 0.0;
    accumulate(gp.w2, matmul(transpose(h), dy));
    accumulate(gp.b2, col_sums(dy));
    Matrix dh = matmul(dy, transpose(p.w2));
    Matrix dz = dh;
    for (size_t i = 0; i < dz.data.size(); ++i)
        if (c.z.data[i] <= 0.0) dz.data[i] = 0.0;
    accumulate(gp.w1, matmul(transpose(c.x), dz));
    accumulate(gp.b1, col_sums(dz));
    return matmul(dz, transpose(p.w1));
}

// ---- layer norm over rows ----------------------------------------------

Matrix layer_norm_rows(const Matrix& x, const LayerNormParams& p, double eps, LnCache* cache) {
    if (x.cols != p.gamma.cols)
        throw std::invalid_argument("layer_norm width mismatch: " + shape_str(x) + " vs gamma " +
                                    shape_str(p.gamma));
    const int n = x.cols;
    Matrix out(x.rows, n);
    for (int i = 0; i < x.rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x.at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double dv = x.at(i, j) - mean;
            var += dv * dv;
        }
        var /= n;
        const double denom = std::sqrt(var + eps);
        for (int j = 0; j < n; ++j)
            out.at(i, j) = p.gamma.at(0, j) * (x.at(i, j) - mean) / denom + p.beta.at(0, j);
    }
    if (cache) cache->x = x;
    return out;
}

Matrix layer_norm_rows_backward(const Matrix& dy, const LnCache& c, const LayerNormParams& p,
                                double eps, LayerNormParams& gp) {
    const Matrix& x = c.x;
    const int n = x.cols;
    Matrix dx(x.rows, n);
    for (int i = 0; i < x.rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x.at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double dv = x.at(i, j) - mean;
            var += dv * dv;
        }
        var /= n;
        const double denom = std::sqrt(var + eps);

        double dvar = 0.0, dmean_a = 0.0, centered_sum = 0.0;
        for (int j = 0; j < n; ++j) {
            const double dxhat = dy.at(i, j) * p.gamma.at(0, j);
            const double centered = x.at(i, j) - mean;
            dvar += dxhat * centered;
            dmean_a += dxhat;
            centered_sum += centered;
        }
        dvar *= -0.5 / (denom * denom * denom);
        const double dmean = -dmean_a / denom + dvar * (-2.0 / n) * centered_sum;
        for (int j = 0; j < n; ++j) {
            const double dxhat = dy.at(i, j) * p.gamma.at(0, j);
            const double centered = x.at(i, j) - mean;
            dx.at(i, j) = dxhat / denom + dvar * 2.0 * centered / n + dmean / n;
        }
        for (int j = 0; j < n; ++j) {
            gp.gamma.at(0, j) += dy.at(i, j) * (x.at(i, j) - mean) / denom;
            gp.beta.at(0, j) += dy.at(i, j);
        }
    }
    return dx;
}

// ---- dropout -----------------------------------------------------------

Matrix dropout(const Matrix& x, double rate, std::mt19937_64* rng, DropCache* cache) {
    if (rate <= 0.0 || rng == nullptr) {
        if (cache) cache->active = false;
        return x;
    }
    const double keep = 1.0 - rate;
    Matrix mask(x.rows, x.cols);
    for (double& m : mask.data) m = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
    Matrix out = hadamard(x, mask);
    if (cache) {
        cache->mask = std::move(mask);
        cache->active = true;
    }
    return out;
}

Matrix dropout_backward(const Matrix& dy, const DropCache& c) {
    if (!c.active) return dy;
    return hadamard(dy, c.mask);
}

Matrix causal_mask(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) m.at(i, j) = -1e30;
    return m;
}

// ---- encoder -----------------------------------------------------------

namespace {

Matrix encoder_layer_forward(const EncoderLayerParams& p, const BlockConfig& bc, const Matrix& x,
                             bool train_mode, std::mt19937_64* rng, EncLayerCache* cache,
                             AttentionRecorder* rec) {
    std::mt19937_64* drop_rng = train_mode ? rng : nullptr;
    Matrix s = multi_head_attention(x, x, x, nullptr, p.self_attn, bc.n_heads,
                                    cache ? &cache->attn : nullptr, rec);
    s = dropout(s, bc.dropout_rate, drop_rng, cache ? &cache->drop1 : nullptr);
    Matrix h = layer_norm_rows(add(x, s), p.ln1, bc.ln_eps, cache ? &cache->ln1 : nullptr);
    Matrix f = ffn(h, p.ffn, cache ? &cache->ffn : nullptr);
    f = dropout(f, bc.dropout_rate, drop_rng, cache ? &cache->drop2 : nullptr);
    return layer_norm_rows(add(h, f), p.ln2, bc.ln_eps, cache ? &cache->ln2 : nullptr);
}

Matrix encoder_layer_backward(const EncoderLayerParams& p, const BlockConfig& bc,
                              const EncLayerCache& c, const Matrix& dy, EncoderLayerParams& gp) {
    Matrix g2 = layer_norm_rows_backward(dy, c.ln2, p.ln2, bc.ln_eps, gp.ln2);
    Matrix df = dropout_backward(g2, c.drop2);
    Matrix dh = add(g2, ffn_backward(df, c.ffn, p.ffn, gp.ffn));
    Matrix g1 = layer_norm_rows_backward(dh, c.ln1, p.ln1, bc.ln_eps, gp.ln1);
    Matrix ds = dropout_backward(g1, c.drop1);
    Matrix dxk(c.attn.xk.rows, c.attn.xk.cols), dxv(c.attn.xv.rows, c.attn.xv.cols);
    Matrix dxq = multi_head_attention_backward(ds, c.attn, p.self_attn, bc.n_heads, gp.self_attn,
                                               dxk, dxv);
    Matrix dx = add(add(g1, dxq), add(dxk, dxv));
    return dx;
}

BlockConfig block_config(const ModelConfig& cfg) {
    return {cfg.n_heads, cfg.dropout_rate, cfg.ln_eps};
}

}  // namespace

Matrix encode(const std::vector<EncoderLayerParams>& layers, const ModelConfig& cfg,
              const Matrix& input, bool train_mode, std::mt19937_64* rng, EncoderCache* cache,
              AttentionRecorder* rec) {
    if (input.cols != cfg.d_model)
        throw std::invalid_argument("encode: input width " + shape_str(input) +
                                    " does not match d_model " + std::to_string(cfg.d_model));
    const BlockConfig bc = block_config(cfg);
    Matrix x = input;
    if (cache) cache->layers.resize(layers.size());
    for (size_t l = 0; l < layers.size(); ++l)
        x = encoder_layer_forward(layers[l], bc, x, train_mode, rng,
                                  cache ? &cache->layers[l] : nullptr, rec);
    return x;
}

Matrix encode_backward(const std::vector<EncoderLayerParams>& layers, const ModelConfig& cfg,
                       const EncoderCache& cache, const Matrix& dout,
                       std::vector<EncoderLayerParams>& grads) {
    const BlockConfig bc = block_config(cfg);
    Matrix dx = dout;
    for (size_t l = layers.size(); l-- > 0;)
        dx = encoder_layer_backward(layers[l], bc, cache.layers[l], dx, grads[l]);
    return dx;
}

// ---- decoder layer (shared with the query bottleneck) -------------------

Matrix decoder_layer_forward(const DecoderLayerParams& p, const BlockConfig& bc, const Matrix& x,
                             const Matrix& memory, const Matrix* self_mask, bool train_mode,
                             std::mt19937_64* rng, DecLayerCache* cache, AttentionRecorder* rec) {
    std::mt19937_64* drop_rng = train_mode ? rng : nullptr;
    Matrix s = multi_head_attention(x, x, x, self_mask, p.self_attn, bc.n_heads,
                                    cache ? &cache->self_attn : nullptr, rec);
    s = dropout(s, bc.dropout_rate, drop_rng, cache ? &cache->drop1 : nullptr);
    Matrix h1 = layer_norm_rows(add(x, s), p.ln1, bc.ln_eps, cache ? &cache->ln1 : nullptr);

    Matrix c = multi_head_attention(h1, memory, memory, nullptr, p.cross_attn, bc.n_heads,
                                    cache ? &cache->cross : nullptr, rec);
    c = dropout(c, bc.dropout_rate, drop_rng, cache ? &cache->drop2 : nullptr);
    Matrix h2 = layer_norm_rows(add(h1, c), p.ln2, bc.ln_eps, cache ? &cache->ln2 : nullptr);

    Matrix f = ffn(h2, p.ffn, cache ? &cache->ffn : nullptr);
    f = dropout(f, bc.dropout_rate, drop_rng, cache ? &cache->drop3 : nullptr);
    return layer_norm_rows(add(h2, f), p.ln3, bc.ln_eps, cache ? &cache->ln3 : nullptr);
}

Matrix decoder_layer_backward(const DecoderLayerParams& p, const BlockConfig& bc,
                              const DecLayerCache& c, const Matrix& dy, DecoderLayerParams& gp,
                              Matrix& dmemory) {
    Matrix g3 = layer_norm_rows_backward(dy, c.ln3, p.ln3, bc.ln_eps, gp.ln3);
    Matrix df = dropout_backward(g3, c.drop3);
    Matrix dh2 = add(g3, ffn_backward(df, c.ffn, p.ffn, gp.ffn));

    Matrix g2 = layer_norm_rows_backward(dh2, c.ln2, p.ln2, bc.ln_eps, gp.ln2);
    Matrix dc = dropout_backward(g2, c.drop2);
    Matrix dmem_k(dmemory.rows, dmemory.cols), dmem_v(dmemory.rows, dmemory.cols);
    Matrix dh1_cross =
        multi_head_attention_backward(dc, c.cross, p.cross_attn, bc.n_heads, gp.cross_attn,
                                      dmem_k, dmem_v);
    accumulate(dmemory, dmem_k);
    accumulate(dmemory, dmem_v);
    Matrix dh1 = add(g2, dh1_cross);

    Matrix g1 = layer_norm_rows_backward(dh1, c.ln1, p.ln1, bc.ln_eps, gp.ln1);
    Matrix ds = dropout_backward(g1, c.drop1);
    Matrix dxk(c.self_attn.xk.rows, c.self_attn.xk.cols);
    Matrix dxv(c.self_attn.xv.rows, c.self_attn.xv.cols);
    Matrix dxq = multi_head_attention_backward(ds, c.self_attn, p.self_attn, bc.n_heads,
                                               gp.self_attn, dxk, dxv);
    return add(add(g1, dxq), add(dxk, dxv));
}

// ---- full decoder ---------------------------------------------------

Matrix decode_logits(const DecoderStackParams& p, const ModelConfig& cfg, const Matrix& memory,
                     const std::vector<int>& prefix, bool train_mode, std::mt19937_64* rng,
                     DecoderCache* cache, AttentionRecorder* rec) {
    if (prefix.empty()) throw std::invalid_argument("decode_logits: prefix must be non-empty");
    for (int id : prefix)
        if (id < 0 || id >= p.embedding.rows)
            throw std::invalid_argument("decode_logits: token id " + std::to_string(id) +
                                        " out of range for vocab of " +
                                        std::to_string(p.embedding.rows));
    const int t = static_cast<int>(prefix.size());
    const int d = cfg.d_model;
    Matrix x(t, d);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < d; ++j) x.at(i, j) = p.embedding.at(prefix[static_cast<size_t>(i)], j);
    if (cfg.use_positional) x = add(x, sinusoidal_positions(t, d));

    const BlockConfig bc = block_config(cfg);
    const Matrix mask = causal_mask(t);
    if (cache) {
        cache->prefix = prefix;
        cache->embedded = x;
        cache->layers.resize(p.layers.size());
    }
    for (size_t l = 0; l < p.layers.size(); ++l)
        x = decoder_layer_forward(p.layers[l], bc, x, memory, &mask, train_mode, rng,
                                  cache ? &cache->layers[l] : nullptr, rec);
    if (cache) cache->final_hidden = x;
    return add_row_broadcast(matmul(x, p.w_out), p.b_out);
}

Matrix decode_backward(const DecoderStackParams& p, const ModelConfig& cfg,
                       const DecoderCache& cache, const Matrix& dlogits,
                       DecoderStackParams& grads) {
    const BlockConfig bc = block_config(cfg);
    accumulate(grads.w_out, matmul(transpose(cache.final_hidden), dlogits));
    accumulate(grads.b_out, col_sums(dlogits));
    Matrix dx = matmul(dlogits, transpose(p.w_out));

    Matrix dmemory;
    for (size_t l = p.layers.size(); l-- > 0;) {
        const Matrix& mem_in = cache.layers[l].cross.xk;
        if (dmemory.rows == 0) dmemory = Matrix(mem_in.rows, mem_in.cols);
        dx = decoder_layer_backward(p.layers[l], bc, cache.layers[l], dx, grads.layers[l], dmemory);
    }
    if (dmemory.rows == 0) {
        // No decoder layers: memory is unused, gradient is zero by shape.
        dmemory = Matrix(0, 0);
    }
    for (size_t i = 0; i < cache.prefix.size(); ++i)
        for (int j = 0; j < cfg.d_model; ++j)
            grads.embedding.at(cache.prefix[i], j) += dx.at(static_cast<int>(i), j);
    return dmemory;
}

double cross_entropy_sum(const Matrix& logits, const std::vector<int>& targets, int pad_id,
                         Matrix* dlogits, double dscale) {
    if (static_cast<int>(targets.size()) != logits.rows)
        throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                    " targets vs " + std::to_string(logits.rows) + " logit rows");
    if (dlogits) *dlogits = Matrix(logits.rows, logits.cols);
    double loss = 0.0;
    for (int i = 0; i < logits.rows; ++i) {
        const int t = targets[static_cast<size_t>(i)];
        if (t == pad_id) continue;
        if (t < 0 || t >= logits.cols)
            throw std::invalid_argument("cross_entropy: target id " + std::to_string(t) +
                                        " out of range");
        double mx = logits.at(i, 0);
        for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, logits.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < logits.cols; ++j) sum += std::exp(logits.at(i, j) - mx);
        const double lse = mx + std::log(sum);
        loss += lse - logits.at(i, t);
        if (dlogits) {
            for (int j = 0; j < logits.cols; ++j)
                dlogits->at(i, j) = std::exp(logits.at(i, j) - lse) * dscale;
            dlogits->at(i, t) -= dscale;
        }
    }
    return loss;
}

std::vector<int> greedy_decode(const Matrix& memory, const DecoderStackParams& p,
                               const ModelConfig& cfg, int max_len) {
    if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
    constexpr int PAD = 0, BOS = 1, EOS = 2;
    std::vector<int> prefix = {BOS};
    std::vector<int> out;
    for (int step = 0; step < max_len; ++step) {
        Matrix logits = decode_logits(p, cfg, memory, prefix, false, nullptr);
        const int last = logits.rows - 1;
        int best = -1;
        double best_score = 0.0;
        for (int j = 0; j < logits.cols; ++j) {
            if (j == PAD) continue;
            if (best < 0 || logits.at(last, j) > best_score) {
                best = j;
                best_score = logits.at(last, j);
            }
        }
        if (best == EOS) break;
        out.push_back(best);
        prefix.push_back(best);
    }
    return out;
}

}  // namespace radcap
