#ifndef RADCAP_MODEL_HPP
#define RADCAP_MODEL_HPP

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "radcap/tensor.hpp"

namespace radcap {

struct ModelConfig {
    int d_model = 32;
    int n_heads = 2;
    int n_enc_layers = 2;
    int n_dec_layers = 2;
    int d_ff = 64;
    int vocab_size = 0;
    int max_len = 32;
    double dropout_rate = 0.2;
    bool use_positional = true;
    double ln_eps = 1e-5;

    int d_head() const { return d_model / n_heads; }
    void validate() const;
};

// Shared sublayer hyperparameters, common denominator of the
// encoder-decoder and query-bottleneck configurations.
struct BlockConfig {
    int n_heads = 1;
    double dropout_rate = 0.0;
    double ln_eps = 1e-5;
};

struct AttentionParams {
    Matrix wq, wk, wv, wo;
};

struct LayerNormParams {
    Matrix gamma, beta;  // 1 x d
};

struct FfnParams {
    Matrix w1, b1, w2, b2;  // biases stored as 1 x d rows
};

struct EncoderLayerParams {
    AttentionParams self_attn;
    LayerNormParams ln1;
    FfnParams ffn;
    LayerNormParams ln2;
};

// Also serves as the query-bottleneck block: self-attention over the
// first stream, cross-attention into a memory, then FFN.
struct DecoderLayerParams {
    AttentionParams self_attn;
    LayerNormParams ln1;
    AttentionParams cross_attn;
    LayerNormParams ln2;
    FfnParams ffn;
    LayerNormParams ln3;
};

struct DecoderStackParams {
    Matrix embedding;  // vocab x d_model
    std::vector<DecoderLayerParams> layers;
    Matrix w_out;  // d_model x vocab
    Matrix b_out;  // 1 x vocab
};

struct EncDecParams {
    std::vector<EncoderLayerParams> encoder;
    DecoderStackParams decoder;
};

// ---- initialization -------------------------------------------------

AttentionParams init_attention(int d_q_in, int d_kv_in, int d, std::mt19937_64& rng);
LayerNormParams init_layer_norm(int d);
FfnParams init_ffn(int d, int d_ff, std::mt19937_64& rng);
EncoderLayerParams init_encoder_layer(const ModelConfig& cfg, std::mt19937_64& rng);
DecoderLayerParams init_decoder_layer(int d, int d_ff, int d_memory, std::mt19937_64& rng);
DecoderStackParams init_decoder_stack(const ModelConfig& cfg, int d_memory, std::mt19937_64& rng);
EncDecParams init_encdec(const ModelConfig& cfg, std::mt19937_64& rng);

// Zero-filled copies with identical shapes, used as gradient buffers.
AttentionParams zeros_like(const AttentionParams& p);
LayerNormParams zeros_like(const LayerNormParams& p);
FfnParams zeros_like(const FfnParams& p);
EncoderLayerParams zeros_like(const EncoderLayerParams& p);
DecoderLayerParams zeros_like(const DecoderLayerParams& p);
DecoderStackParams zeros_like(const DecoderStackParams& p);
EncDecParams zeros_like(const EncDecParams& p);

using NamedTensors = std::vector<std::pair<std::string, Matrix*>>;

// Fixed enumeration order; also the checkpoint serialization order.
void collect_tensors(AttentionParams& p, const std::string& prefix, NamedTensors& out);
void collect_tensors(LayerNormParams& p, const std::string& prefix, NamedTensors& out);
void collect_tensors(FfnParams& p, const std::string& prefix, NamedTensors& out);
void collect_tensors(EncoderLayerParams& p, const std::string& prefix, NamedTensors& out);
void collect_tensors(DecoderLayerParams& p, const std::string& prefix, NamedTensors& out);
void collect_tensors(DecoderStackParams& p, const std::string& prefix, NamedTensors& out);
void collect_tensors(EncDecParams& p, const std::string& prefix, NamedTensors& out);

// ---- forward/backward caches ----------------------------------------

struct AttnCache {
    Matrix xq, xk, xv;         // inputs
    Matrix q, k, v;            // projected, all heads packed
    std::vector<Matrix> attn;  // per-head softmax weights
    Matrix concat;
};

struct LnCache {
    Matrix x;  // input rows
};

struct FfnCache {
    Matrix x, z;  // z = x*w1 + b1 before ReLU
};

struct DropCache {
    Matrix mask;
    bool active = false;
};

struct EncLayerCache {
    AttnCache attn;
    DropCache drop1;
    LnCache ln1;
    FfnCache ffn;
    DropCache drop2;
    LnCache ln2;
};

struct DecLayerCache {
    AttnCache self_attn;
    DropCache drop1;
    LnCache ln1;
    AttnCache cross;
    DropCache drop2;
    LnCache ln2;
    FfnCache ffn;
    DropCache drop3;
    LnCache ln3;
};

struct EncoderCache {
    std::vector<EncLayerCache> layers;
};

struct DecoderCache {
    std::vector<int> prefix;
    Matrix embedded;
    std::vector<DecLayerCache> layers;
    Matrix final_hidden;
};

// Collects softmax attention weight matrices (one per head per attention
// call) so tests can check the rows-sum-to-one property at every layer.
struct AttentionRecorder {
    std::vector<Matrix> weights;
};

// ---- primitives ------------------------------------------------------

// Per head: softmax(Q K^T / sqrt(d_head) + mask) V; heads concatenated and
// output-projected. mask may be null; otherwise rows(q_in) x rows(k_in),
// added to the scores.
Matrix multi_head_attention(const Matrix& q_in, const Matrix& k_in, const Matrix& v_in,
                            const Matrix* mask, const AttentionParams& p, int n_heads,
                            AttnCache* cache = nullptr, AttentionRecorder* rec = nullptr);

// Returns d(q_in); accumulates parameter grads into gp and input grads for
// the key/value sources into dk_in / dv_in (shapes of k_in / v_in).
Matrix multi_head_attention_backward(const Matrix& dy, const AttnCache& c, const AttentionParams& p,
                                     int n_heads, AttentionParams& gp, Matrix& dk_in, Matrix& dv_in);

// ReLU(x w1 + b1) w2 + b2, row-wise.
Matrix ffn(const Matrix& x, const FfnParams& p, FfnCache* cache = nullptr);
Matrix ffn_backward(const Matrix& dy, const FfnCache& c, const FfnParams& p, FfnParams& gp);

Matrix layer_norm_rows(const Matrix& x, const LayerNormParams& p, double eps, LnCache* cache = nullptr);
Matrix layer_norm_rows_backward(const Matrix& dy, const LnCache& c, const LayerNormParams& p,
                                double eps, LayerNormParams& gp);

Matrix dropout(const Matrix& x, double rate, std::mt19937_64* rng, DropCache* cache);
Matrix dropout_backward(const Matrix& dy, const DropCache& c);

// 0 on and below the diagonal, -1e30 above: softmax weights over masked
// positions underflow to exactly zero.
Matrix causal_mask(int n);

// One decoder-style block (self-attn, optional cross-attn into memory,
// FFN), each sublayer wrapped as LN(x + Dropout(Sublayer(x))).
Matrix decoder_layer_forward(const DecoderLayerParams& p, const BlockConfig& bc, const Matrix& x,
                             const Matrix& memory, const Matrix* self_mask, bool train_mode,
                             std::mt19937_64* rng, DecLayerCache* cache = nullptr,
                             AttentionRecorder* rec = nullptr);

// Returns dx; accumulates dmemory into the provided matrix.
Matrix decoder_layer_backward(const DecoderLayerParams& p, const BlockConfig& bc,
                              const DecLayerCache& c, const Matrix& dy, DecoderLayerParams& gp,
                              Matrix& dmemory);

// ---- encoder / decoder stacks ----------------------------------------

Matrix encode(const std::vector<EncoderLayerParams>& layers, const ModelConfig& cfg,
              const Matrix& input, bool train_mode, std::mt19937_64* rng = nullptr,
              EncoderCache* cache = nullptr, AttentionRecorder* rec = nullptr);

// Returns d(input).
Matrix encode_backward(const std::vector<EncoderLayerParams>& layers, const ModelConfig& cfg,
                       const EncoderCache& cache, const Matrix& dout,
                       std::vector<EncoderLayerParams>& grads);

// Embedding + positions, causal self-attention decoder over the prefix,
// cross-attention into memory, output projection to vocab logits
// (len(prefix) x vocab).
Matrix decode_logits(const DecoderStackParams& p, const ModelConfig& cfg, const Matrix& memory,
                     const std::vector<int>& prefix, bool train_mode, std::mt19937_64* rng = nullptr,
                     DecoderCache* cache = nullptr, AttentionRecorder* rec = nullptr);

// Returns dMemory.
Matrix decode_backward(const DecoderStackParams& p, const ModelConfig& cfg,
                       const DecoderCache& cache, const Matrix& dlogits, DecoderStackParams& grads);

// Summed cross-entropy over rows whose target is not pad_id (-1 disables
// the exclusion). When dlogits is non-null it receives (softmax - onehot)
// scaled by dscale for the counted rows and zero elsewhere.
double cross_entropy_sum(const Matrix& logits, const std::vector<int>& targets, int pad_id,
                         Matrix* dlogits, double dscale);

// Greedy decoding from BOS: appends the argmax token each step (lowest id
// wins ties, PAD never emitted), stops at EOS or after max_len tokens.
// Returns the generated tokens without BOS/EOS.
std::vector<int> greedy_decode(const Matrix& memory, const DecoderStackParams& p,
                               const ModelConfig& cfg, int max_len);

}  // namespace radcap

#endif
