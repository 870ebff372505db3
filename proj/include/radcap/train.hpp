#ifndef RADCAP_TRAIN_HPP
#define RADCAP_TRAIN_HPP

#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "radcap/model.hpp"
#include "radcap/qformer.hpp"
#include "radcap/tensor.hpp"

namespace radcap {

struct TrainConfig {
    double learning_rate = 3e-5;
    int batch_size = 32;
    int patience = 3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int max_epochs = 50;
    uint64_t seed = 42;

    void validate() const;
};

struct TrainSample {
    std::string id;
    Matrix features;          // fused encoder input
    std::vector<int> target;  // caption token ids, no reserved ids
};

struct EpochStats {
    double train_loss = 0.0;
    double valid_loss = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;  // -1 when no epoch ran
    double best_valid = std::numeric_limits<double>::infinity();
};

// Interface the shared training loop drives. Implementations own their
// parameters and a parallel gradient buffer.
class Captioner {
public:
    virtual ~Captioner() = default;

    // Teacher-forced forward+backward in train mode; accumulates gradients
    // scaled by grad_scale and returns the summed cross-entropy.
    virtual double forward_backward_sum(const TrainSample& sample, double grad_scale,
                                        std::mt19937_64& rng) = 0;
    virtual double eval_loss_sum(const TrainSample& sample) const = 0;
    virtual void zero_grads() = 0;
    virtual NamedTensors param_tensors() = 0;
    virtual NamedTensors grad_tensors() = 0;
    virtual std::vector<int> generate(const Matrix& features, int max_len) const = 0;
};

// Tokens contributing to the loss for one sample: the caption plus EOS.
int target_token_count(const TrainSample& sample);

// Minibatch Adam with early stopping on validation loss; returns the
// per-epoch history and leaves the model holding the best-validation
// parameters. Empty valid_set falls back to the training set.
TrainHistory train_captioner(Captioner& model, const std::vector<TrainSample>& train_set,
                             const std::vector<TrainSample>& valid_set, const TrainConfig& tcfg);

// Encoder-decoder captioner over fused features.
class EncDecCaptioner : public Captioner {
public:
    EncDecCaptioner(const ModelConfig& cfg, uint64_t init_seed);
    EncDecCaptioner(const ModelConfig& cfg, EncDecParams params);

    double forward_backward_sum(const TrainSample& sample, double grad_scale,
                                std::mt19937_64& rng) override;
    double eval_loss_sum(const TrainSample& sample) const override;
    void zero_grads() override;
    NamedTensors param_tensors() override;
    NamedTensors grad_tensors() override;
    std::vector<int> generate(const Matrix& features, int max_len) const override;

    const ModelConfig& config() const { return cfg_; }
    EncDecParams& params() { return params_; }
    const EncDecParams& params() const { return params_; }

private:
    ModelConfig cfg_;
    EncDecParams params_;
    EncDecParams grads_;
};

// Query-bottleneck captioner: frozen image features -> query transformer ->
// decoder stack. Trainable parts are the query bank, the blocks, and the
// decoder.
class QFormerCaptioner : public Captioner {
public:
    QFormerCaptioner(const QFormerConfig& qcfg, const ModelConfig& dec_cfg, uint64_t init_seed);
    QFormerCaptioner(const QFormerConfig& qcfg, const ModelConfig& dec_cfg, QueryBank bank,
                     QFormerParams qparams, DecoderStackParams decoder);

    double forward_backward_sum(const TrainSample& sample, double grad_scale,
                                std::mt19937_64& rng) override;
    double eval_loss_sum(const TrainSample& sample) const override;
    void zero_grads() override;
    NamedTensors param_tensors() override;
    NamedTensors grad_tensors() override;
    std::vector<int> generate(const Matrix& features, int max_len) const override;

    const QFormerConfig& qformer_config() const { return qcfg_; }
    const ModelConfig& decoder_config() const { return dec_cfg_; }
    QueryBank& queries() { return bank_; }
    QFormerParams& qformer_params() { return qparams_; }
    DecoderStackParams& decoder_params() { return decoder_; }

private:
    QFormerConfig qcfg_;
    ModelConfig dec_cfg_;
    QueryBank bank_;
    QFormerParams qparams_;
    DecoderStackParams decoder_;

    Matrix bank_grads_;
    QFormerParams qparam_grads_;
    DecoderStackParams decoder_grads_;
};

}  // namespace radcap

#endif
