#include "radcap/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "radcap/text.hpp"

namespace radcap {

void TrainConfig::validate() const {
    if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("adam betas must be in [0,1)");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be positive");
}

int target_token_count(const TrainSample& sample) {
    return static_cast<int>(sample.target.size()) + 1;  // + EOS
}

namespace {

// Decoder input starts at BOS; targets are the caption shifted left with a
// trailing EOS.
void teacher_forcing_ids(const TrainSample& sample, std::vector<int>& prefix,
                         std::vector<int>& targets) {
    prefix.clear();
    targets.clear();
    prefix.push_back(Vocabulary::BOS);
    for (int id : sample.target) {
        prefix.push_back(id);
        targets.push_back(id);
    }
    targets.push_back(Vocabulary::EOS);
}

struct AdamState {
    std::vector<Matrix> m, v;
    int64_t step = 0;

    explicit AdamState(const NamedTensors& params) {
        for (const auto& [name, t] : params) {
            (void)name;
            m.emplace_back(t->rows, t->cols);
            v.emplace_back(t->rows, t->cols);
        }
    }

    void update(const NamedTensors& params, const NamedTensors& grads, const TrainConfig& tc) {
        ++step;
        const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
        for (size_t i = 0; i < params.size(); ++i) {
            Matrix& p = *params[i].second;
            const Matrix& g = *grads[i].second;
            Matrix& mi = m[i];
            Matrix& vi = v[i];
            for (size_t k = 0; k < p.data.size(); ++k) {
                mi.data[k] = tc.beta1 * mi.data[k] + (1.0 - tc.beta1) * g.data[k];
                vi.data[k] = tc.beta2 * vi.data[k] + (1.0 - tc.beta2) * g.data[k] * g.data[k];
                const double mhat = mi.data[k] / bc1;
                const double vhat = vi.data[k] / bc2;
                p.data[k] -= tc.learning_rate * mhat / (std::sqrt(vhat) + tc.adam_eps);
            }
        }
    }
};

std::vector<Matrix> snapshot(const NamedTensors& params) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const auto& [name, t] : params) {
        (void)name;
        out.push_back(*t);
    }
    return out;
}

void restore(const NamedTensors& params, const std::vector<Matrix>& snap) {
    for (size_t i = 0; i < params.size(); ++i) *params[i].second = snap[i];
}

double mean_eval_loss(const Captioner& model, const std::vector<TrainSample>& set) {
    double loss = 0.0;
    int64_t tokens = 0;
    for (const auto& s : set) {
        loss += model.eval_loss_sum(s);
        tokens += target_token_count(s);
    }
    return tokens > 0 ? loss / static_cast<double>(tokens) : 0.0;
}

}  // namespace

TrainHistory train_captioner(Captioner& model, const std::vector<TrainSample>& train_set,
                             const std::vector<TrainSample>& valid_set, const TrainConfig& tcfg) {
    tcfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train: dataset must be non-empty");
    const std::vector<TrainSample>& vset = valid_set.empty() ? train_set : valid_set;

    std::mt19937_64 rng(tcfg.seed);
    NamedTensors params = model.param_tensors();
    NamedTensors grads = model.grad_tensors();
    AdamState adam(params);

    TrainHistory history;
    std::vector<Matrix> best = snapshot(params);
    int epochs_without_improvement = 0;

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int64_t epoch_tokens = 0;
        int step_in_epoch = 0;
        for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(tcfg.batch_size)) {
            const size_t end = std::min(order.size(), begin + static_cast<size_t>(tcfg.batch_size));
            int64_t batch_tokens = 0;
            for (size_t i = begin; i < end; ++i) batch_tokens += target_token_count(train_set[order[i]]);
            if (batch_tokens == 0) continue;

            model.zero_grads();
            double batch_loss = 0.0;
            const double scale = 1.0 / static_cast<double>(batch_tokens);
            for (size_t i = begin; i < end; ++i) {
                const TrainSample& s = train_set[order[i]];
                batch_loss += model.forward_backward_sum(s, scale, rng);
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training aborted: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " +
                                         std::to_string(step_in_epoch) + " (batch starting at sample '" +
                                         train_set[order[begin]].id + "')");
            adam.update(params, grads, tcfg);
            epoch_loss += batch_loss;
            epoch_tokens += batch_tokens;
            ++step_in_epoch;
        }

        EpochStats stats;
        stats.train_loss = epoch_tokens > 0 ? epoch_loss / static_cast<double>(epoch_tokens) : 0.0;
        stats.valid_loss = mean_eval_loss(model, vset);
        history.epochs.push_back(stats);

        if (stats.valid_loss < history.best_valid) {
            history.best_valid = stats.valid_loss;
            history.best_epoch = epoch;
            best = snapshot(params);
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
            if (epochs_without_improvement >= tcfg.patience) break;
        }
    }

    restore(params, best);
    return history;
}

// ---- encoder-decoder captioner ----------------------------------------

EncDecCaptioner::EncDecCaptioner(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(init_seed);
    params_ = init_encdec(cfg_, rng);
    grads_ = zeros_like(params_);
}

EncDecCaptioner::EncDecCaptioner(const ModelConfig& cfg, EncDecParams params)
    : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    grads_ = zeros_like(params_);
}

double EncDecCaptioner::forward_backward_sum(const TrainSample& sample, double grad_scale,
                                             std::mt19937_64& rng) {
    std::vector<int> prefix, targets;
    teacher_forcing_ids(sample, prefix, targets);

    EncoderCache enc_cache;
    DecoderCache dec_cache;
    Matrix memory = encode(params_.encoder, cfg_, sample.features, true, &rng, &enc_cache);
    Matrix logits = decode_logits(params_.decoder, cfg_, memory, prefix, true, &rng, &dec_cache);
    Matrix dlogits;
    const double loss =
        cross_entropy_sum(logits, targets, Vocabulary::PAD, &dlogits, grad_scale);
    Matrix dmemory = decode_backward(params_.decoder, cfg_, dec_cache, dlogits, grads_.decoder);
    if (dmemory.rows == 0) dmemory = Matrix(memory.rows, memory.cols);
    encode_backward(params_.encoder, cfg_, enc_cache, dmemory, grads_.encoder);
    return loss;
}

double EncDecCaptioner::eval_loss_sum(const TrainSample& sample) const {
    std::vector<int> prefix, targets;
    teacher_forcing_ids(sample, prefix, targets);
    Matrix memory = encode(params_.encoder, cfg_, sample.features, false);
    Matrix logits = decode_logits(params_.decoder, cfg_, memory, prefix, false);
    return cross_entropy_sum(logits, targets, Vocabulary::PAD, nullptr, 0.0);
}

void EncDecCaptioner::zero_grads() {
    NamedTensors g;
    collect_tensors(grads_, "", g);
    for (auto& [name, t] : g) {
        (void)name;
        std::fill(t->data.begin(), t->data.end(), 0.0);
    }
}

NamedTensors EncDecCaptioner::param_tensors() {
    NamedTensors out;
    collect_tensors(params_, "", out);
    return out;
}

NamedTensors EncDecCaptioner::grad_tensors() {
    NamedTensors out;
    collect_tensors(grads_, "", out);
    return out;
}

std::vector<int> EncDecCaptioner::generate(const Matrix& features, int max_len) const {
    Matrix memory = encode(params_.encoder, cfg_, features, false);
    return greedy_decode(memory, params_.decoder, cfg_, max_len);
}

// ---- query-bottleneck captioner ----------------------------------------

QFormerCaptioner::QFormerCaptioner(const QFormerConfig& qcfg, const ModelConfig& dec_cfg,
                                   uint64_t init_seed)
    : qcfg_(qcfg), dec_cfg_(dec_cfg) {
    qcfg_.validate();
    dec_cfg_.validate();
    if (qcfg_.d_q != dec_cfg_.d_model)
        throw std::invalid_argument("qformer d_q must equal decoder d_model");
    std::mt19937_64 rng(init_seed);
    bank_ = QueryBank::init(qcfg_, rng);
    qparams_ = QFormerParams::init(qcfg_, rng);
    decoder_ = init_decoder_stack(dec_cfg_, qcfg_.d_q, rng);
    bank_grads_ = Matrix(qcfg_.n_queries, qcfg_.d_q);
    for (const auto& b : qparams_.blocks) qparam_grads_.blocks.push_back(zeros_like(b));
    decoder_grads_ = zeros_like(decoder_);
}

QFormerCaptioner::QFormerCaptioner(const QFormerConfig& qcfg, const ModelConfig& dec_cfg,
                                   QueryBank bank, QFormerParams qparams,
                                   DecoderStackParams decoder)
    : qcfg_(qcfg),
      dec_cfg_(dec_cfg),
      bank_(std::move(bank)),
      qparams_(std::move(qparams)),
      decoder_(std::move(decoder)) {
    qcfg_.validate();
    dec_cfg_.validate();
    bank_grads_ = Matrix(qcfg_.n_queries, qcfg_.d_q);
    for (const auto& b : qparams_.blocks) qparam_grads_.blocks.push_back(zeros_like(b));
    decoder_grads_ = zeros_like(decoder_);
}

double QFormerCaptioner::forward_backward_sum(const TrainSample& sample, double grad_scale,
                                              std::mt19937_64& rng) {
    std::vector<int> prefix, targets;
    teacher_forcing_ids(sample, prefix, targets);

    QFormerCache qf_cache;
    DecoderCache dec_cache;
    Matrix memory = qformer_forward(sample.features, bank_, qparams_, qcfg_, true, &rng, &qf_cache);
    Matrix logits = decode_logits(decoder_, dec_cfg_, memory, prefix, true, &rng, &dec_cache);
    Matrix dlogits;
    const double loss =
        cross_entropy_sum(logits, targets, Vocabulary::PAD, &dlogits, grad_scale);
    Matrix dmemory = decode_backward(decoder_, dec_cfg_, dec_cache, dlogits, decoder_grads_);
    if (dmemory.rows == 0) dmemory = Matrix(memory.rows, memory.cols);
    qformer_backward(qparams_, qcfg_, qf_cache, dmemory, qparam_grads_, bank_grads_);
    return loss;
}

double QFormerCaptioner::eval_loss_sum(const TrainSample& sample) const {
    std::vector<int> prefix, targets;
    teacher_forcing_ids(sample, prefix, targets);
    Matrix memory = qformer_forward(sample.features, bank_, qparams_, qcfg_);
    Matrix logits = decode_logits(decoder_, dec_cfg_, memory, prefix, false);
    return cross_entropy_sum(logits, targets, Vocabulary::PAD, nullptr, 0.0);
}

void QFormerCaptioner::zero_grads() {
    NamedTensors g = grad_tensors();
    for (auto& [name, t] : g) {
        (void)name;
        std::fill(t->data.begin(), t->data.end(), 0.0);
    }
}

NamedTensors QFormerCaptioner::param_tensors() {
    NamedTensors out;
    out.emplace_back("queries", &bank_.embeddings);
    for (size_t b = 0; b < qparams_.blocks.size(); ++b)
        collect_tensors(qparams_.blocks[b], "qformer.block" + std::to_string(b), out);
    collect_tensors(decoder_, "decoder", out);
    return out;
}

NamedTensors QFormerCaptioner::grad_tensors() {
    NamedTensors out;
    out.emplace_back("queries", &bank_grads_);
    for (size_t b = 0; b < qparam_grads_.blocks.size(); ++b)
        collect_tensors(qparam_grads_.blocks[b], "qformer.block" + std::to_string(b), out);
    collect_tensors(decoder_grads_, "decoder", out);
    return out;
}

std::vector<int> QFormerCaptioner::generate(const Matrix& features, int max_len) const {
    return caption_with_qformer(features, bank_, qparams_, qcfg_, decoder_, dec_cfg_, max_len);
}

}  // namespace radcap
