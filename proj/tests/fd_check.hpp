#ifndef RADCAP_TESTS_FD_CHECK_HPP
#define RADCAP_TESTS_FD_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "radcap/train.hpp"

namespace radcap::testutil {

// Mean loss over the batch, the quantity the analytic gradients are scaled
// against. Evaluation path only, so it is dropout-free and deterministic.
inline double batch_mean_loss(const Captioner& model, const std::vector<TrainSample>& samples) {
    double sum = 0.0;
    int64_t tokens = 0;
    for (const auto& s : samples) {
        sum += model.eval_loss_sum(s);
        tokens += target_token_count(s);
    }
    return sum / static_cast<double>(tokens);
}

struct GradCheckResult {
    double max_group_rel = 0.0;    // ||g - fd||_2 / max(||fd||_2, 1e-8) per tensor
    double max_element_rel = 0.0;  // |g - fd| / max(|fd|, 1e-8) per coordinate
    std::string worst_group;
};

// Central finite differences over every parameter of every group. The
// group-wise norm ratio is the assertion target; per-element ratios on
// coordinates with |gradient| near the FD roundoff floor (~1e-11 at
// eps=1e-5 in double) are reported but only guarded loosely.
inline GradCheckResult finite_difference_check(Captioner& model,
                                               const std::vector<TrainSample>& samples,
                                               double eps = 1e-5) {
    int64_t tokens = 0;
    for (const auto& s : samples) tokens += target_token_count(s);
    const double scale = 1.0 / static_cast<double>(tokens);

    model.zero_grads();
    std::mt19937_64 rng(0);  // dropout must be off; rng is unused then
    for (const auto& s : samples) model.forward_backward_sum(s, scale, rng);

    NamedTensors params = model.param_tensors();
    NamedTensors grads = model.grad_tensors();
    GradCheckResult result;
    for (size_t t = 0; t < params.size(); ++t) {
        Matrix& pm = *params[t].second;
        const Matrix& gm = *grads[t].second;
        double diff2 = 0.0, fd2 = 0.0;
        for (size_t k = 0; k < pm.data.size(); ++k) {
            const double orig = pm.data[k];
            pm.data[k] = orig + eps;
            const double lp = batch_mean_loss(model, samples);
            pm.data[k] = orig - eps;
            const double lm = batch_mean_loss(model, samples);
            pm.data[k] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            diff2 += (gm.data[k] - fd) * (gm.data[k] - fd);
            fd2 += fd * fd;
            result.max_element_rel = std::max(
                result.max_element_rel, std::abs(gm.data[k] - fd) / std::max(std::abs(fd), 1e-8));
        }
        const double rel = std::sqrt(diff2) / std::max(std::sqrt(fd2), 1e-8);
        if (rel > result.max_group_rel) {
            result.max_group_rel = rel;
            result.worst_group = params[t].first;
        }
    }
    return result;
}

inline std::vector<TrainSample> synthetic_samples(int count, int rows, int feature_dim, int vocab,
                                                  int max_caption_len, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<TrainSample> samples;
    for (int i = 0; i < count; ++i) {
        TrainSample s;
        s.id = "sample" + std::to_string(i);
        s.features = Matrix(rows, feature_dim);
        fill_uniform(s.features, rng, 1.0);
        const int len = 1 + static_cast<int>(rng() % static_cast<uint64_t>(max_caption_len));
        for (int t = 0; t < len; ++t)
            s.target.push_back(4 + static_cast<int>(rng() % static_cast<uint64_t>(vocab - 4)));
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace radcap::testutil

#endif
