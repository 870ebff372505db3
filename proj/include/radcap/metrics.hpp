#ifndef RADCAP_METRICS_HPP
#define RADCAP_METRICS_HPP

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "radcap/corpus.hpp"
#include "radcap/tensor.hpp"

namespace radcap {

// Deterministic token-in-context embeddings. Same sentence twice must give
// identical vectors; dim is constant per provider.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual int dim() const = 0;
    virtual std::vector<Vector> embed(const std::vector<std::string>& tokens) const = 0;
};

// Character-trigram hashing into a fixed-dim signed-bucket vector with a
// one-neighbor window average for weak context, then L2 normalization.
// Pure integer-derived arithmetic plus IEEE sqrt, so the vectors are
// bit-identical across platforms.
class HashEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(int dim = 64, double neighbor_weight = 0.5);
    int dim() const override { return dim_; }
    std::vector<Vector> embed(const std::vector<std::string>& tokens) const override;

private:
    int dim_;
    double neighbor_weight_;
    Vector token_vector(const std::string& token) const;
};

struct BertScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // empty tokenization on either side
};

// Greedy-matching score: recall averages each reference token's best
// cosine against the candidate, precision the reverse, F the harmonic
// mean. Empty tokenization yields (0,0,0) with the degenerate flag set.
BertScore bertscore(const std::string& candidate, const std::string& reference,
                    const EmbeddingProvider& provider);

// Clipped unigram precision times brevity penalty exp(1 - r/c) for c < r.
double bleu1(const std::string& candidate, const std::string& reference);

// Unigram-overlap F1.
double rouge1_f(const std::string& candidate, const std::string& reference);

// TF-IDF weighted n-gram cosine averaged over n = 1..n_max, scaled by 10.
// IDF comes from the reference corpus. Rejects mismatched list lengths.
std::vector<double> cider(const std::vector<std::string>& candidates,
                          const std::vector<std::string>& references, int n_max = 4);

struct SampleScores {
    std::string id;
    double bleu1 = 0.0;
    double rouge1_f = 0.0;
    BertScore bert;
    double cider = 0.0;
    int ref_len = 0;  // reference token count, drives the length grouping
    int group = 0;
};

struct MetricMeans {
    double bleu1 = 0.0;
    double rouge1_f = 0.0;
    double bert_p = 0.0;
    double bert_r = 0.0;
    double bert_f = 0.0;
    double cider = 0.0;
};

struct GroupReport {
    std::string label;
    int64_t count = 0;
    MetricMeans means;
};

struct ScoreReport {
    std::vector<SampleScores> samples;
    MetricMeans corpus_means;
    std::vector<GroupReport> groups;
    int64_t total = 0;
    // Metrics requiring pretrained models; reserved, never populated here.
    std::vector<std::string> unavailable_metrics = {"BLEURT",       "METEOR",
                                                    "CLIPScore",    "RefCLIPScore",
                                                    "ClinicalBLEURT", "MedBERTScore"};
};

// Both CSVs carry an ID,caption header. Gold ids must cover all pred ids;
// duplicates are rejected. Length groups are computed from the reference
// captions.
ScoreReport evaluate_files(const std::filesystem::path& pred_csv,
                           const std::filesystem::path& gold_csv,
                           const EmbeddingProvider& provider, const LengthGroups& groups);

std::string score_report_json(const ScoreReport& report);
void write_per_sample_csv(const ScoreReport& report, const std::filesystem::path& path);

}  // namespace radcap

#endif
