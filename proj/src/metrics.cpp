#include "radcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "radcap/csv.hpp"
#include "radcap/fusion.hpp"  // fnv1a64
#include "radcap/text.hpp"

namespace radcap {

// ---- default embedding provider ----------------------------------------

HashEmbeddingProvider::HashEmbeddingProvider(int dim, double neighbor_weight)
    : dim_(dim), neighbor_weight_(neighbor_weight) {
    if (dim < 1) throw std::invalid_argument("embedding dim must be >= 1");
}

Vector HashEmbeddingProvider::token_vector(const std::string& token) const {
    Vector v(dim_);
    const std::string padded = "^" + token + "$";
    if (padded.size() < 3) return v;
    for (size_t i = 0; i + 3 <= padded.size(); ++i) {
        const uint64_t h = fnv1a64(padded.data() + i, 3);
        const int bucket = static_cast<int>(h % static_cast<uint64_t>(dim_));
        const double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
        v[bucket] += sign;
    }
    return v;
}

std::vector<Vector> HashEmbeddingProvider::embed(const std::vector<std::string>& tokens) const {
    std::vector<Vector> raw;
    raw.reserve(tokens.size());
    for (const auto& tok : tokens) raw.push_back(token_vector(tok));

    std::vector<Vector> out(tokens.size(), Vector(dim_));
    for (size_t i = 0; i < raw.size(); ++i) {
        for (int j = 0; j < dim_; ++j) {
            double acc = raw[i][j];
            if (i > 0) acc += neighbor_weight_ * raw[i - 1][j];
            if (i + 1 < raw.size()) acc += neighbor_weight_ * raw[i + 1][j];
            out[i][j] = acc;
        }
        double norm2 = 0.0;
        for (int j = 0; j < dim_; ++j) norm2 += out[i][j] * out[i][j];
        if (norm2 > 0.0) {
            const double inv = 1.0 / std::sqrt(norm2);
            for (int j = 0; j < dim_; ++j) out[i][j] *= inv;
        }
    }
    return out;
}

// ---- BERTScore ----------------------------------------------------------

BertScore bertscore(const std::string& candidate, const std::string& reference,
                    const EmbeddingProvider& provider) {
    const auto cand_tokens = tokenize_metric(candidate);
    const auto ref_tokens = tokenize_metric(reference);
    if (cand_tokens.empty() || ref_tokens.empty()) return {0.0, 0.0, 0.0, true};

    const auto cand_vecs = provider.embed(cand_tokens);
    const auto ref_vecs = provider.embed(ref_tokens);

    double recall = 0.0;
    for (const auto& rv : ref_vecs) {
        double best = -1.0;
        for (const auto& cv : cand_vecs) best = std::max(best, cosine_similarity(rv, cv));
        recall += best;
    }
    recall /= static_cast<double>(ref_vecs.size());

    double precision = 0.0;
    for (const auto& cv : cand_vecs) {
        double best = -1.0;
        for (const auto& rv : ref_vecs) best = std::max(best, cosine_similarity(cv, rv));
        precision += best;
    }
    precision /= static_cast<double>(cand_vecs.size());

    BertScore score;
    score.precision = precision;
    score.recall = recall;
    score.f1 = (precision + recall > 0.0) ? 2.0 * precision * recall / (precision + recall) : 0.0;
    return score;
}

// ---- unigram metrics ------------------------------------------------------

namespace {

std::map<std::string, int64_t> unigram_counts(const std::vector<std::string>& tokens) {
    std::map<std::string, int64_t> counts;
    for (const auto& t : tokens) ++counts[t];
    return counts;
}

int64_t clipped_overlap(const std::map<std::string, int64_t>& cand,
                        const std::map<std::string, int64_t>& ref) {
    int64_t overlap = 0;
    for (const auto& [tok, count] : cand) {
        auto it = ref.find(tok);
        if (it != ref.end()) overlap += std::min(count, it->second);
    }
    return overlap;
}

}  // namespace

double bleu1(const std::string& candidate, const std::string& reference) {
    const auto cand = tokenize_metric(candidate);
    const auto ref = tokenize_metric(reference);
    if (ref.empty()) throw std::invalid_argument("bleu1: reference must be non-empty");
    if (cand.empty()) return 0.0;
    const int64_t overlap = clipped_overlap(unigram_counts(cand), unigram_counts(ref));
    const double precision = static_cast<double>(overlap) / static_cast<double>(cand.size());
    const double c = static_cast<double>(cand.size());
    const double r = static_cast<double>(ref.size());
    const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return precision * bp;
}

double rouge1_f(const std::string& candidate, const std::string& reference) {
    const auto cand = tokenize_metric(candidate);
    const auto ref = tokenize_metric(reference);
    if (cand.empty() || ref.empty()) return 0.0;
    const int64_t overlap = clipped_overlap(unigram_counts(cand), unigram_counts(ref));
    const double p = static_cast<double>(overlap) / static_cast<double>(cand.size());
    const double r = static_cast<double>(overlap) / static_cast<double>(ref.size());
    if (p + r <= 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

// ---- CIDEr ----------------------------------------------------------------

namespace {

using NgramCounts = std::map<std::string, int64_t>;

NgramCounts ngram_count(const std::vector<std::string>& tokens, int n) {
    NgramCounts counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int k = 1; k < n; ++k) {
            key.push_back('\x1f');
            key += tokens[i + static_cast<size_t>(k)];
        }
        ++counts[key];
    }
    return counts;
}

double tfidf_cosine(const NgramCounts& a, const NgramCounts& b,
                    const std::unordered_map<std::string, int64_t>& df, double log_n) {
    auto idf = [&](const std::string& g) {
        auto it = df.find(g);
        const double d = it == df.end() ? 1.0 : std::max<double>(1.0, static_cast<double>(it->second));
        return log_n - std::log(d);
    };
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [g, ca] : a) {
        const double wa = static_cast<double>(ca) * idf(g);
        na += wa * wa;
        auto it = b.find(g);
        if (it != b.end()) dot += wa * static_cast<double>(it->second) * idf(g);
    }
    for (const auto& [g, cb] : b) {
        const double wb = static_cast<double>(cb) * idf(g);
        nb += wb * wb;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<double> cider(const std::vector<std::string>& candidates,
                          const std::vector<std::string>& references, int n_max) {
    if (candidates.size() != references.size())
        throw std::invalid_argument("cider: " + std::to_string(candidates.size()) +
                                    " candidates vs " + std::to_string(references.size()) +
                                    " references");
    if (candidates.empty()) throw std::invalid_argument("cider: empty input");
    if (n_max < 1) throw std::invalid_argument("cider: n_max must be >= 1");

    std::vector<std::vector<std::string>> cand_tokens, ref_tokens;
    for (const auto& c : candidates) cand_tokens.push_back(tokenize_metric(c));
    for (const auto& r : references) ref_tokens.push_back(tokenize_metric(r));

    const double log_n = std::log(static_cast<double>(references.size()));
    std::vector<double> scores(candidates.size(), 0.0);
    for (int n = 1; n <= n_max; ++n) {
        std::vector<NgramCounts> cand_counts, ref_counts;
        for (const auto& t : cand_tokens) cand_counts.push_back(ngram_count(t, n));
        for (const auto& t : ref_tokens) ref_counts.push_back(ngram_count(t, n));

        std::unordered_map<std::string, int64_t> df;
        for (const auto& counts : ref_counts)
            for (const auto& [g, c] : counts) {
                (void)c;
                ++df[g];
            }

        for (size_t i = 0; i < candidates.size(); ++i)
            scores[i] += tfidf_cosine(cand_counts[i], ref_counts[i], df, log_n);
    }
    for (double& s : scores) s = 10.0 * s / static_cast<double>(n_max);
    return scores;
}

// ---- whole-file evaluation --------------------------------------------------

namespace {

struct CsvCaptionFile {
    std::vector<std::pair<std::string, std::string>> rows;  // id, caption
};

CsvCaptionFile read_caption_csv(const std::filesystem::path& path) {
    const auto rows = read_csv(path);
    if (rows.empty()) throw std::runtime_error(path.string() + ": empty caption CSV");
    const auto& header = rows.front();
    if (header.size() != 2 || to_lower(trim(header[0])) != "id" ||
        to_lower(trim(header[1])) != "caption")
        throw std::runtime_error(path.string() + ": expected header 'ID,caption'");
    CsvCaptionFile file;
    std::set<std::string> seen;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() == 1 && trim(rows[i][0]).empty()) continue;  // trailing blank line
        if (rows[i].size() != 2)
            throw std::runtime_error(path.string() + ": row " + std::to_string(i + 1) +
                                     " has " + std::to_string(rows[i].size()) + " fields, expected 2");
        const std::string id = trim(rows[i][0]);
        if (!seen.insert(id).second)
            throw std::runtime_error(path.string() + ": duplicate id '" + id + "'");
        file.rows.emplace_back(id, rows[i][1]);
    }
    return file;
}

void add_to_means(MetricMeans& m, const SampleScores& s) {
    m.bleu1 += s.bleu1;
    m.rouge1_f += s.rouge1_f;
    m.bert_p += s.bert.precision;
    m.bert_r += s.bert.recall;
    m.bert_f += s.bert.f1;
    m.cider += s.cider;
}

void divide_means(MetricMeans& m, int64_t n) {
    if (n == 0) return;
    const double d = static_cast<double>(n);
    m.bleu1 /= d;
    m.rouge1_f /= d;
    m.bert_p /= d;
    m.bert_r /= d;
    m.bert_f /= d;
    m.cider /= d;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ScoreReport evaluate_files(const std::filesystem::path& pred_csv,
                           const std::filesystem::path& gold_csv,
                           const EmbeddingProvider& provider, const LengthGroups& groups) {
    groups.validate();
    const CsvCaptionFile pred = read_caption_csv(pred_csv);
    const CsvCaptionFile gold = read_caption_csv(gold_csv);

    std::map<std::string, std::string> gold_map;
    for (const auto& [id, caption] : gold.rows) gold_map[id] = caption;

    std::vector<std::string> missing;
    for (const auto& [id, caption] : pred.rows) {
        (void)caption;
        if (!gold_map.count(id)) missing.push_back(id);
    }
    if (!missing.empty()) {
        std::string msg = "evaluate: prediction ids missing from gold:";
        for (const auto& id : missing) msg += " '" + id + "'";
        throw std::runtime_error(msg);
    }

    // Sort by id so the report is independent of input row order.
    std::vector<std::pair<std::string, std::string>> ordered = pred.rows;
    std::sort(ordered.begin(), ordered.end());

    std::vector<std::string> cands, refs;
    for (const auto& [id, caption] : ordered) {
        cands.push_back(caption);
        refs.push_back(gold_map.at(id));
    }

    ScoreReport report;
    std::vector<double> cider_scores;
    if (!ordered.empty()) cider_scores = cider(cands, refs);
    for (size_t i = 0; i < ordered.size(); ++i) {
        SampleScores s;
        s.id = ordered[i].first;
        s.bleu1 = bleu1(cands[i], refs[i]);
        s.rouge1_f = rouge1_f(cands[i], refs[i]);
        s.bert = bertscore(cands[i], refs[i], provider);
        s.cider = cider_scores[i];
        s.ref_len = static_cast<int>(tokenize_metric(refs[i]).size());
        s.group = classify_length(s.ref_len, groups);
        report.samples.push_back(std::move(s));
    }

    report.total = static_cast<int64_t>(report.samples.size());
    report.groups.resize(static_cast<size_t>(groups.group_count()));
    for (int g = 0; g < groups.group_count(); ++g)
        report.groups[static_cast<size_t>(g)].label = groups.labels[static_cast<size_t>(g)];
    for (const auto& s : report.samples) {
        add_to_means(report.corpus_means, s);
        auto& group = report.groups[static_cast<size_t>(s.group)];
        add_to_means(group.means, s);
        ++group.count;
    }
    divide_means(report.corpus_means, report.total);
    for (auto& g : report.groups) divide_means(g.means, g.count);
    return report;
}

namespace {

nlohmann::json means_json(const MetricMeans& m) {
    return {{"bleu1", m.bleu1},   {"rouge1_f", m.rouge1_f}, {"bertscore_p", m.bert_p},
            {"bertscore_r", m.bert_r}, {"bertscore_f", m.bert_f}, {"cider", m.cider}};
}

}  // namespace

std::string score_report_json(const ScoreReport& report) {
    nlohmann::json j;
    j["total"] = report.total;
    j["corpus"] = means_json(report.corpus_means);
    j["groups"] = nlohmann::json::array();
    for (const auto& g : report.groups)
        j["groups"].push_back({{"label", g.label}, {"count", g.count}, {"means", means_json(g.means)}});
    j["samples"] = nlohmann::json::array();
    for (const auto& s : report.samples)
        j["samples"].push_back({{"id", s.id},
                                {"bleu1", s.bleu1},
                                {"rouge1_f", s.rouge1_f},
                                {"bertscore_p", s.bert.precision},
                                {"bertscore_r", s.bert.recall},
                                {"bertscore_f", s.bert.f1},
                                {"bertscore_degenerate", s.bert.degenerate},
                                {"cider", s.cider},
                                {"ref_len", s.ref_len},
                                {"group", s.group}});
    j["unavailable_metrics"] = report.unavailable_metrics;
    return j.dump(2) + "\n";
}

void write_per_sample_csv(const ScoreReport& report, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : report.samples)
        rows.push_back({s.id, format_double(s.bleu1), format_double(s.rouge1_f),
                        format_double(s.bert.precision), format_double(s.bert.recall),
                        format_double(s.bert.f1), format_double(s.cider),
                        std::to_string(s.ref_len), std::to_string(s.group)});
    write_csv(path,
              {"ID", "bleu1", "rouge1_f", "bertscore_p", "bertscore_r", "bertscore_f", "cider",
               "ref_len", "group"},
              rows);
}

}  // namespace radcap
