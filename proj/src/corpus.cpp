#include "radcap/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "radcap/text.hpp"

namespace radcap {

void LengthGroups::validate() const {
    if (boundaries.empty()) throw std::invalid_argument("length groups need at least one boundary");
    for (size_t i = 1; i < boundaries.size(); ++i)
        if (boundaries[i] <= boundaries[i - 1])
            throw std::invalid_argument("length group boundaries must be strictly increasing");
    if (labels.size() != boundaries.size() + 1)
        throw std::invalid_argument("length groups need exactly boundaries+1 labels");
}

int classify_length(int n, const LengthGroups& groups) {
    groups.validate();
    if (n < 1) throw std::invalid_argument("caption length must be >= 1");
    for (size_t i = 0; i < groups.boundaries.size(); ++i)
        if (n <= groups.boundaries[i]) return static_cast<int>(i);
    return static_cast<int>(groups.boundaries.size());
}

LengthStats length_stats(const Corpus& corpus) {
    if (corpus.samples.empty()) throw std::invalid_argument("length_stats: empty corpus");
    LengthStats stats;
    int64_t total = 0;
    bool first = true;
    for (const auto& s : corpus.samples) {
        const int n = static_cast<int>(tokenize_metric(s.caption).size());
        ++stats.histogram[n];
        total += n;
        if (first) {
            stats.min_len = stats.max_len = n;
            first = false;
        } else {
            stats.min_len = std::min(stats.min_len, n);
            stats.max_len = std::max(stats.max_len, n);
        }
    }
    stats.mean_len = static_cast<double>(total) / static_cast<double>(corpus.samples.size());
    return stats;
}

std::vector<WordCount> top_words(const Corpus& corpus, const std::vector<std::string>& stopwords,
                                 int k) {
    if (k < 1) throw std::invalid_argument("top_words: k must be >= 1");
    const std::unordered_set<std::string> stop(stopwords.begin(), stopwords.end());
    std::map<std::string, int64_t> counts;  // ordered map gives the alphabetical tie-break
    for (const auto& s : corpus.samples)
        for (const auto& tok : tokenize_metric(s.caption))
            if (!stop.count(tok)) ++counts[tok];

    std::vector<WordCount> ranked;
    ranked.reserve(counts.size());
    for (const auto& [word, count] : counts) ranked.push_back({word, count});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const WordCount& a, const WordCount& b) { return a.count > b.count; });
    if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<size_t>(k));
    return ranked;
}

std::vector<CaptionCount> top_captions(const Corpus& corpus, int k) {
    if (k < 1) throw std::invalid_argument("top_captions: k must be >= 1");
    std::map<std::string, int64_t> counts;
    for (const auto& s : corpus.samples) ++counts[trim(s.caption)];
    std::vector<CaptionCount> ranked;
    ranked.reserve(counts.size());
    for (const auto& [caption, count] : counts) ranked.push_back({caption, count});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const CaptionCount& a, const CaptionCount& b) { return a.count > b.count; });
    if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<size_t>(k));
    return ranked;
}

Uniqueness uniqueness(const Corpus& corpus) {
    if (corpus.samples.empty()) throw std::invalid_argument("uniqueness: empty corpus");
    std::set<std::string> distinct;
    for (const auto& s : corpus.samples) distinct.insert(trim(s.caption));
    Uniqueness u;
    u.unique_count = static_cast<int64_t>(distinct.size());
    u.total = static_cast<int64_t>(corpus.samples.size());
    u.percent = 100.0 * static_cast<double>(u.unique_count) / static_cast<double>(u.total);
    return u;
}

Corpus load_caption_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open corpus file");
    Corpus corpus;
    std::unordered_set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": invalid JSON: " + e.what());
        }
        CaptionSample s;
        s.id = j.at("id").get<std::string>();
        s.caption = j.at("caption").get<std::string>();
        if (!seen.insert(s.id).second)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": duplicate id '" + s.id + "'");
        corpus.samples.push_back(std::move(s));
    }
    return corpus;
}

const std::vector<std::string>& default_stopwords() {
    static const std::vector<std::string> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
        "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
        "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during",
        "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
        "here", "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its",
        "itself", "just", "me", "more", "most", "my", "no", "nor", "not", "now", "of", "off",
        "on", "once", "only", "or", "other", "our", "ours", "out", "over", "own", "same",
        "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs",
        "them", "then", "there", "these", "they", "this", "those", "through", "to",
        "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where",
        "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your",
        "yours",
        // punctuation emitted as standalone tokens by the shared tokenizer
        ".", ",", ";", ":", "!", "?", "(", ")", "[", "]", "{", "}", "\"", "'", "-", "_", "/",
        "\\", "%", "&", "*", "+", "=", "<", ">", "|", "~", "^", "@", "#", "$", "`",
    };
    return words;
}

std::vector<std::string> load_stopword_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open stopword file");
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        const std::string w = trim(line);
        if (!w.empty()) words.push_back(to_lower(w));
    }
    return words;
}

}  // namespace radcap
