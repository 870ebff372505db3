#ifndef RADCAP_CORPUS_HPP
#define RADCAP_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace radcap {

struct CaptionSample {
    std::string id;
    std::string caption;
};

// Ids are unique; enforced on load.
struct Corpus {
    std::vector<CaptionSample> samples;
};

// Partition of positive caption lengths; boundaries are the inclusive
// upper ends of all groups but the last.
struct LengthGroups {
    std::vector<int> boundaries = {20, 25, 30};
    std::vector<std::string> labels = {"short", "medium", "long", "very_long"};

    void validate() const;
    int group_count() const { return static_cast<int>(labels.size()); }
};

// Index of the group containing n; rejects n < 1.
int classify_length(int n, const LengthGroups& groups);

struct LengthStats {
    int min_len = 0;
    int max_len = 0;
    double mean_len = 0.0;
    std::map<int, int64_t> histogram;  // token count -> captions
};

// Token counts under the shared metric tokenizer. Rejects an empty corpus.
LengthStats length_stats(const Corpus& corpus);

struct WordCount {
    std::string word;
    int64_t count = 0;
};

// Top k words by descending count (ties alphabetical), stopwords excluded
// after tokenization.
std::vector<WordCount> top_words(const Corpus& corpus, const std::vector<std::string>& stopwords,
                                 int k);

struct CaptionCount {
    std::string caption;
    int64_t count = 0;
};

// Exact-string grouping after trimming surrounding whitespace.
std::vector<CaptionCount> top_captions(const Corpus& corpus, int k);

struct Uniqueness {
    int64_t unique_count = 0;
    int64_t total = 0;
    double percent = 0.0;
};

Uniqueness uniqueness(const Corpus& corpus);

// JSONL, one {"id": ..., "caption": ...} object per line.
Corpus load_caption_jsonl(const std::filesystem::path& path);

// Built-in stopword list (common English function words plus punctuation
// tokens); replaceable via a one-word-per-line file.
const std::vector<std::string>& default_stopwords();
std::vector<std::string> load_stopword_file(const std::filesystem::path& path);

}  // namespace radcap

#endif
