#ifndef RADCAP_TEXT_HPP
#define RADCAP_TEXT_HPP

#include <string>
#include <unordered_map>
#include <vector>

namespace radcap {

// Model-side tokenizer: lowercase, split on whitespace.
std::vector<std::string> tokenize_simple(const std::string& text);

// Metric/corpus tokenizer: lowercase, alphanumeric runs are tokens, every
// punctuation character is its own token. Shared by the evaluation suite
// and the corpus statistics so lengths mean the same thing everywhere.
std::vector<std::string> tokenize_metric(const std::string& text);

std::string to_lower(const std::string& s);
std::string trim(const std::string& s);

// token <-> id maps with reserved PAD/BOS/EOS/UNK ids.
class Vocabulary {
public:
    static constexpr int PAD = 0;
    static constexpr int BOS = 1;
    static constexpr int EOS = 2;
    static constexpr int UNK = 3;

    Vocabulary();

    // Tokens ordered by descending frequency, ties alphabetical.
    static Vocabulary build(const std::vector<std::string>& captions, int max_size = 0);

    // Rebuild from the non-reserved token list (checkpoint loading).
    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

    int id(const std::string& token) const;  // UNK when absent
    const std::string& token(int id) const;  // throws on out-of-range id
    int size() const { return static_cast<int>(id_to_token_.size()); }

    // Non-reserved tokens in id order, for serialization.
    std::vector<std::string> tokens() const;

    std::vector<int> encode(const std::string& caption) const;
    std::string decode(const std::vector<int>& ids) const;  // skips reserved ids

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;

    void add_token(const std::string& tok);
};

}  // namespace radcap

#endif
