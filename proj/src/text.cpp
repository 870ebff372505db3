#include "radcap/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

namespace radcap {

std::string to_lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> tokenize_simple(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<std::string> tokenize_metric(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (std::isalnum(c) || c >= 128) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
            out.push_back(std::string(1, static_cast<char>(c)));
        }
    }
    flush();
    return out;
}

Vocabulary::Vocabulary() {
    add_token("<pad>");
    add_token("<bos>");
    add_token("<eos>");
    add_token("<unk>");
}

void Vocabulary::add_token(const std::string& tok) {
    token_to_id_.emplace(tok, static_cast<int>(id_to_token_.size()));
    id_to_token_.push_back(tok);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& captions, int max_size) {
    std::map<std::string, int64_t> counts;  // ordered map keeps ties alphabetical
    for (const auto& cap : captions)
        for (const auto& tok : tokenize_simple(cap)) ++counts[tok];

    std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    Vocabulary v;
    for (const auto& [tok, count] : ranked) {
        (void)count;
        if (max_size > 0 && v.size() - 4 >= max_size) break;  // cap excludes reserved ids
        v.add_token(tok);
    }
    return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    for (const auto& tok : tokens) {
        if (v.token_to_id_.count(tok))
            throw std::invalid_argument("vocabulary token list contains duplicate: " + tok);
        v.add_token(tok);
    }
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? UNK : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("token id out of range: " + std::to_string(id));
    return id_to_token_[static_cast<size_t>(id)];
}

std::vector<std::string> Vocabulary::tokens() const {
    return std::vector<std::string>(id_to_token_.begin() + 4, id_to_token_.end());
}

std::vector<int> Vocabulary::encode(const std::string& caption) const {
    std::vector<int> ids;
    for (const auto& tok : tokenize_simple(caption)) ids.push_back(id(tok));
    return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id < 4) continue;
        if (!out.empty()) out.push_back(' ');
        out += token(id);
    }
    return out;
}

}  // namespace radcap
