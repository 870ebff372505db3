#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "radcap/csv.hpp"
#include "radcap/metrics.hpp"
#include "radcap/text.hpp"

using namespace radcap;

namespace {

// Provider with hand-specified vectors per token; unknown tokens get zero.
class StubProvider : public EmbeddingProvider {
public:
    std::map<std::string, Vector> table;
    int dim_ = 3;
    int dim() const override { return dim_; }
    std::vector<Vector> embed(const std::vector<std::string>& tokens) const override {
        std::vector<Vector> out;
        for (const auto& t : tokens) {
            auto it = table.find(t);
            out.push_back(it == table.end() ? Vector(dim_) : it->second);
        }
        return out;
    }
};

double local_cos(const Vector& a, const Vector& b) {
    double dot = 0, na = 0, nb = 0;
    for (int i = 0; i < a.dim(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("bertscore of identical sentences is exactly one") {
    HashEmbeddingProvider provider;
    for (const char* text : {"chest x-ray", "ct scan of the abdomen showing lesion", "a"}) {
        BertScore s = bertscore(text, text, provider);
        CHECK(s.precision == 1.0);
        CHECK(s.recall == 1.0);
        CHECK(s.f1 == 1.0);
        CHECK_FALSE(s.degenerate);
    }
}

TEST_CASE("bertscore with orthogonal embeddings is zero") {
    StubProvider provider;
    provider.table["aa"] = Vector{1.0, 0.0, 0.0};
    provider.table["bb"] = Vector{0.0, 1.0, 0.0};
    BertScore s = bertscore("aa aa", "bb bb", provider);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
}

TEST_CASE("bertscore 2x3-token case matches the nested-loop max oracle") {
    StubProvider provider;
    provider.table["p1"] = Vector{1.0, 0.2, 0.0};
    provider.table["p2"] = Vector{0.1, 0.9, 0.3};
    provider.table["r1"] = Vector{0.8, 0.1, 0.1};
    provider.table["r2"] = Vector{0.0, 1.0, 0.0};
    provider.table["r3"] = Vector{0.3, 0.3, 0.9};

    BertScore s = bertscore("p1 p2", "r1 r2 r3", provider);

    const std::vector<Vector> cand = provider.embed({"p1", "p2"});
    const std::vector<Vector> ref = provider.embed({"r1", "r2", "r3"});
    double recall = 0.0;
    for (const auto& rv : ref) {
        double best = -1.0;
        for (const auto& cv : cand) best = std::max(best, local_cos(rv, cv));
        recall += best;
    }
    recall /= 3.0;
    double precision = 0.0;
    for (const auto& cv : cand) {
        double best = -1.0;
        for (const auto& rv : ref) best = std::max(best, local_cos(cv, rv));
        precision += best;
    }
    precision /= 2.0;
    const double f = 2.0 * precision * recall / (precision + recall);

    CHECK(std::abs(s.precision - precision) < 1e-12);
    CHECK(std::abs(s.recall - recall) < 1e-12);
    CHECK(std::abs(s.f1 - f) < 1e-12);
}

TEST_CASE("bertscore flags empty tokenizations") {
    HashEmbeddingProvider provider;
    BertScore s = bertscore("", "chest x-ray", provider);
    CHECK(s.degenerate);
    CHECK(s.f1 == 0.0);
    s = bertscore("chest", "   ", provider);
    CHECK(s.degenerate);
}

TEST_CASE("bertscore swap exchanges precision and recall exactly") {
    HashEmbeddingProvider provider;
    const std::string a = "chest x-ray showing effusion";
    const std::string b = "lateral chest radiograph";
    BertScore ab = bertscore(a, b, provider);
    BertScore ba = bertscore(b, a, provider);
    CHECK(ab.precision == ba.recall);
    CHECK(ab.recall == ba.precision);
    CHECK(ab.f1 == ba.f1);
}

TEST_CASE("bleu1 identity and disjoint cases") {
    CHECK(bleu1("the cat", "the cat") == 1.0);
    CHECK(bleu1("dog", "the cat") == 0.0);
    CHECK(bleu1("", "the cat") == 0.0);
    CHECK_THROWS_AS(bleu1("the cat", "  "), std::invalid_argument);
}

TEST_CASE("bleu1 hand case: clipped precision without brevity penalty") {
    // candidate longer than reference, so BP = 1
    CHECK(std::abs(bleu1("the cat sat", "the cat") - 2.0 / 3.0) < 1e-9);
    CHECK(bleu1("the cat sat", "the cat") == doctest::Approx(0.6667).epsilon(1e-4));
}

TEST_CASE("bleu1 applies the brevity penalty when the candidate is short") {
    // c=1, r=2: BP = exp(1 - 2) = e^-1, precision = 1
    CHECK(std::abs(bleu1("the", "the cat") - std::exp(-1.0)) < 1e-12);
}

TEST_CASE("bleu1 clips repeated unigrams") {
    // "the the the" vs "the cat": clipped count 1, precision 1/3
    CHECK(std::abs(bleu1("the the the", "the cat") - 1.0 / 3.0) < 1e-12);
}

TEST_CASE("rouge1 identity, disjoint and hand cases") {
    CHECK(rouge1_f("a b", "a b") == 1.0);
    CHECK(rouge1_f("c d", "a b") == 0.0);
    CHECK(rouge1_f("", "") == 0.0);
    // P = 2/4, R = 2/2, F1 = 2*(0.5*1)/1.5
    CHECK(std::abs(rouge1_f("a b c d", "a b") - 2.0 / 3.0) < 1e-9);
}

TEST_CASE("unigram metrics depend only on the token multiset") {
    const std::string cand = "left lower lobe opacity with effusion";
    const std::string ref = "opacity in the left lobe";
    const std::string cand_perm = "effusion with opacity lobe lower left";
    const std::string ref_perm = "lobe left the in opacity";
    CHECK(bleu1(cand, ref) == bleu1(cand_perm, ref_perm));
    CHECK(rouge1_f(cand, ref) == rouge1_f(cand_perm, ref_perm));
}

TEST_CASE("cider self-match attains the maximum per present n-gram order") {
    const std::vector<std::string> refs = {"a b c", "d e f g"};
    std::vector<double> scores = cider(refs, refs);
    // 3-token sentence has n-grams for n=1..3, none for n=4
    CHECK(std::abs(scores[0] - 10.0 * 3.0 / 4.0) < 1e-9);
    // 4-token sentence has all four orders
    CHECK(std::abs(scores[1] - 10.0) < 1e-9);
}

TEST_CASE("cider of disjoint sentences is zero") {
    std::vector<double> scores = cider({"x y z"}, {"a b c"});
    CHECK(scores[0] == 0.0);
}

TEST_CASE("cider matches a hand-computed two-document tf-idf oracle") {
    const std::vector<std::string> cands = {"a b c", "a d"};
    const std::vector<std::string> refs = {"a b d", "c d"};

    // independent oracle: explicit tf-idf vectors and cosines per n
    auto oracle = [&](const std::string& cand, const std::string& ref) {
        const auto ct = tokenize_metric(cand);
        const auto rt = tokenize_metric(ref);
        double total = 0.0;
        for (int n = 1; n <= 4; ++n) {
            auto grams = [&](const std::vector<std::string>& toks) {
                std::map<std::vector<std::string>, double> counts;
                for (size_t i = 0; i + n <= toks.size(); ++i)
                    counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)] += 1.0;
                return counts;
            };
            auto cg = grams(ct), rg = grams(rt);
            // document frequency over the two references
            auto df_of = [&](const std::vector<std::string>& g) {
                double df = 0.0;
                for (const auto& r : refs) {
                    auto toks = tokenize_metric(r);
                    auto rgrams = grams(toks);
                    if (rgrams.count(g)) df += 1.0;
                }
                return std::max(1.0, df);
            };
            double dot = 0, nc = 0, nr = 0;
            for (auto& [g, c] : cg) {
                const double w = c * std::log(2.0 / df_of(g));
                nc += w * w;
                if (rg.count(g)) dot += w * rg[g] * std::log(2.0 / df_of(g));
            }
            for (auto& [g, c] : rg) {
                const double w = c * std::log(2.0 / df_of(g));
                nr += w * w;
            }
            if (nc > 0 && nr > 0) total += dot / (std::sqrt(nc) * std::sqrt(nr));
        }
        return 10.0 * total / 4.0;
    };

    std::vector<double> scores = cider(cands, refs);
    CHECK(std::abs(scores[0] - oracle(cands[0], refs[0])) < 1e-9);
    CHECK(std::abs(scores[1] - oracle(cands[1], refs[1])) < 1e-9);
}

TEST_CASE("cider rejects mismatched list lengths") {
    CHECK_THROWS_AS(cider({"a"}, {"a", "b"}), std::invalid_argument);
}

TEST_CASE("cider self-match dominates any other candidate") {
    const std::vector<std::string> refs = {"chest x-ray normal", "ct scan of abdomen",
                                           "mri of the brain"};
    std::vector<double> self_scores = cider(refs, refs);
    const std::vector<std::string> other = {"ct scan of abdomen", "mri of the brain",
                                            "chest x-ray normal"};
    std::vector<double> other_scores = cider(other, refs);
    for (size_t i = 0; i < refs.size(); ++i) CHECK(self_scores[i] >= other_scores[i]);
}

TEST_CASE("default provider is deterministic and weakly contextual") {
    HashEmbeddingProvider provider;
    const auto tokens = tokenize_metric("chest x-ray showing pleural effusion");
    const auto a = provider.embed(tokens);
    const auto b = provider.embed(tokens);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    // same token in different contexts embeds differently (context window)
    const auto c1 = provider.embed({"left", "chest", "pain"});
    const auto c2 = provider.embed({"right", "chest", "wall"});
    CHECK(c1[1].data != c2[1].data);

    // unit norm after normalization
    double norm2 = 0.0;
    for (int k = 0; k < provider.dim(); ++k) norm2 += a[0][k] * a[0][k];
    CHECK(std::abs(norm2 - 1.0) < 1e-12);
}

TEST_CASE("metric outputs stay in range on random sentences") {
    HashEmbeddingProvider provider;
    std::mt19937_64 rng(1312);
    const std::vector<std::string> words = {"chest", "ct",   "scan", "left",  "right", "showing",
                                            "mass",  "cyst", "bone", "tissue", "axial", "contrast"};
    auto sentence = [&](int len) {
        std::string s;
        for (int i = 0; i < len; ++i) {
            if (i) s += ' ';
            s += words[rng() % words.size()];
        }
        return s;
    };
    std::vector<std::string> cands, refs;
    for (int i = 0; i < 12; ++i) {
        cands.push_back(sentence(1 + static_cast<int>(rng() % 10)));
        refs.push_back(sentence(1 + static_cast<int>(rng() % 10)));
    }
    std::vector<double> cider_scores = cider(cands, refs);
    for (size_t i = 0; i < cands.size(); ++i) {
        const double b = bleu1(cands[i], refs[i]);
        const double r = rouge1_f(cands[i], refs[i]);
        const BertScore bs = bertscore(cands[i], refs[i], provider);
        CHECK(b >= 0.0);
        CHECK(b <= 1.0);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
        CHECK(bs.f1 >= 0.0);
        CHECK(bs.f1 <= 1.0);
        CHECK(cider_scores[i] >= 0.0);
        CHECK(cider_scores[i] <= 10.0);
    }
}

TEST_CASE("evaluate_files scores a perfect prediction file at one") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto pred = dir / "radcap_test_pred.csv";
    const auto gold = dir / "radcap_test_gold.csv";
    const std::string content =
        "ID,caption\nimg1,chest x-ray\nimg2,\"ct scan, axial view\"\nimg3,mri of the brain\n";
    write_file(pred, content);
    write_file(gold, content);

    HashEmbeddingProvider provider;
    ScoreReport report = evaluate_files(pred, gold, provider, LengthGroups{});
    CHECK(report.total == 3);
    CHECK(report.corpus_means.bleu1 == 1.0);
    CHECK(report.corpus_means.rouge1_f == 1.0);
    CHECK(report.corpus_means.bert_f == 1.0);
    std::filesystem::remove(pred);
    std::filesystem::remove(gold);
}

TEST_CASE("evaluate_files single sample mean equals the sample score") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto pred = dir / "radcap_test_pred1.csv";
    const auto gold = dir / "radcap_test_gold1.csv";
    write_file(pred, "ID,caption\nonly,chest scan\n");
    write_file(gold, "ID,caption\nonly,chest x-ray scan\n");
    HashEmbeddingProvider provider;
    ScoreReport report = evaluate_files(pred, gold, provider, LengthGroups{});
    REQUIRE(report.samples.size() == 1);
    CHECK(report.corpus_means.bleu1 == report.samples[0].bleu1);
    CHECK(report.corpus_means.cider == report.samples[0].cider);
    std::filesystem::remove(pred);
    std::filesystem::remove(gold);
}

TEST_CASE("evaluate_files groups by reference length and matches a regroup oracle") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto pred = dir / "radcap_test_predg.csv";
    const auto gold = dir / "radcap_test_goldg.csv";

    auto caption_of_len = [](int n) {
        std::string s;
        for (int i = 0; i < n; ++i) {
            if (i) s += ' ';
            s += "w" + std::to_string(i);
        }
        return s;
    };
    // reference lengths spanning all four groups: 3, 20, 21, 25, 28, 40
    const std::vector<int> lens = {3, 20, 21, 25, 28, 40};
    std::string gold_text = "ID,caption\n";
    std::string pred_text = "ID,caption\n";
    for (size_t i = 0; i < lens.size(); ++i) {
        gold_text += "id" + std::to_string(i) + "," + caption_of_len(lens[i]) + "\n";
        pred_text += "id" + std::to_string(i) + "," + caption_of_len(std::max(1, lens[i] - 2)) + "\n";
    }
    write_file(pred, pred_text);
    write_file(gold, gold_text);

    HashEmbeddingProvider provider;
    LengthGroups groups;
    ScoreReport report = evaluate_files(pred, gold, provider, groups);
    REQUIRE(report.groups.size() == 4);
    CHECK(report.groups[0].count == 2);  // 3, 20
    CHECK(report.groups[1].count == 2);  // 21, 25
    CHECK(report.groups[2].count == 1);  // 28
    CHECK(report.groups[3].count == 1);  // 40

    int64_t total_from_groups = 0;
    for (const auto& g : report.groups) total_from_groups += g.count;
    CHECK(total_from_groups == report.total);

    // independent regrouping: recompute each group mean from per-sample rows
    for (int g = 0; g < 4; ++g) {
        double sum = 0.0;
        int64_t count = 0;
        for (const auto& s : report.samples) {
            if (classify_length(s.ref_len, groups) == g) {
                sum += s.bleu1;
                ++count;
            }
        }
        CHECK(count == report.groups[static_cast<size_t>(g)].count);
        if (count > 0)
            CHECK(std::abs(report.groups[static_cast<size_t>(g)].means.bleu1 -
                           sum / static_cast<double>(count)) < 1e-12);
    }
    std::filesystem::remove(pred);
    std::filesystem::remove(gold);
}

TEST_CASE("evaluate_files rejects bad inputs") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto pred = dir / "radcap_test_predbad.csv";
    const auto gold = dir / "radcap_test_goldbad.csv";
    HashEmbeddingProvider provider;

    write_file(pred, "ID,caption\nmissing_id,chest\n");
    write_file(gold, "ID,caption\nother,chest\n");
    CHECK_THROWS_WITH_AS(evaluate_files(pred, gold, provider, LengthGroups{}),
                         doctest::Contains("missing_id"), std::runtime_error);

    write_file(pred, "ID,caption\ndup,chest\ndup,chest\n");
    write_file(gold, "ID,caption\ndup,chest\n");
    CHECK_THROWS_WITH_AS(evaluate_files(pred, gold, provider, LengthGroups{}),
                         doctest::Contains("duplicate"), std::runtime_error);

    write_file(pred, "wrong,header\n");
    CHECK_THROWS_AS(evaluate_files(pred, gold, provider, LengthGroups{}), std::runtime_error);

    std::filesystem::remove(pred);
    std::filesystem::remove(gold);
}

TEST_CASE("score report json exposes unavailable metrics and stable fields") {
    ScoreReport report;
    report.total = 0;
    const std::string json = score_report_json(report);
    CHECK(json.find("BLEURT") != std::string::npos);
    CHECK(json.find("MedBERTScore") != std::string::npos);
    CHECK(json.find("corpus") != std::string::npos);
}

TEST_CASE("csv reader handles rfc4180 quoting") {
    const auto path = std::filesystem::temp_directory_path() / "radcap_test_quotes.csv";
    write_file(path, "ID,caption\na,\"one, two\"\nb,\"say \"\"hi\"\"\"\nc,\"line\nbreak\"\n");
    auto rows = read_csv(path);
    REQUIRE(rows.size() == 4);
    CHECK(rows[1][1] == "one, two");
    CHECK(rows[2][1] == "say \"hi\"");
    CHECK(rows[3][1] == "line\nbreak");
    std::filesystem::remove(path);
}

}  // TEST_SUITE
