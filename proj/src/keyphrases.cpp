#include "vesper/keyphrases.hpp"

#include "vesper/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <ostream>

namespace vesper {

const std::set<std::string, std::less<>>& english_stopwords() {
    static const std::set<std::string, std::less<>> words = {
    "a", "about", "above", "across", "after", "afterwards", "again", "against", "all", "almost",
    "alone", "along", "already", "also", "although", "always", "am", "among", "amongst", "amoungst",
    "amount", "an", "and", "another", "any", "anyhow", "anyone", "anything", "anyway", "anywhere",
    "are", "around", "as", "at", "back", "be", "became", "because", "become", "becomes", "becoming",
    "been", "before", "beforehand", "behind", "being", "below", "beside", "besides", "between",
    "beyond", "bill", "both", "bottom", "but", "by", "call", "can", "cannot", "cant", "co", "con",
    "could", "couldnt", "cry", "de", "describe", "detail", "do", "done", "down", "due", "during",
    "each", "eg", "eight", "either", "eleven", "else", "elsewhere", "empty", "enough", "etc",
    "even", "ever", "every", "everyone", "everything", "everywhere", "except", "few", "fifteen",
    "fifty", "fill", "find", "fire", "first", "five", "for", "former", "formerly", "forty", "found",
    "four", "from", "front", "full", "further", "get", "give", "go", "had", "has", "hasnt", "have",
    "he", "hence", "her", "here", "hereafter", "hereby", "herein", "hereupon", "hers", "herself",
    "him", "himself", "his", "how", "however", "hundred", "i", "ie", "if", "in", "inc", "indeed",
    "interest", "into", "is", "it", "its", "itself", "keep", "last", "latter", "latterly", "least",
    "less", "ltd", "made", "many", "may", "me", "meanwhile", "might", "mill", "mine", "more",
    "moreover", "most", "mostly", "move", "much", "must", "my", "myself", "name", "namely",
    "neither", "never", "nevertheless", "next", "nine", "no", "nobody", "none", "noone", "nor",
    "not", "nothing", "now", "nowhere", "of", "off", "often", "on", "once", "one", "only", "onto",
    "or", "other", "others", "otherwise", "our", "ours", "ourselves", "out", "over", "own", "part",
    "per", "perhaps", "please", "put", "rather", "re", "same", "see", "seem", "seemed", "seeming",
    "seems", "serious", "several", "she", "should", "show", "side", "since", "sincere", "six",
    "sixty", "so", "some", "somehow", "someone", "something", "sometime", "sometimes", "somewhere",
    "still", "such", "system", "take", "ten", "than", "that", "the", "their", "them", "themselves",
    "then", "thence", "there", "thereafter", "thereby", "therefore", "therein", "thereupon",
    "these", "they", "thick", "thin", "third", "this", "those", "though", "three", "through",
    "throughout", "thru", "thus", "to", "together", "too", "top", "toward", "towards", "twelve",
    "twenty", "two", "un", "under", "until", "up", "upon", "us", "very", "via", "was", "we", "well",
    "were", "what", "whatever", "when", "whence", "whenever", "where", "whereafter", "whereas",
    "whereby", "wherein", "whereupon", "wherever", "whether", "which", "while", "whither", "who",
    "whoever", "whole", "whom", "whose", "why", "will", "with", "within", "without", "would", "yet",
    "you", "your", "yours", "yourself", "yourselves",
    };
    return words;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<Candidate> candidates(const std::vector<std::string>& texts, const CandidateOptions& opt,
                                  const std::set<std::string, std::less<>>& stopwords) {
    if (opt.ngram_min < 1 || opt.ngram_max < opt.ngram_min) throw ConfigError("invalid n-gram range");
    if (opt.min_df < 1) throw ConfigError("min_df must be >= 1");
    std::map<std::string, int> df;
    for (const auto& text : texts) {
        const auto tokens = tokenize(text);
        std::set<std::string> seen;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            std::string phrase;
            for (int n = 1; n <= opt.ngram_max && i + static_cast<std::size_t>(n) <= tokens.size(); ++n) {
                const auto& tok = tokens[i + static_cast<std::size_t>(n) - 1];
                if (stopwords.count(tok)) break;
                if (n > 1) phrase += ' ';
                phrase += tok;
                if (n >= opt.ngram_min) seen.insert(phrase);
            }
        }
        for (const auto& p : seen) ++df[p];
    }
    std::vector<Candidate> out;
    for (const auto& [p, n] : df) {
        if (n >= opt.min_df) out.push_back({p, n});
    }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.df > b.df; });
    if (out.size() > opt.top) out.resize(opt.top);
    return out;
}

KeyphraseSet rank(int cluster, const std::vector<std::string>& phrases, const Matrix& emb,
                  std::span<const double> centroid, std::size_t k, double lambda) {
    if (emb.rows != phrases.size()) throw DataError("keyphrases: one embedding per candidate required");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("MMR lambda must lie in [0, 1]");
    const std::size_t n = phrases.size();
    std::vector<double> rel(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(emb.row(i).begin(), emb.row(i).end());
        const double c = cosine(std::span<const double>(v), centroid);
        rel[i] = std::isnan(c) ? 0.0 : c;
    }
    std::vector<double> max_sim(n, -std::numeric_limits<double>::infinity());
    std::vector<bool> taken(n, false);
    KeyphraseSet out{cluster, {}};
    for (std::size_t step = 0; step < std::min(k, n); ++step) {
        std::size_t best = n;
        double best_score = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            const double s = step == 0 ? lambda * rel[i] : lambda * rel[i] - (1.0 - lambda) * max_sim[i];
            if (best == n || s > best_score || (s == best_score && phrases[i] < phrases[best])) {
                best = i;
                best_score = s;
            }
        }
        taken[best] = true;
        out.phrases.push_back({phrases[best], rel[best]});
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            const double c = cosine(emb.row(i), emb.row(best));
            max_sim[i] = std::max(max_sim[i], std::isnan(c) ? 0.0 : c);
        }
    }
    return out;
}

void write_keyphrases_csv(std::ostream& out, const std::vector<KeyphraseRow>& rows) {
    out << "year,cluster_id,rank,phrase,score\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.set.phrases.size(); ++i) {
            out << r.year << ',' << r.set.cluster << ',' << i + 1 << ',' << csv_field(r.set.phrases[i].phrase) << ','
                << format_float(r.set.phrases[i].score) << '\n';
        }
    }
}

}  // namespace vesper
