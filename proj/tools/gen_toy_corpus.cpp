// Writes the toy corpus used by the end-to-end tests: short encyclopedia-style
// documents drawn from nine topics grouped into three domains.
//
//   gen_toy_corpus [--docs N] [--seed S] > toy_corpus.jsonl

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "textpsy/util/rng.hpp"

namespace {

struct Word {
    const char* lemma;
    const char* inflected;  // nullptr: no variant
};

using Topic = std::vector<Word>;

// domains[d][t] is one topic's vocabulary.
const std::array<std::array<Topic, 3>, 3>& domains() {
    static const std::array<std::array<Topic, 3>, 3> d{{
        {{
            {{"star", "stars"}, {"planet", "planets"}, {"galaxy", "galaxies"}, {"orbit", "orbits"}, {"telescope", "telescopes"}, {"comet", "comets"}},
            {{"acid", "acids"}, {"sulfur", nullptr}, {"zinc", nullptr}, {"chloride", "chlorides"}, {"nitrogen", nullptr}, {"oxide", "oxides"}},
            {{"energy", "energies"}, {"force", "forces"}, {"pressure", "pressures"}, {"wave", "waves"}, {"particle", "particles"}, {"velocity", "velocities"}},
        }},
        {{
            {{"gene", "genes"}, {"protein", "proteins"}, {"rna", nullptr}, {"dna", nullptr}, {"genome", "genomes"}, {"mutation", "mutations"}},
            {{"patient", "patients"}, {"drug", "drugs"}, {"therapy", "therapies"}, {"dose", "doses"}, {"disease", "diseases"}, {"tumor", "tumors"}},
            {{"plant", "plants"}, {"soil", nullptr}, {"fungus", "fungi"}, {"alga", "algae"}, {"species", nullptr}, {"forest", "forests"}},
        }},
        {{
            {{"software", nullptr}, {"code", nullptr}, {"program", "programs"}, {"compiler", "compilers"}, {"library", "libraries"}, {"function", "functions"}},
            {{"processor", "processors"}, {"memory", nullptr}, {"chip", "chips"}, {"cpu", nullptr}, {"circuit", "circuits"}, {"storage", nullptr}},
            {{"theorem", "theorems"}, {"proof", "proofs"}, {"algebra", nullptr}, {"matrix", "matrices"}, {"integral", "integrals"}, {"polynomial", "polynomials"}},
        }},
    }};
    return d;
}

const std::vector<std::string> kDeterminers{"the", "a", "this", "each", "every", "its", "their", "one"};
const std::vector<std::string> kAdjectives{"large", "small", "new", "important", "common", "different",
                                           "early", "modern", "simple", "typical", "known", "first"};
const std::vector<std::string> kGenericNouns{"study", "result", "method", "system", "model", "process",
                                             "structure", "property", "example", "research", "number", "type"};
const std::vector<std::string> kVerbs{"describes", "uses", "shows", "contains", "produces", "includes",
                                      "forms", "affects", "was observed in", "is related to", "depends on",
                                      "was measured with"};
const std::vector<std::string> kLinks{"in", "with", "for", "from", "near", "within", "through", "among"};

constexpr double kGeneralSpread = 2.0;
constexpr double kDomainSpread = 2.5;
constexpr double kTopicSpread = 1.5;
constexpr double kTopicRate = 0.1;
constexpr double kMaxTopicShare = 0.95;

class Writer {
public:
    explicit Writer(std::uint64_t seed) : rng_(seed) {}

    std::string pick(const std::vector<std::string>& v) { return v[rng_.below(v.size())]; }

    // Probability that a noun slot draws from each topic; the remaining mass
    // goes to generic nouns. Log-intensities add a document-wide shock, a
    // per-domain shock and a per-topic shock, so topics correlate within a
    // domain and, more weakly, across domains.
    std::vector<double> mixture() {
        std::vector<double> w;
        const double general = kGeneralSpread * rng_.normal();
        for (std::size_t d = 0; d < 3; ++d) {
            const double domain = kDomainSpread * rng_.normal();
            for (std::size_t t = 0; t < 3; ++t)
                w.push_back(2.0 * kTopicRate / (1.0 + std::exp(-(general + domain + kTopicSpread * rng_.normal()))));
        }
        double sum = 0.0;
        for (double x : w) sum += x;
        if (sum > kMaxTopicShare)
            for (auto& x : w) x *= kMaxTopicShare / sum;
        return w;
    }

    std::string content(const std::vector<double>& weights) {
        double u = rng_.uniform();
        std::size_t k = 0;
        while (k < weights.size() && u >= weights[k]) u -= weights[k++];
        if (k == weights.size()) return pick(kGenericNouns);
        const auto& topic = domains()[k / 3][k % 3];
        const auto& w = topic[rng_.below(topic.size())];
        if (w.inflected != nullptr && rng_.uniform() < 0.3) return w.inflected;
        return w.lemma;
    }

    std::string noun_phrase(const std::vector<double>& weights) {
        std::string s = pick(kDeterminers) + " ";
        if (rng_.uniform() < 0.4) s += pick(kAdjectives) + " ";
        return s + content(weights);
    }

    std::string sentence(const std::vector<double>& weights) {
        std::string s = noun_phrase(weights) + " " + pick(kVerbs) + " " + noun_phrase(weights);
        if (rng_.uniform() < 0.6) s += " " + pick(kLinks) + " " + noun_phrase(weights);
        if (rng_.uniform() < 0.3) s += ", and " + noun_phrase(weights);
        s[0] = static_cast<char>(s[0] - 'a' + 'A');
        return s + ".";
    }

    std::string document(std::size_t target_tokens) {
        const auto weights = mixture();
        std::string text;
        std::size_t tokens = 0;
        while (tokens < target_tokens) {
            const auto s = sentence(weights);
            for (char c : s)
                if (c == ' ') ++tokens;
            ++tokens;
            if (!text.empty()) text += ' ';
            text += s;
        }
        return text;
    }

    std::size_t length(std::size_t lo, std::size_t hi) { return lo + rng_.below(hi - lo + 1); }

private:
    textpsy::Rng rng_;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate the toy corpus"};
    std::size_t n_docs = 200;
    std::uint64_t seed = 7;
    app.add_option("--docs", n_docs, "number of documents");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    Writer writer(seed);
    for (std::size_t i = 0; i < n_docs; ++i) {
        // Every 25th document is too short and every 60th too long, so the
        // length filter has something to remove.
        std::size_t target;
        if (i % 25 == 24)
            target = writer.length(15, 40);
        else if (i % 60 == 59)
            target = writer.length(520, 600);
        else
            target = writer.length(120, 380);
        nlohmann::json rec = {{"id", fmt::format("toy{:04}", i + 1)}, {"text", writer.document(target)}};
        std::cout << rec.dump() << '\n';
    }
}
