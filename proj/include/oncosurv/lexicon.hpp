#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace oncosurv::extraction {

// A single pattern hit inside one sentence of a chunk.
struct Evidence {
    std::string field;
    std::string value;     // normalized value; "true" for boolean triggers
    std::string sentence;  // trimmed sentence containing the hit
    bool negated = false;
};

// Sentence boundaries are . ! ? ; and newline, except dots inside numbers.
std::vector<std::string> split_sentences(const std::string& text);

// True when a negation cue precedes match_pos within the sentence.
bool sentence_negated(const std::string& sentence, std::size_t match_pos);

// Field-keyed trigger patterns over note text. The same table backs the
// rule-based extraction baseline and the grounding critic, so a value the
// baseline can produce is by construction a value the critic can verify.
class Lexicon {
public:
    static const Lexicon& instance();
    ~Lexicon();

    Lexicon(const Lexicon&) = delete;
    Lexicon& operator=(const Lexicon&) = delete;

    const std::vector<std::string>& fields() const;
    bool has_field(const std::string& field) const;

    // Every hit for field in text, sentence by sentence, document order.
    std::vector<Evidence> find_values(const std::string& field, const std::string& text) const;

    // True when text carries a non-negated hit whose normalized value equals value.
    bool supports(const std::string& field, const std::string& value, const std::string& text) const;

    // First non-negated hit scanning texts in order.
    std::optional<Evidence> first_evidence(const std::string& field,
                                           const std::vector<std::string>& texts) const;

private:
    Lexicon();
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace oncosurv::extraction
