#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oncosurv::corpus {

enum class NoteType { admission, progress, other };

std::string to_string(NoteType t);
std::optional<NoteType> note_type_from_string(std::string_view s);

struct ClinicalNote {
    std::string patient_id;
    std::string note_id;
    std::string note_date;  // ISO-8601 YYYY-MM-DD
    NoteType note_type = NoteType::other;
    std::string text;
};

enum class TokenizerKind { whitespace, unicode_word };

struct CorpusConfig {
    std::size_t chunk_size_limit = 2500;  // tokens
    std::size_t chunk_overlap = 128;      // tokens, must be < chunk_size_limit
    TokenizerKind tokenizer = TokenizerKind::unicode_word;

    void validate() const;  // throws config error on violation
};

struct Chunk {
    std::string note_id;
    std::size_t chunk_index = 0;
    std::string text;
    std::size_t token_count = 0;
};

// Normalizes whitespace, drops consecutive duplicate lines and consecutive
// duplicate blank-line-separated sections; newlines mark section boundaries.
// Throws a data error ("EmptyNote") if nothing remains.
std::string preprocess_note(std::string_view raw);

struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // byte offsets, [begin, end)
};

std::vector<TokenSpan> token_spans(std::string_view text, TokenizerKind kind);
std::vector<std::string> tokenize(std::string_view text, TokenizerKind kind);
std::size_t count_tokens(std::string_view text, TokenizerKind kind);

// Splits a preprocessed note into chunks of at most cfg.chunk_size_limit
// tokens; consecutive chunks share cfg.chunk_overlap tokens. Cut positions
// prefer sentence/section boundaries near the window end. With overlap 0 the
// chunk texts concatenate back to the note text exactly.
std::vector<Chunk> chunk_note(const ClinicalNote& note, const CorpusConfig& cfg);

struct LoadReport {
    std::vector<ClinicalNote> notes;
    std::vector<std::string> skipped;  // "line N: reason", only populated in lenient mode
};

// Corpus JSONL: one note per line with fields exactly
// {patient_id, note_id, note_date, note_type, text}. Invalid lines are fatal
// unless lenient, in which case they are reported in LoadReport::skipped.
LoadReport load_corpus_jsonl(const std::string& path, bool lenient);

}  // namespace oncosurv::corpus
