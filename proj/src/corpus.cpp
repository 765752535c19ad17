#include "oncosurv/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

#include "oncosurv/errors.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::corpus {

using nlohmann::json;

std::string to_string(NoteType t) {
    switch (t) {
        case NoteType::admission: return "admission";
        case NoteType::progress: return "progress";
        case NoteType::other: return "other";
    }
    return "other";
}

std::optional<NoteType> note_type_from_string(std::string_view s) {
    if (s == "admission") return NoteType::admission;
    if (s == "progress") return NoteType::progress;
    if (s == "other") return NoteType::other;
    return std::nullopt;
}

void CorpusConfig::validate() const {
    if (chunk_size_limit == 0) throw_config("chunk_size_limit must be positive");
    if (chunk_overlap >= chunk_size_limit) throw_config("chunk_overlap must be < chunk_size_limit");
}

namespace {

std::string normalize_line(std::string_view line) {
    std::string out;
    out.reserve(line.size());
    bool pending_space = false;
    for (char c : line) {
        if (c == ' ' || c == '\t' || c == '\v' || c == '\f') {
            if (!out.empty()) pending_space = true;
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += c;
        }
    }
    return out;
}

}  // namespace

std::string preprocess_note(std::string_view raw) {
    // split into lines, tolerating \r\n and \r
    std::vector<std::string> lines;
    std::string current;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '\r') {
            if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
            lines.push_back(std::move(current));
            current.clear();
        } else if (c == '\n') {
            lines.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    lines.push_back(std::move(current));

    for (auto& line : lines) line = normalize_line(line);

    // drop consecutive duplicate lines (covers runs of blank lines too)
    std::vector<std::string> deduped;
    for (auto& line : lines) {
        if (!deduped.empty() && deduped.back() == line) continue;
        deduped.push_back(std::move(line));
    }

    // sections are blank-line separated; drop consecutive duplicate sections
    std::vector<std::vector<std::string>> sections;
    std::vector<std::string> section;
    auto flush_section = [&] {
        if (section.empty()) return;
        if (sections.empty() || sections.back() != section) sections.push_back(section);
        section.clear();
    };
    for (auto& line : deduped) {
        if (line.empty()) flush_section();
        else section.push_back(std::move(line));
    }
    flush_section();

    std::string out;
    for (std::size_t s = 0; s < sections.size(); ++s) {
        if (s > 0) out += "\n\n";
        for (std::size_t l = 0; l < sections[s].size(); ++l) {
            if (l > 0) out += '\n';
            out += sections[s][l];
        }
    }
    if (out.empty()) throw_data("EmptyNote: note is empty after preprocessing");
    return out;
}

std::vector<TokenSpan> token_spans(std::string_view text, TokenizerKind kind) {
    std::vector<TokenSpan> spans;
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    auto is_word = [](unsigned char c) { return std::isalnum(c) != 0 || c == '_' || c >= 0x80; };

    if (kind == TokenizerKind::whitespace) {
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
            if (i >= text.size()) break;
            std::size_t b = i;
            while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
            spans.push_back({b, i});
        }
    } else {
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && !is_word(static_cast<unsigned char>(text[i]))) ++i;
            if (i >= text.size()) break;
            std::size_t b = i;
            while (i < text.size() && is_word(static_cast<unsigned char>(text[i]))) ++i;
            spans.push_back({b, i});
        }
    }
    return spans;
}

std::vector<std::string> tokenize(std::string_view text, TokenizerKind kind) {
    std::vector<std::string> out;
    for (const auto& s : token_spans(text, kind)) {
        out.emplace_back(text.substr(s.begin, s.end - s.begin));
    }
    return out;
}

std::size_t count_tokens(std::string_view text, TokenizerKind kind) { return token_spans(text, kind).size(); }

namespace {

// A cut between tokens i-1 and i is a boundary cut when the gap between them
// contains a newline or sentence-ending punctuation.
bool is_boundary_gap(std::string_view text, const TokenSpan& prev, const TokenSpan& next) {
    for (std::size_t i = prev.end; i < next.begin; ++i) {
        char c = text[i];
        if (c == '\n' || c == '.' || c == '!' || c == '?' || c == ';') return true;
    }
    return false;
}

}  // namespace

std::vector<Chunk> chunk_note(const ClinicalNote& note, const CorpusConfig& cfg) {
    cfg.validate();
    const std::string& text = note.text;
    auto spans = token_spans(text, cfg.tokenizer);
    const std::size_t n = spans.size();
    const std::size_t limit = cfg.chunk_size_limit;

    std::vector<Chunk> chunks;
    if (n <= limit) {
        chunks.push_back({note.note_id, 0, text, n});
        return chunks;
    }

    std::size_t start = 0;  // token index of chunk start
    std::size_t index = 0;
    while (start < n) {
        std::size_t hard_end = std::min(start + limit, n);  // exclusive token index
        std::size_t end = hard_end;
        if (hard_end < n) {
            // prefer a sentence/section boundary in the last quarter of the window
            std::size_t lowest = hard_end - std::min(hard_end - start - 1, limit / 4);
            for (std::size_t cut = hard_end; cut > lowest; --cut) {
                if (is_boundary_gap(text, spans[cut - 1], spans[cut])) {
                    end = cut;
                    break;
                }
            }
        }

        std::size_t byte_begin = (index == 0) ? 0 : spans[start].begin;
        std::size_t byte_end = (end == n) ? text.size() : spans[end].begin;
        chunks.push_back({note.note_id, index, text.substr(byte_begin, byte_end - byte_begin), end - start});
        ++index;

        if (end == n) break;
        std::size_t next = (end > cfg.chunk_overlap) ? end - cfg.chunk_overlap : 0;
        if (next <= start) next = start + 1;  // progress guarantee
        start = next;
    }
    return chunks;
}

LoadReport load_corpus_jsonl(const std::string& path, bool lenient) {
    std::ifstream in(path);
    if (!in) throw_data("cannot open corpus file: " + path);

    LoadReport report;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& reason) {
        std::string msg = "line " + std::to_string(line_no) + ": " + reason;
        if (lenient) report.skipped.push_back(msg);
        else throw_data("corpus " + path + ", " + msg);
    };

    static const std::vector<std::string> required = {"patient_id", "note_id", "note_date", "note_type", "text"};

    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            fail("invalid JSON object");
            continue;
        }
        bool ok = true;
        for (const auto& key : required) {
            if (!j.contains(key) || !j[key].is_string()) {
                fail("missing or non-string field '" + key + "'");
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (std::find(required.begin(), required.end(), it.key()) == required.end()) {
                fail("unknown field '" + it.key() + "'");
                ok = false;
                break;
            }
        }
        if (!ok) continue;

        auto type = note_type_from_string(j["note_type"].get<std::string>());
        if (!type) {
            fail("invalid note_type '" + j["note_type"].get<std::string>() + "'");
            continue;
        }
        if (!util::parse_date(j["note_date"].get<std::string>())) {
            fail("invalid note_date '" + j["note_date"].get<std::string>() + "'");
            continue;
        }
        ClinicalNote note{j["patient_id"].get<std::string>(), j["note_id"].get<std::string>(),
                          j["note_date"].get<std::string>(), *type, j["text"].get<std::string>()};
        if (note.note_id.empty()) {
            fail("empty note_id");
            continue;
        }
        report.notes.push_back(std::move(note));
    }

    // note_id must be unique within a corpus
    std::vector<std::string> ids;
    ids.reserve(report.notes.size());
    for (const auto& n : report.notes) ids.push_back(n.note_id);
    std::sort(ids.begin(), ids.end());
    auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end()) throw_data("duplicate note_id in corpus: " + *dup);

    return report;
}

}  // namespace oncosurv::corpus
