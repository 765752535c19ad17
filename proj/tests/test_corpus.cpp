#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "oncosurv/corpus.hpp"
#include "oncosurv/errors.hpp"
#include "oncosurv/util.hpp"

using namespace oncosurv;
using corpus::ClinicalNote;
using corpus::CorpusConfig;

namespace {

ClinicalNote note_with(std::string text) {
    return {"P1", "n1", "2020-01-01", corpus::NoteType::progress, std::move(text)};
}

std::string words(std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += "w" + std::to_string(i);
    }
    return out;
}

}  // namespace

TEST_CASE("preprocess drops consecutive duplicate lines and sections") {
    std::string raw = "HPI: stable\nHPI: stable\nHPI: stable\n\nPlan: continue\n\nPlan: continue\n";
    std::string out = corpus::preprocess_note(raw);
    CHECK(out == "HPI: stable\n\nPlan: continue");
}

TEST_CASE("preprocess normalizes whitespace and is idempotent") {
    std::string raw = "  line   one \t here \r\n\r\n\r\n second   line  ";
    std::string once = corpus::preprocess_note(raw);
    CHECK(once == "line one here\n\nsecond line");
    CHECK(corpus::preprocess_note(once) == once);
}

TEST_CASE("preprocess of blank input raises EmptyNote") {
    CHECK_THROWS_WITH_AS(corpus::preprocess_note("  \n\n \t \n"), doctest::Contains("EmptyNote"), oncosurv::Error);
}

TEST_CASE("ten plain tokens at limit 4 overlap 0 chunk as 4/4/2") {
    CorpusConfig cfg;
    cfg.chunk_size_limit = 4;
    cfg.chunk_overlap = 0;
    auto chunks = corpus::chunk_note(note_with(words(10)), cfg);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].token_count == 4);
    CHECK(chunks[1].token_count == 4);
    CHECK(chunks[2].token_count == 2);
    CHECK(chunks[0].chunk_index == 0);
    CHECK(chunks[2].chunk_index == 2);
}

TEST_CASE("chunk texts concatenate back to the note at overlap 0") {
    CorpusConfig cfg;
    cfg.chunk_size_limit = 7;
    cfg.chunk_overlap = 0;
    std::string text = words(40);
    auto chunks = corpus::chunk_note(note_with(text), cfg);
    std::string glued;
    for (const auto& c : chunks) glued += c.text;
    CHECK(glued == text);
}

TEST_CASE("chunk count matches the sliding-window formula on plain text") {
    // no sentence boundaries, so every window is full width
    util::Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 5 + rng.uniform_int(400);
        std::size_t limit = 2 + rng.uniform_int(20);
        std::size_t overlap = rng.uniform_int(limit);  // < limit
        CorpusConfig cfg;
        cfg.chunk_size_limit = limit;
        cfg.chunk_overlap = overlap;
        auto chunks = corpus::chunk_note(note_with(words(n)), cfg);
        std::size_t expect =
            n <= limit ? 1 : (n - overlap + (limit - overlap) - 1) / (limit - overlap);
        CHECK(chunks.size() == expect);
        for (const auto& c : chunks) CHECK(c.token_count <= limit);
    }
}

TEST_CASE("consecutive chunks share exactly the configured overlap on plain text") {
    CorpusConfig cfg;
    cfg.chunk_size_limit = 10;
    cfg.chunk_overlap = 3;
    auto chunks = corpus::chunk_note(note_with(words(30)), cfg);
    REQUIRE(chunks.size() > 1);
    for (std::size_t i = 1; i < chunks.size(); ++i) {
        auto prev = corpus::tokenize(chunks[i - 1].text, cfg.tokenizer);
        auto cur = corpus::tokenize(chunks[i].text, cfg.tokenizer);
        REQUIRE(prev.size() >= 3);
        REQUIRE(cur.size() >= 3);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(prev[prev.size() - 3 + k] == cur[k]);
        }
    }
}

TEST_CASE("cuts prefer sentence boundaries near the window end") {
    CorpusConfig cfg;
    cfg.chunk_size_limit = 10;
    cfg.chunk_overlap = 0;
    // sentence break after 9 tokens falls inside the window's last quarter
    std::string text = words(9) + ". " + words(12);
    auto chunks = corpus::chunk_note(note_with(text), cfg);
    REQUIRE(chunks.size() >= 2);
    CHECK(chunks[0].token_count == 9);
}

TEST_CASE("short note is a single chunk with the full text") {
    CorpusConfig cfg;
    auto chunks = corpus::chunk_note(note_with("brief visit note"), cfg);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].text == "brief visit note");
    CHECK(chunks[0].token_count == 3);
    CHECK(chunks[0].note_id == "n1");
}

TEST_CASE("overlap >= limit is a config error") {
    CorpusConfig cfg;
    cfg.chunk_size_limit = 8;
    cfg.chunk_overlap = 8;
    CHECK_THROWS_AS(corpus::chunk_note(note_with(words(20)), cfg), oncosurv::Error);
}

TEST_CASE("tokenizers split words and count them") {
    CHECK(corpus::count_tokens("ER: positive. PR: negative.", corpus::TokenizerKind::unicode_word) == 4);
    CHECK(corpus::count_tokens("ER: positive. PR: negative.", corpus::TokenizerKind::whitespace) == 4);
    auto toks = corpus::tokenize("T2 N1 M0, grade 3", corpus::TokenizerKind::unicode_word);
    REQUIRE(toks.size() == 5);
    CHECK(toks[0] == "T2");
    CHECK(toks[3] == "grade");
}

TEST_CASE("corpus jsonl round trip with strict and lenient modes") {
    std::string path = "test_corpus_tmp.jsonl";
    {
        std::ofstream out(path);
        out << R"({"patient_id":"P1","note_id":"n1","note_date":"2020-01-01","note_type":"admission","text":"first note"})"
            << "\n";
        out << "not json\n";
        out << R"({"patient_id":"P2","note_id":"n2","note_date":"2020-02-01","note_type":"progress","text":"second note"})"
            << "\n";
    }
    CHECK_THROWS_AS(corpus::load_corpus_jsonl(path, false), oncosurv::Error);
    auto report = corpus::load_corpus_jsonl(path, true);
    REQUIRE(report.notes.size() == 2);
    CHECK(report.skipped.size() == 1);
    CHECK(report.skipped[0].find("line 2") != std::string::npos);
    CHECK(report.notes[0].patient_id == "P1");
    CHECK(report.notes[1].note_type == corpus::NoteType::progress);
    std::remove(path.c_str());
}

TEST_CASE("duplicate note ids are rejected") {
    std::string path = "test_corpus_dup.jsonl";
    {
        std::ofstream out(path);
        for (int i = 0; i < 2; ++i)
            out << R"({"patient_id":"P1","note_id":"n1","note_date":"2020-01-01","note_type":"other","text":"x"})"
                << "\n";
    }
    CHECK_THROWS_WITH_AS(corpus::load_corpus_jsonl(path, false), doctest::Contains("duplicate"), oncosurv::Error);
    std::remove(path.c_str());
}
