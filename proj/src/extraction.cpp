#include "oncosurv/extraction.hpp"

#include <algorithm>
#include <cstdlib>
#include <unordered_set>

#include "oncosurv/csv.hpp"
#include "oncosurv/errors.hpp"
#include "oncosurv/lexicon.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::extraction {

using nlohmann::json;

std::vector<Exemplar> load_exemplars(const std::string& path, Target target) {
    json j = json::parse(util::read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw_data("exemplar file '" + path + "' must be a JSON array");
    std::vector<Exemplar> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& e = j[i];
        if (!e.is_object() || !e.contains("excerpt") || !e.contains("output") || !e["excerpt"].is_string() ||
            !e["output"].is_object()) {
            throw_data("exemplar " + std::to_string(i) + " in '" + path +
                       "' must be {\"excerpt\": string, \"output\": object}");
        }
        Exemplar ex{e["excerpt"].get<std::string>(), e["output"].dump(2)};
        auto parsed = parse_and_validate(ex.gold_json, schema_id(target));
        if (!parsed.schema_ok) {
            std::string reason = parsed.violations.empty() ? "invalid" : parsed.violations.front().field + ": " +
                                                                             parsed.violations.front().reason;
            throw_data("exemplar " + std::to_string(i) + " in '" + path + "' fails the " + to_string(target) +
                       " schema (" + reason + ")");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

ExtractionRequest make_request(Target target, std::vector<retrieval::ScoredChunk> chunks,
                               std::vector<Exemplar> shots) {
    ExtractionRequest req;
    req.target = target;
    req.chunks = std::move(chunks);
    req.shots = std::move(shots);
    req.schema_id = schema_id(target);
    return req;
}

std::string chunk_ref(const corpus::Chunk& chunk) {
    return chunk.note_id + "#" + std::to_string(chunk.chunk_index);
}

namespace {

std::string render_prompt(const ExtractionRequest& req, std::size_t n_chunks, const Corrective* corrective) {
    std::string out;
    out += "Extract a structured " + to_string(req.target) +
           " record from the clinical note excerpts below.\n"
           "Report only facts stated in the excerpts. Anything the excerpts do not state must be null, false, or "
           "unknown.\n\n";
    out += "Schema-Id: " + req.schema_id + "\n";
    out += "Schema:\n" + schema_text(req.target) + "\n\n";
    for (std::size_t i = 0; i < req.shots.size(); ++i) {
        out += "Example " + std::to_string(i + 1) + " input:\n" + req.shots[i].excerpt + "\n";
        out += "Example " + std::to_string(i + 1) + " output:\n" + req.shots[i].gold_json + "\n\n";
    }
    out += "Excerpts:\n";
    for (std::size_t i = 0; i < n_chunks; ++i) {
        const auto& c = req.chunks[i].chunk;
        out += "[CHUNK " + chunk_ref(c) + "]\n" + c.text + "\n[/CHUNK]\n";
    }
    if (corrective) {
        out += "\nYour previous answer was:\n" + corrective->prior_output + "\nIt failed validation:\n";
        for (const auto& v : corrective->violations)
            out += "- " + (v.field.empty() ? std::string("output") : v.field) + ": " + v.reason + "\n";
        out += "Correct every flagged value. A value without support in the excerpts must be null or false.\n";
    }
    out += "\nRespond with a single JSON object conforming to the schema. Output only JSON.\n";
    return out;
}

}  // namespace

PromptBuild build_prompt(const ExtractionRequest& req, std::size_t context_limit_tokens,
                         const Corrective* corrective) {
    if (req.chunks.empty()) throw_data("build_prompt requires at least one chunk");
    auto target = target_from_schema_id(req.schema_id);
    if (!target) throw_config("unregistered schema_id '" + req.schema_id + "'");
    if (*target != req.target) throw_config("schema_id '" + req.schema_id + "' does not match the request target");

    PromptBuild pb;
    std::size_t n = req.chunks.size();
    for (;;) {
        pb.prompt = render_prompt(req, n, corrective);
        pb.est_tokens = corpus::count_tokens(pb.prompt, corpus::TokenizerKind::unicode_word);
        if (pb.est_tokens <= context_limit_tokens || n == 1) break;
        --n;
        pb.dropped_chunk_ids.push_back(chunk_ref(req.chunks[n].chunk));
    }
    if (pb.est_tokens > context_limit_tokens) {
        throw_data("PromptTooLong: " + std::to_string(pb.est_tokens) + " tokens with a single chunk exceeds the " +
                   std::to_string(context_limit_tokens) + "-token context limit");
    }
    return pb;
}

void MockBackend::register_response(const std::string& prompt, std::string response) {
    std::lock_guard lock(mu_);
    registry_[util::fnv1a64(prompt)] = std::move(response);
}

void MockBackend::push_response(std::string response) {
    std::lock_guard lock(mu_);
    script_.push_back(std::move(response));
}

std::string MockBackend::complete(const std::string& prompt) {
    std::lock_guard lock(mu_);
    seen_.push_back(prompt);
    if (auto it = registry_.find(util::fnv1a64(prompt)); it != registry_.end()) return it->second;
    if (!script_.empty()) {
        std::string r = std::move(script_.front());
        script_.pop_front();
        return r;
    }
    throw_backend("MockBackend: no response registered for prompt");
}

std::vector<std::string> MockBackend::prompts_seen() const {
    std::lock_guard lock(mu_);
    return seen_;
}

std::size_t MockBackend::calls() const {
    std::lock_guard lock(mu_);
    return seen_.size();
}

PhenotypeRecord rule_phenotype(const std::vector<std::string>& chunk_texts) {
    const auto& lex = Lexicon::instance();
    PhenotypeRecord rec;
    if (auto ev = lex.first_evidence("t_stage", chunk_texts)) rec.t_stage = ev->value;
    if (auto ev = lex.first_evidence("n_stage", chunk_texts)) rec.n_stage = ev->value;
    if (auto ev = lex.first_evidence("m_stage", chunk_texts)) rec.m_stage = ev->value;
    if (auto ev = lex.first_evidence("stage_group", chunk_texts)) rec.stage_group = ev->value;
    if (auto ev = lex.first_evidence("tumor_size_cm", chunk_texts))
        rec.tumor_size_cm = std::strtod(ev->value.c_str(), nullptr);
    if (auto ev = lex.first_evidence("grade", chunk_texts)) rec.grade = ev->value;
    if (auto ev = lex.first_evidence("ecog", chunk_texts)) rec.ecog = std::atoi(ev->value.c_str());
    if (auto ev = lex.first_evidence("karnofsky", chunk_texts)) rec.karnofsky = std::atoi(ev->value.c_str());
    if (auto ev = lex.first_evidence("er", chunk_texts)) rec.er = ev->value;
    if (auto ev = lex.first_evidence("pr", chunk_texts)) rec.pr = ev->value;
    if (auto ev = lex.first_evidence("her2", chunk_texts)) rec.her2 = ev->value;
    return rec;
}

OutcomeRecord rule_outcome(const std::vector<std::string>& chunk_texts) {
    const auto& lex = Lexicon::instance();
    OutcomeRecord rec;
    auto push_unique = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    std::vector<std::string> prog, tox, death;
    auto trigger = [&](const char* field, std::vector<std::string>& sentences) {
        auto ev = lex.first_evidence(field, chunk_texts);
        if (ev) push_unique(sentences, ev->sentence);
        return ev.has_value();
    };
    rec.progression.progressed = trigger("progression.progressed", prog);
    rec.progression.discontinued = trigger("progression.discontinued", prog);
    rec.toxicity.adverse_effects = trigger("toxicity.adverse_effects", tox);
    rec.toxicity.qol_deterioration = trigger("toxicity.qol_deterioration", tox);
    rec.toxicity.discontinued_or_modified = trigger("toxicity.discontinued_or_modified", tox);
    rec.death_hospice.died = trigger("death_hospice.died", death);
    rec.death_hospice.hospice = trigger("death_hospice.hospice", death);
    if (rec.death_hospice.died || rec.death_hospice.hospice) {
        if (auto ev = lex.first_evidence("death_hospice.event_date", chunk_texts)) {
            rec.death_hospice.event_date = ev->value;
            push_unique(death, ev->sentence);
        }
    }
    rec.progression.details = util::join(prog, "; ");
    rec.toxicity.details = util::join(tox, "; ");
    rec.death_hospice.details = util::join(death, "; ");
    return rec;
}

std::string RuleBackend::complete(const std::string& prompt) {
    auto pos = prompt.find("Schema-Id: ");
    if (pos == std::string::npos) throw_backend("RuleBackend: prompt lacks a Schema-Id line");
    auto eol = prompt.find('\n', pos);
    std::string sid = util::trim(prompt.substr(pos + 11, eol == std::string::npos ? eol : eol - pos - 11));
    auto target = target_from_schema_id(sid);
    if (!target) throw_backend("RuleBackend: unregistered schema '" + sid + "'");

    std::vector<std::string> texts;
    std::size_t at = 0;
    while ((at = prompt.find("[CHUNK ", at)) != std::string::npos) {
        auto header_end = prompt.find("]\n", at);
        if (header_end == std::string::npos) break;
        auto body = header_end + 2;
        auto close = prompt.find("\n[/CHUNK]", body);
        if (close == std::string::npos) break;
        texts.push_back(prompt.substr(body, close - body));
        at = close + 9;
    }
    if (texts.empty()) throw_backend("RuleBackend: prompt has no chunk blocks");

    json j = *target == Target::phenotype ? phenotype_to_json(rule_phenotype(texts))
                                          : outcome_to_json(rule_outcome(texts));
    return j.dump(2);
}

json verdict_to_json(const CriticVerdict& v) {
    json arr = json::array();
    for (const auto& viol : v.violations) arr.push_back({{"field", viol.field}, {"reason", viol.reason}});
    return json{{"valid_json", v.valid_json},
                {"schema_ok", v.schema_ok},
                {"grounded", v.grounded},
                {"violations", arr},
                {"attempt", v.attempt}};
}

namespace {

constexpr const char* kNoSupport = "no supporting text in retrieved chunks";

std::unordered_set<std::string> chunk_token_set(const std::vector<corpus::Chunk>& chunks) {
    std::unordered_set<std::string> tokens;
    for (const auto& c : chunks)
        for (auto& t : corpus::tokenize(c.text, corpus::TokenizerKind::unicode_word))
            tokens.insert(util::to_lower(t));
    return tokens;
}

bool details_grounded(const std::string& details, const std::unordered_set<std::string>& chunk_tokens) {
    bool has_content = false;
    for (auto& t : corpus::tokenize(details, corpus::TokenizerKind::unicode_word)) {
        if (t.size() < 4) continue;
        has_content = true;
        if (chunk_tokens.count(util::to_lower(t))) return true;
    }
    return !has_content;
}

}  // namespace

CriticVerdict ground_check(const Record& record, const std::vector<corpus::Chunk>& chunks, int attempt) {
    const auto& lex = Lexicon::instance();
    std::vector<Violation> flags;
    auto supported = [&](const std::string& field, const std::string& value) {
        for (const auto& c : chunks)
            if (lex.supports(field, value, c.text)) return true;
        return false;
    };
    auto need = [&](const std::string& field, const std::string& value) {
        if (!supported(field, value)) flags.push_back({field, kNoSupport});
    };

    if (const auto* p = std::get_if<PhenotypeRecord>(&record)) {
        if (p->t_stage) need("t_stage", *p->t_stage);
        if (p->n_stage) need("n_stage", *p->n_stage);
        if (p->m_stage) need("m_stage", *p->m_stage);
        if (p->stage_group) need("stage_group", *p->stage_group);
        if (p->tumor_size_cm) need("tumor_size_cm", util::format_double(*p->tumor_size_cm));
        if (p->grade) need("grade", *p->grade);
        if (p->ecog) need("ecog", std::to_string(*p->ecog));
        if (p->karnofsky) need("karnofsky", std::to_string(*p->karnofsky));
        if (p->er == "positive") need("er", "positive");
        if (p->pr == "positive") need("pr", "positive");
        if (p->her2 == "positive") need("her2", "positive");
    } else {
        const auto& o = std::get<OutcomeRecord>(record);
        if (o.progression.progressed) need("progression.progressed", "true");
        if (o.progression.discontinued) need("progression.discontinued", "true");
        if (o.toxicity.adverse_effects) need("toxicity.adverse_effects", "true");
        if (o.toxicity.qol_deterioration) need("toxicity.qol_deterioration", "true");
        if (o.toxicity.discontinued_or_modified) need("toxicity.discontinued_or_modified", "true");
        if (o.death_hospice.died) need("death_hospice.died", "true");
        if (o.death_hospice.hospice) need("death_hospice.hospice", "true");
        if (o.death_hospice.event_date) need("death_hospice.event_date", *o.death_hospice.event_date);
        auto tokens = chunk_token_set(chunks);
        auto need_details = [&](const char* field, const std::string& details) {
            if (!details.empty() && !details_grounded(details, tokens))
                flags.push_back({field, "details text not grounded in retrieved chunks"});
        };
        need_details("progression.details", o.progression.details);
        need_details("toxicity.details", o.toxicity.details);
        need_details("death_hospice.details", o.death_hospice.details);
    }

    CriticVerdict v;
    v.valid_json = true;
    v.schema_ok = true;
    v.grounded = flags.empty();
    v.violations = std::move(flags);
    v.attempt = attempt;
    return v;
}

namespace {

void null_flagged(Record& record, const std::vector<Violation>& flags) {
    if (auto* p = std::get_if<PhenotypeRecord>(&record)) {
        for (const auto& f : flags) {
            if (f.field == "t_stage") p->t_stage.reset();
            else if (f.field == "n_stage") p->n_stage.reset();
            else if (f.field == "m_stage") p->m_stage.reset();
            else if (f.field == "stage_group") p->stage_group.reset();
            else if (f.field == "tumor_size_cm") p->tumor_size_cm.reset();
            else if (f.field == "grade") p->grade.reset();
            else if (f.field == "ecog") p->ecog.reset();
            else if (f.field == "karnofsky") p->karnofsky.reset();
            else if (f.field == "er") p->er = "unknown";
            else if (f.field == "pr") p->pr = "unknown";
            else if (f.field == "her2") p->her2 = "unknown";
        }
        return;
    }
    auto& o = std::get<OutcomeRecord>(record);
    for (const auto& f : flags) {
        if (f.field == "progression.progressed") o.progression.progressed = false;
        else if (f.field == "progression.discontinued") o.progression.discontinued = false;
        else if (f.field == "progression.details") o.progression.details.clear();
        else if (f.field == "toxicity.adverse_effects") o.toxicity.adverse_effects = false;
        else if (f.field == "toxicity.qol_deterioration") o.toxicity.qol_deterioration = false;
        else if (f.field == "toxicity.discontinued_or_modified") o.toxicity.discontinued_or_modified = false;
        else if (f.field == "toxicity.details") o.toxicity.details.clear();
        else if (f.field == "death_hospice.died") o.death_hospice.died = false;
        else if (f.field == "death_hospice.hospice") o.death_hospice.hospice = false;
        else if (f.field == "death_hospice.event_date") o.death_hospice.event_date.reset();
        else if (f.field == "death_hospice.details") o.death_hospice.details.clear();
    }
    if (!o.death_hospice.died && !o.death_hospice.hospice) o.death_hospice.event_date.reset();
}

}  // namespace

ExtractionResult extract_with_critic(const ExtractionRequest& req, LlmBackend& backend, int max_retries,
                                     std::size_t context_limit_tokens) {
    if (max_retries < 1) throw_config("max_retries must be >= 1");
    if (req.chunks.empty()) throw_data("extraction request has no chunks");
    const std::string& note_id = req.chunks.front().chunk.note_id;

    std::vector<corpus::Chunk> chunks;
    chunks.reserve(req.chunks.size());
    for (const auto& sc : req.chunks) chunks.push_back(sc.chunk);

    Corrective corrective;
    bool have_corrective = false;
    std::optional<Record> last_valid;
    std::vector<Violation> last_valid_flags;
    CriticVerdict last;
    for (int attempt = 1; attempt <= max_retries; ++attempt) {
        auto pb = build_prompt(req, context_limit_tokens, have_corrective ? &corrective : nullptr);
        std::string raw;
        try {
            raw = backend.complete(pb.prompt);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::backend)
                throw_backend("ExtractionFailed: note '" + note_id + "': " + e.what());
            throw;
        }
        auto parsed = parse_and_validate(raw, req.schema_id);
        CriticVerdict v;
        v.valid_json = parsed.valid_json;
        v.schema_ok = parsed.schema_ok;
        v.violations = parsed.violations;
        v.attempt = attempt;
        if (parsed.schema_ok) {
            v = ground_check(*parsed.record, chunks, attempt);
            if (v.grounded) return {*parsed.record, v, attempt};
            last_valid = parsed.record;
            last_valid_flags = v.violations;
        }
        last = v;
        corrective = Corrective{raw, v.violations};
        have_corrective = true;
    }

    Record rec = last_valid ? *last_valid : empty_record(req.target);
    if (last_valid) null_flagged(rec, last_valid_flags);
    last.grounded = false;
    return {std::move(rec), last, max_retries};
}

namespace {

using Slot = std::optional<std::string>;

std::vector<std::pair<std::string, Slot>> slots_of(const Record& record) {
    std::vector<std::pair<std::string, Slot>> slots;
    auto as_slot = [](const std::optional<std::string>& v) { return v ? Slot(*v) : Slot(); };
    if (const auto* p = std::get_if<PhenotypeRecord>(&record)) {
        slots.emplace_back("t_stage", as_slot(p->t_stage));
        slots.emplace_back("n_stage", as_slot(p->n_stage));
        slots.emplace_back("m_stage", as_slot(p->m_stage));
        slots.emplace_back("stage_group", as_slot(p->stage_group));
        slots.emplace_back("tumor_size_cm", p->tumor_size_cm ? Slot(util::format_double(*p->tumor_size_cm)) : Slot());
        slots.emplace_back("grade", as_slot(p->grade));
        slots.emplace_back("ecog", p->ecog ? Slot(std::to_string(*p->ecog)) : Slot());
        slots.emplace_back("karnofsky", p->karnofsky ? Slot(std::to_string(*p->karnofsky)) : Slot());
        auto marker = [](const std::string& v) { return v == "unknown" ? Slot() : Slot(v); };
        slots.emplace_back("er", marker(p->er));
        slots.emplace_back("pr", marker(p->pr));
        slots.emplace_back("her2", marker(p->her2));
        return slots;
    }
    const auto& o = std::get<OutcomeRecord>(record);
    auto flag = [](bool b) { return b ? Slot("true") : Slot(); };
    slots.emplace_back("progression.progressed", flag(o.progression.progressed));
    slots.emplace_back("progression.discontinued", flag(o.progression.discontinued));
    slots.emplace_back("toxicity.adverse_effects", flag(o.toxicity.adverse_effects));
    slots.emplace_back("toxicity.qol_deterioration", flag(o.toxicity.qol_deterioration));
    slots.emplace_back("toxicity.discontinued_or_modified", flag(o.toxicity.discontinued_or_modified));
    slots.emplace_back("death_hospice.died", flag(o.death_hospice.died));
    slots.emplace_back("death_hospice.hospice", flag(o.death_hospice.hospice));
    slots.emplace_back("death_hospice.event_date", as_slot(o.death_hospice.event_date));
    return slots;
}

bool category_positive(const OutcomeRecord& o, const std::string& category) {
    if (category == "progression") return o.progression.progressed;
    if (category == "toxicity") return o.toxicity.adverse_effects;
    return o.death_hospice.died || o.death_hospice.hospice;
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ExtractionEval evaluate_extractions(const std::vector<LabeledRecord>& predicted,
                                    const std::vector<LabeledRecord>& gold) {
    if (predicted.empty() || gold.empty()) throw_data("EmptyPopulation: no extraction records to evaluate");
    if (predicted.size() != gold.size())
        throw_data("AlignmentError: " + std::to_string(predicted.size()) + " predicted vs " +
                   std::to_string(gold.size()) + " gold records");

    std::unordered_map<std::string, const Record*> gold_by_id;
    for (const auto& g : gold) {
        if (!gold_by_id.emplace(g.note_id, &g.record).second)
            throw_data("AlignmentError: duplicate gold note_id '" + g.note_id + "'");
    }

    std::size_t variant = predicted.front().record.index();
    ExtractionEval eval;
    std::vector<LabelMetrics> acc;
    for (const auto& pr : predicted) {
        auto it = gold_by_id.find(pr.note_id);
        if (it == gold_by_id.end()) throw_data("AlignmentError: no gold record for note_id '" + pr.note_id + "'");
        if (pr.record.index() != variant || it->second->index() != variant)
            throw_data("AlignmentError: mixed record targets in evaluation");
        auto ps = slots_of(pr.record);
        auto gs = slots_of(*it->second);
        if (acc.empty()) {
            acc.resize(ps.size());
            for (std::size_t i = 0; i < ps.size(); ++i) acc[i].label = ps[i].first;
        }
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const Slot& p = ps[i].second;
            const Slot& g = gs[i].second;
            auto& m = acc[i];
            ++m.n;
            if (p == g) ++m.exact;
            if (p && g && *p == *g) ++m.tp;
            if (p && (!g || *p != *g)) ++m.fp;
            if (g && (!p || *p != *g)) ++m.fn;
        }
    }
    for (auto& m : acc) {
        m.accuracy = ratio(m.exact, m.n);
        m.precision = ratio(m.tp, m.tp + m.fp);
        m.recall = ratio(m.tp, m.tp + m.fn);
        if (m.precision && m.recall && *m.precision + *m.recall > 0.0)
            m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    }
    eval.per_label = std::move(acc);

    if (variant == 1) {
        for (const char* cat : {"progression", "toxicity", "death"}) {
            CategoryMetrics cm;
            cm.category = cat;
            for (const auto& pr : predicted) {
                const auto& po = std::get<OutcomeRecord>(pr.record);
                const auto& go = std::get<OutcomeRecord>(*gold_by_id.at(pr.note_id));
                bool p = category_positive(po, cat);
                bool g = category_positive(go, cat);
                if (p && g) ++cm.tp;
                if (p && !g) ++cm.fp;
            }
            cm.precision = ratio(cm.tp, cm.tp + cm.fp);
            eval.per_category.push_back(std::move(cm));
        }
    }
    return eval;
}

json eval_to_json(const ExtractionEval& e) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json labels = json::array();
    for (const auto& m : e.per_label) {
        labels.push_back({{"label", m.label},
                          {"n", m.n},
                          {"tp", m.tp},
                          {"fp", m.fp},
                          {"fn", m.fn},
                          {"accuracy", opt(m.accuracy)},
                          {"precision", opt(m.precision)},
                          {"recall", opt(m.recall)},
                          {"f1", opt(m.f1)}});
    }
    json cats = json::array();
    for (const auto& c : e.per_category) {
        cats.push_back(
            {{"category", c.category}, {"tp", c.tp}, {"fp", c.fp}, {"precision", opt(c.precision)}});
    }
    return json{{"per_label", labels}, {"per_category", cats}};
}

}  // namespace oncosurv::extraction
