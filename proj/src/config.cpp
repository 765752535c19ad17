#include "oncosurv/config.hpp"

#include <cstdlib>
#include <set>

#include "oncosurv/csv.hpp"
#include "oncosurv/errors.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::config {

using nlohmann::json;

corpus::CorpusConfig RetrievalSection::chunking() const {
    corpus::CorpusConfig c;
    c.chunk_size_limit = chunk_token_limit;
    c.chunk_overlap = chunk_overlap;
    c.tokenizer = corpus::TokenizerKind::unicode_word;
    return c;
}

retrieval::RetrievalConfig RetrievalSection::ranking() const {
    retrieval::RetrievalConfig c;
    c.k = k;
    return c;
}

survival::ForestConfig SurvivalSection::forest(unsigned workers) const {
    survival::ForestConfig c;
    c.n_trees = n_trees;
    c.mtry = mtry;
    c.min_leaf_size = min_leaf_size;
    c.seed = seed;
    c.workers = workers;
    return c;
}

void PipelineConfig::validate() const {
    retrieval.chunking().validate();
    retrieval.ranking().validate();
    if (retrieval.embedding_dim == 0) throw_config("retrieval.embedding_dim must be positive");
    if (retrieval.phenotype_query.empty() || retrieval.outcome_query.empty())
        throw_config("retrieval query templates must be non-empty");
    if (extraction.backend != "rule" && extraction.backend != "http")
        throw_config("extraction.backend must be 'rule' or 'http', got '" + extraction.backend + "'");
    if (extraction.backend == "http" && extraction.endpoint.empty())
        throw_config("extraction.backend 'http' requires extraction.endpoint");
    if (extraction.shots < 0) throw_config("extraction.shots must be >= 0");
    if (extraction.max_retries < 1) throw_config("extraction.max_retries must be >= 1");
    if (extraction.context_limit_tokens == 0) throw_config("extraction.context_limit_tokens must be positive");
    if (cohort.support_threshold < 1) throw_config("cohort.support_threshold must be >= 1");
    survival.forest(workers).validate();
    if (!(survival.threshold > 0.0 && survival.threshold < 1.0))
        throw_config("survival.threshold must lie in (0,1)");
    if (!(survival.holdout_fraction > 0.0 && survival.holdout_fraction < 1.0))
        throw_config("survival.holdout_fraction must lie in (0,1)");
    for (double t : survival.time_grid) {
        if (!(t > 0.0)) throw_config("survival.time_grid entries must be positive days");
    }
    if (survival.importance_repeats < 1) throw_config("survival.importance_repeats must be >= 1");
    if (synth.n_patients < 1) throw_config("synth.n_patients must be >= 1");
}

namespace {

[[noreturn]] void unknown_key(const std::string& section, const std::string& key) {
    throw_config("unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
}

class Section {
  public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw_config("config section '" + name_ + "' must be an object");
    }

    ~Section() = default;

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            (void)value;
            if (!seen_.count(key)) unknown_key(name_, key);
        }
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    std::string str(const char* key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) throw_config("config key '" + path(key) + "' must be a string");
        return v.get<std::string>();
    }

    bool boolean(const char* key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw_config("config key '" + path(key) + "' must be a boolean");
        return v.get<bool>();
    }

    long integer(const char* key, long fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw_config("config key '" + path(key) + "' must be an integer");
        return v.get<long>();
    }

    std::uint64_t uinteger(const char* key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw_config("config key '" + path(key) + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    double real(const char* key, double fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number()) throw_config("config key '" + path(key) + "' must be a number");
        return v.get<double>();
    }

    std::vector<double> reals(const char* key, std::vector<double> fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_array()) throw_config("config key '" + path(key) + "' must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw_config("config key '" + path(key) + "' must be an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    const json* object(const char* key) {
        if (!has(key)) return nullptr;
        return &j_.at(key);
    }

  private:
    std::string path(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

}  // namespace

PipelineConfig parse_config(const json& j) {
    if (!j.is_object()) throw_config("config root must be a JSON object");
    PipelineConfig cfg;
    Section root(j, "");

    if (const json* sec = root.object("paths")) {
        Section s(*sec, "paths");
        cfg.paths.corpus = s.str("corpus", cfg.paths.corpus);
        cfg.paths.emr = s.str("emr", cfg.paths.emr);
        cfg.paths.plans = s.str("plans", cfg.paths.plans);
        cfg.paths.drugs = s.str("drugs", cfg.paths.drugs);
        cfg.paths.gold = s.str("gold", cfg.paths.gold);
        cfg.paths.output_dir = s.str("output_dir", cfg.paths.output_dir);
        s.finish();
    }
    if (const json* sec = root.object("retrieval")) {
        Section s(*sec, "retrieval");
        cfg.retrieval.k = static_cast<std::size_t>(s.integer("k", static_cast<long>(cfg.retrieval.k)));
        cfg.retrieval.chunk_token_limit =
            static_cast<std::size_t>(s.integer("chunk_token_limit", static_cast<long>(cfg.retrieval.chunk_token_limit)));
        cfg.retrieval.chunk_overlap =
            static_cast<std::size_t>(s.integer("chunk_overlap", static_cast<long>(cfg.retrieval.chunk_overlap)));
        cfg.retrieval.embedding_dim =
            static_cast<std::size_t>(s.integer("embedding_dim", static_cast<long>(cfg.retrieval.embedding_dim)));
        cfg.retrieval.phenotype_query = s.str("phenotype_query", cfg.retrieval.phenotype_query);
        cfg.retrieval.outcome_query = s.str("outcome_query", cfg.retrieval.outcome_query);
        s.finish();
    }
    if (const json* sec = root.object("extraction")) {
        Section s(*sec, "extraction");
        cfg.extraction.backend = s.str("backend", cfg.extraction.backend);
        cfg.extraction.endpoint = s.str("endpoint", cfg.extraction.endpoint);
        cfg.extraction.model = s.str("model", cfg.extraction.model);
        cfg.extraction.api_key = s.str("api_key", cfg.extraction.api_key);
        cfg.extraction.embed_endpoint = s.str("embed_endpoint", cfg.extraction.embed_endpoint);
        cfg.extraction.embed_model = s.str("embed_model", cfg.extraction.embed_model);
        cfg.extraction.shots = static_cast<int>(s.integer("shots", cfg.extraction.shots));
        cfg.extraction.max_retries = static_cast<int>(s.integer("max_retries", cfg.extraction.max_retries));
        cfg.extraction.context_limit_tokens = static_cast<std::size_t>(
            s.integer("context_limit_tokens", static_cast<long>(cfg.extraction.context_limit_tokens)));
        cfg.extraction.exemplars_phenotype = s.str("exemplars_phenotype", cfg.extraction.exemplars_phenotype);
        cfg.extraction.exemplars_outcome = s.str("exemplars_outcome", cfg.extraction.exemplars_outcome);
        cfg.extraction.temperature = s.real("temperature", cfg.extraction.temperature);
        s.finish();
    }
    if (const json* sec = root.object("cohort")) {
        Section s(*sec, "cohort");
        cfg.cohort.support_threshold = static_cast<int>(s.integer("support_threshold", cfg.cohort.support_threshold));
        s.finish();
    }
    if (const json* sec = root.object("survival")) {
        Section s(*sec, "survival");
        cfg.survival.n_trees = static_cast<int>(s.integer("n_trees", cfg.survival.n_trees));
        cfg.survival.mtry = static_cast<int>(s.integer("mtry", cfg.survival.mtry));
        cfg.survival.min_leaf_size = static_cast<int>(s.integer("min_leaf_size", cfg.survival.min_leaf_size));
        cfg.survival.seed = s.uinteger("seed", cfg.survival.seed);
        cfg.survival.threshold = s.real("threshold", cfg.survival.threshold);
        cfg.survival.holdout_fraction = s.real("holdout_fraction", cfg.survival.holdout_fraction);
        cfg.survival.time_grid = s.reals("time_grid", cfg.survival.time_grid);
        cfg.survival.importance_repeats =
            static_cast<int>(s.integer("importance_repeats", cfg.survival.importance_repeats));
        s.finish();
    }
    if (const json* sec = root.object("synth")) {
        Section s(*sec, "synth");
        cfg.synth.n_patients = static_cast<int>(s.integer("n_patients", cfg.synth.n_patients));
        cfg.synth.seed = s.uinteger("seed", cfg.synth.seed);
        s.finish();
    }
    cfg.workers = static_cast<unsigned>(root.integer("workers", static_cast<long>(cfg.workers)));
    cfg.lenient = root.boolean("lenient", cfg.lenient);
    root.finish();
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    if (path.empty()) return PipelineConfig{};
    std::string text;
    try {
        text = util::read_file(path);
    } catch (const Error&) {
        throw_config("cannot open config file '" + path + "'");
    }
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw_config("config file '" + path + "' is not valid JSON");
    return parse_config(j);
}

void apply_env(PipelineConfig& cfg) {
    if (const char* key = std::getenv("ONCO_API_KEY")) {
        if (*key != '\0') cfg.extraction.api_key = key;
    }
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
    return json{
        {"paths",
         {{"corpus", cfg.paths.corpus},
          {"emr", cfg.paths.emr},
          {"plans", cfg.paths.plans},
          {"drugs", cfg.paths.drugs},
          {"gold", cfg.paths.gold},
          {"output_dir", cfg.paths.output_dir}}},
        {"retrieval",
         {{"k", cfg.retrieval.k},
          {"chunk_token_limit", cfg.retrieval.chunk_token_limit},
          {"chunk_overlap", cfg.retrieval.chunk_overlap},
          {"embedding_dim", cfg.retrieval.embedding_dim},
          {"phenotype_query", cfg.retrieval.phenotype_query},
          {"outcome_query", cfg.retrieval.outcome_query}}},
        {"extraction",
         {{"backend", cfg.extraction.backend},
          {"endpoint", cfg.extraction.endpoint},
          {"model", cfg.extraction.model},
          {"api_key", cfg.extraction.api_key.empty() ? "" : "<set>"},
          {"embed_endpoint", cfg.extraction.embed_endpoint},
          {"embed_model", cfg.extraction.embed_model},
          {"shots", cfg.extraction.shots},
          {"max_retries", cfg.extraction.max_retries},
          {"context_limit_tokens", cfg.extraction.context_limit_tokens},
          {"exemplars_phenotype", cfg.extraction.exemplars_phenotype},
          {"exemplars_outcome", cfg.extraction.exemplars_outcome},
          {"temperature", cfg.extraction.temperature}}},
        {"cohort", {{"support_threshold", cfg.cohort.support_threshold}}},
        {"survival",
         {{"n_trees", cfg.survival.n_trees},
          {"mtry", cfg.survival.mtry},
          {"min_leaf_size", cfg.survival.min_leaf_size},
          {"seed", cfg.survival.seed},
          {"threshold", cfg.survival.threshold},
          {"holdout_fraction", cfg.survival.holdout_fraction},
          {"time_grid", cfg.survival.time_grid},
          {"importance_repeats", cfg.survival.importance_repeats}}},
        {"synth", {{"n_patients", cfg.synth.n_patients}, {"seed", cfg.synth.seed}}},
        {"workers", cfg.workers},
        {"lenient", cfg.lenient}};
}

}  // namespace oncosurv::config
