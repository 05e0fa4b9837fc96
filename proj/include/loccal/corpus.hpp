#pragma once
// Token/text evidence records, the line-delimited wire format, and split hygiene.
//
// One line holds one text:
//   {"text_id": ..., "source": ..., "domain": ..., "prompt_group": ...,
//    "tokens": [{"p_obs", "logp_obs", "rank_obs", "mass_above", "mu_logp",
//                "m2_logp", "mu_logrank", "topk_probs", "hidden"}, ...]}
// mu_logp, m2_logp and mu_logrank may be absent or null; scorers that need them
// fail with MissingFieldError.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "loccal/error.hpp"
#include "loccal/random.hpp"

namespace loccal {

// Tolerance for probability-sum invariants (extractors compute in float32).
inline constexpr double kProbTolerance = 1e-6;
inline constexpr double kRankOneMassTolerance = 1e-9;

struct TokenRecord {
    double p_obs = 1.0;
    double logp_obs = 0.0;
    std::int64_t rank_obs = 1;
    double mass_above = 0.0;           // a_i: mass of strictly more likely tokens
    std::optional<double> mu_logp;     // sum_v p(v) log p(v)
    std::optional<double> m2_logp;     // sum_v p(v) (log p(v))^2
    std::optional<double> mu_logrank;  // sum_v p(v) log r(v)
    std::vector<double> topk_probs;    // descending
    std::vector<double> hidden;

    friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

struct TextRecord {
    std::string text_id;
    std::string source;
    std::string domain;
    std::string prompt_group;
    std::vector<TokenRecord> tokens;

    friend bool operator==(const TextRecord&, const TextRecord&) = default;
};

using Corpus = std::vector<TextRecord>;

struct SplitSpec {
    double train_fraction = 0.5;
    std::uint64_t seed = 0;
    std::optional<std::size_t> cap_tokens;
};

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink stderr_warnings() {
    return [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
}

namespace detail {

inline std::string token_context(const std::string& text_id, std::size_t index) {
    return "text_id '" + text_id + "', token " + std::to_string(index);
}

[[noreturn]] inline void invalid(const std::string& field, const std::string& text_id, std::size_t index,
                                 const std::string& why) {
    throw ValidationError("invalid field '" + field + "' (" + token_context(text_id, index) + "): " + why);
}

}  // namespace detail

// Checks every per-token invariant; throws ValidationError naming the field and text.
inline void validate_token(const TokenRecord& t, const std::string& text_id, std::size_t index) {
    using detail::invalid;
    if (!std::isfinite(t.p_obs) || !(t.p_obs > 0.0) || t.p_obs > 1.0)
        invalid("p_obs", text_id, index, "must lie in (0, 1]");
    if (!std::isfinite(t.logp_obs) || std::abs(t.logp_obs - std::log(t.p_obs)) > kProbTolerance)
        invalid("logp_obs", text_id, index, "must equal log(p_obs) within 1e-6");
    if (!std::isfinite(t.mass_above) || t.mass_above < 0.0)
        invalid("mass_above", text_id, index, "must be non-negative");
    if (t.mass_above + t.p_obs > 1.0 + kProbTolerance)
        invalid("mass_above", text_id, index, "mass_above + p_obs exceeds 1");
    if (t.rank_obs < 1) invalid("rank_obs", text_id, index, "must be >= 1");
    if ((t.rank_obs == 1) != (t.mass_above <= kRankOneMassTolerance))
        invalid("rank_obs", text_id, index, "rank_obs == 1 must coincide with mass_above == 0");

    double topk_sum = 0.0;
    for (std::size_t j = 0; j < t.topk_probs.size(); ++j) {
        const double p = t.topk_probs[j];
        if (!std::isfinite(p) || !(p > 0.0) || p > 1.0) invalid("topk_probs", text_id, index, "entries must lie in (0, 1]");
        if (j > 0 && p > t.topk_probs[j - 1]) invalid("topk_probs", text_id, index, "must be non-increasing");
        topk_sum += p;
    }
    if (topk_sum > 1.0 + kProbTolerance) invalid("topk_probs", text_id, index, "sum exceeds 1");
    if (t.rank_obs > 1 && !t.topk_probs.empty() && t.topk_probs.front() + kProbTolerance < t.p_obs)
        invalid("topk_probs", text_id, index, "top probability below p_obs for a non-top token");

    if (t.mu_logp && !std::isfinite(*t.mu_logp)) invalid("mu_logp", text_id, index, "must be finite");
    if (t.m2_logp && !std::isfinite(*t.m2_logp)) invalid("m2_logp", text_id, index, "must be finite");
    if (t.mu_logrank && !std::isfinite(*t.mu_logrank)) invalid("mu_logrank", text_id, index, "must be finite");
    if (t.mu_logp && t.m2_logp && *t.m2_logp < (*t.mu_logp) * (*t.mu_logp) - 1e-9)
        invalid("m2_logp", text_id, index, "second moment below squared mean");
    for (double h : t.hidden)
        if (!std::isfinite(h)) invalid("hidden", text_id, index, "entries must be finite");
}

inline void validate_text(const TextRecord& text) {
    if (text.tokens.empty()) throw ValidationError("text_id '" + text.text_id + "' has no tokens");
    const std::size_t dh = text.tokens.front().hidden.size();
    for (std::size_t i = 0; i < text.tokens.size(); ++i) {
        validate_token(text.tokens[i], text.text_id, i);
        if (text.tokens[i].hidden.size() != dh)
            detail::invalid("hidden", text.text_id, i, "length differs within the text");
    }
}

// Corpus-level checks: unique ids and a single hidden width.
inline void validate_corpus(const Corpus& corpus) {
    std::unordered_set<std::string> ids;
    std::optional<std::size_t> dh;
    for (const auto& text : corpus) {
        validate_text(text);
        if (!ids.insert(text.text_id).second)
            throw ValidationError("duplicate text_id '" + text.text_id + "'");
        const std::size_t width = text.tokens.front().hidden.size();
        if (dh && *dh != width)
            throw ValidationError("invalid field 'hidden' (text_id '" + text.text_id + "'): width " +
                                  std::to_string(width) + " differs from corpus width " + std::to_string(*dh));
        dh = width;
    }
}

inline std::size_t hidden_width(const Corpus& corpus) {
    return corpus.empty() ? 0 : corpus.front().tokens.front().hidden.size();
}

namespace detail {

using json = nlohmann::json;

inline const std::set<std::string, std::less<>>& text_keys() {
    static const std::set<std::string, std::less<>> keys{"text_id", "source", "domain", "prompt_group", "tokens"};
    return keys;
}

inline const std::set<std::string, std::less<>>& token_keys() {
    static const std::set<std::string, std::less<>> keys{"p_obs",   "logp_obs",   "rank_obs",   "mass_above", "mu_logp",
                                                        "m2_logp", "mu_logrank", "topk_probs", "hidden"};
    return keys;
}

inline double number_field(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) throw MissingFieldError(key, ctx);
    if (!it->is_number()) throw ValidationError(std::string("field '") + key + "' is not a number (" + ctx + ")");
    return it->get<double>();
}

inline std::optional<double> optional_number(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw ValidationError(std::string("field '") + key + "' is not a number (" + ctx + ")");
    return it->get<double>();
}

inline std::vector<double> number_array(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) throw MissingFieldError(key, ctx);
    if (!it->is_array()) throw ValidationError(std::string("field '") + key + "' is not an array (" + ctx + ")");
    std::vector<double> out;
    out.reserve(it->size());
    for (const auto& v : *it) {
        if (!v.is_number()) throw ValidationError(std::string("field '") + key + "' has a non-numeric entry (" + ctx + ")");
        out.push_back(v.get<double>());
    }
    return out;
}

inline std::string string_field(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) throw MissingFieldError(key, ctx);
    if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' is not a string (" + ctx + ")");
    return it->get<std::string>();
}

inline std::int64_t rank_field(const json& obj, const std::string& ctx) {
    auto it = obj.find("rank_obs");
    if (it == obj.end() || it->is_null()) throw MissingFieldError("rank_obs", ctx);
    if (it->is_number_integer()) return it->get<std::int64_t>();
    if (it->is_number_float()) {
        const double r = it->get<double>();
        if (r == std::floor(r)) return static_cast<std::int64_t>(r);
    }
    throw ValidationError("field 'rank_obs' is not an integer (" + ctx + ")");
}

}  // namespace detail

// Parses one wire line into a validated TextRecord. Unknown keys are reported
// through `unknown_key` and otherwise ignored.
inline TextRecord parse_text_line(std::string_view line, std::size_t line_no,
                                  const std::function<void(const std::string&)>& unknown_key = {}) {
    using detail::json;
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "record is not an object");

    TextRecord text;
    try {
        const std::string line_ctx = "line " + std::to_string(line_no);
        text.text_id = detail::string_field(obj, "text_id", line_ctx);
        const std::string ctx = line_ctx + ", text_id '" + text.text_id + "'";
        text.source = detail::string_field(obj, "source", ctx);
        text.domain = detail::string_field(obj, "domain", ctx);
        text.prompt_group = detail::string_field(obj, "prompt_group", ctx);
        for (const auto& [key, _] : obj.items())
            if (!detail::text_keys().contains(key) && unknown_key) unknown_key(key);

        auto tokens = obj.find("tokens");
        if (tokens == obj.end() || tokens->is_null()) throw MissingFieldError("tokens", ctx);
        if (!tokens->is_array()) throw ValidationError("field 'tokens' is not an array (" + ctx + ")");
        text.tokens.reserve(tokens->size());
        std::size_t index = 0;
        for (const auto& tok : *tokens) {
            const std::string tctx = ctx + ", token " + std::to_string(index++);
            if (!tok.is_object()) throw ValidationError("token is not an object (" + tctx + ")");
            for (const auto& [key, _] : tok.items())
                if (!detail::token_keys().contains(key) && unknown_key) unknown_key("tokens[]." + key);
            TokenRecord t;
            t.p_obs = detail::number_field(tok, "p_obs", tctx);
            t.logp_obs = detail::number_field(tok, "logp_obs", tctx);
            t.rank_obs = detail::rank_field(tok, tctx);
            t.mass_above = detail::number_field(tok, "mass_above", tctx);
            t.mu_logp = detail::optional_number(tok, "mu_logp", tctx);
            t.m2_logp = detail::optional_number(tok, "m2_logp", tctx);
            t.mu_logrank = detail::optional_number(tok, "mu_logrank", tctx);
            t.topk_probs = detail::number_array(tok, "topk_probs", tctx);
            t.hidden = detail::number_array(tok, "hidden", tctx);
            text.tokens.push_back(std::move(t));
        }
        validate_text(text);
    } catch (const ParseError&) {
        throw;
    } catch (const MissingFieldError& e) {
        throw MissingFieldError(e.field(), "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    return text;
}

// Reads a whole record stream. Blank lines are skipped; each distinct unknown key
// is warned about once.
inline Corpus parse_corpus(std::istream& in, const WarningSink& warn = stderr_warnings()) {
    Corpus corpus;
    std::set<std::string, std::less<>> warned;
    auto on_unknown = [&](const std::string& key) {
        if (warned.insert(key).second && warn) warn("ignoring unknown key '" + key + "'");
    };
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        corpus.push_back(parse_text_line(line, line_no, on_unknown));
    }
    validate_corpus(corpus);
    return corpus;
}

inline Corpus read_corpus_file(const std::string& path, const WarningSink& warn = stderr_warnings()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus '" + path + "'");
    try {
        return parse_corpus(in, warn);
    } catch (const MissingFieldError& e) {
        throw MissingFieldError(e.field(), path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline std::string to_wire_line(const TextRecord& text) {
    nlohmann::ordered_json obj;
    obj["text_id"] = text.text_id;
    obj["source"] = text.source;
    obj["domain"] = text.domain;
    obj["prompt_group"] = text.prompt_group;
    auto& tokens = obj["tokens"] = nlohmann::ordered_json::array();
    for (const auto& t : text.tokens) {
        nlohmann::ordered_json tok;
        tok["p_obs"] = t.p_obs;
        tok["logp_obs"] = t.logp_obs;
        tok["rank_obs"] = t.rank_obs;
        tok["mass_above"] = t.mass_above;
        tok["mu_logp"] = t.mu_logp ? nlohmann::ordered_json(*t.mu_logp) : nlohmann::ordered_json();
        tok["m2_logp"] = t.m2_logp ? nlohmann::ordered_json(*t.m2_logp) : nlohmann::ordered_json();
        tok["mu_logrank"] = t.mu_logrank ? nlohmann::ordered_json(*t.mu_logrank) : nlohmann::ordered_json();
        tok["topk_probs"] = t.topk_probs;
        tok["hidden"] = t.hidden;
        tokens.push_back(std::move(tok));
    }
    // Doubles are written in shortest round-trip form, so parse(serialize(x)) == x bitwise.
    return obj.dump();
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& text : corpus) out << to_wire_line(text) << '\n';
}

inline void write_corpus_file(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus '" + path + "'");
    write_corpus(out, corpus);
    if (!out) throw IoError("write failed for '" + path + "'");
}

// First min(n, len) tokens, order preserved.
inline TextRecord cap_tokens(const TextRecord& text, std::size_t n) {
    if (n == 0) throw ConfigError("cap_tokens requires n >= 1");
    TextRecord out = text;
    if (out.tokens.size() > n) out.tokens.resize(n);
    return out;
}

inline Corpus cap_tokens(const Corpus& corpus, std::optional<std::size_t> n) {
    if (!n) return corpus;
    Corpus out;
    out.reserve(corpus.size());
    for (const auto& text : corpus) out.push_back(cap_tokens(text, *n));
    return out;
}

struct CorpusSplit {
    Corpus train;
    Corpus test;
};

// Partitions by prompt group so texts sharing a prompt land on one side. Groups are
// sorted before the seeded shuffle, so the result depends only on content and seed.
inline CorpusSplit split_by_prompt_group(const Corpus& corpus, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1), got " + std::to_string(spec.train_fraction));
    std::vector<std::string> groups;
    {
        std::set<std::string> distinct;
        for (const auto& text : corpus) distinct.insert(text.prompt_group);
        groups.assign(distinct.begin(), distinct.end());
    }
    Rng rng(spec.seed);
    rng.shuffle(groups);

    const std::size_t n_groups = groups.size();
    auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n_groups)));
    if (n_groups >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n_groups - 1);
    const std::set<std::string> train_groups(groups.begin(), groups.begin() + static_cast<std::ptrdiff_t>(n_train));

    CorpusSplit split;
    for (const auto& text : corpus) {
        auto& side = train_groups.contains(text.prompt_group) ? split.train : split.test;
        side.push_back(spec.cap_tokens ? cap_tokens(text, *spec.cap_tokens) : text);
    }
    return split;
}

// Distinct sources in first-appearance order.
inline std::vector<std::string> sources_of(const Corpus& corpus) {
    std::vector<std::string> out;
    for (const auto& text : corpus)
        if (std::find(out.begin(), out.end(), text.source) == out.end()) out.push_back(text.source);
    return out;
}

}  // namespace loccal
