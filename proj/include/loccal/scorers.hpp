#pragma once
// Baseline token scorers g(x_i) and their text-level aggregates. All logs are natural.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loccal/corpus.hpp"
#include "loccal/error.hpp"

namespace loccal {

enum class ScorerId { log_surprisal, log_rank, fd_tok, npr_tok, fd_full, dmap };

inline constexpr std::array<ScorerId, 6> kAllScorers{ScorerId::log_surprisal, ScorerId::log_rank, ScorerId::fd_tok,
                                                     ScorerId::npr_tok,       ScorerId::fd_full,  ScorerId::dmap};

// Scorers that get local predictors (fd_full is text-level only).
inline constexpr std::array<ScorerId, 5> kCalibratedScorers{ScorerId::log_surprisal, ScorerId::log_rank,
                                                            ScorerId::fd_tok, ScorerId::npr_tok, ScorerId::dmap};

constexpr std::string_view to_string(ScorerId id) noexcept {
    switch (id) {
        case ScorerId::log_surprisal: return "log_surprisal";
        case ScorerId::log_rank: return "log_rank";
        case ScorerId::fd_tok: return "fd_tok";
        case ScorerId::npr_tok: return "npr_tok";
        case ScorerId::fd_full: return "fd_full";
        case ScorerId::dmap: return "dmap";
    }
    return "?";
}

inline ScorerId parse_scorer_id(std::string_view name) {
    for (ScorerId id : kAllScorers)
        if (to_string(id) == name) return id;
    throw ConfigError("unknown scorer '" + std::string(name) + "'");
}

// +1 when larger raw scores indicate machine text, -1 otherwise.
constexpr double machine_orientation(ScorerId id) noexcept {
    switch (id) {
        case ScorerId::log_surprisal:
        case ScorerId::fd_tok:
        case ScorerId::fd_full: return 1.0;
        case ScorerId::log_rank:
        case ScorerId::npr_tok:
        case ScorerId::dmap: return -1.0;  // dmap naive score is a humanness score
    }
    return 1.0;
}

constexpr bool is_scalar_token_scorer(ScorerId id) noexcept {
    return id == ScorerId::log_surprisal || id == ScorerId::log_rank || id == ScorerId::fd_tok ||
           id == ScorerId::npr_tok;
}

struct TokenScore {
    double value = 0.0;
    ScorerId scorer = ScorerId::log_surprisal;
};

struct TextScore {
    double value = 0.0;
    ScorerId scorer = ScorerId::log_surprisal;
    std::size_t n_tokens = 0;
};

inline TokenScore score_log_surprisal(const TokenRecord& t) { return {t.logp_obs, ScorerId::log_surprisal}; }

inline TokenScore score_log_rank(const TokenRecord& t) {
    return {std::log(static_cast<double>(t.rank_obs)), ScorerId::log_rank};
}

// log p(w_i) - sum_v p(v) log p(v)
inline TokenScore score_fd_token(const TokenRecord& t) {
    if (!t.mu_logp) throw MissingFieldError("mu_logp", "required by fd_tok");
    return {t.logp_obs - *t.mu_logp, ScorerId::fd_tok};
}

// log r(w_i) - sum_v p(v) log r(v)
inline TokenScore score_npr_token(const TokenRecord& t) {
    if (!t.mu_logrank) throw MissingFieldError("mu_logrank", "required by npr_tok");
    return {std::log(static_cast<double>(t.rank_obs)) - *t.mu_logrank, ScorerId::npr_tok};
}

inline TokenScore score_token(ScorerId id, const TokenRecord& t) {
    switch (id) {
        case ScorerId::log_surprisal: return score_log_surprisal(t);
        case ScorerId::log_rank: return score_log_rank(t);
        case ScorerId::fd_tok: return score_fd_token(t);
        case ScorerId::npr_tok: return score_npr_token(t);
        default: break;
    }
    throw ConfigError("scorer '" + std::string(to_string(id)) + "' has no scalar token score");
}

// Fields a scorer reads beyond the always-present ones.
inline std::vector<std::string> required_fields(ScorerId id) {
    switch (id) {
        case ScorerId::fd_tok: return {"mu_logp"};
        case ScorerId::npr_tok: return {"mu_logrank"};
        case ScorerId::fd_full: return {"mu_logp", "m2_logp"};
        default: return {};
    }
}

inline bool has_required_fields(ScorerId id, const TokenRecord& t) {
    switch (id) {
        case ScorerId::fd_tok: return t.mu_logp.has_value();
        case ScorerId::npr_tok: return t.mu_logrank.has_value();
        case ScorerId::fd_full: return t.mu_logp.has_value() && t.m2_logp.has_value();
        default: return true;
    }
}

inline TextScore aggregate_mean(std::span<const TokenScore> scores) {
    if (scores.empty()) throw ValidationError("aggregate_mean of an empty score list");
    const ScorerId id = scores.front().scorer;
    double sum = 0.0;
    for (const auto& s : scores) {
        if (s.scorer != id) throw ValidationError("aggregate_mean over mixed scorer ids");
        sum += s.value;
    }
    return {sum / static_cast<double>(scores.size()), id, scores.size()};
}

inline TextScore mean_token_score(ScorerId id, const TextRecord& text) {
    std::vector<TokenScore> scores;
    scores.reserve(text.tokens.size());
    for (const auto& t : text.tokens) scores.push_back(score_token(id, t));
    if (scores.empty()) throw ValidationError("text_id '" + text.text_id + "' has no tokens");
    return aggregate_mean(scores);
}

// Analytic Fast-DetectGPT: sum of fd_tok over the text divided by the square root
// of the summed per-token variances (inter-token covariance ignored).
inline double fast_detect_gpt_full(const TextRecord& text) {
    double num = 0.0;
    double var = 0.0;
    for (const auto& t : text.tokens) {
        if (!t.mu_logp) throw MissingFieldError("mu_logp", "required by fd_full, text_id '" + text.text_id + "'");
        if (!t.m2_logp) throw MissingFieldError("m2_logp", "required by fd_full, text_id '" + text.text_id + "'");
        num += t.logp_obs - *t.mu_logp;
        var += *t.m2_logp - (*t.mu_logp) * (*t.mu_logp);
    }
    if (!(var > 0.0)) throw NumericError("fd_full: zero total variance for text_id '" + text.text_id + "'");
    return num / std::sqrt(var);
}

}  // namespace loccal
