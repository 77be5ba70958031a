#pragma once

// Discrete-token parroting: a D-th order Markov chain over length-H
// continuations, with additive (pseudo-count) smoothing.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctxparrot/core.hpp"

namespace ctxparrot {

using Token = int;
using TokenSeq = std::vector<Token>;

struct MarkovForecast {
    /// p(y | q) over the candidate continuations, keyed lexicographically.
    std::map<TokenSeq, double> distribution;
    /// Highest-probability continuation; ties go to the lexicographically smallest.
    TokenSeq mle;
    /// Number of context windows whose prefix equals the query.
    std::size_t query_count = 0;
};

namespace detail {

inline void check_tokens(std::span<const Token> tokens, std::size_t vocab) {
    for (std::size_t i = 0; i < tokens.size(); ++i)
        require(tokens[i] >= 0 && static_cast<std::size_t>(tokens[i]) < vocab,
                "markov: token " + std::to_string(tokens[i]) + " at index " + std::to_string(i) +
                    " outside [0, " + std::to_string(vocab) + ")");
}

} // namespace detail

/// Smoothed conditional distribution of the H tokens following query q.
///
/// Every length-(D+H) window of the context contributes one count to its
/// continuation under its D-token prefix. Each candidate continuation gets
/// its count plus alpha, then the set is normalized. Candidates are all
/// vocab tokens when H = 1; for H > 1 they are the continuations observed
/// for q, widened to every continuation observed anywhere in the context
/// when alpha > 0.
inline MarkovForecast markov_conditional(std::span<const Token> tokens, std::span<const Token> q, std::size_t H,
                                         double alpha, std::size_t vocab) {
    const std::size_t D = q.size();
    require(D >= 1 && H >= 1, "markov: D and H must be >= 1");
    require(alpha >= 0.0, "markov: alpha must be >= 0");
    require(vocab >= 1, "markov: vocab must be >= 1");
    require(tokens.size() >= D + H, "markov: context length " + std::to_string(tokens.size()) +
                                        " is below D + H = " + std::to_string(D + H));
    detail::check_tokens(tokens, vocab);
    detail::check_tokens(q, vocab);

    std::map<TokenSeq, double> counts;
    std::map<TokenSeq, double> seen_anywhere;
    std::size_t query_count = 0;
    for (std::size_t a = 0; a + D + H <= tokens.size(); ++a) {
        TokenSeq y(tokens.begin() + static_cast<std::ptrdiff_t>(a + D),
                   tokens.begin() + static_cast<std::ptrdiff_t>(a + D + H));
        seen_anywhere[y] = 0.0;
        if (std::equal(q.begin(), q.end(), tokens.begin() + static_cast<std::ptrdiff_t>(a))) {
            counts[y] += 1.0;
            ++query_count;
        }
    }
    if (query_count == 0 && alpha == 0.0)
        throw InvalidArgument("markov: query prefix never occurs in the context and alpha = 0; "
                              "the unsmoothed estimator is undefined");

    std::map<TokenSeq, double> cand;
    if (alpha > 0.0) {
        if (H == 1) {
            for (std::size_t v = 0; v < vocab; ++v) cand[TokenSeq{static_cast<Token>(v)}] = 0.0;
        } else {
            cand = seen_anywhere;
        }
    }
    for (const auto &[y, c] : counts) cand[y] = c;

    double total = 0.0;
    for (auto &[y, c] : cand) {
        c += alpha;
        total += c;
    }
    MarkovForecast out;
    out.query_count = query_count;
    double best = -1.0;
    for (auto &[y, c] : cand) {
        const double p = c / total;
        out.distribution.emplace(y, p);
        if (p > best) {
            best = p;
            out.mle = y;
        }
    }
    return out;
}

/// Forecast from the final D tokens of the context.
inline MarkovForecast markov_parrot(std::span<const Token> tokens, std::size_t D, std::size_t H, double alpha,
                                    std::size_t vocab) {
    require(D >= 1 && tokens.size() >= D, "markov_parrot: context shorter than D");
    return markov_conditional(tokens, tokens.subspan(tokens.size() - D), H, alpha, vocab);
}

} // namespace ctxparrot
