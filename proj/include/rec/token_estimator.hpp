/// @file token_estimator.hpp
/// @brief Model-agnostic token count estimates for length filtering and usage fallback.

#pragma once

#include <cstddef>
#include <memory>
#include <string_view>

namespace rec {

class TokenEstimator {
public:
    virtual ~TokenEstimator() = default;
    virtual std::size_t estimate(std::string_view text) const = 0;
};

/// ceil(words * per_word_milli / 1000) over whitespace-delimited words.
/// The default 1300 gives 1.3 tokens per word.
class WordCountEstimator final : public TokenEstimator {
public:
    explicit WordCountEstimator(std::size_t per_word_milli = 1300) : per_word_milli_(per_word_milli) {}
    std::size_t estimate(std::string_view text) const override;

private:
    std::size_t per_word_milli_;
};

std::size_t count_words(std::string_view text);

const TokenEstimator& default_token_estimator();

}  // namespace rec
