// Shared helpers for the test binaries.
#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace testing {

inline std::filesystem::path data_path(const std::string& relative) {
    return std::filesystem::path(REC_TEST_DATA) / relative;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string data(const std::string& relative) { return slurp(data_path(relative)); }

inline void spit(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

/// ASCII whitespace runs collapsed to one space, ends trimmed.
inline std::string squash(std::string_view s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
            pending = !out.empty();
            continue;
        }
        if (pending) out += ' ';
        pending = false;
        out += c;
    }
    return out;
}

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("rec_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline const std::vector<std::string>& word_pool() {
    static const std::vector<std::string> words{
        "agent", "customer", "order", "refund", "gift", "wrap", "item", "price", "delivery", "account",
        "photosynthesis", "plant", "oxygen", "energy", "cell", "process", "light", "water", "glucose", "report",
        "the", "a", "of", "and", "to", "is", "was", "for", "with", "on", "café", "naïve", "señor", "Zürich"};
    return words;
}

inline std::string random_word(std::mt19937& rng) {
    const auto& pool = word_pool();
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
}

/// Random multi-sentence text with mixed whitespace and some non-ASCII words.
inline std::string random_text(std::mt19937& rng, int min_sentences = 1, int max_sentences = 6) {
    const int sentences = std::uniform_int_distribution<int>(min_sentences, max_sentences)(rng);
    std::string text;
    for (int s = 0; s < sentences; ++s) {
        if (!text.empty()) text += (rng() % 5 == 0) ? "\n" : " ";
        const int words = std::uniform_int_distribution<int>(2, 9)(rng);
        for (int w = 0; w < words; ++w) {
            if (w) text += (rng() % 11 == 0) ? "  " : " ";
            std::string word = random_word(rng);
            if (w == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
            text += word;
        }
        text += ".?!"[rng() % 3];
    }
    return text;
}

}  // namespace testing
