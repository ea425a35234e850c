#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mentorkd/tasks.hpp"

namespace mentorkd {

// Character-level vocabulary. Ids 0..3 are the specials; characters follow in
// sorted order.
class Tokenizer {
public:
    static constexpr int kBos = 0;
    static constexpr int kEos = 1;
    static constexpr int kPad = 2;
    static constexpr int kSep = 3;
    static constexpr int kSpecials = 4;

    Tokenizer() = default;
    explicit Tokenizer(std::string_view characters);

    static Tokenizer for_task(TaskKind kind);

    int vocab_size() const { return kSpecials + static_cast<int>(alphabet_.size()); }
    const std::string& alphabet() const { return alphabet_; }

    bool can_encode(std::string_view text) const;
    // Throws DataError naming the first character outside the vocabulary.
    std::vector<int> encode(std::string_view text) const;
    // Specials are dropped.
    std::string decode(std::span<const int> ids) const;

    bool operator==(const Tokenizer& other) const { return alphabet_ == other.alphabet_; }

private:
    std::string alphabet_;
    int lookup_[256] = {};
};

}  // namespace mentorkd
