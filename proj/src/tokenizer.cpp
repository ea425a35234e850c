#include "mentorkd/tokenizer.hpp"

#include <algorithm>
#include <set>

#include "mentorkd/error.hpp"

namespace mentorkd {

Tokenizer::Tokenizer(std::string_view characters) {
    const std::set<unsigned char> unique(characters.begin(), characters.end());
    alphabet_.assign(unique.begin(), unique.end());
    std::fill(std::begin(lookup_), std::end(lookup_), -1);
    for (std::size_t i = 0; i < alphabet_.size(); ++i) {
        lookup_[static_cast<unsigned char>(alphabet_[i])] = kSpecials + static_cast<int>(i);
    }
}

Tokenizer Tokenizer::for_task(TaskKind kind) { return Tokenizer(task_alphabet(kind)); }

bool Tokenizer::can_encode(std::string_view text) const {
    return std::all_of(text.begin(), text.end(),
                       [this](char c) { return lookup_[static_cast<unsigned char>(c)] >= kSpecials; });
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (const char c : text) {
        const int id = lookup_[static_cast<unsigned char>(c)];
        if (id < kSpecials) {
            throw DataError(std::string("character '") + c + "' is not in the tokenizer vocabulary");
        }
        ids.push_back(id);
    }
    return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    out.reserve(ids.size());
    for (const int id : ids) {
        if (id >= kSpecials && id < vocab_size()) {
            out += alphabet_[static_cast<std::size_t>(id - kSpecials)];
        }
    }
    return out;
}

}  // namespace mentorkd
