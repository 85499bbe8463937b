#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace plad {

using Engine = std::mt19937_64;

// Independent stream for each (seed, tag...) tuple.
inline Engine make_engine(std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    words.reserve(key.size() * 2);
    for (std::uint64_t k : key) {
        words.push_back(static_cast<std::uint32_t>(k));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Engine(seq);
}

// Stream tags, so that changing one consumer never shifts another.
namespace stream {
inline constexpr std::uint64_t classifier_init = 1;
inline constexpr std::uint64_t perturbator_init = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t shuffle = 4;
inline constexpr std::uint64_t split = 5;
inline constexpr std::uint64_t synthetic = 6;
inline constexpr std::uint64_t pairs = 7;
}  // namespace stream

}  // namespace plad
