#pragma once

#include <stdexcept>
#include <string>

namespace quitlab {

// Bad arguments from the caller: dimension mismatches, non-finite inputs,
// invalid parameter combinations. Maps to CLI exit code 1.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Runtime failures on otherwise valid requests: I/O, malformed files,
// insufficient data. Maps to CLI exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class MiningErrorKind {
    NoNegative,           // every sample shares the anchor's place
    NoPositive,           // anchor is the only sample of its place
    FewerPositivesThanK,  // strict-k policy and not enough positives
    NotEnoughNegatives,   // fewer than two distinct negatives
    NoPositivePair,       // batch has no same-place pair
    NoNegativePair,       // batch has no cross-place pair
};

struct MiningError : std::runtime_error {
    MiningErrorKind kind;
    MiningError(MiningErrorKind k, const std::string& msg)
        : std::runtime_error(msg), kind(k) {}
};

}  // namespace quitlab
