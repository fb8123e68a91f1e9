#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ht {

// Numbering is shared with ht_status in hybridtarget.h; keep the two in sync.
enum class ErrorCode : int {
    Ok = 0,
    InvalidArgument = 1,
    InvalidConfig = 2,
    Io = 3,
    MissingColumn = 4,
    NonNumericCovariate = 5,
    DuplicateHouseholdId = 6,
    NotAPermutation = 7,
    UnknownHousehold = 8,
    CommunityMismatch = 9,
    ZeroVarianceColumn = 10,
    EmptyInterval = 11,
    InvalidParam = 12,
    NotPositiveDefinite = 13,
    InvalidProbabilities = 14,
    DivergentChain = 15,
    InsufficientSamples = 16,
    InvalidQuota = 17,
    AllSameOutcome = 18,
    RankDeficient = 19,
    DimensionMismatch = 20,
    QuotaMismatch = 21,
    NotEnoughCommunities = 22,
    AllZero = 23,
    SetMismatch = 24,
    UnknownCommunity = 25,
    Internal = 26,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace ht
