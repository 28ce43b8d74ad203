/*
   Copyright 2026 The milstein-mdp Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mmdp {

enum class ErrorCode {
    NonFiniteEvaluation,
    EmptyGrid,
    UnknownModelId,
    UnknownTestFunctionId,
    InvalidParams,
    DimensionMismatch,
    TruncationInsufficient,
    NotOneDimensional,
    ResidualTooLarge,
    DensityUnderflow,
    ZeroNormalization,
    StateOutsideGrid,
    InsufficientEtaGrid,
    EmptyReplicaSet,
    AllReplicasFailed,
    TooFewSamples,
    InsufficientResolution,
    ConstantsMissing,
};

inline std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::UnknownModelId: return "UnknownModelId";
    case ErrorCode::UnknownTestFunctionId: return "UnknownTestFunctionId";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TruncationInsufficient: return "TruncationInsufficient";
    case ErrorCode::NotOneDimensional: return "NotOneDimensional";
    case ErrorCode::ResidualTooLarge: return "ResidualTooLarge";
    case ErrorCode::DensityUnderflow: return "DensityUnderflow";
    case ErrorCode::ZeroNormalization: return "ZeroNormalization";
    case ErrorCode::StateOutsideGrid: return "StateOutsideGrid";
    case ErrorCode::InsufficientEtaGrid: return "InsufficientEtaGrid";
    case ErrorCode::EmptyReplicaSet: return "EmptyReplicaSet";
    case ErrorCode::AllReplicasFailed: return "AllReplicasFailed";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InsufficientResolution: return "InsufficientResolution";
    case ErrorCode::ConstantsMissing: return "ConstantsMissing";
    }
    return "Unknown";
}

/// Library-wide exception. Every failure the library reports carries a code
/// so callers (and the CLI exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// A chain produced a non-finite state. `step()` is the index k of the step
/// theta_k -> theta_{k+1} that diverged.
class DivergenceError : public Error {
public:
    DivergenceError(std::uint64_t step, const std::string& what)
        : Error(ErrorCode::NonFiniteEvaluation,
                what + " (step " + std::to_string(step) + ")"),
          step_(step)
    {
    }

    std::uint64_t step() const noexcept { return step_; }

private:
    std::uint64_t step_;
};

} // namespace mmdp
