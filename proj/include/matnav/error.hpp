// Copyright 2026 The matnav Developers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

/// @file
/// Structured error type shared by every matnav module.

#include <stdexcept>
#include <string>
#include <string_view>

namespace matnav {

/// Every failure mode a matnav operation can report. The names are
/// stable and appear verbatim in JSON payloads and CLI diagnostics.
enum class ErrorKind {
    InvalidArgument,
    UnknownElement,
    MalformedFormula,
    MissingMass,
    InvalidLattice,
    InvalidStructure,
    MissingCellTag,
    MissingAtomLoop,
    NumericParse,
    UnsupportedSymmetry,
    MalformedCif,
    InvalidWindow,
    EmptyCorpus,
    SchemaViolation,
    InsufficientData,
    NetworkError,
    AuthError,
    DecodeError,
    BudgetExhausted,
    Timeout,
    AsymmetricTensor,
    SingularTensor,
    NonPositiveModulus,
    NonPositiveDensity,
    MissingRadius,
    MissingOxidationStates,
    NoPrototypes,
    MissingElementData,
    DegenerateFeatures,
    SchemaMismatch,
    EmptyTestSet,
    InfeasibleComposition,
    MissingEnergy,
    EmptySeries,
    StageOrder,
    AlreadyRunning,
    NotReady,
    NotFound,
    ConfigError,
    IoError,
    ExternalProcess,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace matnav
