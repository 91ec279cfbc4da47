/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace qdaqp {

/// Error categories raised by the engine. The C API maps each one to a
/// distinct status code.
enum class ErrorKind {
    kDimension,       // vector/table dimensionality mismatch
    kEmptySelection,  // AVG/MIN/MAX over zero rows
    kState,           // operation invalid in the current object state
    kNumerical,       // singular system, non-finite result
    kDegenerate,      // distribution fit impossible (constant/empty sample)
    kConfig,          // invalid configuration value
    kGeneration,      // workload generator exhausted its draw budget
    kIo,              // file read/write or parse failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

const char* to_string(ErrorKind kind) noexcept;

}  // namespace qdaqp
