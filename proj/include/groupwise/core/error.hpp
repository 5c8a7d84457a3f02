// Copyright 2026 The Groupwise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GROUPWISE__CORE__ERROR_HPP_
#define GROUPWISE__CORE__ERROR_HPP_

#include <stdexcept>
#include <string>

namespace groupwise
{

/// Base of every error raised by the library. `module()` names the stage
/// that produced it so the CLI can prefix diagnostics.
class Error : public std::runtime_error
{
public:
  Error(std::string module, const std::string & what)
  : std::runtime_error(what), module_(std::move(module))
  {
  }

  const std::string & module() const noexcept { return module_; }

private:
  std::string module_;
};

/// Bad or inconsistent input data (maps to CLI exit code 2).
class DataError : public Error
{
public:
  using Error::Error;
};

/// Two vehicles overlap where the kinematics require a positive gap.
class OverlapError : public DataError
{
public:
  using DataError::DataError;
};

/// Fitting or numerical failure (maps to CLI exit code 3).
class NumericError : public Error
{
public:
  using Error::Error;
};

/// Invalid arguments or configuration (maps to CLI exit code 1).
class UsageError : public Error
{
public:
  using Error::Error;
};

}  // namespace groupwise

#endif  // GROUPWISE__CORE__ERROR_HPP_
