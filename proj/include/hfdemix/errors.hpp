// SPDX-License-Identifier: Apache-2.0
//
// hfdemix: hybrid-field XL-MIMO channel estimation by convex demixing
// Copyright (C) 2026 The hfdemix authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef HFDEMIX_ERRORS_HPP
#define HFDEMIX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hfdemix
{

/// Input outside the mathematical domain of an operation (e.g. r <= 0).
class domain_error : public std::domain_error
{
  public:
    using std::domain_error::domain_error;
};

/// Inconsistent or infeasible configuration (bad rank, impossible separation, ...).
class config_error : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// Matrix/vector sizes that do not agree.
class dimension_error : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf encountered inside an iterative method.
class numerical_error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Input that makes the requested quantity meaningless (e.g. SNR of a zero channel).
class degenerate_input_error : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

namespace detail
{
inline void require_dims(bool ok, const std::string &what)
{
    if (!ok)
        throw dimension_error(what);
}
} // namespace detail

} // namespace hfdemix

#endif
