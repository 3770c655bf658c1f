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


#ifndef HFDEMIX_VERSION_HPP
#define HFDEMIX_VERSION_HPP

#define HFDEMIX_VERSION_MAJOR 0
#define HFDEMIX_VERSION_MINOR 1
#define HFDEMIX_VERSION_PATCH 0

namespace hfdemix
{
inline constexpr const char *version_string = "0.1.0";
}

#endif
