// Copyright 2026 The ECAM Authors
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

#ifndef ECAM__ERRORS_HPP_
#define ECAM__ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ecam
{

// Malformed input file (bad PGM header, unparseable row, ...).
class FormatError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Input is well-formed but violates a documented invariant.
class ValidationError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Homogeneous coordinate collapsed to zero during world->pixel mapping.
class ProjectionError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class IndexError : public std::out_of_range
{
public:
  using std::out_of_range::out_of_range;
};

// Non-finite value encountered in a loss or gradient.
class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace ecam

#endif  // ECAM__ERRORS_HPP_
