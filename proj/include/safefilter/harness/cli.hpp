// Copyright 2026 The safefilter Authors
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

#pragma once

#include <iosfwd>

namespace safefilter::harness {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitEmptySafeSet = 2,
  kExitMissingFile = 3,
  kExitDimensionMismatch = 4,
  kExitConfigError = 5,
};

/// Entry point of the `safefilter` command line tool (subcommands synth, train, eval, verify).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace safefilter::harness
