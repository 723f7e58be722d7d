/* Copyright 2026 The SBNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <iosfwd>

namespace sbnn::cli {

/// Process exit codes, one per failure class.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,      // bad flags, config file or option values
  kData = 3,        // unreadable dataset or input shape mismatch
  kDivergence = 4,  // non-finite training loss
  kModel = 5,       // unreadable or corrupt model/snapshot file
  kOutput = 6,      // cannot write an artifact
};

/// Entry point shared by the sbnn tool and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sbnn::cli
