/*
 * Copyright 2026 The gpdens Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GPDENS_CORE_SELFTEST_HPP_
#define GPDENS_CORE_SELFTEST_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace gpdens {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;
  bool all_passed() const {
    for (const SelftestCheck& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }
};

// Quick oracle suite: Monte-Carlo moment matching, finite-difference
// gradients, leave-one-out downdates, the deterministic latent limit and a
// quadrature normalization check.  Runs in a few seconds.
SelftestReport run_selftest(std::uint64_t seed = 0);

std::string format_report(const SelftestReport& report);

}  // namespace gpdens

#endif  // GPDENS_CORE_SELFTEST_HPP_
