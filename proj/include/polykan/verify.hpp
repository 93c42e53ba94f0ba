// SPDX-License-Identifier: Apache-2.0
//
// Self-check suite behind `polykan verify`: kernel invariants measured
// against bounds on seeded random instances.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace polykan {

enum class VerifyScope { Small, Full };
VerifyScope parse_verify_scope(std::string_view name);

/// Test-fixture faults for exercising failure reporting.
enum class InjectedFault { None, SlopeSign };
InjectedFault parse_injected_fault(std::string_view name);

struct VerifyOptions {
  VerifyScope scope = VerifyScope::Small;
  InjectedFault fault = InjectedFault::None;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct PropertyResult {
  std::string name;
  double observed;  // worst value seen
  double bound;     // pass iff observed <= bound
  bool passed;
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> properties;
  bool passed() const;
  std::vector<std::string> failures() const;
};

VerifyReport run_verify(const VerifyOptions& opts = {});

/// Fixed-width table: property, observed, bound, status.
std::string format_report(const VerifyReport& report);

}  // namespace polykan
