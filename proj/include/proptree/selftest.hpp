// Acceptance checks shared by the test binaries and the `selftest` command.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace proptree::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
  double seconds = 0.0;
};

std::string format_result(const CheckResult& r);

CheckResult check_gradients(std::size_t seeds = 20);
CheckResult check_edmonds(std::size_t graphs_per_size = 100);
CheckResult check_mtt(std::size_t draws = 50);
CheckResult check_crf(std::size_t seeds = 50);
CheckResult check_normalization(std::size_t draws = 100);
CheckResult check_roundtrip(std::size_t documents = 1000);

struct OverfitOptions {
  std::size_t documents = 50;
  std::size_t hidden = 16;
  std::size_t max_epochs = 200;
  double learning_rate = 1e-2;
  double time_limit_seconds = 600.0;
  std::uint64_t seed = 7;
};
CheckResult check_overfit(const OverfitOptions& options = {});

struct OrderingOptions {
  std::size_t documents = 500;
  double lexical_ambiguity = 0.3;
  std::size_t hidden = 32;
  std::size_t epochs = 20;
  double learning_rate = 1e-2;  // joint model; the pipeline keeps its own rate
  std::uint64_t seed = 11;
};
CheckResult check_ordering(const OrderingOptions& options = {});

/// Skipped when `corpus` does not exist.
CheckResult check_dataset(const std::filesystem::path& corpus);

/// The fast oracle checks, in a fixed order.
std::vector<CheckResult> run_oracle_suite();

}  // namespace proptree::selftest
