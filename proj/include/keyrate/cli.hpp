#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "keyrate/dms.hpp"
#include "keyrate/gaussmodel.hpp"
#include "keyrate/musolver.hpp"

namespace keyrate::cli {

/// Input or validation failure; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DiscreteBlock {
  DiscreteSource source;
  int card_u = 2;
  int card_v = 2;
  std::int64_t samples = 2000;
};

struct OutputBlock {
  std::string path;
  std::string format;
  std::string unit = "nats";
};

struct RunConfig {
  std::optional<SourceModel> model;
  std::optional<DiscreteBlock> discrete;
  SolverOptions solver;
  std::vector<MuWeights> sweep;
  std::optional<MuWeights> mu;
  std::int64_t samples = 10000;
  OutputBlock output;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Entry point shared by the binary and the tests. Returns 0 on success, 1 on
/// input errors, 2 on non-convergence or failed verification.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace keyrate::cli
