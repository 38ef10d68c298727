#pragma once

#include "sgns/functionals.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sgns::cli {

enum class Command { Branch, Flow, Threshold, Euclidean, Verify };
enum class Spacing { Linear, Log };
enum class Format { Csv, Json };

std::string to_string(Command c);
Command parse_command(std::string_view s);

struct LambdaGrid {
  double start = 1;
  double stop = 10;
  int count = 10;
  Spacing spacing = Spacing::Linear;

  std::vector<double> values() const;
};

/// "a" (single value) or "start:stop:count".
LambdaGrid parse_lambda_grid(std::string_view s, Spacing spacing = Spacing::Linear);

struct FlowBlock {
  double m = 0.7;
  double t_end = 1;
  double dt = 0.01;
  double amplitude = 0.5;  ///< initial datum w0 = (1 + amplitude·z)^{1/β}
};

struct RunConfig {
  Command command = Command::Branch;
  Family family = Family::GNS0;
  int d = 3;
  double p = 3;
  double theta = 1;
  LambdaGrid lambda;
  bool lambda_given = false;
  int grid_N = 128;
  FlowBlock flow;
  std::string output;  ///< empty or "-" writes to stdout
  Format format = Format::Csv;
  std::uint64_t seed = 42;
  double tol = 1e-3;
  std::string suite = "all";
  int threads = 0;
};

/// Checks every parameter against the library invariants; throws ParameterError
/// naming the violated one.
void validate(const RunConfig& cfg);

nlohmann::ordered_json to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

/// Parses command-line arguments (without the program name). A --config JSON
/// file provides defaults that explicit flags override. Throws ParameterError.
RunConfig parse_args(const std::vector<std::string>& args);

/// Executes the command and writes the artifact to cfg.output, or to `out`
/// when that is empty or "-". Returns 0, or 2 when a computation or
/// verification check failed.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& log);

/// Full entry point: parse, validate, run; maps ParameterError to 1 and
/// NumericalError to 2.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sgns::cli
