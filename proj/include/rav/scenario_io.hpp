#ifndef RAV_SCENARIO_IO_HPP
#define RAV_SCENARIO_IO_HPP

#include <string>
#include <vector>

#include "rav/constraints.hpp"
#include "rav/runtime.hpp"

namespace rav {

// Parse / validation failure with the offending line number (0 when the
// problem is not tied to one line).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? ("line " + std::to_string(line) + ": " + what) : what),
        line(line) {}
  std::size_t line;
};

struct Scenario {
  std::string name;
  ScenarioParams params;
  std::vector<Vec> initial_states;
  TickSchedule schedule;
  // Notices emitted while loading (defaults that were filled in).
  std::vector<std::string> notices;
};

// Loads a scenario file. Sections: [agents], [obstacles], [target],
// [gains], [comm], [fast], [bounds], [schedule]. Missing optional fields
// fall back to documented defaults with a notice; unknown keys are
// rejected with their line number.
Scenario load_scenario(const std::string& path);

// The five-agent benchmark configuration shipped as scenarios/paper_sec6.scn.
Scenario builtin_paper_sec6();

// Writes a scenario such that load_scenario(write_scenario(s)) == s
// field-exactly (numbers at 17 significant digits).
void write_scenario(const Scenario& scenario, const std::string& path);

std::string format_double(double v);  // %.17g

void write_trajectory(const std::vector<TrajectoryRow>& rows, std::size_t n, std::size_t m,
                      const std::string& path);
std::vector<TrajectoryRow> read_trajectory(const std::string& path);

void write_metrics(const std::vector<MetricsRow>& rows, const std::string& path);
std::vector<MetricsRow> read_metrics(const std::string& path);

// Human-readable run summary; returns the text that was written.
std::string write_run_summary(const RunResult& result, const ScenarioParams& params,
                              const std::string& path);

}  // namespace rav

#endif
