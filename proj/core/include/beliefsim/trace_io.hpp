#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include "beliefsim/types.hpp"

namespace beliefsim {

enum class SchemaMode {
  strict,   // unknown fields rejected
  lenient,  // unknown fields ignored
};

class TraceFileError : public std::runtime_error {
 public:
  TraceFileError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}
  explicit TraceFileError(const std::string& message)
      : std::runtime_error(message), line_(0) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// One record per line. The cohort label is not part of the file schema; it
// defaults to the file stem unless given explicitly.
Cohort load_cohort(const std::filesystem::path& path,
                   SchemaMode mode = SchemaMode::strict,
                   std::optional<std::string> label = std::nullopt);

// One line per trace, sorted by (participant_id, round).
void save_cohort(const Cohort& cohort, const std::filesystem::path& path);

std::string trace_to_json_line(const RoundTrace& trace);
RoundTrace trace_from_json_line(const std::string& line, SchemaMode mode);

/// Restrict both cohorts to the keys present in both with usable data for
/// `required` on both sides (Stage::follow == status complete, the default).
/// Drop-alignment rule: when one side lacks an instance, drop it from the
/// other side too. Throws ValidationError when the result is empty.
std::pair<Cohort, Cohort> align_cohorts(const Cohort& a, const Cohort& b,
                                        Stage required = Stage::follow);

}  // namespace beliefsim
