#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsbench {

enum class Errc {
  empty_input,
  invalid_series,
  invalid_spec,
  unsatisfiable_constraints,
  infeasible_crop,
  length_mismatch,
  undefined_correlation,
  invalid_config,
  template_incomplete,
  auth_failure,
  rate_limited,
  timeout,
  transport,
  l3_unparseable,
  l3_missing_field,
  l3_duplicate_correct,
  l3_invariant,
  malformed_verdict,
  schema_violation,
  unsupported_version,
  strategy_rejected,
  encoding_error,
  scoring_error,
  empty_run,
  render_error,
  io_error,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tsbench
