#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "opcert/core/error.hpp"

namespace opcert::cli {

/// Process exit codes.
enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config = 2,
  exit_io = 3,
  exit_nan = 4,
  exit_mismatch = 5,
  exit_gp = 6,
  exit_not_spiking = 7,
};

int exit_code_for(ErrorCode code, const std::string& command);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

// Each command raises opcert::Error on failure.
void cmd_generate_data(const std::string& config, const std::string& out_dir, const Overrides& o, std::ostream& out);
void cmd_train(const std::string& config, const std::string& data_dir, const std::string& ckpt, const Overrides& o,
               std::ostream& out);
void cmd_calibrate(const std::string& ckpt, const std::string& data_dir, std::optional<double> alpha,
                   const std::string& qfield, const Overrides& o, std::ostream& out);
void cmd_evaluate(const std::string& ckpt, const std::string& qfield, const std::string& data_dir,
                  const std::string& report, const Overrides& o, std::ostream& out);
void cmd_superres(const std::string& ckpt, const std::string& qfield, const std::string& data_hi_dir,
                  const std::string& report, const std::string& qfield_out, const Overrides& o, std::ostream& out);
void cmd_spiking_report(const std::string& ckpt, const std::string& data_dir, const std::string& report,
                        const Overrides& o, std::ostream& out);

/// Parses argv, dispatches, and maps failures to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace opcert::cli
