#pragma once

#include <stdexcept>
#include <string>

namespace dfd {

// Failure kinds surfaced to callers; tests match on these rather than on
// message text.
enum class Errc {
  file_missing,
  malformed_wav,
  unsupported_codec,
  unwritable_path,
  empty_input,
  invalid_argument,
  shape_mismatch,
  token_overflow,
  single_class,
  bad_config,
  version_mismatch,
  corrupt_file,
  io_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& msg);

}  // namespace dfd
