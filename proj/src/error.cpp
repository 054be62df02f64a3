#include "dfd/error.hpp"

namespace dfd {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::file_missing: return "file_missing";
    case Errc::malformed_wav: return "malformed_wav";
    case Errc::unsupported_codec: return "unsupported_codec";
    case Errc::unwritable_path: return "unwritable_path";
    case Errc::empty_input: return "empty_input";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::token_overflow: return "token_overflow";
    case Errc::single_class: return "single_class";
    case Errc::bad_config: return "bad_config";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::corrupt_file: return "corrupt_file";
    case Errc::io_error: return "io_error";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& msg)
    : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace dfd
