#pragma once

#include <stdexcept>
#include <string>

namespace oncosurv {

// Error kinds map to CLI exit codes: config=1, data=2, backend=3.
enum class ErrorKind { config, data, backend, internal };

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    int exit_code() const noexcept {
        switch (kind_) {
            case ErrorKind::config: return 1;
            case ErrorKind::data: return 2;
            case ErrorKind::backend: return 3;
            case ErrorKind::internal: return 1;
        }
        return 1;
    }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorKind::config, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void throw_backend(const std::string& msg) { throw Error(ErrorKind::backend, msg); }

}  // namespace oncosurv
