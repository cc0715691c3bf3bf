#include "sfgmkl/error.hpp"

namespace sfgmkl {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace sfgmkl
