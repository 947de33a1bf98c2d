#include "rolekit/error.hpp"

namespace rolekit {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::input: return "E_INPUT";
    case ErrorCode::config: return "E_CONFIG";
    case ErrorCode::transport: return "E_TRANSPORT";
    case ErrorCode::backend: return "E_BACKEND";
    case ErrorCode::script_miss: return "E_SCRIPT_MISS";
    case ErrorCode::parse: return "E_PARSE";
    case ErrorCode::extraction: return "E_EXTRACTION";
    case ErrorCode::load: return "E_LOAD";
    case ErrorCode::not_found: return "E_NOT_FOUND";
    case ErrorCode::busy: return "E_BUSY";
    case ErrorCode::internal: return "E_INTERNAL";
    }
    return "E_INTERNAL";
}

} // namespace rolekit
