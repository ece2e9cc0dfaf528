#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace scfd {

enum class Errc {
    MalformedLine,
    UnbalancedRegion,
    UnknownSyscall,
    EmptyInput,
    InsufficientData,
    DimensionMismatch,
    SingularCovariance,
    OutOfRange,
    Io,
    VersionMismatch,
    CorruptProfile,
    EmptyCorpus,
};

const char* errc_name(Errc c);

/// Single exception type for the library; `detail` carries a line number,
/// a version, or -1 when not applicable.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what, std::int64_t detail = -1)
        : std::runtime_error(what), code_(code), detail_(detail) {}

    Errc code() const noexcept { return code_; }
    std::int64_t detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::int64_t detail_;
};

}  // namespace scfd
