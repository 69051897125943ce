#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsfall {

enum class Errc {
    MalformedRecord,
    EmptySeries,
    HeaderMismatch,
    Io,
    NonFiniteMeasurement,
    BadParams,
    LabelNotWalk,
    BadRange,
    AllTooShort,
    InsufficientSources,
    UnknownTrialType,
    MissingSensor,
    ShapeMismatch,
    BadConfig,
    SingleClassTrainSet,
    BadMagic,
    VersionMismatch,
    ChecksumMismatch,
    SingleClass,
    EmptyData,
    LengthMismatch,
    EmptyTestSet,
    SourceError,
    NotFound,
    BadKey,
    Conflict,
    Transport,
    NoModels,
};

inline std::string_view errc_name(Errc e) {
    switch (e) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::HeaderMismatch: return "HeaderMismatch";
    case Errc::Io: return "Io";
    case Errc::NonFiniteMeasurement: return "NonFiniteMeasurement";
    case Errc::BadParams: return "BadParams";
    case Errc::LabelNotWalk: return "LabelNotWalk";
    case Errc::BadRange: return "BadRange";
    case Errc::AllTooShort: return "AllTooShort";
    case Errc::InsufficientSources: return "InsufficientSources";
    case Errc::UnknownTrialType: return "UnknownTrialType";
    case Errc::MissingSensor: return "MissingSensor";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BadConfig: return "BadConfig";
    case Errc::SingleClassTrainSet: return "SingleClassTrainSet";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::SingleClass: return "SingleClass";
    case Errc::EmptyData: return "EmptyData";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyTestSet: return "EmptyTestSet";
    case Errc::SourceError: return "SourceError";
    case Errc::NotFound: return "NotFound";
    case Errc::BadKey: return "BadKey";
    case Errc::Conflict: return "Conflict";
    case Errc::Transport: return "Transport";
    case Errc::NoModels: return "NoModels";
    }
    return "Unknown";
}

// Every domain failure in the library is reported through this type. The
// message is prefixed with the owning module, e.g. "codec: MalformedRecord: ...".
class Error : public std::runtime_error {
public:
    Error(std::string_view module, Errc code, const std::string& detail)
        : std::runtime_error(std::string(module) + ": " + std::string(errc_name(code)) +
                             (detail.empty() ? "" : ": " + detail)),
          module_(module),
          code_(code) {}

    Errc code() const noexcept { return code_; }
    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
    Errc code_;
};

} // namespace tsfall
