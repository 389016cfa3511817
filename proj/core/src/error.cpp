#include "edgesync/error.hpp"

namespace edgesync {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NegativeEntry: return "NegativeEntry";
    case Errc::ZeroSum: return "ZeroSum";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonPositiveWindow: return "NonPositiveWindow";
    case Errc::EmptyCache: return "EmptyCache";
    case Errc::BankNotFull: return "BankNotFull";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyMap: return "EmptyMap";
    case Errc::EmptyTrainSet: return "EmptyTrainSet";
    case Errc::ModelRejectedHyperparams: return "ModelRejectedHyperparams";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::SingularKernel: return "SingularKernel";
    case Errc::ObjectiveFailure: return "ObjectiveFailure";
    case Errc::EmptyList: return "EmptyList";
    case Errc::OversizePayload: return "OversizePayload";
    case Errc::BadMagic: return "BadMagic";
    case Errc::Truncated: return "Truncated";
    case Errc::UnknownVariant: return "UnknownVariant";
    case Errc::TrailingBytes: return "TrailingBytes";
    case Errc::StaleVersion: return "StaleVersion";
    case Errc::VersionGap: return "VersionGap";
    case Errc::UnknownEdge: return "UnknownEdge";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::NoTrainableEdge: return "NoTrainableEdge";
    case Errc::Config: return "Config";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace edgesync
