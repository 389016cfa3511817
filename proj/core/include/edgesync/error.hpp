#pragma once

#include <stdexcept>
#include <string>

namespace edgesync {

enum class Errc {
  InvalidArgument,
  NonFinite,
  NegativeEntry,
  ZeroSum,
  DimensionMismatch,
  NonPositiveWindow,
  EmptyCache,
  BankNotFull,
  LengthMismatch,
  EmptyMap,
  EmptyTrainSet,
  ModelRejectedHyperparams,
  NonFiniteLoss,
  SingularKernel,
  ObjectiveFailure,
  EmptyList,
  OversizePayload,
  BadMagic,
  Truncated,
  UnknownVariant,
  TrailingBytes,
  StaleVersion,
  VersionGap,
  UnknownEdge,
  ChecksumMismatch,
  NoTrainableEdge,
  Config,
  Io,
};

const char* to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace edgesync
