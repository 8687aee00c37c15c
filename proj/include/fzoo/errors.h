#pragma once

#include <stdexcept>
#include <string>

namespace fzoo {

// Broad failure classes. The CLI maps these onto its exit codes.
enum class ErrorClass { kConfig, kData, kNumerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorClass::kConfig, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorClass::kNumerical, what) {}
};

// Panel construction / transformation failures.
enum class PanelErrc {
  kIo,
  kEmptyFile,
  kDuplicateName,
  kEmptyName,
  kRaggedRow,
  kUnparseableNumber,
  kNonFinite,
  kDuplicatePeriod,
  kUnknownName,
  kEmptyResult,
  kInvalidFolds,
  kNegativeCost,
  kDimension,
};

const char* to_string(PanelErrc code) noexcept;

class PanelError : public Error {
 public:
  PanelError(PanelErrc code, const std::string& what)
      : Error(ErrorClass::kData, std::string(to_string(code)) + ": " + what),
        code_(code) {}
  PanelErrc code() const noexcept { return code_; }

 private:
  PanelErrc code_;
};

}  // namespace fzoo
