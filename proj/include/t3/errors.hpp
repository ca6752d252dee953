#pragma once

#include <stdexcept>
#include <string>

namespace t3 {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DimMismatch : public Error {
  public:
    explicit DimMismatch(const std::string& msg) : Error(msg) {}
};

class NonFiniteInput : public Error {
  public:
    explicit NonFiniteInput(const std::string& msg) : Error(msg) {}
};

/// Inverse transform of a Fourier tensor left too much imaginary mass;
/// the tensor did not come from a real-valued original.
class ImaginaryResidueTooLarge : public Error {
  public:
    explicit ImaginaryResidueTooLarge(const std::string& msg) : Error(msg) {}
};

class SvdFailure : public Error {
  public:
    SvdFailure(const std::string& msg, int slice) : Error(msg), slice_index(slice) {}
    int slice_index;
};

class NegativeThreshold : public Error {
  public:
    explicit NegativeThreshold(const std::string& msg) : Error(msg) {}
};

class NonPositiveSigma : public Error {
  public:
    explicit NonPositiveSigma(const std::string& msg) : Error(msg) {}
};

class NonFiniteGradient : public Error {
  public:
    explicit NonFiniteGradient(const std::string& msg) : Error(msg) {}
};

class InvalidDistribution : public Error {
  public:
    explicit InvalidDistribution(const std::string& msg) : Error(msg) {}
};

class InsufficientPrototypes : public Error {
  public:
    explicit InsufficientPrototypes(const std::string& msg) : Error(msg) {}
};

class EmptyDomainBatch : public Error {
  public:
    explicit EmptyDomainBatch(const std::string& msg) : Error(msg) {}
};

class EmptyEvalSet : public Error {
  public:
    explicit EmptyEvalSet(const std::string& msg) : Error(msg) {}
};

class SpecInvalid : public Error {
  public:
    explicit SpecInvalid(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace t3
