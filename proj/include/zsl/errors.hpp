#pragma once

#include <stdexcept>
#include <string>

namespace zsl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define ZSL_ERROR_TYPE(Name)                       \
  struct Name : Error {                            \
    explicit Name(const std::string& msg = #Name)  \
        : Error(std::string(#Name) + ": " + msg) {} \
  }

ZSL_ERROR_TYPE(ZeroMarginal);
ZSL_ERROR_TYPE(ZeroConditioner);
ZSL_ERROR_TYPE(NotAbsolutelyContinuous);
ZSL_ERROR_TYPE(BadRank);
ZSL_ERROR_TYPE(DimensionMismatch);
ZSL_ERROR_TYPE(NotSymmetric);
ZSL_ERROR_TYPE(DegenerateData);
ZSL_ERROR_TYPE(EmptySample);
ZSL_ERROR_TYPE(TooFewSamples);
ZSL_ERROR_TYPE(TooFewValues);
ZSL_ERROR_TYPE(KernelMismatch);
ZSL_ERROR_TYPE(RankDeficient);
ZSL_ERROR_TYPE(DomainError);
ZSL_ERROR_TYPE(SingularCovariance);
ZSL_ERROR_TYPE(MissingClass);
ZSL_ERROR_TYPE(BadK);
ZSL_ERROR_TYPE(WhiteningFailure);
ZSL_ERROR_TYPE(NonFiniteLoss);
ZSL_ERROR_TYPE(ConfigError);
ZSL_ERROR_TYPE(Unsupported);

#undef ZSL_ERROR_TYPE

// Masses below this threshold are treated as exact zeros when forming
// conditionals and density ratios.
inline constexpr double kMassTol = 1e-14;

}  // namespace zsl
