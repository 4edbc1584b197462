#ifndef SPHCORR_ERRORS_HPP_
#define SPHCORR_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sphcorr {

// Base of every error thrown by the library. The CLI maps the subclasses onto
// process exit codes (see tools/sphcorr.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (bad shape, out-of-range value).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values in activations, losses or gradients.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

// Correspondences or point sets that do not determine a rotation.
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

// No RANSAC hypothesis collected enough support.
class RobustFitFailure : public Error {
 public:
  using Error::Error;
};

// Too few surface points survive occlusion culling.
class DegenerateView : public Error {
 public:
  using Error::Error;
};

}  // namespace sphcorr

#endif  // SPHCORR_ERRORS_HPP_
