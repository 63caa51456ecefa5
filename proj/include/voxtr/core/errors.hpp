#ifndef VOXTR_CORE_ERRORS_HPP_
#define VOXTR_CORE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace voxtr {

// Malformed binvox header or payload structure. The message names the
// offending header line.
class BinvoxFormatError : public std::runtime_error {
 public:
  explicit BinvoxFormatError(const std::string& msg)
      : std::runtime_error("binvox format error: " + msg) {}
};

// RLE payload expanded to a cell count different from resolution^3.
class BinvoxTruncationError : public std::runtime_error {
 public:
  explicit BinvoxTruncationError(const std::string& msg)
      : std::runtime_error("binvox truncation error: " + msg) {}
};

// Dataset layout or annotation problems. The message names the object.
class ManifestError : public std::runtime_error {
 public:
  explicit ManifestError(const std::string& msg)
      : std::runtime_error("manifest error: " + msg) {}
};

// Model parameter / configuration shape mismatches.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg)
      : std::runtime_error("config error: " + msg) {}
};

// Pretrained weight import failures. The message names the tensor.
class ImportError : public std::runtime_error {
 public:
  explicit ImportError(const std::string& msg)
      : std::runtime_error("import error: " + msg) {}
};

// File I/O failures. The message names the path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg)
      : std::runtime_error("io error: " + msg) {}
};

}  // namespace voxtr

#endif  // VOXTR_CORE_ERRORS_HPP_
