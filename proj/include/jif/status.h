// status.h - error propagation for jif toolkit operations.
//
// Status<T> holds either a value or an Error, in the spirit of std::expected
// (not available in C++20).

#pragma once

#include <cassert>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace jif {

enum class Errc {
  // container
  kBadMagic,
  kBadChecksum,
  kTruncatedFile,
  kTableInvariantViolation,
  kInvariantViolation,
  kTraceOutOfRange,
  // overlay trees
  kUnsortedInput,
  kOverlappingIntervals,
  kUnmapped,
  kMissingBackingFile,
  // builder
  kRangeOutsideVma,
  kStackPointerOutsideVma,
  // metadata
  kTruncatedRecord,
  kUnknownTag,
  kNoSuchFd,
  kAlreadyResolved,
  // simulator / io
  kBadTraceRecord,
  kSimCrash,
  kEmptyInput,
  kBadConfig,
  kIoError,
  kParseError,
};

std::string_view ErrcName(Errc code);

class Error {
 public:
  Error(Errc code, std::string detail = {})
      : code_(code), detail_(std::move(detail)) {}

  [[nodiscard]] Errc code() const { return code_; }
  [[nodiscard]] const std::string &detail() const { return detail_; }
  [[nodiscard]] std::string ToString() const;

 private:
  Errc code_;
  std::string detail_;
};

std::ostream &operator<<(std::ostream &os, const Error &err);

template <typename T>
class [[nodiscard]] Status {
 public:
  Status(T value) : v_(std::move(value)) {}
  Status(Error err) : v_(std::move(err)) {}

  explicit operator bool() const { return ok(); }
  [[nodiscard]] bool ok() const { return v_.index() == 0; }

  T &value() & {
    assert(ok());
    return std::get<0>(v_);
  }
  const T &value() const & {
    assert(ok());
    return std::get<0>(v_);
  }
  T &&value() && {
    assert(ok());
    return std::get<0>(std::move(v_));
  }
  T &operator*() & { return value(); }
  const T &operator*() const & { return value(); }
  T &&operator*() && { return std::move(*this).value(); }
  T *operator->() { return &value(); }
  const T *operator->() const { return &value(); }

  [[nodiscard]] const Error &error() const {
    assert(!ok());
    return std::get<1>(v_);
  }

 private:
  std::variant<T, Error> v_;
};

template <>
class [[nodiscard]] Status<void> {
 public:
  Status() = default;
  Status(Error err) : err_(std::move(err)), ok_(false) {}

  explicit operator bool() const { return ok_; }
  [[nodiscard]] bool ok() const { return ok_; }
  [[nodiscard]] const Error &error() const {
    assert(!ok_);
    return err_;
  }

 private:
  Error err_{Errc::kIoError};
  bool ok_ = true;
};

inline Error MakeError(Errc code, std::string detail = {}) {
  return Error(code, std::move(detail));
}

template <typename T>
Error MakeError(const Status<T> &s) {
  return s.error();
}

}  // namespace jif
