#pragma once

#include <stdexcept>
#include <string>

namespace flowrank {

/// Base class for every error raised by the library. `stage()` names the
/// pipeline stage that raised it so callers of the end-to-end pipeline can
/// attribute failures.
class Error : public std::runtime_error {
public:
  Error(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, int line = 0, int column = 0)
      : Error("frontend", what), line_(line), column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

private:
  int line_;
  int column_;
};

/// The receiver at a recommendation point has no data-flow relations.
class EmptyFlow : public Error {
public:
  explicit EmptyFlow(const std::string& what) : Error("dataflow", what) {}
};

class EmptyCandidates : public Error {
public:
  explicit EmptyCandidates(const std::string& what) : Error("candidates", what) {}
};

class EmptyCorpus : public Error {
public:
  explicit EmptyCorpus(const std::string& what) : Error("features", what) {}
};

class DegenerateData : public Error {
public:
  explicit DegenerateData(const std::string& what) : Error("forest", what) {}
};

class VersionMismatch : public Error {
public:
  VersionMismatch(const std::string& expected, const std::string& found)
      : Error("corpus", "bundle version mismatch: expected " + expected + ", found " + found),
        expected_(expected), found_(found) {}
  const std::string& expected() const noexcept { return expected_; }
  const std::string& found() const noexcept { return found_; }

private:
  std::string expected_;
  std::string found_;
};

class CorruptBundle : public Error {
public:
  explicit CorruptBundle(const std::string& what) : Error("corpus", what) {}
};

class SkippedPoint : public Error {
public:
  explicit SkippedPoint(const std::string& what) : Error("corpus", what) {}
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

}  // namespace flowrank
