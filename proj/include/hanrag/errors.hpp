#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hanrag {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input at a 1-based line of a record stream.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateIdError : public ParseError {
 public:
  DuplicateIdError(std::string id, std::size_t line)
      : ParseError(line, "duplicate passage id \"" + id + "\""), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class EmptyTextError : public ParseError {
 public:
  explicit EmptyTextError(std::size_t line) : ParseError(line, "passage text is empty") {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(std::string key) : Error("not found: " + key), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hanrag
