#ifndef BOPE_ERRORS_HPP
#define BOPE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bope {

// Bad caller input: wrong dimension, out-of-bounds design, unknown name.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Linear algebra breakdown that survived jitter escalation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation called in a state that does not allow it.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch, int member = -1)
      : std::runtime_error(what), epoch_(epoch), member_(member) {}

  int epoch() const { return epoch_; }
  int member() const { return member_; }

 private:
  int epoch_;
  int member_;
};

// Configuration problem. `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message, int line = 0)
      : std::runtime_error(format(field, message, line)), field_(field), line_(line) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& field, const std::string& message, int line) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    out += field.empty() ? message : field + ": " + message;
    return out;
  }

  std::string field_;
  int line_;
};

}  // namespace bope

#endif  // BOPE_ERRORS_HPP
