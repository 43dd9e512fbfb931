#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace saifdl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class Task { Classification, Regression };

inline const char* task_name(Task t) {
    return t == Task::Classification ? "classification" : "regression";
}

// Error hierarchy shared by all modules. Parse-side errors carry source
// positions; numeric errors carry only a message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class SourceError : public Error {
public:
    SourceError(const std::string& msg, int line, int column)
        : Error(msg + " at line " + std::to_string(line) + ", column " +
                std::to_string(column)),
          line_(line),
          column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

class LexError : public SourceError {
    using SourceError::SourceError;
};

class ParseError : public SourceError {
    using SourceError::SourceError;
};

class ValidationError : public SourceError {
    using SourceError::SourceError;
};

class NumericError : public Error {
    using Error::Error;
};

class DomainError : public Error {
    using Error::Error;
};

class ShapeError : public Error {
    using Error::Error;
};

class IndexError : public Error {
    using Error::Error;
};

class TaskMismatchError : public Error {
    using Error::Error;
};

class StateError : public Error {
    using Error::Error;
};

class IoError : public Error {
    using Error::Error;
};

class ConfigError : public Error {
    using Error::Error;
};

class DivergedError : public Error {
public:
    DivergedError(const std::string& msg, int epoch, Index batch)
        : Error(msg + " (epoch " + std::to_string(epoch) + ", batch " +
                std::to_string(batch) + ")"),
          epoch_(epoch),
          batch_(batch) {}

    int epoch() const { return epoch_; }
    Index batch() const { return batch_; }

private:
    int epoch_;
    Index batch_;
};

/// Index of the row maximum; equal maxima resolve to the lowest index.
inline Index argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    Index best = 0;
    for (Index j = 1; j < row.size(); ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

}  // namespace saifdl
