#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ellcone::lang {

struct SourceLoc {
  int line = 1;
  int col = 1;
};

class ProgramParseError : public std::exception {
 public:
  ProgramParseError(SourceLoc loc, std::string msg)
      : loc_(loc), msg_(std::move(msg)) {
    what_ = "line " + std::to_string(loc_.line) + ", col " +
            std::to_string(loc_.col) + ": " + msg_;
  }
  const char* what() const noexcept override { return what_.c_str(); }
  const SourceLoc& where() const { return loc_; }

 private:
  SourceLoc loc_;
  std::string msg_;
  std::string what_;
};

/// One statement of the loop language. Scalar assignments are stored
/// as full-state affine maps x <- A x + b.
struct Statement {
  enum class Kind { Assign, Choose, Loop, Nop };
  Kind kind = Kind::Nop;
  int point_id = -1;
  SourceLoc loc;

  // Assign
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  // Choose
  std::vector<std::vector<Statement>> branches;

  // Loop
  std::string counter;
  std::optional<double> bound;
  std::vector<Statement> body;
};

struct Program {
  std::vector<std::string> vars;
  bool has_init = false;
  Eigen::VectorXd init_lo;  // box; equal endpoints encode a point
  Eigen::VectorXd init_hi;
  std::vector<Statement> body;
  int num_points = 0;
};

/// Parses the loop language; throws ProgramParseError with a location
/// on syntax errors, undeclared variables, or duplicate counters.
Program parse(const std::string& text);

/// Syntactic per-counter bounds: a literal loop bound B gives [0, B];
/// unbounded loops get [0, horizon] and are flagged horizon-relative.
struct CounterInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool horizon_relative = false;
};

std::map<std::string, CounterInterval> counter_intervals(const Program& p,
                                                         double horizon);

}  // namespace ellcone::lang
