#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ellcone::cert {

/// One named payload value inside a step. Matrices are row-major.
/// Interval payloads store per-entry [lo, hi] pairs.
struct Item {
  enum class Kind { Scalar, Vector, Matrix, IVector, IMatrix, Bools };
  Kind kind = Kind::Scalar;
  int rows = 0;
  int cols = 0;
  std::vector<double> lo;      // point data, or lower endpoints
  std::vector<double> hi;      // upper endpoints (interval kinds only)
  std::vector<std::uint8_t> flags;  // Bools
};

/// A single replayable claim. The tag selects the replay semantics;
/// the items carry the bit-exact inputs and witness multipliers; the
/// claim line is a human-readable statement of the conclusion.
struct Step {
  std::string tag;
  std::string claim;
  std::vector<std::pair<std::string, Item>> items;

  void add_scalar(const std::string& name, double v);
  void add_vector(const std::string& name, std::span<const double> v);
  void add_matrix(const std::string& name, int rows, int cols,
                  std::span<const double> rowmajor);
  void add_ivector(const std::string& name, std::span<const double> lo,
                   std::span<const double> hi);
  void add_imatrix(const std::string& name, int rows, int cols,
                   std::span<const double> lo, std::span<const double> hi);
  void add_bools(const std::string& name, std::span<const std::uint8_t> v);

  const Item* find(const std::string& name) const;
  /// Typed lookups; throw std::invalid_argument when missing/mistyped.
  double scalar(const std::string& name) const;
  const Item& vector(const std::string& name) const;   // Vector or IVector
  const Item& matrix(const std::string& name) const;   // Matrix or IMatrix
  const Item& bools(const std::string& name) const;
};

struct Certificate {
  std::vector<Step> steps;

  void append(Certificate other);
  bool empty() const { return steps.empty(); }
  std::size_t size() const { return steps.size(); }
};

/// Line-oriented text format, version-headed, hex-float payloads.
/// serialize(parse(s)) == s for every s produced by serialize.
std::string serialize(const Certificate& c);

struct ParseError {
  int line;
  std::string message;
};

/// Throws CertificateFormatError on malformed input.
class CertificateFormatError : public std::exception {
 public:
  explicit CertificateFormatError(ParseError e) : err_(std::move(e)) {
    what_ = "line " + std::to_string(err_.line) + ": " + err_.message;
  }
  const char* what() const noexcept override { return what_.c_str(); }
  const ParseError& error() const { return err_; }

 private:
  ParseError err_;
  std::string what_;
};

Certificate parse(const std::string& text);

enum class StepVerdict { Certified, Unknown };

/// Re-checks a single step using only interval arithmetic and the LMI
/// checker. Never trusts the producer: malformed payloads come back
/// Unknown, not certified.
StepVerdict replay_step(const Step& s, std::string* why);

struct ReplayReport {
  bool all_certified = true;
  long checked = 0;
  int first_failed = -1;       // step index
  std::string failed_tag;
  std::string message;
};

ReplayReport replay(const Certificate& c);

}  // namespace ellcone::cert
