#include "ellcone/certificate.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace ellcone::cert {

namespace {

constexpr const char* kHeader = "ellcone-certificate v1";

std::string hex_double(double v) {
  if (std::isnan(v)) throw std::invalid_argument("certificate: NaN payload");
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& tok, int line) {
  if (tok == "inf") return HUGE_VAL;
  if (tok == "-inf") return -HUGE_VAL;
  const char* s = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end != s + tok.size() || std::isnan(v))
    throw CertificateFormatError({line, "bad number '" + tok + "'"});
  return v;
}

const char* kind_name(Item::Kind k) {
  switch (k) {
    case Item::Kind::Scalar: return "scalar";
    case Item::Kind::Vector: return "vec";
    case Item::Kind::Matrix: return "mat";
    case Item::Kind::IVector: return "ivec";
    case Item::Kind::IMatrix: return "imat";
    case Item::Kind::Bools: return "bools";
  }
  return "?";
}

}  // namespace

void Step::add_scalar(const std::string& name, double v) {
  Item it;
  it.kind = Item::Kind::Scalar;
  it.rows = 1;
  it.cols = 1;
  it.lo = {v};
  items.emplace_back(name, std::move(it));
}

void Step::add_vector(const std::string& name, std::span<const double> v) {
  Item it;
  it.kind = Item::Kind::Vector;
  it.rows = int(v.size());
  it.cols = 1;
  it.lo.assign(v.begin(), v.end());
  items.emplace_back(name, std::move(it));
}

void Step::add_matrix(const std::string& name, int rows, int cols,
                      std::span<const double> rowmajor) {
  if (int(rowmajor.size()) != rows * cols)
    throw std::invalid_argument("add_matrix: size mismatch");
  Item it;
  it.kind = Item::Kind::Matrix;
  it.rows = rows;
  it.cols = cols;
  it.lo.assign(rowmajor.begin(), rowmajor.end());
  items.emplace_back(name, std::move(it));
}

void Step::add_ivector(const std::string& name, std::span<const double> lo,
                       std::span<const double> hi) {
  if (lo.size() != hi.size())
    throw std::invalid_argument("add_ivector: size mismatch");
  Item it;
  it.kind = Item::Kind::IVector;
  it.rows = int(lo.size());
  it.cols = 1;
  it.lo.assign(lo.begin(), lo.end());
  it.hi.assign(hi.begin(), hi.end());
  items.emplace_back(name, std::move(it));
}

void Step::add_imatrix(const std::string& name, int rows, int cols,
                       std::span<const double> lo, std::span<const double> hi) {
  if (int(lo.size()) != rows * cols || lo.size() != hi.size())
    throw std::invalid_argument("add_imatrix: size mismatch");
  Item it;
  it.kind = Item::Kind::IMatrix;
  it.rows = rows;
  it.cols = cols;
  it.lo.assign(lo.begin(), lo.end());
  it.hi.assign(hi.begin(), hi.end());
  items.emplace_back(name, std::move(it));
}

void Step::add_bools(const std::string& name,
                     std::span<const std::uint8_t> v) {
  Item it;
  it.kind = Item::Kind::Bools;
  it.rows = int(v.size());
  it.cols = 1;
  it.flags.assign(v.begin(), v.end());
  items.emplace_back(name, std::move(it));
}

const Item* Step::find(const std::string& name) const {
  for (const auto& [n, it] : items)
    if (n == name) return &it;
  return nullptr;
}

double Step::scalar(const std::string& name) const {
  const Item* it = find(name);
  if (!it || it->kind != Item::Kind::Scalar)
    throw std::invalid_argument("step " + tag + ": missing scalar " + name);
  return it->lo[0];
}

const Item& Step::vector(const std::string& name) const {
  const Item* it = find(name);
  if (!it ||
      (it->kind != Item::Kind::Vector && it->kind != Item::Kind::IVector))
    throw std::invalid_argument("step " + tag + ": missing vector " + name);
  return *it;
}

const Item& Step::matrix(const std::string& name) const {
  const Item* it = find(name);
  if (!it ||
      (it->kind != Item::Kind::Matrix && it->kind != Item::Kind::IMatrix))
    throw std::invalid_argument("step " + tag + ": missing matrix " + name);
  return *it;
}

const Item& Step::bools(const std::string& name) const {
  const Item* it = find(name);
  if (!it || it->kind != Item::Kind::Bools)
    throw std::invalid_argument("step " + tag + ": missing bools " + name);
  return *it;
}

void Certificate::append(Certificate other) {
  steps.insert(steps.end(), std::make_move_iterator(other.steps.begin()),
               std::make_move_iterator(other.steps.end()));
}

std::string serialize(const Certificate& c) {
  std::ostringstream out;
  out << kHeader << "\n";
  for (const Step& s : c.steps) {
    out << "step " << s.tag << "\n";
    out << "claim " << s.claim << "\n";
    for (const auto& [name, it] : s.items) {
      out << kind_name(it.kind) << " " << name;
      switch (it.kind) {
        case Item::Kind::Scalar:
          out << " " << hex_double(it.lo[0]);
          break;
        case Item::Kind::Vector:
          out << " " << it.rows;
          for (double v : it.lo) out << " " << hex_double(v);
          break;
        case Item::Kind::Matrix:
          out << " " << it.rows << " " << it.cols;
          for (double v : it.lo) out << " " << hex_double(v);
          break;
        case Item::Kind::IVector:
          out << " " << it.rows;
          for (int i = 0; i < it.rows; ++i)
            out << " " << hex_double(it.lo[i]) << " " << hex_double(it.hi[i]);
          break;
        case Item::Kind::IMatrix:
          out << " " << it.rows << " " << it.cols;
          for (size_t i = 0; i < it.lo.size(); ++i)
            out << " " << hex_double(it.lo[i]) << " " << hex_double(it.hi[i]);
          break;
        case Item::Kind::Bools:
          out << " " << it.rows;
          for (std::uint8_t b : it.flags) out << " " << int(b != 0);
          break;
      }
      out << "\n";
    }
    out << "end\n";
  }
  return out.str();
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

long parse_count(const std::string& tok, int line) {
  char* end = nullptr;
  long v = std::strtol(tok.c_str(), &end, 10);
  if (*end != '\0' || v < 0 || v > 1'000'000)
    throw CertificateFormatError({line, "bad count '" + tok + "'"});
  return v;
}

}  // namespace

Certificate parse(const std::string& text) {
  Certificate cert;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;

  if (!std::getline(in, line) || line != kHeader)
    throw CertificateFormatError({1, "missing or unsupported header"});
  lineno = 1;

  Step cur;
  bool in_step = false;
  bool have_claim = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (!in_step) {
      auto toks = split_ws(line);
      if (toks.size() != 2 || toks[0] != "step")
        throw CertificateFormatError({lineno, "expected 'step <tag>'"});
      cur = Step{};
      cur.tag = toks[1];
      in_step = true;
      have_claim = false;
      continue;
    }
    if (line.rfind("claim ", 0) == 0 || line == "claim") {
      cur.claim = line.size() > 6 ? line.substr(6) : "";
      have_claim = true;
      continue;
    }
    if (line == "end") {
      if (!have_claim)
        throw CertificateFormatError({lineno, "step without claim"});
      cert.steps.push_back(std::move(cur));
      in_step = false;
      continue;
    }
    auto toks = split_ws(line);
    if (toks.size() < 2)
      throw CertificateFormatError({lineno, "bad item line"});
    const std::string& kind = toks[0];
    const std::string& name = toks[1];
    size_t p = 2;
    auto need = [&](size_t k) {
      if (toks.size() != p + k)
        throw CertificateFormatError({lineno, "wrong token count for " + name});
    };
    Item it;
    if (kind == "scalar") {
      need(1);
      it.kind = Item::Kind::Scalar;
      it.rows = it.cols = 1;
      it.lo = {parse_double(toks[p], lineno)};
    } else if (kind == "vec" || kind == "ivec") {
      long k = parse_count(toks[p++], lineno);
      bool iv = kind == "ivec";
      need(size_t(k) * (iv ? 2 : 1));
      it.kind = iv ? Item::Kind::IVector : Item::Kind::Vector;
      it.rows = int(k);
      it.cols = 1;
      for (long i = 0; i < k; ++i) {
        it.lo.push_back(parse_double(toks[p + (iv ? 2 * i : i)], lineno));
        if (iv) it.hi.push_back(parse_double(toks[p + 2 * i + 1], lineno));
      }
    } else if (kind == "mat" || kind == "imat") {
      long r = parse_count(toks[p++], lineno);
      long c = parse_count(toks[p++], lineno);
      bool iv = kind == "imat";
      need(size_t(r) * c * (iv ? 2 : 1));
      it.kind = iv ? Item::Kind::IMatrix : Item::Kind::Matrix;
      it.rows = int(r);
      it.cols = int(c);
      for (long i = 0; i < r * c; ++i) {
        it.lo.push_back(parse_double(toks[p + (iv ? 2 * i : i)], lineno));
        if (iv) it.hi.push_back(parse_double(toks[p + 2 * i + 1], lineno));
      }
    } else if (kind == "bools") {
      long k = parse_count(toks[p++], lineno);
      need(size_t(k));
      it.kind = Item::Kind::Bools;
      it.rows = int(k);
      it.cols = 1;
      for (long i = 0; i < k; ++i) {
        if (toks[p + i] != "0" && toks[p + i] != "1")
          throw CertificateFormatError({lineno, "bad bool"});
        it.flags.push_back(toks[p + i] == "1");
      }
    } else {
      throw CertificateFormatError({lineno, "unknown item kind " + kind});
    }
    cur.items.emplace_back(name, std::move(it));
  }
  if (in_step)
    throw CertificateFormatError({lineno, "unterminated step"});
  return cert;
}

ReplayReport replay(const Certificate& c) {
  ReplayReport rep;
  for (size_t i = 0; i < c.steps.size(); ++i) {
    std::string why;
    StepVerdict v = replay_step(c.steps[i], &why);
    ++rep.checked;
    if (v != StepVerdict::Certified) {
      rep.all_certified = false;
      rep.first_failed = int(i);
      rep.failed_tag = c.steps[i].tag;
      rep.message = why;
      return rep;
    }
  }
  return rep;
}

}  // namespace ellcone::cert
