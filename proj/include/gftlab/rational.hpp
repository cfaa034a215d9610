#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <compare>
#include <cstdint>
#include <string>

#include "gftlab/errors.hpp"

namespace gftlab {

// exact rational scalar used throughout the engine; doubles exist only at the
// JSON/CLI boundary (every finite IEEE double converts exactly)
using Rat = boost::multiprecision::mpq_rational;

inline double to_double(const Rat& r) { return r.convert_to<double>(); }

inline Rat rat_from_double(double x) { return Rat(x); }

inline std::string rat_str(const Rat& r) { return r.str(); }

// rational extended with +-infinity sentinels; all arithmetic short-circuits,
// so indeterminate forms throw instead of silently producing garbage
class Ext {
 public:
  enum Cls : int { kNegInf = -1, kFin = 0, kPosInf = 1 };

  Ext() : cls_(kFin), v_(0) {}
  Ext(Rat v) : cls_(kFin), v_(std::move(v)) {}  // NOLINT: implicit by design
  Ext(int v) : cls_(kFin), v_(v) {}             // NOLINT
  static Ext pos_inf() { return Ext(kPosInf); }
  static Ext neg_inf() { return Ext(kNegInf); }

  bool finite() const { return cls_ == kFin; }
  bool is_pos_inf() const { return cls_ == kPosInf; }
  bool is_neg_inf() const { return cls_ == kNegInf; }
  Cls cls() const { return cls_; }

  const Rat& value() const {
    if (!finite()) throw ContractError("Ext::value on non-finite value");
    return v_;
  }

  double to_double() const {
    if (cls_ == kPosInf) return std::numeric_limits<double>::infinity();
    if (cls_ == kNegInf) return -std::numeric_limits<double>::infinity();
    return gftlab::to_double(v_);
  }

  friend Ext operator+(const Ext& a, const Ext& b) {
    if (a.finite() && b.finite()) return Ext(a.v_ + b.v_);
    if (a.finite()) return b;
    if (b.finite()) return a;
    if (a.cls_ != b.cls_) throw ContractError("Ext: inf + (-inf)");
    return a;
  }
  friend Ext operator-(const Ext& a) {
    if (a.finite()) return Ext(-a.v_);
    return a.cls_ == kPosInf ? neg_inf() : pos_inf();
  }
  friend Ext operator-(const Ext& a, const Ext& b) { return a + (-b); }
  Ext& operator+=(const Ext& o) { return *this = *this + o; }
  Ext& operator-=(const Ext& o) { return *this = *this - o; }

  friend bool operator==(const Ext& a, const Ext& b) {
    if (a.cls_ != b.cls_) return false;
    return !a.finite() || a.v_ == b.v_;
  }
  friend bool operator<(const Ext& a, const Ext& b) {
    if (a.cls_ != b.cls_) return a.cls_ < b.cls_;
    return a.finite() && a.v_ < b.v_;
  }
  friend bool operator>(const Ext& a, const Ext& b) { return b < a; }
  friend bool operator<=(const Ext& a, const Ext& b) { return !(b < a); }
  friend bool operator>=(const Ext& a, const Ext& b) { return !(a < b); }
  friend bool operator!=(const Ext& a, const Ext& b) { return !(a == b); }

  std::string str() const {
    if (cls_ == kPosInf) return "+inf";
    if (cls_ == kNegInf) return "-inf";
    return v_.str();
  }

 private:
  explicit Ext(Cls c) : cls_(c), v_(0) {}
  Cls cls_;
  Rat v_;
};

inline Ext ext_min(const Ext& a, const Ext& b) { return a < b ? a : b; }
inline Ext ext_max(const Ext& a, const Ext& b) { return a < b ? b : a; }
inline Rat rat_min(const Rat& a, const Rat& b) { return a < b ? a : b; }
inline Rat rat_max(const Rat& a, const Rat& b) { return a < b ? b : a; }

}  // namespace gftlab
