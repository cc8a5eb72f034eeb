#include "viewrec/codec.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "viewrec/errors.hpp"

namespace viewrec::codec {

namespace {

double pow10i(int e) { return std::pow(10.0, e); }

// integer grid value of x, or throws OutOfRange
std::int64_t grid_value(double x, const FixedPointCodec& codec) {
  const double shifted = x + codec.offset;
  const double scaled = shifted * pow10i(codec.frac_digits);
  const double rounded = std::round(scaled);
  if (std::abs(scaled - rounded) > 1e-6 * std::max(1.0, std::abs(scaled))) {
    throw OutOfRange("interleave: coordinate is not on the codec grid");
  }
  const double limit = pow10i(codec.int_digits + codec.frac_digits);
  if (rounded < 0.0 || rounded >= limit) {
    throw OutOfRange("interleave: coordinate outside the codec range");
  }
  return static_cast<std::int64_t>(rounded);
}

}  // namespace

double quantize(double x, const FixedPointCodec& codec) {
  const double scale = pow10i(codec.frac_digits);
  return std::round((x + codec.offset) * scale) / scale - codec.offset;
}

bool on_grid(double x, const FixedPointCodec& codec) {
  try {
    grid_value(x, codec);
    return true;
  } catch (const OutOfRange&) {
    return false;
  }
}

std::string interleave_encode(const Eigen::VectorXd& x,
                              const FixedPointCodec& codec) {
  const int k = static_cast<int>(x.size());
  if (k < 1) throw OutOfRange("interleave_encode: empty vector");
  const int width = codec.int_digits + codec.frac_digits;

  // per-coordinate digit strings, most significant first
  std::vector<std::string> digits(k);
  for (int i = 0; i < k; ++i) {
    std::int64_t v = grid_value(x(i), codec);
    std::string s(width, '0');
    for (int d = width - 1; d >= 0; --d) {
      s[d] = static_cast<char>('0' + (v % 10));
      v /= 10;
    }
    digits[i] = s;
  }

  std::string out;
  out.reserve(k * width + 1);
  for (int j = 0; j < k * width; ++j) {
    if (j == k * codec.int_digits) out.push_back('.');
    out.push_back(digits[j % k][j / k]);
  }
  return out;
}

Eigen::VectorXd interleave_decode(const std::string& s, int k,
                                  const FixedPointCodec& codec) {
  const int width = codec.int_digits + codec.frac_digits;
  std::string flat;
  flat.reserve(k * width);
  int point_pos = -1;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '.') {
      if (point_pos >= 0) throw MalformedString("interleave: two points");
      point_pos = static_cast<int>(flat.size());
    } else if (c >= '0' && c <= '9') {
      flat.push_back(c);
    } else {
      throw MalformedString("interleave: unexpected character");
    }
  }
  if (static_cast<int>(flat.size()) != k * width) {
    throw MalformedString("interleave: wrong digit count for k and codec");
  }
  if (codec.frac_digits > 0 && point_pos != k * codec.int_digits) {
    throw MalformedString("interleave: decimal point misplaced");
  }

  Eigen::VectorXd x(k);
  const double scale = pow10i(codec.frac_digits);
  for (int i = 0; i < k; ++i) {
    std::int64_t v = 0;
    for (int d = 0; d < width; ++d) {
      v = v * 10 + (flat[d * k + i] - '0');
    }
    x(i) = static_cast<double>(v) / scale - codec.offset;
  }
  return x;
}

std::string mu_similarity(const Eigen::VectorXd& v, const Eigen::VectorXd& t,
                          const FixedPointCodec& codec) {
  if (v.size() != t.size()) {
    throw LengthMismatch("mu_similarity: view size mismatch");
  }
  Eigen::VectorXd cat(v.size() + t.size());
  cat << v, t;
  return interleave_encode(cat, codec);
}

MuParts mu_decode(const std::string& s, int view_size,
                  const FixedPointCodec& codec) {
  const Eigen::VectorXd cat = interleave_decode(s, 2 * view_size, codec);
  MuParts parts;
  parts.v = cat.head(view_size);
  parts.t = cat.tail(view_size);
  return parts;
}

}  // namespace viewrec::codec
