#pragma once

#include <Eigen/Dense>
#include <string>

namespace viewrec::codec {

// Fixed-point decimal grid: values in [-offset, 10^int_digits - offset)
// with frac_digits decimal places. Encoding is exact on this grid; the
// interleaved output is a decimal string, never a float.
struct FixedPointCodec {
  int int_digits = 3;   // P
  int frac_digits = 6;  // Q
  double offset = 0.0;  // added before encoding to force positivity
};

// Snap a value to the codec grid (test helper and input conditioner).
double quantize(double x, const FixedPointCodec& codec);
bool on_grid(double x, const FixedPointCodec& codec);

// Round-robin digit interleaving of the coordinates, most significant
// digit first; output has k*P digits, a decimal point, then k*Q digits.
std::string interleave_encode(const Eigen::VectorXd& x,
                              const FixedPointCodec& codec);

Eigen::VectorXd interleave_decode(const std::string& s, int k,
                                  const FixedPointCodec& codec);

// Scalar-valued similarity: the interleaved encoding of the concatenation
// (v, t). Decoding a mu value recovers both views exactly on the grid.
std::string mu_similarity(const Eigen::VectorXd& v, const Eigen::VectorXd& t,
                          const FixedPointCodec& codec);

struct MuParts {
  Eigen::VectorXd v;
  Eigen::VectorXd t;
};
MuParts mu_decode(const std::string& s, int view_size,
                  const FixedPointCodec& codec);

}  // namespace viewrec::codec
