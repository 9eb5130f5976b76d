#pragma once

// INI-style model files:
//
//   [chart]
//   dim = 2
//   box = [0.1, 3.04] x [-3.5, 3.5]
//   [params]
//   k = 0.1
//   [norm]
//   kind = riemannian        ; minkowski | randers | product | raw
//   g11 = "1"
//   g22 = "sin(x1)^2"
//   [measure]
//   psi = "x1^2"             ; or density = "..."
//
// Norm keys by kind: riemannian g<i><j> (upper triangle, missing entries 0);
// minkowski and raw F or F2; randers a<i><j> and b<i>; product G or G2,
// flat_dim and factors = m, with sections [factor1] .. [factorm] carrying
// dim, kind and the factor's norm keys. Product boxes are sliced from the
// [chart] box in coordinate order: flat block first, then each factor.

#include "finslerlab/norms.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace finsler {

class ModelFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelFile {
  std::string name;
  FinslerModel model;
  std::map<std::string, double> params;
  std::uint64_t hash = 0;  // FNV-1a of the file bytes
};

ModelFile parse_model(std::string_view text, const std::string& name = "<input>");
ModelFile load_model(const std::filesystem::path& path);

std::uint64_t fnv1a(std::string_view bytes);

/// Parses "[a, b] x [c, d] x ..." into intervals.
ChartBox parse_box(std::string_view text);

}  // namespace finsler
