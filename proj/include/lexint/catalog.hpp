#ifndef LEXINT_CATALOG_HPP
#define LEXINT_CATALOG_HPP

#include "lexint/gradschemes.hpp"
#include "lexint/schemes.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lexint {

/// Identity of a scheme: a one-step kernel or a discrete gradient, plus the
/// anchor rule of its locally exact modification.
struct SchemeSpec {
  enum class Family { OneStep, Gradient };

  Family family = Family::OneStep;
  Kernel kernel = Kernel::EEU;
  GradientKind gradient = GradientKind::IA;
  Anchor anchor = Anchor::None;

  static SchemeSpec one_step(Kernel k, Anchor a = Anchor::None) {
    if (!anchor_allowed(k, a)) throw std::invalid_argument("anchor not defined for this kernel");
    return {Family::OneStep, k, GradientKind::IA, a};
  }
  static SchemeSpec discrete_gradient(GradientKind g, Anchor a = Anchor::None) {
    if (a == Anchor::ILEX) throw std::invalid_argument("gradient schemes support anchors None, LEX, SLEX");
    return {Family::Gradient, Kernel::EEU, g, a};
  }

  bool is_gradient() const { return family == Family::Gradient; }
  bool is_locally_exact() const { return anchor != Anchor::None; }

  std::string name() const {
    std::string base = is_gradient() ? to_string(gradient) : to_string(kernel);
    if (anchor != Anchor::None) base += std::string("-") + to_string(anchor);
    return base;
  }

  friend bool operator==(const SchemeSpec& a, const SchemeSpec& b) { return a.name() == b.name(); }
};

inline const std::vector<SchemeSpec>& one_step_catalog() {
  static const std::vector<SchemeSpec> c = {
      SchemeSpec::one_step(Kernel::EEU),
      SchemeSpec::one_step(Kernel::IEU),
      SchemeSpec::one_step(Kernel::IMP),
      SchemeSpec::one_step(Kernel::TR),
      SchemeSpec::one_step(Kernel::EEU, Anchor::LEX),
      SchemeSpec::one_step(Kernel::IEU, Anchor::LEX),
      SchemeSpec::one_step(Kernel::IEU, Anchor::ILEX),
      SchemeSpec::one_step(Kernel::IMP, Anchor::LEX),
      SchemeSpec::one_step(Kernel::IMP, Anchor::SLEX),
      SchemeSpec::one_step(Kernel::TR, Anchor::LEX),
      SchemeSpec::one_step(Kernel::TR, Anchor::SLEX),
  };
  return c;
}

inline const std::vector<SchemeSpec>& gradient_catalog() {
  static const std::vector<SchemeSpec> c = {
      SchemeSpec::discrete_gradient(GradientKind::IA),
      SchemeSpec::discrete_gradient(GradientKind::SYM),
      SchemeSpec::discrete_gradient(GradientKind::IA, Anchor::LEX),
      SchemeSpec::discrete_gradient(GradientKind::IA, Anchor::SLEX),
      SchemeSpec::discrete_gradient(GradientKind::SYM, Anchor::LEX),
      SchemeSpec::discrete_gradient(GradientKind::SYM, Anchor::SLEX),
  };
  return c;
}

inline std::vector<SchemeSpec> full_catalog() {
  std::vector<SchemeSpec> all = one_step_catalog();
  const auto& g = gradient_catalog();
  all.insert(all.end(), g.begin(), g.end());
  return all;
}

inline std::vector<std::string> catalog_names() {
  std::vector<std::string> names;
  for (const auto& s : full_catalog()) names.push_back(s.name());
  return names;
}

/// Look up a scheme by its canonical name (e.g. "IMP-SLEX", "GR-IA-LEX").
inline SchemeSpec parse_scheme(std::string_view name) {
  for (const auto& s : full_catalog()) {
    if (s.name() == name) return s;
  }
  std::string valid;
  for (const auto& n : catalog_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'; valid: " + valid);
}

}  // namespace lexint

#endif  // LEXINT_CATALOG_HPP
