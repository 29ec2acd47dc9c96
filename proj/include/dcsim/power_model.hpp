#ifndef DCSIM_POWER_MODEL_HPP
#define DCSIM_POWER_MODEL_HPP

#include <string>
#include <string_view>
#include <vector>

namespace dcsim {

enum class PowerFamilyKind { Polynomial, PolynomialPlusExponential };

/// Polynomial(d):
///     P(u) = c[0]*u + c[1]*u^2 + ... + c[d-1]*u^d + c[d]
/// PolynomialPlusExponential(d) appends an amplitude a = c[d+1] and a rate
/// b = c[d+2]:
///     P(u) = <polynomial part> + a*(exp(b*u) - 1)
/// so that P(0) is always the constant term.
struct PowerFamily {
    PowerFamilyKind kind = PowerFamilyKind::Polynomial;
    int degree = 3;

    std::size_t coefficient_count() const;
    /// "poly3", "poly1+exp", ...
    std::string name() const;
    static PowerFamily parse(std::string_view name);
    bool operator==(const PowerFamily&) const = default;
};

struct PowerModel {
    PowerFamily family;
    std::vector<double> coefficients;

    /// Value at u = 0.
    double constant() const;
    bool operator==(const PowerModel&) const = default;
};

/// Watts at aggregate utilization u in [0,1]; throws std::domain_error
/// outside that range.
double eval_power(const PowerModel& model, double u);

/// Same as eval_power but clamps u into [0,1] first. Used by the engine,
/// where utilization is a ratio that can drift by an ulp.
double eval_power_clamped(const PowerModel& model, double u);

}  // namespace dcsim

#endif  // DCSIM_POWER_MODEL_HPP
