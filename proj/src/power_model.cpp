#include "dcsim/power_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "dcsim/model.hpp"

namespace dcsim {

std::size_t PowerFamily::coefficient_count() const {
    const auto poly = static_cast<std::size_t>(degree) + 1;
    return kind == PowerFamilyKind::Polynomial ? poly : poly + 2;
}

std::string PowerFamily::name() const {
    std::string n = "poly" + std::to_string(degree);
    if (kind == PowerFamilyKind::PolynomialPlusExponential) n += "+exp";
    return n;
}

PowerFamily PowerFamily::parse(std::string_view name) {
    PowerFamily f;
    std::string_view rest = name;
    if (rest.ends_with("+exp")) {
        f.kind = PowerFamilyKind::PolynomialPlusExponential;
        rest.remove_suffix(4);
    }
    if (!rest.starts_with("poly")) throw InputError("unknown power model family '" + std::string(name) + "'");
    rest.remove_prefix(4);
    int degree = 0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), degree);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || degree < 1 || degree > 8)
        throw InputError("unknown power model family '" + std::string(name) + "'");
    f.degree = degree;
    return f;
}

double PowerModel::constant() const {
    return coefficients.at(static_cast<std::size_t>(family.degree));
}

double eval_power(const PowerModel& model, double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("utilization outside [0,1]");
    return eval_power_clamped(model, u);
}

double eval_power_clamped(const PowerModel& model, double u) {
    u = std::clamp(u, 0.0, 1.0);
    const auto& c = model.coefficients;
    const auto d = static_cast<std::size_t>(model.family.degree);
    double p = c.at(d);
    double upow = u;
    for (std::size_t k = 0; k < d; ++k) {
        p += c[k] * upow;
        upow *= u;
    }
    if (model.family.kind == PowerFamilyKind::PolynomialPlusExponential)
        p += c.at(d + 1) * std::expm1(c.at(d + 2) * u);
    return p;
}

}  // namespace dcsim
