#include "dseno/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace dseno::nn {

GradCheckReport grad_check(const Differentiable& f, std::vector<Tensor<double>> args,
                           const GradCheckOptions& options) {
    for (std::size_t a = 0; a < args.size(); ++a) {
        require_finite(args[a], "grad_check argument");
    }
    const std::vector<Tensor<double>> analytic = f.gradient(args);
    if (analytic.size() != args.size()) {
        throw ConfigError("grad_check: gradient returned " + std::to_string(analytic.size()) +
                          " tensors for " + std::to_string(args.size()) + " arguments (missing backward rule)");
    }

    GradCheckReport report;
    for (std::size_t a = 0; a < args.size(); ++a) {
        const std::string name = a < f.names.size() ? f.names[a] : "arg" + std::to_string(a);
        if (analytic[a].shape() != args[a].shape()) {
            throw ConfigError(Errc::shape_mismatch, "grad_check: gradient of " + name + " has shape " +
                                                        shape_string(analytic[a].shape()));
        }
        require_finite(analytic[a], "analytic gradient of " + name);

        double scale = 0.0;
        for (double g : analytic[a].data()) scale = std::max(scale, std::abs(g));
        const double floor = std::max(1e-3 * scale, 1e-12);

        const std::size_t total = args[a].size();
        std::size_t stride = 1;
        if (options.max_elements_per_arg > 0 && total > options.max_elements_per_arg) {
            stride = (total + options.max_elements_per_arg - 1) / options.max_elements_per_arg;
        }
        for (std::size_t i = 0; i < total; i += stride) {
            const double saved = args[a][i];
            args[a][i] = saved + options.step;
            const double up = f.value(args);
            args[a][i] = saved - options.step;
            const double down = f.value(args);
            args[a][i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("grad_check: non-finite loss while perturbing " + name);
            }
            const double numeric = (up - down) / (2.0 * options.step);
            const double exact = analytic[a][i];
            const double rel =
                std::abs(exact - numeric) / std::max({std::abs(exact), std::abs(numeric), floor});
            ++report.checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    report.passed = report.max_rel_error < options.tolerance;
    return report;
}

}  // namespace dseno::nn
