#include "mhqa/nc/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mhqa::nc {

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

std::size_t GradCheckReport::failures() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return !e.passed; }));
}

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    os << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error;
    for (const auto& e : entries) {
        if (!e.passed) {
            os << "\n  " << e.name << "[" << e.worst_index << "] analytic=" << e.analytic
               << " numeric=" << e.numeric << " rel=" << e.max_rel_error;
        }
    }
    return os.str();
}

namespace {

double evaluate(const LossBuilder& build, ParamStore& params) {
    Graph g(&params);
    return build(g).value()[0];
}

}  // namespace

GradCheckReport compare_gradients(const LossBuilder& build, ParamStore& params,
                                  const GradCheckOptions& options) {
    GradCheckReport report;
    for (auto& [name, p] : params.items()) {
        if (!options.only.empty() &&
            std::find(options.only.begin(), options.only.end(), name) == options.only.end()) {
            continue;
        }
        GradCheckEntry entry;
        entry.name = name;
        auto values = p.value.data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + options.eps;
            const double up = evaluate(build, params);
            values[i] = saved - options.eps;
            const double down = evaluate(build, params);
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * options.eps);
            const double analytic = p.grad[i];
            const double rel = relative_error(analytic, numeric, options.floor);
            if (rel >= entry.max_rel_error) {
                entry.max_rel_error = rel;
                entry.worst_index = i;
                entry.analytic = analytic;
                entry.numeric = numeric;
            }
        }
        entry.passed = entry.max_rel_error < options.tol;
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.passed = report.passed && entry.passed;
        report.entries.push_back(entry);
    }
    return report;
}

GradCheckReport grad_check(const LossBuilder& build, ParamStore& params, const GradCheckOptions& options) {
    params.zero_grad();
    {
        Graph g(&params);
        Var loss = build(g);
        g.backward(loss);
    }
    return compare_gradients(build, params, options);
}

}  // namespace mhqa::nc
