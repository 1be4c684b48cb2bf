#include "pdmp/report.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"

namespace pdmp {

using ojson = nlohmann::ordered_json;

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string validation_report_json(const ValidationReport& report) {
    ojson doc;
    doc["all_pass"] = report.all_pass();
    ojson records = ojson::array();
    for (const AssumptionRecord& r : report.records) {
        ojson rec;
        rec["id"] = r.id;
        rec["pass"] = r.pass;
        rec["measured"] = r.measured;
        rec["threshold"] = r.threshold;
        rec["detail"] = r.detail;
        records.push_back(std::move(rec));
    }
    doc["records"] = std::move(records);
    return doc.dump(2) + "\n";
}

std::string discounted_summary_json(const DiscountedSolution& sol,
                                    const std::string& inputs_digest,
                                    double elapsed_seconds) {
    ojson doc;
    doc["kind"] = "discounted";
    doc["alpha"] = sol.alpha;
    doc["grid_size"] = sol.value.grid().size();
    doc["iterations"] = sol.iterations;
    doc["final_sup_delta"] =
        sol.sup_deltas.empty() ? 0.0 : sol.sup_deltas.back();
    doc["residual_up"] = sol.residual_up;
    doc["residual_down"] = sol.residual_down;
    doc["inputs_digest"] = inputs_digest;
    doc["elapsed_seconds"] = elapsed_seconds;
    return doc.dump(2) + "\n";
}

std::string average_summary_json(const AverageSolution& sol,
                                 const BoundednessReport& bounds,
                                 const std::string& inputs_digest,
                                 double elapsed_seconds) {
    ojson doc;
    doc["kind"] = "average";
    doc["rho"] = sol.rho;
    doc["x0"] = sol.x0;
    doc["grid_size"] = sol.h.grid().size();
    double res_max = 0.0, res_min = 0.0;
    if (!sol.residual.values().empty()) {
        res_max = *std::max_element(sol.residual.values().begin(),
                                    sol.residual.values().end());
        res_min = *std::min_element(sol.residual.values().begin(),
                                    sol.residual.values().end());
    }
    doc["residual_max"] = res_max;
    doc["residual_min"] = res_min;
    doc["h_spread"] = sol.h_spread;
    ojson trace = ojson::array();
    for (const SweepPoint& pt : sol.trace) {
        ojson row;
        row["alpha"] = pt.alpha;
        row["rho"] = pt.rho;
        row["h_sup"] = pt.h_sup;
        row["h_inf"] = pt.h_inf;
        row["iterations"] = pt.iterations;
        trace.push_back(std::move(row));
    }
    doc["trace"] = std::move(trace);
    ojson b;
    b["C"] = bounds.C;
    b["K_h"] = bounds.K_h;
    b["blow_up"] = bounds.blow_up;
    b["detail"] = bounds.detail;
    doc["bounds"] = std::move(b);
    ojson mc;
    mc["mean"] = sol.mc_check.mean;
    mc["stderr"] = sol.mc_check.stderr_;
    mc["n_rep"] = sol.mc_check.n_rep;
    mc["seed"] = sol.mc_check.seed;
    mc["horizon"] = sol.mc_check.horizon;
    doc["mc_check"] = std::move(mc);
    doc["inputs_digest"] = inputs_digest;
    doc["elapsed_seconds"] = elapsed_seconds;
    return doc.dump(2) + "\n";
}

std::string estimate_summary_json(const McEstimate& est,
                                  const std::string& inputs_digest,
                                  double elapsed_seconds) {
    ojson doc;
    doc["kind"] = "estimate";
    doc["mean"] = est.mean;
    doc["stderr"] = est.stderr_;
    doc["n_rep"] = est.n_rep;
    doc["seed"] = est.seed;
    doc["horizon"] = est.horizon;
    doc["tail_bound"] = est.tail_bound;
    doc["inputs_digest"] = inputs_digest;
    doc["elapsed_seconds"] = elapsed_seconds;
    return doc.dump(2) + "\n";
}

} // namespace pdmp
