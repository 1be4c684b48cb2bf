#include "pdmp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pdmp/flow.hpp"
#include "pdmp/value_field.hpp"  // fmt_g17

namespace pdmp {

namespace {

// ---- config text ------------------------------------------------------

struct ConfigEntry {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

// section -> key -> entry; '#' starts a comment, sections are [name] or
// [name.N], keys are dotted identifiers.
struct ConfigDoc {
    std::map<std::string, std::map<std::string, ConfigEntry>> sections;

    bool has_section(const std::string& s) const { return sections.count(s) != 0; }

    const ConfigEntry* find(const std::string& sec, const std::string& key) const {
        auto s = sections.find(sec);
        if (s == sections.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }
};

[[noreturn]] void fail(int line, const std::string& msg) {
    std::ostringstream os;
    if (line > 0)
        os << "config line " << line << ": " << msg;
    else
        os << "config: " << msg;
    throw std::invalid_argument(os.str());
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

ConfigDoc parse_config(const std::string& text) {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        std::size_t hash = s.find('#');
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail(line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty()) fail(line, "empty section name");
            doc.sections[section];  // register even if empty
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected key = value");
        if (section.empty()) fail(line, "key outside any section");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) fail(line, "empty key");
        auto& sec = doc.sections[section];
        if (sec.count(key)) fail(line, "duplicate key '" + key + "'");
        sec[key] = ConfigEntry{value, line, false};
    }
    return doc;
}

double parse_number(const ConfigEntry& e) {
    const char* begin = e.value.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || trim(end).size() != 0)
        fail(e.line, "expected a number, got '" + e.value + "'");
    if (!std::isfinite(v)) fail(e.line, "non-finite number '" + e.value + "'");
    return v;
}

std::vector<double> parse_number_list(const ConfigEntry& e, char sep = ',') {
    std::vector<double> out;
    std::string item;
    std::istringstream in(e.value);
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (item.empty()) fail(e.line, "empty list item");
        ConfigEntry sub{item, e.line, false};
        out.push_back(parse_number(sub));
    }
    if (out.empty()) fail(e.line, "empty list");
    return out;
}

const ConfigEntry& require(const ConfigDoc& doc, const std::string& sec,
                           const std::string& key) {
    const ConfigEntry* e = doc.find(sec, key);
    if (!e) fail(0, "missing key '" + key + "' in section [" + sec + "]");
    return *e;
}

// Broadcast a 1-element list across dim axes; otherwise require exact length.
std::vector<double> per_axis(std::vector<double> v, int dim, int line,
                             const std::string& what) {
    if (static_cast<int>(v.size()) == 1 && dim > 1) v.assign(dim, v[0]);
    if (static_cast<int>(v.size()) != dim)
        fail(line, what + ": expected " + std::to_string(dim) + " value(s), got " +
                       std::to_string(v.size()));
    return v;
}

ScalarFamily parse_scalar_family(const ConfigDoc& doc, const std::string& sec,
                                 const std::string& prefix, int dim) {
    const ConfigEntry& fam = require(doc, sec, prefix + ".family");
    ScalarFamily f;
    if (fam.value == "constant") {
        f.kind = ScalarFamily::Kind::constant;
        f.base = parse_number(require(doc, sec, prefix + ".value"));
    } else if (fam.value == "affine") {
        f.kind = ScalarFamily::Kind::affine;
        f.base = parse_number(require(doc, sec, prefix + ".base"));
        const ConfigEntry& sl = require(doc, sec, prefix + ".slope");
        f.slope = per_axis(parse_number_list(sl), dim, sl.line, prefix + ".slope");
    } else {
        fail(fam.line, "unknown " + prefix + " family '" + fam.value + "'");
    }
    return f;
}

// Extremes of a scalar family over the closed box: affine => attained at a
// corner, so the corner sweep is exact.
std::pair<double, double> box_range(const ScalarFamily& f,
                                    const std::vector<double>& lo,
                                    const std::vector<double>& hi) {
    int dim = static_cast<int>(lo.size());
    if (f.kind == ScalarFamily::Kind::constant) return {f.base, f.base};
    double mn = f.base, mx = f.base;
    for (int i = 0; i < dim; ++i) {
        double a = f.slope[i] * lo[i], b = f.slope[i] * hi[i];
        mn += std::min(a, b);
        mx += std::max(a, b);
    }
    return {mn, mx};
}

Feasibility parse_feasibility(const ConfigDoc& doc, const std::string& sec, int dim) {
    Feasibility fe;
    const ConfigEntry* kind = doc.find(sec, "feasible.kind");
    if (!kind) return fe;
    if (kind->value == "always") {
        fe.kind = Feasibility::Kind::always;
        return fe;
    }
    if (kind->value == "below")
        fe.kind = Feasibility::Kind::below;
    else if (kind->value == "above")
        fe.kind = Feasibility::Kind::above;
    else
        fail(kind->line, "unknown feasibility kind '" + kind->value + "'");
    const ConfigEntry& ax = require(doc, sec, "feasible.axis");
    fe.axis = static_cast<int>(parse_number(ax));
    if (fe.axis < 0 || fe.axis >= dim) fail(ax.line, "feasible.axis out of range");
    fe.threshold = parse_number(require(doc, sec, "feasible.threshold"));
    return fe;
}

KernelSpec parse_kernel_section(const ConfigDoc& doc, const std::string& sec,
                                const ModelSpec& m) {
    const ConfigEntry& fam = require(doc, sec, "family");
    KernelSpec k;
    std::vector<std::vector<double>> targets;
    std::vector<double> weights;

    auto parse_targets = [&](const ConfigEntry& e) {
        std::string atom;
        std::istringstream in(e.value);
        while (std::getline(in, atom, ';')) {
            ConfigEntry sub{trim(atom), e.line, false};
            targets.push_back(per_axis(parse_number_list(sub), m.dimension, e.line,
                                       "kernel target"));
        }
        if (targets.empty()) fail(e.line, "kernel needs at least one target");
    };

    if (fam.value == "point_mass") {
        const ConfigEntry& t = require(doc, sec, "target");
        targets.push_back(per_axis(parse_number_list(t), m.dimension, t.line,
                                   "kernel target"));
        weights.push_back(1.0);
    } else if (fam.value == "uniform") {
        parse_targets(require(doc, sec, "targets"));
        weights.assign(targets.size(), 1.0 / static_cast<double>(targets.size()));
    } else if (fam.value == "atoms") {
        parse_targets(require(doc, sec, "targets"));
        const ConfigEntry& w = require(doc, sec, "weights");
        weights = parse_number_list(w, ';');
        if (weights.size() != targets.size())
            fail(w.line, "kernel weights/targets length mismatch");
    } else {
        fail(fam.line, "unknown kernel family '" + fam.value + "'");
    }

    double mass = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!(weights[i] > 0.0 && weights[i] <= 1.0))
            fail(fam.line, "kernel weight " + fmt_g17(weights[i]) + " outside (0,1]");
        if (!m.inside_open_box(targets[i].data()))
            fail(fam.line, "kernel atom outside the open domain box");
        KernelAtom atom;
        atom.target = StatePoint::interior(targets[i]);
        atom.weight = weights[i];
        k.atoms.push_back(std::move(atom));
        mass += weights[i];
    }
    if (std::abs(mass - 1.0) > 1e-12)
        fail(fam.line, "kernel mass " + fmt_g17(mass) + " != 1");
    return k;
}

} // namespace

// ---- grids --------------------------------------------------------------

int Grid::nearest(double x) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
    if (it == nodes.begin()) return 0;
    if (it == nodes.end()) return static_cast<int>(nodes.size()) - 1;
    int hi = static_cast<int>(it - nodes.begin());
    int lo = hi - 1;
    return (x - nodes[lo] <= nodes[hi] - x) ? lo : hi;
}

Grid make_uniform_grid(const ModelSpec& m, int n) {
    if (m.dimension != 1)
        throw std::invalid_argument("grids are supported for 1-D models only");
    if (n < 2) throw std::invalid_argument("grid needs at least 2 nodes");
    Grid g;
    g.nodes.resize(n);
    double lo = m.lo[0], hi = m.hi[0];
    for (int i = 0; i < n; ++i)
        g.nodes[i] = lo + (hi - lo) * static_cast<double>(i + 1) /
                              static_cast<double>(n + 1);
    return g;
}

Grid make_midpoint_grid(const ModelSpec& m, int n) {
    if (m.dimension != 1)
        throw std::invalid_argument("grids are supported for 1-D models only");
    if (n < 2) throw std::invalid_argument("grid needs at least 2 nodes");
    Grid g;
    g.nodes.resize(n);
    double lo = m.lo[0], hi = m.hi[0];
    for (int i = 0; i < n; ++i)
        g.nodes[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) /
                              static_cast<double>(n);
    return g;
}

// ---- load / emit ----------------------------------------------------------

ModelSpec load_model(const std::string& config_text) {
    ConfigDoc doc = parse_config(config_text);
    ModelSpec m;

    // [domain]
    if (!doc.has_section("domain")) fail(0, "missing [domain] section");
    const ConfigEntry& dim = require(doc, "domain", "dimension");
    m.dimension = static_cast<int>(parse_number(dim));
    if (m.dimension < 1 || m.dimension > kMaxDim)
        fail(dim.line, "dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    const ConfigEntry& lo = require(doc, "domain", "lower");
    const ConfigEntry& hi = require(doc, "domain", "upper");
    m.lo = per_axis(parse_number_list(lo), m.dimension, lo.line, "lower");
    m.hi = per_axis(parse_number_list(hi), m.dimension, hi.line, "upper");
    for (int i = 0; i < m.dimension; ++i)
        if (!(m.lo[i] < m.hi[i])) fail(lo.line, "domain box needs lower < upper");
    if (const ConfigEntry* bp = doc.find("domain", "boundary")) {
        if (bp->value != "box") fail(bp->line, "unknown boundary predicate '" + bp->value + "'");
        m.boundary_predicate = bp->value;
    }

    // [flow]
    if (!doc.has_section("flow")) fail(0, "missing [flow] section");
    const ConfigEntry& ff = require(doc, "flow", "family");
    if (ff.value == "linear") {
        m.flow.kind = FlowFamily::Kind::linear;
        const ConfigEntry& v = require(doc, "flow", "velocity");
        m.flow.p0 = per_axis(parse_number_list(v), m.dimension, v.line, "velocity");
    } else if (ff.value == "exp_decay") {
        m.flow.kind = FlowFamily::Kind::exp_decay;
        const ConfigEntry& c = require(doc, "flow", "center");
        const ConfigEntry& k = require(doc, "flow", "kappa");
        m.flow.p0 = per_axis(parse_number_list(c), m.dimension, c.line, "center");
        m.flow.p1 = per_axis(parse_number_list(k), m.dimension, k.line, "kappa");
        for (double kv : m.flow.p1)
            if (!(kv > 0.0)) fail(k.line, "kappa must be positive");
    } else if (ff.value == "affine_ode") {
        m.flow.kind = FlowFamily::Kind::affine_ode;
        const ConfigEntry& a = require(doc, "flow", "a");
        const ConfigEntry& b = require(doc, "flow", "b");
        m.flow.p0 = per_axis(parse_number_list(a), m.dimension, a.line, "a");
        m.flow.p1 = per_axis(parse_number_list(b), m.dimension, b.line, "b");
    } else {
        fail(ff.line, "unknown flow family '" + ff.value + "'");
    }

    // [actions.N], contiguous from 0
    int n_actions = 0;
    while (doc.has_section("actions." + std::to_string(n_actions))) ++n_actions;
    if (n_actions == 0) fail(0, "missing [actions.0] section");
    for (const auto& [name, _] : doc.sections) {
        if (name.rfind("actions.", 0) == 0) {
            int idx = std::atoi(name.c_str() + 8);
            if (idx < 0 || idx >= n_actions)
                fail(0, "action sections must be numbered contiguously from 0; found [" +
                            name + "]");
        }
    }
    for (int a = 0; a < n_actions; ++a) {
        std::string sec = "actions." + std::to_string(a);
        ActionSpec as;
        if (const ConfigEntry* lbl = doc.find(sec, "label")) as.label = lbl->value;
        as.rate = parse_scalar_family(doc, sec, "rate", m.dimension);
        as.feasible = parse_feasibility(doc, sec, m.dimension);
        auto [rate_min, rate_max] = box_range(as.rate, m.lo, m.hi);
        (void)rate_max;
        if (rate_min < 0.0)
            fail(0, "rate of action " + std::to_string(a) +
                        " is negative somewhere on the domain (min " +
                        fmt_g17(rate_min) + ")");
        m.actions.push_back(std::move(as));
    }

    // [costs]
    if (!doc.has_section("costs")) fail(0, "missing [costs] section");
    for (int a = 0; a < n_actions; ++a) {
        CostSpec cs;
        cs.running =
            parse_scalar_family(doc, "costs", "running." + std::to_string(a), m.dimension);
        cs.boundary =
            parse_scalar_family(doc, "costs", "boundary." + std::to_string(a), m.dimension);
        auto [f_min, f_max] = box_range(cs.running, m.lo, m.hi);
        auto [r_min, r_max] = box_range(cs.boundary, m.lo, m.hi);
        (void)f_max;
        (void)r_max;
        if (f_min < 0.0)
            fail(0, "running cost of action " + std::to_string(a) +
                        " is negative somewhere on the domain");
        if (r_min < 0.0)
            fail(0, "boundary cost of action " + std::to_string(a) +
                        " is negative somewhere on the domain");
        m.costs.push_back(std::move(cs));
    }

    // [kernel] default plus optional [kernel.N] overrides
    if (!doc.has_section("kernel") && !doc.has_section("kernel.0"))
        fail(0, "missing [kernel] section");
    KernelSpec default_kernel;
    bool have_default = doc.has_section("kernel");
    if (have_default) default_kernel = parse_kernel_section(doc, "kernel", m);
    for (int a = 0; a < n_actions; ++a) {
        std::string sec = "kernel." + std::to_string(a);
        if (doc.has_section(sec))
            m.kernels.push_back(parse_kernel_section(doc, sec, m));
        else if (have_default)
            m.kernels.push_back(default_kernel);
        else
            fail(0, "no kernel for action " + std::to_string(a));
    }

    // [xi]
    if (!doc.has_section("xi")) fail(0, "missing [xi] section");
    m.xi = parse_scalar_family(doc, "xi", "xi", m.dimension);
    auto [xi_min, xi_max] = box_range(m.xi, m.lo, m.hi);
    (void)xi_max;
    if (xi_min < 0.0) fail(0, "xi is negative somewhere on the domain");

    // [solver] (optional overrides)
    if (doc.has_section("solver")) {
        auto num = [&](const char* key, double* out) {
            if (const ConfigEntry* e = doc.find("solver", key)) *out = parse_number(*e);
        };
        num("delta", &m.defaults.delta);
        num("delta_quad", &m.defaults.delta_quad);
        num("delta_flow", &m.defaults.delta_flow);
        num("t_cert", &m.defaults.t_cert);
        num("eps_tail", &m.defaults.eps_tail);
        num("tol", &m.defaults.tol);
        num("rho_cap", &m.defaults.rho_cap);
        if (const ConfigEntry* e = doc.find("solver", "max_iter"))
            m.defaults.max_iter = static_cast<int>(parse_number(*e));
    }

    // Reject unknown keys (catch typos early).
    for (const auto& [sec, keys] : doc.sections)
        for (const auto& [key, entry] : keys)
            if (!entry.used)
                fail(entry.line, "unknown key '" + key + "' in section [" + sec + "]");

    return m;
}

ModelSpec load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_model(buf.str());
}

namespace {

void emit_scalar_family(std::ostringstream& os, const std::string& prefix,
                        const ScalarFamily& f) {
    if (f.kind == ScalarFamily::Kind::constant) {
        os << prefix << ".family = constant\n";
        os << prefix << ".value = " << fmt_g17(f.base) << "\n";
    } else {
        os << prefix << ".family = affine\n";
        os << prefix << ".base = " << fmt_g17(f.base) << "\n";
        os << prefix << ".slope = ";
        for (std::size_t i = 0; i < f.slope.size(); ++i)
            os << (i ? "," : "") << fmt_g17(f.slope[i]);
        os << "\n";
    }
}

void emit_list(std::ostringstream& os, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << fmt_g17(v[i]);
}

void emit_kernel_body(std::ostringstream& os, const KernelSpec& k) {
    os << "family = atoms\n";
    os << "targets = ";
    for (std::size_t i = 0; i < k.atoms.size(); ++i) {
        if (i) os << ";";
        emit_list(os, k.atoms[i].target.coords);
    }
    os << "\nweights = ";
    for (std::size_t i = 0; i < k.atoms.size(); ++i)
        os << (i ? ";" : "") << fmt_g17(k.atoms[i].weight);
    os << "\n";
}

bool kernels_equal(const KernelSpec& a, const KernelSpec& b) {
    if (a.atoms.size() != b.atoms.size()) return false;
    for (std::size_t i = 0; i < a.atoms.size(); ++i) {
        if (a.atoms[i].weight != b.atoms[i].weight) return false;
        if (a.atoms[i].target.coords != b.atoms[i].target.coords) return false;
    }
    return true;
}

} // namespace

std::string emit_canonical(const ModelSpec& m) {
    std::ostringstream os;
    os << "[domain]\n";
    os << "dimension = " << m.dimension << "\n";
    os << "lower = ";
    emit_list(os, m.lo);
    os << "\nupper = ";
    emit_list(os, m.hi);
    os << "\nboundary = " << m.boundary_predicate << "\n\n";

    os << "[flow]\n";
    switch (m.flow.kind) {
        case FlowFamily::Kind::linear:
            os << "family = linear\nvelocity = ";
            emit_list(os, m.flow.p0);
            os << "\n";
            break;
        case FlowFamily::Kind::exp_decay:
            os << "family = exp_decay\ncenter = ";
            emit_list(os, m.flow.p0);
            os << "\nkappa = ";
            emit_list(os, m.flow.p1);
            os << "\n";
            break;
        case FlowFamily::Kind::affine_ode:
            os << "family = affine_ode\na = ";
            emit_list(os, m.flow.p0);
            os << "\nb = ";
            emit_list(os, m.flow.p1);
            os << "\n";
            break;
    }
    os << "\n";

    for (int a = 0; a < m.action_count(); ++a) {
        const ActionSpec& as = m.actions[a];
        os << "[actions." << a << "]\n";
        if (!as.label.empty()) os << "label = " << as.label << "\n";
        emit_scalar_family(os, "rate", as.rate);
        switch (as.feasible.kind) {
            case Feasibility::Kind::always:
                break;
            case Feasibility::Kind::below:
                os << "feasible.kind = below\nfeasible.axis = " << as.feasible.axis
                   << "\nfeasible.threshold = " << fmt_g17(as.feasible.threshold) << "\n";
                break;
            case Feasibility::Kind::above:
                os << "feasible.kind = above\nfeasible.axis = " << as.feasible.axis
                   << "\nfeasible.threshold = " << fmt_g17(as.feasible.threshold) << "\n";
                break;
        }
        os << "\n";
    }

    bool all_same = true;
    for (int a = 1; a < m.action_count(); ++a)
        if (!kernels_equal(m.kernels[0], m.kernels[a])) all_same = false;
    if (all_same) {
        os << "[kernel]\n";
        emit_kernel_body(os, m.kernels[0]);
        os << "\n";
    } else {
        for (int a = 0; a < m.action_count(); ++a) {
            os << "[kernel." << a << "]\n";
            emit_kernel_body(os, m.kernels[a]);
            os << "\n";
        }
    }

    os << "[costs]\n";
    for (int a = 0; a < m.action_count(); ++a) {
        emit_scalar_family(os, "running." + std::to_string(a), m.costs[a].running);
        emit_scalar_family(os, "boundary." + std::to_string(a), m.costs[a].boundary);
    }
    os << "\n[xi]\n";
    emit_scalar_family(os, "xi", m.xi);

    const SolverOptions& o = m.defaults;
    os << "\n[solver]\n";
    os << "delta = " << fmt_g17(o.delta) << "\n";
    os << "delta_quad = " << fmt_g17(o.delta_quad) << "\n";
    os << "delta_flow = " << fmt_g17(o.delta_flow) << "\n";
    os << "t_cert = " << fmt_g17(o.t_cert) << "\n";
    os << "eps_tail = " << fmt_g17(o.eps_tail) << "\n";
    os << "tol = " << fmt_g17(o.tol) << "\n";
    os << "max_iter = " << o.max_iter << "\n";
    os << "rho_cap = " << fmt_g17(o.rho_cap) << "\n";
    return os.str();
}

// ---- evaluation -----------------------------------------------------------

namespace {

void check_action_index(const ModelSpec& m, int a) {
    if (a < 0 || a >= m.action_count())
        throw std::domain_error("action index " + std::to_string(a) + " out of range");
}

void check_feasible(const ModelSpec& m, const StatePoint& x, int a) {
    check_action_index(m, a);
    if (!m.actions[a].feasible.admits(x.coords.data()))
        throw std::domain_error("action " + std::to_string(a) +
                                " is not feasible at the given state");
}

} // namespace

std::vector<int> feasible_actions(const ModelSpec& m, const StatePoint& x) {
    if (static_cast<int>(x.coords.size()) != m.dimension)
        throw std::domain_error("state dimension mismatch");
    if (!m.inside_closed_box(x.coords.data()))
        throw std::domain_error("state outside the domain closure");
    std::vector<int> out;
    for (int a = 0; a < m.action_count(); ++a)
        if (m.actions[a].feasible.admits(x.coords.data())) out.push_back(a);
    if (out.empty())
        throw std::runtime_error("no feasible action at the given state");
    return out;
}

double eval_rate(const ModelSpec& m, const StatePoint& x, int a) {
    check_feasible(m, x, a);
    double v = m.actions[a].rate.eval(x);
    if (!std::isfinite(v)) throw std::runtime_error("non-finite rate evaluation");
    return v;
}

double eval_running_cost(const ModelSpec& m, const StatePoint& x, int a) {
    check_feasible(m, x, a);
    double v = m.costs[a].running.eval(x);
    if (!std::isfinite(v)) throw std::runtime_error("non-finite running cost");
    return v;
}

double eval_boundary_cost(const ModelSpec& m, const StatePoint& z, int a) {
    check_feasible(m, z, a);
    double v = m.costs[a].boundary.eval(z);
    if (!std::isfinite(v)) throw std::runtime_error("non-finite boundary cost");
    return v;
}

std::vector<KernelAtom> kernel(const ModelSpec& m, const StatePoint& x, int a) {
    check_feasible(m, x, a);
    return m.kernels[a].atoms;
}

// ---- assumption validation --------------------------------------------

ValidationReport validate_assumptions(const ModelSpec& m, const Grid& grid,
                                      double horizon) {
    if (grid.size() == 0) throw std::invalid_argument("validation grid is empty");
    const SolverOptions& opt = m.defaults;
    ValidationReport rep;

    double rate_min = std::numeric_limits<double>::infinity();
    double floor_margin = std::numeric_limits<double>::infinity();
    double f_min = std::numeric_limits<double>::infinity();
    double r_min = std::numeric_limits<double>::infinity();
    bool have_boundary = false;
    double mass_err = 0.0;
    double self_atom_dist = std::numeric_limits<double>::infinity();
    double k_xi_max = 0.0, cost_tail_max = 0.0, sup_rate_max = 0.0;
    bool k_xi_converged = true, cost_tail_converged = true;

    // Effective floor: the declared xi where it is honored, else the actual
    // minimal rate (so a broken floor declaration voids the tail bounds).
    bool floor_honored = true;
    for (int i = 0; i < grid.size(); ++i) {
        StatePoint x = StatePoint::interior1(grid[i]);
        double xiv = m.xi.eval(x);
        for (int a : feasible_actions(m, x)) {
            double lam = m.actions[a].rate.eval(x);
            if (lam - xiv < -1e-12) floor_honored = false;
        }
    }

    for (int i = 0; i < grid.size(); ++i) {
        StatePoint x = StatePoint::interior1(grid[i]);
        double xiv = m.xi.eval(x);
        std::vector<int> acts = feasible_actions(m, x);
        for (int a : acts) {
            double lam = m.actions[a].rate.eval(x);
            rate_min = std::min(rate_min, lam);
            floor_margin = std::min(floor_margin, lam - xiv);
            f_min = std::min(f_min, m.costs[a].running.eval(x));
            const KernelSpec& k = m.kernels[a];
            double mass = 0.0;
            for (const KernelAtom& atom : k.atoms) {
                mass += atom.weight;
                double d = 0.0;
                for (int c = 0; c < m.dimension; ++c)
                    d = std::max(d, std::abs(atom.target.coords[c] - x.coords[c]));
                self_atom_dist = std::min(self_atom_dist, d);
            }
            mass_err = std::max(mass_err, std::abs(mass - 1.0));
        }

        HitTime ht = hit_time(m, x, opt);
        double t_end = ht.finite ? std::min(ht.t, horizon) : horizon;

        if (ht.finite && ht.t <= horizon) {
            StatePoint z = flow_at(m, x, ht.t, opt);
            for (int a : feasible_actions(m, z)) {
                r_min = std::min(r_min, m.costs[a].boundary.eval(z));
                have_boundary = true;
            }
        }

        // Survival integral K_xi(x) = int_0^{t_end} e^{-int_0^t floor} dt and
        // the discounted sup-cost integral, accumulated on one pass.
        auto floor_at = [&](const double* p) {
            double v = m.xi.eval(p, m.dimension);
            if (!floor_honored) {
                double lmin = std::numeric_limits<double>::infinity();
                for (int a = 0; a < m.action_count(); ++a)
                    if (m.actions[a].feasible.admits(p))
                        lmin = std::min(lmin, m.actions[a].rate.eval(p, m.dimension));
                v = std::min(v, lmin);
            }
            return v;
        };
        auto sup_f = [&](const double* p) {
            double v = 0.0;
            for (int a = 0; a < m.action_count(); ++a)
                if (m.actions[a].feasible.admits(p))
                    v = std::max(v, m.costs[a].running.eval(p, m.dimension));
            return v;
        };
        auto sup_rate = [&](const double* p) {
            double v = 0.0;
            for (int a = 0; a < m.action_count(); ++a)
                if (m.actions[a].feasible.admits(p))
                    v = std::max(v, m.actions[a].rate.eval(p, m.dimension));
            return v;
        };

        double dq = opt.delta_quad;
        long K = static_cast<long>(std::ceil(t_end / dq));
        detail::FlowCursor cur(m, x, opt);
        double cum_floor = 0.0;  // int_0^t floor ds
        double k_xi = 0.0, cost_tail = 0.0, sup_rate_int = 0.0;
        double prev_floor = floor_at(cur.pos());
        double prev_surv = 1.0;
        double prev_cost = prev_surv * sup_f(cur.pos());
        double prev_rate = sup_rate(cur.pos());
        double last_weight = 1.0;
        for (long k = 1; k <= K; ++k) {
            double t = (k == K) ? t_end : dq * static_cast<double>(k);
            double step = t - cur.time();
            cur.advance_to(t);
            double fl = floor_at(cur.pos());
            cum_floor += 0.5 * step * (prev_floor + fl);
            double surv = std::exp(-cum_floor);
            double cost = surv * sup_f(cur.pos());
            double rate = sup_rate(cur.pos());
            k_xi += 0.5 * step * (prev_surv + surv);
            cost_tail += 0.5 * step * (prev_cost + cost);
            sup_rate_int += 0.5 * step * (prev_rate + rate);
            prev_floor = fl;
            prev_surv = surv;
            prev_cost = cost;
            prev_rate = rate;
            last_weight = surv;
        }
        bool converged = (ht.finite && ht.t <= horizon) || last_weight <= 1e-8;
        k_xi_max = std::max(k_xi_max, k_xi);
        cost_tail_max = std::max(cost_tail_max, cost_tail);
        sup_rate_max = std::max(sup_rate_max, sup_rate_int);
        k_xi_converged = k_xi_converged && converged;
        cost_tail_converged = cost_tail_converged && converged;
    }

    auto add = [&](const std::string& id, bool pass, double measured,
                   double threshold, const std::string& detail) {
        rep.records.push_back(AssumptionRecord{id, pass, measured, threshold, detail});
    };

    add("rate-nonnegative", rate_min >= 0.0, rate_min, 0.0,
        "min lambda(x,a) over grid nodes and feasible actions");
    add("rate-floor", floor_margin >= -1e-12, floor_margin, 0.0,
        "min (lambda(x,a) - xi(x)); the declared floor must sit below every rate");
    add("survival-integral", k_xi_converged && std::isfinite(k_xi_max), k_xi_max,
        horizon,
        k_xi_converged ? "K_xi = max_x int e^{-int floor} dt (converged)"
                       : "K_xi divergent at horizon (floor does not decay the tail)");
    add("cost-tail-integral", cost_tail_converged && std::isfinite(cost_tail_max),
        cost_tail_max, horizon,
        "max_x int e^{-int floor} sup_a f dt along the flow");
    add("sup-rate-integral", std::isfinite(sup_rate_max), sup_rate_max, horizon,
        "max_x int sup_a lambda dt along the flow up to t* ^ horizon");
    add("kernel-mass", mass_err <= 1e-12, mass_err, 1e-12,
        "max |sum of kernel weights - 1| over nodes and actions");
    add("kernel-self-atom", self_atom_dist > 1e-12, self_atom_dist, 1e-12,
        "min distance between a kernel atom and its source node");
    add("running-cost-nonnegative", f_min >= 0.0, f_min, 0.0,
        "min f(x,a) over grid nodes and feasible actions");
    add("boundary-cost-nonnegative", !have_boundary || r_min >= 0.0,
        have_boundary ? r_min : 0.0, 0.0,
        have_boundary ? "min r(z,a) over reachable boundary points"
                      : "no boundary point reachable from the grid");
    return rep;
}

} // namespace pdmp
