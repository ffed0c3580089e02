#pragma once

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "hessian_lab/expression.hpp"
#include "hessian_lab/field_io.hpp"
#include "hessian_lab/grid_geometry.hpp"
#include "hessian_lab/solver.hpp"
#include "hessian_lab/symmetric_operators.hpp"
#include "hessian_lab/weak_harness.hpp"

namespace hessian_lab {

using ojson = nlohmann::ordered_json;

namespace detail {

/// YAML scalars arrive untyped; integers, then doubles, then booleans are tried before strings.
inline nlohmann::json yaml_to_json(const YAML::Node& n)
{
    switch (n.Type()) {
        case YAML::NodeType::Sequence: {
            auto a = nlohmann::json::array();
            for (const auto& e : n) a.push_back(yaml_to_json(e));
            return a;
        }
        case YAML::NodeType::Map: {
            auto o = nlohmann::json::object();
            for (const auto& kv : n) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return o;
        }
        case YAML::NodeType::Scalar: {
            const auto s = n.Scalar();
            if (n.Tag() == "!") return s;  // quoted
            long long i;
            if (YAML::convert<long long>::decode(n, i)) return i;
            double d;
            if (YAML::convert<double>::decode(n, d)) return d;
            bool b;
            if (YAML::convert<bool>::decode(n, b)) return b;
            return s;
        }
        default: return nullptr;
    }
}

}  // namespace detail

/// Right-hand side source. JSON forms:
///   expression                      e^f given directly
///   {"base_times": expression}      e^f = F(chi) * expression
///   {"manufactured": expression}    e^f = F(chi + nabla^2 phi*) for the closed-form phi*
///   {"field": "path.bin"}           binary field file, relative to the config file
struct RhsSource {
    enum class Kind { expression, base_times, manufactured, field };
    Kind kind = Kind::expression;
    Expression expr{1.0};
    std::string field;

    static RhsSource parse(const nlohmann::json& j, const std::string& where)
    {
        RhsSource r;
        if (j.is_object() && j.size() == 1) {
            const auto& key = j.begin().key();
            if (key == "field") {
                r.kind = Kind::field;
                if (!j["field"].is_string()) throw ArgumentError(where + ".field: expected a path string");
                r.field = j["field"].get<std::string>();
                return r;
            }
            if (key == "base_times" || key == "manufactured") {
                r.kind = key == "base_times" ? Kind::base_times : Kind::manufactured;
                r.expr = Expression::parse(j[key], where + "." + key);
                return r;
            }
        }
        r.expr = Expression::parse(j, where);
        return r;
    }

    ojson to_json() const
    {
        switch (kind) {
            case Kind::field: return {{"field", field}};
            case Kind::base_times: return {{"base_times", expr.to_json()}};
            case Kind::manufactured: return {{"manufactured", expr.to_json()}};
            default: return expr.to_json();
        }
    }
};

inline MollifierSchedule parse_schedule(const nlohmann::json& j, const std::string& where)
{
    MollifierSchedule s;
    if (!j.is_object()) throw ArgumentError(where + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        const std::string at = where + "." + k;
        if (k == "levels") s.levels = v.get<int>();
        else if (k == "smoother") {
            const auto name = v.get<std::string>();
            if (name == "sharp") s.smoother = Smoother::sharp;
            else if (name == "raised_cosine") s.smoother = Smoother::raised_cosine;
            else throw ArgumentError(at + ": unknown smoother \"" + name + "\" (sharp, raised_cosine)");
        } else if (k == "base_cutoff") s.base_cutoff = v.get<double>();
        else if (k == "base_floor") s.base_floor = v.get<double>();
        else if (k == "q") s.q = v.get<double>();
        else if (k == "max_refinements") s.max_refinements = v.get<int>();
        else throw ArgumentError(at + ": unknown key");
    }
    try {
        s.validate();
    } catch (const ArgumentError& e) {
        throw ArgumentError(where + ": " + e.what());
    }
    return s;
}

inline ojson schedule_json(const MollifierSchedule& s)
{
    return {{"levels", s.levels}, {"smoother", to_string(s.smoother)}, {"base_cutoff", s.base_cutoff},
            {"base_floor", s.base_floor}, {"q", s.q}, {"max_refinements", s.max_refinements}};
}

struct RunConfig {
    int dim = 2;
    std::vector<int> sizes{32, 32};
    std::vector<double> periods{1.0, 1.0};
    TensorExpression metric = TensorExpression::identity(2);
    Scheme scheme = Scheme::fd4;
    std::string family = "monge_ampere";
    int k = 0;
    double sigma = 1.0;
    TensorExpression chi;
    RhsSource rhs;
    std::optional<Expression> exact_phi;
    std::vector<int> convergence_sizes;
    SolveOptions solver;
    std::string experiment;  // empty for solve / verify-conditions
    ojson params = ojson::object();
    std::string output = "out";
    int condition_samples = 10000;
    /// Directory that relative field paths resolve against; not serialized.
    std::filesystem::path base_dir;

    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {})
    {
        RunConfig c;
        c.base_dir = base_dir;
        if (!j.is_object()) throw ArgumentError("config: expected a JSON object at top level");
        for (const auto& [key, v] : j.items())
            if (key != "geometry" && key != "operator" && key != "problem" && key != "solver" && key != "experiment" &&
                key != "output" && key != "convergence" && key != "conditions")
                throw ArgumentError("config: unknown top-level key \"" + key + "\"");

        const auto& geo = require(j, "geometry", "config");
        c.dim = get<int>(geo, "dim", "geometry");
        if (c.dim != 2 && c.dim != 3) throw ArgumentError(detail::concat("geometry.dim: must be 2 or 3, got ", c.dim));
        c.sizes = get<std::vector<int>>(geo, "sizes", "geometry");
        if (static_cast<int>(c.sizes.size()) != c.dim) throw ArgumentError("geometry.sizes: need one entry per axis");
        c.periods = geo.contains("periods") ? get<std::vector<double>>(geo, "periods", "geometry")
                                            : std::vector<double>(static_cast<std::size_t>(c.dim), 1.0);
        if (static_cast<int>(c.periods.size()) != c.dim) throw ArgumentError("geometry.periods: need one entry per axis");
        c.metric = geo.contains("metric") ? TensorExpression::parse(geo["metric"], c.dim, "geometry.metric", false)
                                          : TensorExpression::identity(c.dim);
        if (geo.contains("scheme")) {
            const auto s = get<std::string>(geo, "scheme", "geometry");
            if (s == "fd2") c.scheme = Scheme::fd2;
            else if (s == "fd4") c.scheme = Scheme::fd4;
            else throw ArgumentError("geometry.scheme: expected fd2 or fd4, got \"" + s + "\"");
        }
        for (const auto& [key, v] : geo.items())
            if (key != "dim" && key != "sizes" && key != "periods" && key != "metric" && key != "scheme")
                throw ArgumentError("geometry: unknown key \"" + key + "\"");

        if (j.contains("operator")) {
            const auto& op = j["operator"];
            if (op.contains("family")) c.family = get<std::string>(op, "family", "operator");
            if (c.family != "monge_ampere" && c.family != "hessian_quotient")
                throw ArgumentError("operator.family: expected monge_ampere or hessian_quotient, got \"" + c.family + "\"");
            if (op.contains("k")) c.k = get<int>(op, "k", "operator");
            if (op.contains("sigma")) c.sigma = get<double>(op, "sigma", "operator");
            for (const auto& [key, v] : op.items())
                if (key != "family" && key != "k" && key != "sigma") throw ArgumentError("operator: unknown key \"" + key + "\"");
        }

        const auto& pb = require(j, "problem", "config");
        c.chi = pb.contains("chi") ? TensorExpression::parse(pb["chi"], c.dim, "problem.chi", true)
                                   : TensorExpression::parse(nlohmann::json{{"metric_multiple", 2.0}}, c.dim, "problem.chi", true);
        c.rhs = pb.contains("rhs") ? RhsSource::parse(pb["rhs"], "problem.rhs") : RhsSource{};
        if (pb.contains("exact_phi")) c.exact_phi = Expression::parse(pb["exact_phi"], "problem.exact_phi");
        if (c.rhs.kind == RhsSource::Kind::manufactured && c.exact_phi)
            throw ArgumentError("problem: give the manufactured potential either in rhs.manufactured or exact_phi, not both");
        if (c.rhs.kind == RhsSource::Kind::manufactured) c.exact_phi = c.rhs.expr;
        for (const auto& [key, v] : pb.items())
            if (key != "chi" && key != "rhs" && key != "exact_phi") throw ArgumentError("problem: unknown key \"" + key + "\"");

        if (j.contains("solver")) {
            const auto& s = j["solver"];
            for (const auto& [key, v] : s.items()) {
                if (key == "continuity_steps") c.solver.continuity_steps = v.get<int>();
                else if (key == "newton_tol") c.solver.newton_tol = v.get<double>();
                else if (key == "linear_tol") c.solver.linear_tol = v.get<double>();
                else if (key == "max_newton_iters") c.solver.max_newton_iters = v.get<int>();
                else if (key == "max_bisections") c.solver.max_bisections = v.get<int>();
                else if (key == "damping_floor") c.solver.damping_floor = v.get<double>();
                else if (key == "linear") {
                    const auto name = v.get<std::string>();
                    if (name == "automatic") c.solver.linear = LinearSolver::automatic;
                    else if (name == "direct") c.solver.linear = LinearSolver::direct;
                    else if (name == "bicgstab") c.solver.linear = LinearSolver::bicgstab;
                    else throw ArgumentError("solver.linear: expected automatic, direct or bicgstab");
                } else throw ArgumentError("solver: unknown key \"" + key + "\"");
            }
            try {
                c.solver.validate();
            } catch (const ArgumentError& e) {
                throw ArgumentError(std::string("solver: ") + e.what());
            }
        }
        if (j.contains("convergence")) {
            c.convergence_sizes = get<std::vector<int>>(j["convergence"], "sizes", "convergence");
            if (!c.exact_phi) throw ArgumentError("convergence: needs problem.exact_phi or a manufactured rhs");
        }
        if (j.contains("conditions")) c.condition_samples = get<int>(j["conditions"], "samples", "conditions");
        if (j.contains("experiment")) {
            const auto& e = j["experiment"];
            c.experiment = get<std::string>(e, "name", "experiment");
            c.params = ojson::object();
            for (const auto& [key, v] : e.items())
                if (key != "name") c.params[key] = v;
        }
        if (j.contains("output")) c.output = j["output"].get<std::string>();
        return c;
    }

    static RunConfig load(const std::filesystem::path& path)
    {
        std::ifstream is(path);
        if (!is) throw ArgumentError("config file " + path.string() + " does not exist or is unreadable");
        nlohmann::json j;
        const auto ext = path.extension().string();
        try {
            if (ext == ".yaml" || ext == ".yml") j = detail::yaml_to_json(YAML::Load(is));
            else j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::parse_error& e) {
            throw ArgumentError("config file " + path.string() + ": " + e.what());
        } catch (const YAML::Exception& e) {
            throw ArgumentError("config file " + path.string() + ": " + e.what());
        }
        try {
            return from_json(j, path.parent_path());
        } catch (const nlohmann::json::exception& e) {
            throw ArgumentError("config file " + path.string() + ": " + e.what());
        }
    }

    ojson to_json() const
    {
        ojson j;
        j["geometry"] = {{"dim", dim}, {"sizes", sizes}, {"periods", periods}, {"metric", metric.to_json()},
                         {"scheme", to_string(scheme)}};
        j["operator"] = {{"family", family}, {"k", k}, {"sigma", sigma}};
        ojson pb;
        pb["chi"] = chi.to_json();
        pb["rhs"] = rhs.to_json();
        if (exact_phi && rhs.kind != RhsSource::Kind::manufactured) pb["exact_phi"] = exact_phi->to_json();
        j["problem"] = pb;
        j["solver"] = {{"continuity_steps", solver.continuity_steps}, {"newton_tol", solver.newton_tol},
                       {"linear_tol", solver.linear_tol}, {"max_newton_iters", solver.max_newton_iters},
                       {"max_bisections", solver.max_bisections}, {"damping_floor", solver.damping_floor},
                       {"linear", to_string(solver.linear)}};
        if (!convergence_sizes.empty()) j["convergence"] = {{"sizes", convergence_sizes}};
        j["conditions"] = {{"samples", condition_samples}};
        if (!experiment.empty()) {
            ojson e;
            e["name"] = experiment;
            for (const auto& [key, v] : params.items()) e[key] = v;
            j["experiment"] = e;
        }
        j["output"] = output;
        return j;
    }

    OperatorSpec op() const
    {
        if (family == "monge_ampere") return OperatorSpec::monge_ampere(dim, sigma);
        return OperatorSpec::hessian_quotient(dim, k, sigma);
    }

    template <int Dim>
    PeriodicGrid<Dim> grid(std::optional<int> size = std::nullopt) const
    {
        std::array<int, Dim> s;
        std::array<double, Dim> p;
        for (int a = 0; a < Dim; ++a) {
            s[a] = size ? *size : sizes[static_cast<std::size_t>(a)];
            p[a] = periods[static_cast<std::size_t>(a)];
        }
        return PeriodicGrid<Dim>(s, p);
    }

    template <int Dim>
    MetricField<Dim> metric_field(const PeriodicGrid<Dim>& g) const
    {
        const Mat<Dim> zero = Mat<Dim>::Zero();
        SymTensorField<Dim> t(g);
        for (std::size_t p = 0; p < g.num_points(); ++p) t.set(p, metric.eval<Dim>(g.coords(p), g.periods(), zero));
        return MetricField<Dim>(std::move(t));
    }

    template <int Dim>
    SymTensorField<Dim> chi_field(const PeriodicGrid<Dim>& g, const MetricField<Dim>& m) const
    {
        SymTensorField<Dim> t(g);
        for (std::size_t p = 0; p < g.num_points(); ++p) t.set(p, chi.eval<Dim>(g.coords(p), g.periods(), m.g(p)));
        return t;
    }

    std::filesystem::path resolve(const std::string& path) const
    {
        std::filesystem::path p(path);
        return p.is_absolute() ? p : base_dir / p;
    }

    /// Evaluates any rhs source on g given the geometry.
    template <int Dim>
    ScalarField<Dim> rhs_field(const RhsSource& src, const PeriodicGrid<Dim>& g, const MetricField<Dim>& m,
                               const SymTensorField<Dim>& c) const
    {
        const auto spec = op();
        switch (src.kind) {
            case RhsSource::Kind::field: return read_field<Dim>(resolve(src.field), g);
            case RhsSource::Kind::expression: return src.expr.sample(g);
            case RhsSource::Kind::base_times: {
                auto e = src.expr.sample(g);
                for (std::size_t p = 0; p < e.size(); ++p) e[p] *= F_eval<Dim>(spec, c[p], m.g(p));
                return e;
            }
            case RhsSource::Kind::manufactured: {
                // exact for trigonometric data below the Nyquist index
                const auto phi = src.expr.sample(g);
                const auto gamma = christoffels(m, Scheme::spectral);
                const auto hess = covariant_hessian(phi, m, gamma, Scheme::spectral);
                ScalarField<Dim> e(g);
                for (std::size_t p = 0; p < e.size(); ++p) e[p] = F_eval<Dim>(spec, Mat<Dim>(c[p] + hess[p]), m.g(p));
                return e;
            }
        }
        return ScalarField<Dim>(g, 1.0);
    }

    template <int Dim>
    Problem<Dim> problem(std::optional<int> size = std::nullopt) const
    {
        const auto g = grid<Dim>(size);
        auto m = metric_field(g);
        auto c = chi_field(g, m);
        auto r = rhs_field(rhs, g, m, c);
        return Problem<Dim>(op(), std::move(c), std::move(m), std::move(r), scheme);
    }

private:
    static const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& where)
    {
        if (!j.contains(key)) throw ArgumentError(where + ": missing required key \"" + key + "\"");
        return j[key];
    }

    template <class T>
    static T get(const nlohmann::json& j, const char* key, const std::string& where)
    {
        if (!j.is_object() || !j.contains(key)) throw ArgumentError(where + ": missing required key \"" + key + "\"");
        try {
            return j[key].get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ArgumentError(where + "." + key + ": value has the wrong type");
        }
    }
};

}  // namespace hessian_lab
