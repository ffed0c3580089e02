#pragma once

#include <json.hpp>

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "hessian_lab/errors.hpp"
#include "hessian_lab/grid.hpp"

namespace hessian_lab {

/// Closed-form field on the torus chart. JSON grammar:
///   number                                  constant
///   {"trig": [{"c": a, "f": ["sin", "cos"], "k": [1, 2]}, ...]}
///        sum of a * prod_axis f_axis(2 pi k_axis x_axis / period_axis); "f" entries
///        are "sin", "cos" or "1", and a term without "f" is the constant a
///   {"sum": [e, ...]}  {"mul": [e, ...]}  {"max": [e, ...]}  {"min": [e, ...]}
///   {"abs": e}  {"exp": e}
class Expression {
public:
    struct TrigTerm {
        double c = 0.0;
        std::vector<std::string> f;
        std::vector<int> k;
    };

    Expression() : Expression(0.0) {}
    explicit Expression(double c)
    {
        auto n = std::make_shared<Node>();
        n->value = c;
        node_ = n;
    }

    static Expression parse(const nlohmann::json& j, const std::string& where = "expression")
    {
        Expression e;
        e.node_ = parse_node(j, where);
        return e;
    }

    static Expression trig(std::vector<TrigTerm> terms)
    {
        auto n = std::make_shared<Node>();
        n->kind = Kind::trig;
        n->terms = std::move(terms);
        Expression e;
        e.node_ = n;
        return e;
    }

    nlohmann::ordered_json to_json() const { return dump_node(*node_); }

    /// Evaluates at chart coordinates x (one entry per axis).
    double eval(std::span<const double> x, std::span<const double> periods) const { return eval_node(*node_, x, periods); }

    template <int Dim>
    ScalarField<Dim> sample(const PeriodicGrid<Dim>& grid) const
    {
        return ScalarField<Dim>::sample(grid, [&](const auto& x) {
            const double v = eval(x, grid.periods());
            if (!std::isfinite(v)) throw ArgumentError("expression evaluates to a non-finite value");
            return v;
        });
    }

    /// Largest axis count referenced by trig terms (0 for constants).
    int axes_used() const { return axes_node(*node_); }

private:
    enum class Kind { constant, trig, sum, mul, max, min, abs, exp };

    struct Node {
        Kind kind = Kind::constant;
        double value = 0.0;
        std::vector<TrigTerm> terms;
        std::vector<std::shared_ptr<const Node>> children;
    };

    static std::shared_ptr<const Node> parse_node(const nlohmann::json& j, const std::string& where)
    {
        auto n = std::make_shared<Node>();
        if (j.is_number()) {
            n->kind = Kind::constant;
            n->value = j.get<double>();
            return n;
        }
        if (!j.is_object() || j.size() != 1)
            throw ArgumentError(where + ": expected a number or an object with exactly one operator key");
        const auto& [key, arg] = *j.items().begin();
        const std::string at = where + "." + key;
        if (key == "trig") {
            n->kind = Kind::trig;
            if (!arg.is_array()) throw ArgumentError(at + ": expected an array of terms");
            for (std::size_t t = 0; t < arg.size(); ++t) {
                const auto& tj = arg[t];
                const std::string tw = detail::concat(at, "[", t, "]");
                if (!tj.is_object() || !tj.contains("c") || !tj["c"].is_number())
                    throw ArgumentError(tw + ": term needs a numeric \"c\"");
                TrigTerm term;
                term.c = tj["c"].get<double>();
                if (tj.contains("f")) {
                    term.f = tj["f"].get<std::vector<std::string>>();
                    if (!tj.contains("k")) throw ArgumentError(tw + ": \"f\" given without \"k\"");
                    term.k = tj["k"].get<std::vector<int>>();
                    if (term.f.size() != term.k.size()) throw ArgumentError(tw + ": \"f\" and \"k\" differ in length");
                    for (const auto& s : term.f)
                        if (s != "sin" && s != "cos" && s != "1")
                            throw ArgumentError(tw + ": unknown factor \"" + s + "\" (use sin, cos or 1)");
                }
                for (const auto& [tk, tv] : tj.items())
                    if (tk != "c" && tk != "f" && tk != "k") throw ArgumentError(tw + ": unknown key \"" + tk + "\"");
                n->terms.push_back(std::move(term));
            }
            return n;
        }
        if (key == "abs" || key == "exp") {
            n->kind = key == "abs" ? Kind::abs : Kind::exp;
            n->children.push_back(parse_node(arg, at));
            return n;
        }
        if (key == "sum" || key == "mul" || key == "max" || key == "min") {
            n->kind = key == "sum" ? Kind::sum : key == "mul" ? Kind::mul : key == "max" ? Kind::max : Kind::min;
            if (!arg.is_array() || arg.empty()) throw ArgumentError(at + ": expected a non-empty array");
            for (std::size_t c = 0; c < arg.size(); ++c) n->children.push_back(parse_node(arg[c], detail::concat(at, "[", c, "]")));
            return n;
        }
        throw ArgumentError(where + ": unknown operator \"" + key + "\" (valid: trig, sum, mul, max, min, abs, exp)");
    }

    static nlohmann::ordered_json dump_node(const Node& n)
    {
        switch (n.kind) {
            case Kind::constant: return n.value;
            case Kind::trig: {
                auto arr = nlohmann::ordered_json::array();
                for (const auto& t : n.terms) {
                    nlohmann::ordered_json tj;
                    tj["c"] = t.c;
                    if (!t.f.empty()) {
                        tj["f"] = t.f;
                        tj["k"] = t.k;
                    }
                    arr.push_back(tj);
                }
                return {{"trig", arr}};
            }
            case Kind::abs: return {{"abs", dump_node(*n.children[0])}};
            case Kind::exp: return {{"exp", dump_node(*n.children[0])}};
            default: break;
        }
        auto arr = nlohmann::ordered_json::array();
        for (const auto& c : n.children) arr.push_back(dump_node(*c));
        const char* key = n.kind == Kind::sum ? "sum" : n.kind == Kind::mul ? "mul" : n.kind == Kind::max ? "max" : "min";
        return {{key, arr}};
    }

    static double eval_node(const Node& n, std::span<const double> x, std::span<const double> periods)
    {
        switch (n.kind) {
            case Kind::constant: return n.value;
            case Kind::trig: {
                double s = 0.0;
                for (const auto& t : n.terms) {
                    double v = t.c;
                    for (std::size_t a = 0; a < t.f.size(); ++a) {
                        if (t.f[a] == "1") continue;
                        if (a >= x.size())
                            throw ArgumentError(detail::concat("trig term references axis ", a, " on a ", x.size(),
                                                               "-dimensional grid"));
                        const double arg = 2.0 * std::numbers::pi * t.k[a] * x[a] / periods[a];
                        v *= t.f[a] == "sin" ? std::sin(arg) : std::cos(arg);
                    }
                    s += v;
                }
                return s;
            }
            case Kind::abs: return std::abs(eval_node(*n.children[0], x, periods));
            case Kind::exp: return std::exp(eval_node(*n.children[0], x, periods));
            case Kind::sum: {
                double s = 0.0;
                for (const auto& c : n.children) s += eval_node(*c, x, periods);
                return s;
            }
            case Kind::mul: {
                double s = 1.0;
                for (const auto& c : n.children) s *= eval_node(*c, x, periods);
                return s;
            }
            case Kind::max:
            case Kind::min: {
                double s = eval_node(*n.children[0], x, periods);
                for (std::size_t c = 1; c < n.children.size(); ++c) {
                    const double v = eval_node(*n.children[c], x, periods);
                    s = n.kind == Kind::max ? std::max(s, v) : std::min(s, v);
                }
                return s;
            }
        }
        return 0.0;
    }

    static int axes_node(const Node& n)
    {
        int m = 0;
        for (const auto& t : n.terms)
            for (std::size_t a = 0; a < t.f.size(); ++a)
                if (t.f[a] != "1") m = std::max(m, static_cast<int>(a) + 1);
        for (const auto& c : n.children) m = std::max(m, axes_node(*c));
        return m;
    }

    std::shared_ptr<const Node> node_;
};

/// Symmetric tensor expression: c * g + E, where E is a symmetric matrix of
/// Expressions. JSON: "identity", {"entries": [[...], ...]}, or
/// {"metric_multiple": c, "entries": [[...], ...]} (entries optional there).
class TensorExpression {
public:
    static TensorExpression identity(int dim)
    {
        TensorExpression t;
        t.dim_ = dim;
        t.entries_.assign(static_cast<std::size_t>(dim * dim), Expression(0.0));
        for (int i = 0; i < dim; ++i) t.entries_[static_cast<std::size_t>(i * dim + i)] = Expression(1.0);
        t.identity_ = true;
        return t;
    }

    static TensorExpression parse(const nlohmann::json& j, int dim, const std::string& where, bool allow_metric_multiple)
    {
        if (j.is_string()) {
            if (j.get<std::string>() != "identity") throw ArgumentError(where + ": the only tensor keyword is \"identity\"");
            return identity(dim);
        }
        if (!j.is_object()) throw ArgumentError(where + ": expected \"identity\" or an object");
        TensorExpression t;
        t.dim_ = dim;
        t.entries_.assign(static_cast<std::size_t>(dim * dim), Expression(0.0));
        for (const auto& [k, v] : j.items())
            if (k != "entries" && k != "metric_multiple") throw ArgumentError(where + ": unknown key \"" + k + "\"");
        if (j.contains("metric_multiple")) {
            if (!allow_metric_multiple) throw ArgumentError(where + ": metric_multiple is only allowed for chi");
            t.metric_multiple_ = j["metric_multiple"].get<double>();
        }
        if (j.contains("entries")) {
            const auto& e = j["entries"];
            if (!e.is_array() || static_cast<int>(e.size()) != dim)
                throw ArgumentError(detail::concat(where, ".entries: expected ", dim, " rows"));
            for (int r = 0; r < dim; ++r) {
                if (!e[r].is_array() || static_cast<int>(e[r].size()) != dim)
                    throw ArgumentError(detail::concat(where, ".entries[", r, "]: expected ", dim, " columns"));
                for (int c = 0; c < dim; ++c)
                    t.entries_[static_cast<std::size_t>(r * dim + c)] =
                        Expression::parse(e[r][c], detail::concat(where, ".entries[", r, "][", c, "]"));
            }
            for (int r = 0; r < dim; ++r)
                for (int c = 0; c < r; ++c)
                    if (e[r][c] != e[c][r])
                        throw ArgumentError(detail::concat(where, ".entries: entry (", r, ",", c,
                                                           ") differs from its transpose"));
        } else if (!j.contains("metric_multiple")) {
            throw ArgumentError(where + ": needs \"entries\" or \"metric_multiple\"");
        }
        return t;
    }

    nlohmann::ordered_json to_json() const
    {
        if (identity_) return "identity";
        nlohmann::ordered_json j;
        if (metric_multiple_ != 0.0) j["metric_multiple"] = metric_multiple_;
        bool any = false;
        auto rows = nlohmann::ordered_json::array();
        for (int r = 0; r < dim_; ++r) {
            auto row = nlohmann::ordered_json::array();
            for (int c = 0; c < dim_; ++c) {
                auto v = entries_[static_cast<std::size_t>(r * dim_ + c)].to_json();
                if (!(v.is_number() && v.get<double>() == 0.0)) any = true;
                row.push_back(v);
            }
            rows.push_back(row);
        }
        if (any || metric_multiple_ == 0.0) j["entries"] = rows;
        return j;
    }

    double metric_multiple() const { return metric_multiple_; }

    /// E(x) + metric_multiple * g.
    template <int Dim>
    Mat<Dim> eval(std::span<const double> x, std::span<const double> periods, const Mat<Dim>& g) const
    {
        Mat<Dim> m;
        for (int r = 0; r < Dim; ++r)
            for (int c = r; c < Dim; ++c) m(r, c) = m(c, r) = entries_[static_cast<std::size_t>(r * Dim + c)].eval(x, periods);
        return m + metric_multiple_ * g;
    }

private:
    int dim_ = 0;
    bool identity_ = false;
    double metric_multiple_ = 0.0;
    std::vector<Expression> entries_;
};

}  // namespace hessian_lab
