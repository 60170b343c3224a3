// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "refinery/errors.hpp"
#include "refinery/lemma.hpp"
#include "refinery/oracle.hpp"

namespace refinery {

namespace {

Shape to_shape(const std::vector<std::int64_t>& dims) {
    Shape s;
    for (auto d : dims) s.emplace_back(d);
    return s;
}

ShapeResolver sample_resolver(const LemmaSample& sample) {
    std::map<std::string, Shape> shapes;
    for (const auto& in : sample.inputs) shapes[in.id] = to_shape(in.shape);
    return [shapes](const std::string& id) -> std::optional<Shape> {
        auto it = shapes.find(id);
        if (it == shapes.end()) return std::nullopt;
        return it->second;
    };
}

} // namespace

void self_validate(const Lemma& l) {
    if (!l.custom && !l.is_declarative())
        throw LemmaValidationError(l.name + ": lemma has neither patterns nor a custom pass");
    if (l.custom && l.is_declarative())
        throw LemmaValidationError(l.name + ": lemma has both patterns and a custom pass");
    if (l.is_declarative()) {
        std::set<std::string> ltv, lav, rtv, rav;
        l.lhs->collect_vars(ltv, lav);
        l.rhs->collect_vars(rtv, rav);
        for (const auto& v : rtv)
            if (!ltv.count(v))
                throw LemmaValidationError(l.name + ": rhs uses unbound pattern var '?" + v + "'");
        for (const auto& v : rav)
            if (!lav.count(v))
                throw LemmaValidationError(l.name + ": rhs uses unbound attribute var '?" + v +
                                           "'");
        if (l.direction == Lemma::Direction::Both) {
            for (const auto& v : ltv)
                if (!rtv.count(v))
                    throw LemmaValidationError(l.name + ": bidirectional lemma drops var '?" + v +
                                               "' on the rhs");
        }
    }
    if (l.samples.empty())
        throw LemmaValidationError(l.name + ": lemma carries no validation sample");
    for (const auto& s : l.samples) {
        ConstraintStore cs;
        auto resolver = sample_resolver(s);
        Expr::Ptr lhs, rhs;
        try {
            lhs = parse_expr(s.lhs);
            rhs = parse_expr(s.rhs);
        } catch (const Error& e) {
            throw LemmaValidationError(l.name + ": bad sample expression: " + e.what());
        }
        Shape sl, sr;
        try {
            sl = infer_expr_shape(lhs, resolver, cs);
            sr = infer_expr_shape(rhs, resolver, cs);
        } catch (const Error& e) {
            throw LemmaValidationError(l.name + ": sample fails shape rules: " + e.what());
        }
        if (sl.size() != sr.size())
            throw LemmaValidationError(l.name + ": sample lhs/rhs ranks differ");
        for (size_t i = 0; i < sl.size(); i++)
            if (decide_cmp(sl[i], sr[i], CmpRel::Eq, cs) == Tristate::False)
                throw LemmaValidationError(l.name + ": sample lhs/rhs shapes differ: " +
                                           shape_str(sl) + " vs " + shape_str(sr));
    }
}

double validate_lemma_numeric(const Lemma& l, int rounds, double rel_tol) {
    double worst = 0;
    for (const auto& s : l.samples) {
        Expr::Ptr lhs = parse_expr(s.lhs);
        Expr::Ptr rhs = parse_expr(s.rhs);

        // Matcher check: saturating the sample lhs under this one lemma must
        // put the sample rhs into the same class.
        ConstraintStore cs;
        EGraph eg(sample_resolver(s), &cs);
        for (const auto& seed_expr : s.seeds) eg.add_expr(parse_expr(seed_expr), "seed");
        ClassId lc = eg.add_expr(lhs, "lhs");
        saturate(eg, {l}, SaturationBudget{}, nullptr);
        ClassId rc = eg.add_expr(rhs, "rhs");
        eg.rebuild();
        if (eg.find(lc) != eg.find(rc))
            throw LemmaValidationError(l.name + ": rule did not derive its sample rhs");

        for (int round = 0; round < rounds; round++) {
            std::map<std::string, NDArray> values;
            for (const auto& in : s.inputs) {
                std::mt19937_64 rng(0x51ce5 + 1315423911u * round +
                                    std::hash<std::string>{}(l.name + "/" + in.id));
                values.emplace(in.id, in.int_hi > 0
                                          ? NDArray::random_ints(in.shape, 0, in.int_hi, rng)
                                          : NDArray::random_normal(in.shape, rng));
            }
            NDArray a = eval_expr(lhs, values);
            NDArray b = eval_expr(rhs, values);
            double dev = 0;
            if (!allclose(a, b, rel_tol, 1e-9, &dev))
                throw LemmaValidationError(l.name + ": lhs/rhs disagree numerically (normalized " +
                                           std::to_string(dev) + ") on round " +
                                           std::to_string(round));
            worst = std::max(worst, dev);
        }
    }
    return worst;
}

} // namespace refinery
