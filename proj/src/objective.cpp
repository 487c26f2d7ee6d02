#include "bsdh/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bsdh {

double weighted_affinity_codes(std::span<const std::int8_t> code_a,
                               std::span<const std::int8_t> code_b,
                               std::span<const double> weights) {
    if (code_a.size() != code_b.size() || code_a.size() != weights.size())
        throw InputError("weighted_affinity_codes: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < code_a.size(); ++i)
        acc -= weights[i] * weights[i] * code_a[i] * code_b[i];
    return acc;
}

double weighted_euclidean(std::span<const double> relaxed_a, std::span<const double> relaxed_b,
                          std::span<const double> weights) {
    if (relaxed_a.size() != relaxed_b.size() || relaxed_a.size() != weights.size())
        throw InputError("weighted_euclidean: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < relaxed_a.size(); ++i) {
        const double w = std::fabs(weights[i]);
        const double d = relaxed_a[i] * w - relaxed_b[i] * w;
        acc += d * d;
    }
    return acc;
}

double triplet_margin_term(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, std::span<const double> weights,
                           double hinge_floor) {
    const double d = weighted_euclidean(anchor, positive, weights) -
                     weighted_euclidean(anchor, negative, weights);
    return std::max(d, hinge_floor);
}

SymMatrix build_similarity_class(const std::vector<std::int64_t>& labels) {
    if (labels.empty()) throw InputError("build_similarity_class: empty labels");
    SymMatrix s(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < labels.size(); ++j)
            s.at(i, j) = labels[i] == labels[j] ? 1.0 : 0.0;
    return s;
}

SymMatrix build_similarity_jaccard(const std::vector<std::vector<std::int32_t>>& tag_sets) {
    if (tag_sets.empty()) throw InputError("build_similarity_jaccard: empty input");
    for (const auto& t : tag_sets)
        if (t.empty()) throw InputError("build_similarity_jaccard: empty tag set");
    const std::size_t m = tag_sets.size();
    SymMatrix s(m);
    for (std::size_t i = 0; i < m; ++i) {
        s.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            const auto& a = tag_sets[i];
            const auto& b = tag_sets[j];
            std::size_t inter = 0, ia = 0, ib = 0;
            while (ia < a.size() && ib < b.size()) {
                if (a[ia] < b[ib]) ++ia;
                else if (b[ib] < a[ia]) ++ib;
                else { ++inter; ++ia; ++ib; }
            }
            const std::size_t uni = a.size() + b.size() - inter;
            const double v = static_cast<double>(inter) / static_cast<double>(uni);
            s.at(i, j) = v;
            s.at(j, i) = v;
        }
    }
    return s;
}

SymMatrix laplacian(const SymMatrix& similarity) {
    const std::size_t m = similarity.n;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (similarity.at(i, j) != similarity.at(j, i))
                throw InputError("laplacian: similarity matrix is not symmetric");
    SymMatrix lap(m);
    for (std::size_t i = 0; i < m; ++i) {
        double degree = 0.0; // off-diagonal row sum; the diagonal cancels in U - S
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) {
                degree += similarity.at(i, j);
                lap.at(i, j) = -similarity.at(i, j);
            }
        lap.at(i, i) = degree;
    }
    return lap;
}

double regularizer_value(const std::vector<std::vector<double>>& outputs, const SymMatrix& lap) {
    const std::size_t m = outputs.size();
    if (lap.n != m) throw InputError("regularizer_value: Laplacian size != batch size");
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double lij = lap.at(i, j);
            if (lij == 0.0) continue;
            double dot = 0.0;
            const auto& ci = outputs[i];
            const auto& cj = outputs[j];
            for (std::size_t k = 0; k < ci.size(); ++k) dot += ci[k] * cj[k];
            acc += lij * dot;
        }
    }
    return acc;
}

namespace {

void check_triplets(const std::vector<TripletIndex>& triplets, std::size_t m) {
    for (const TripletIndex& t : triplets)
        if (t.anchor >= m || t.positive >= m || t.negative >= m)
            throw InputError("triplet index out of range");
}

// Indices of `triplets` sorted by (anchor, positive, negative); summation in
// this order makes every result independent of the list's order, bit for bit.
std::vector<std::size_t> canonical_order(const std::vector<TripletIndex>& triplets) {
    std::vector<std::size_t> order(triplets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return triplets[a] < triplets[b];
    });
    return order;
}

double margin_of(const std::vector<std::vector<double>>& outputs, const TripletIndex& t) {
    const auto& ca = outputs[t.anchor];
    const auto& cp = outputs[t.positive];
    const auto& cn = outputs[t.negative];
    double dpos = 0.0, dneg = 0.0;
    for (std::size_t k = 0; k < ca.size(); ++k) {
        const double ep = ca[k] - cp[k];
        const double en = ca[k] - cn[k];
        dpos += ep * ep;
        dneg += en * en;
    }
    return dpos - dneg;
}

} // namespace

LossBreakdown batch_loss_detail(const std::vector<std::vector<double>>& outputs,
                                const std::vector<TripletIndex>& triplets, const SymMatrix& lap,
                                const ObjectiveConfig& cfg) {
    check_triplets(triplets, outputs.size());
    LossBreakdown out;
    std::size_t active = 0;
    double margin_sum = 0.0;
    for (std::size_t idx : canonical_order(triplets)) {
        const double d = margin_of(outputs, triplets[idx]);
        if (d > cfg.hinge_floor) ++active;
        margin_sum += std::max(d, cfg.hinge_floor);
    }
    if (!triplets.empty()) {
        out.margin = cfg.normalize_margin ? margin_sum / static_cast<double>(triplets.size())
                                          : margin_sum;
        out.active_fraction = static_cast<double>(active) / static_cast<double>(triplets.size());
    }
    out.regularizer = cfg.lambda * regularizer_value(outputs, lap);
    out.total = out.margin + out.regularizer;
    return out;
}

double batch_loss(const std::vector<std::vector<double>>& outputs,
                  const std::vector<TripletIndex>& triplets, const SymMatrix& lap,
                  const ObjectiveConfig& cfg) {
    return batch_loss_detail(outputs, triplets, lap, cfg).total;
}

std::vector<std::vector<double>> image_gradients(const std::vector<std::vector<double>>& outputs,
                                                 const std::vector<TripletIndex>& triplets,
                                                 const SymMatrix& lap,
                                                 const ObjectiveConfig& cfg) {
    const std::size_t m = outputs.size();
    const std::size_t q = m ? outputs[0].size() : 0;
    check_triplets(triplets, m);
    if (lap.n != m) throw InputError("image_gradients: Laplacian size != batch size");

    std::vector<std::vector<double>> grads(m, std::vector<double>(q, 0.0));
    const double scale =
        cfg.normalize_margin && !triplets.empty() ? 1.0 / static_cast<double>(triplets.size())
                                                  : 1.0;
    for (std::size_t idx : canonical_order(triplets)) {
        const TripletIndex& t = triplets[idx];
        if (margin_of(outputs, t) <= cfg.hinge_floor) continue; // clamped: flat region
        const auto& ca = outputs[t.anchor];
        const auto& cp = outputs[t.positive];
        const auto& cn = outputs[t.negative];
        auto& ga = grads[t.anchor];
        auto& gp = grads[t.positive];
        auto& gn = grads[t.negative];
        for (std::size_t k = 0; k < q; ++k) {
            ga[k] += scale * 2.0 * (cn[k] - cp[k]);
            gp[k] += scale * -2.0 * (ca[k] - cp[k]);
            gn[k] += scale * 2.0 * (ca[k] - cn[k]);
        }
    }
    // Exact gradient of lambda tr(R L R^T) w.r.t. column j: 2 lambda (R L)_j.
    if (cfg.lambda != 0.0) {
        for (std::size_t j = 0; j < m; ++j) {
            auto& gj = grads[j];
            for (std::size_t i = 0; i < m; ++i) {
                const double lij = lap.at(i, j);
                if (lij == 0.0) continue;
                const auto& ci = outputs[i];
                for (std::size_t k = 0; k < q; ++k) gj[k] += 2.0 * cfg.lambda * lij * ci[k];
            }
        }
    }
    return grads;
}

std::vector<std::vector<double>>
image_gradients_triplet_route(const std::vector<std::vector<double>>& outputs,
                              const std::vector<TripletIndex>& triplets, const SymMatrix& lap,
                              const ObjectiveConfig& cfg) {
    const std::size_t m = outputs.size();
    const std::size_t q = m ? outputs[0].size() : 0;
    check_triplets(triplets, m);
    if (lap.n != m) throw InputError("image_gradients_triplet_route: Laplacian size mismatch");

    std::vector<std::vector<double>> grads(m, std::vector<double>(q, 0.0));
    const double scale =
        cfg.normalize_margin && !triplets.empty() ? 1.0 / static_cast<double>(triplets.size())
                                                  : 1.0;
    for (std::size_t idx : canonical_order(triplets)) {
        const TripletIndex& t = triplets[idx];
        if (margin_of(outputs, t) <= cfg.hinge_floor) continue;
        const auto& ca = outputs[t.anchor];
        const auto& cp = outputs[t.positive];
        const auto& cn = outputs[t.negative];
        for (std::size_t k = 0; k < q; ++k) {
            // d D / d anchor = 2(c_a - c_p) - 2(c_a - c_n), kept in expanded
            // form so this route rounds independently of image_gradients.
            grads[t.anchor][k] += scale * (2.0 * (ca[k] - cp[k]) - 2.0 * (ca[k] - cn[k]));
            grads[t.positive][k] += scale * (-2.0 * (ca[k] - cp[k]));
            grads[t.negative][k] += scale * (2.0 * (ca[k] - cn[k]));
        }
    }
    if (cfg.lambda != 0.0) {
        // Remove-one-column form: (R_{-j} L_{j,-j} + L_jj c_j), doubled to the
        // exact derivative.
        for (std::size_t j = 0; j < m; ++j) {
            auto& gj = grads[j];
            for (std::size_t i = 0; i < m; ++i) {
                if (i == j) continue;
                const double lij = lap.at(i, j);
                if (lij == 0.0) continue;
                const auto& ci = outputs[i];
                for (std::size_t k = 0; k < q; ++k) gj[k] += 2.0 * cfg.lambda * lij * ci[k];
            }
            const double ljj = lap.at(j, j);
            for (std::size_t k = 0; k < q; ++k) gj[k] += 2.0 * cfg.lambda * ljj * outputs[j][k];
        }
    }
    return grads;
}

} // namespace bsdh
