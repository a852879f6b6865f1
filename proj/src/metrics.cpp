#include "gvl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gvl/errors.hpp"

namespace gvl {

std::string_view to_string(Method m) {
    return m == Method::spearman ? "spearman" : "kendall";
}

Method method_from_string(std::string_view s) {
    if (s == "spearman") return Method::spearman;
    if (s == "kendall") return Method::kendall;
    throw DomainError("unknown method: " + std::string(s));
}

std::vector<double> fractional_ranks(const std::vector<double>& x) {
    if (x.empty()) throw DomainError("fractional_ranks: empty input");
    for (double v : x)
        if (!std::isfinite(v)) throw DomainError("fractional_ranks: non-finite input");

    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

namespace {

void check_pair(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DomainError("correlation: length mismatch");
    if (x.size() < 2) throw DomainError("correlation: need at least 2 points");
}

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// Counts pair swaps needed to sort `y` ascending (merge sort). Ties
// contribute nothing; they are accounted for separately by the caller.
std::uint64_t inversion_count(std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> buf(n);
    std::uint64_t inversions = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
            const std::size_t mid = lo + width;
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t a = lo, b = mid, out = lo;
            while (a < mid && b < hi) {
                if (y[b] < y[a]) {
                    inversions += mid - a;
                    buf[out++] = y[b++];
                } else {
                    buf[out++] = y[a++];
                }
            }
            while (a < mid) buf[out++] = y[a++];
            while (b < hi) buf[out++] = y[b++];
            std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
                      buf.begin() + static_cast<std::ptrdiff_t>(hi),
                      y.begin() + static_cast<std::ptrdiff_t>(lo));
        }
    }
    return inversions;
}

std::uint64_t tie_pairs(std::uint64_t run) { return run * (run - 1) / 2; }

} // namespace

Correlation spearman(const std::vector<double>& x, const std::vector<double>& y) {
    check_pair(x, y);
    const std::vector<double> rx = fractional_ranks(x);
    const std::vector<double> ry = fractional_ranks(y);
    const std::size_t n = rx.size();
    const double mean = (static_cast<double>(n) + 1.0) / 2.0; // both rank vectors sum to n(n+1)/2
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return {0.0, true};
    return {clamp_unit(sxy / std::sqrt(sxx * syy)), false};
}

Correlation kendall(const std::vector<double>& x, const std::vector<double>& y) {
    check_pair(x, y);
    for (double v : x)
        if (!std::isfinite(v)) throw DomainError("kendall: non-finite input");
    for (double v : y)
        if (!std::isfinite(v)) throw DomainError("kendall: non-finite input");

    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    // Tie accounting over pairs: n1 ties in x, n2 ties in y, n3 joint ties.
    std::uint64_t n1 = 0, n3 = 0;
    {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
            n1 += tie_pairs(j - i + 1);
            std::size_t a = i;
            while (a <= j) {
                std::size_t b = a;
                while (b + 1 <= j && y[order[b + 1]] == y[order[a]]) ++b;
                n3 += tie_pairs(b - a + 1);
                a = b + 1;
            }
            i = j + 1;
        }
    }
    std::uint64_t n2 = 0;
    {
        std::vector<double> ys(y);
        std::sort(ys.begin(), ys.end());
        std::size_t i = 0;
        while (i < ys.size()) {
            std::size_t j = i;
            while (j + 1 < ys.size() && ys[j + 1] == ys[i]) ++j;
            n2 += tie_pairs(j - i + 1);
            i = j + 1;
        }
    }

    std::vector<double> y_by_x(n);
    for (std::size_t i = 0; i < n; ++i) y_by_x[i] = y[order[i]];
    const std::uint64_t discordant = inversion_count(y_by_x);

    const std::uint64_t n0 = tie_pairs(n);
    const double num = static_cast<double>(n0) - static_cast<double>(n1) -
                       static_cast<double>(n2) + static_cast<double>(n3) -
                       2.0 * static_cast<double>(discordant);
    const double den =
        std::sqrt((static_cast<double>(n0) - static_cast<double>(n1)) *
                  (static_cast<double>(n0) - static_cast<double>(n2)));
    if (den == 0.0) return {0.0, true};
    return {clamp_unit(num / den), false};
}

Correlation voc(const std::vector<double>& predictions_temporal, Method method) {
    std::vector<double> index(predictions_temporal.size());
    std::iota(index.begin(), index.end(), 1.0);
    return method == Method::spearman ? spearman(predictions_temporal, index)
                                      : kendall(predictions_temporal, index);
}

AggregateStats aggregate(const std::vector<EpisodeResult>& results) {
    if (results.empty()) throw DomainError("aggregate: no results");
    AggregateStats s;
    std::vector<double> vocs;
    for (const auto& r : results) {
        switch (r.status) {
            case ParseStatus::ok:
                ++s.n_ok;
                vocs.push_back(r.voc);
                break;
            case ParseStatus::mismatch: ++s.n_mismatch; break;
            case ParseStatus::empty: ++s.n_empty; break;
        }
    }
    if (s.n_ok == 0) return s;
    s.has_stats = true;
    s.voc_mean = std::accumulate(vocs.begin(), vocs.end(), 0.0) / static_cast<double>(s.n_ok);
    if (s.n_ok > 1) {
        double ss = 0.0;
        for (double v : vocs) ss += (v - s.voc_mean) * (v - s.voc_mean);
        s.voc_std = std::sqrt(ss / static_cast<double>(s.n_ok - 1));
    }
    s.voc_stderr = s.voc_std / std::sqrt(static_cast<double>(s.n_ok));
    return s;
}

} // namespace gvl
