#include "homophily/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <Eigen/Dense>

#include "homophily/error.hpp"
#include "homophily/parallel.hpp"
#include "homophily/rng.hpp"

namespace homophily {

namespace {

double as_alpha(double v) { return std::isnan(v) ? 1.0 : v; }

std::vector<double> sorted_values(std::span<const double> s) {
    std::vector<double> v(s.size());
    std::transform(s.begin(), s.end(), v.begin(), as_alpha);
    std::sort(v.begin(), v.end());
    return v;
}

double statistic_from_counts(std::span<const std::uint32_t> ca, std::span<const std::uint32_t> cb, double na,
                             double nb) {
    double fa = 0, fb = 0, d = 0;
    for (std::size_t u = 0; u < ca.size(); ++u) {
        fa += ca[u];
        fb += cb[u];
        d = std::max(d, std::abs(fa / na - fb / nb));
    }
    return d;
}

// Matrix power keeping a separate base-10 exponent so entries stay finite.
void scaled_power(const Eigen::MatrixXd& a, std::size_t n, std::size_t centre, Eigen::MatrixXd& out, int& exponent) {
    if (n == 1) {
        out = a;
        exponent = 0;
        return;
    }
    Eigen::MatrixXd half;
    int e = 0;
    scaled_power(a, n / 2, centre, half, e);
    out = half * half;
    exponent = 2 * e;
    if (n % 2 == 1) out = a * out;
    if (out(centre, centre) > 1e140) {
        out *= 1e-140;
        exponent += 140;
    }
}

// P(D_n < d), Marsaglia, Tsang and Wang (2003).
double kolmogorov_cdf_exact(std::size_t n, double d) {
    const double nd = double(n) * d;
    const int k = int(nd) + 1;
    const int m = 2 * k - 1;
    const double h = k - nd;
    Eigen::MatrixXd H(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) H(i, j) = i - j + 1 < 0 ? 0.0 : 1.0;
    for (int i = 0; i < m; ++i) {
        H(i, 0) -= std::pow(h, i + 1);
        H(m - 1, i) -= std::pow(h, m - i);
    }
    H(m - 1, 0) += 2 * h - 1 > 0 ? std::pow(2 * h - 1, m) : 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i - j + 1 > 0)
                for (int g = 1; g <= i - j + 1; ++g) H(i, j) /= g;
    Eigen::MatrixXd Q;
    int e = 0;
    scaled_power(H, n, std::size_t(k - 1), Q, e);
    double s = Q(k - 1, k - 1);
    for (std::size_t i = 1; i <= n; ++i) {
        s = s * double(i) / double(n);
        if (s < 1e-140) {
            s *= 1e140;
            e -= 140;
        }
    }
    return s * std::pow(10.0, e);
}

double kolmogorov_asymptotic(double d, std::size_t n) {
    const double rn = std::sqrt(double(n));
    const double lambda = (rn + 0.12 + 0.11 / rn) * d;
    if (lambda < 1e-3) return 1.0;
    double sum = 0, sign = 1;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw Error("diagnostics", "KS test needs two non-empty samples");
    const auto x = sorted_values(a), y = sorted_values(b);
    const double na = double(x.size()), nb = double(y.size());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(double(i) / na - double(j) / nb));
    }
    return d;
}

KSResult ks_two_sample(std::span<const double> a, std::span<const double> b, const KSOptions& options) {
    if (a.empty() || b.empty()) throw Error("diagnostics", "KS test needs two non-empty samples");
    if (options.reps == 0) throw Error("diagnostics", "bootstrap needs at least one replicate");
    std::vector<double> pooled;
    pooled.reserve(a.size() + b.size());
    for (double v : a) pooled.push_back(as_alpha(v));
    for (double v : b) pooled.push_back(as_alpha(v));
    std::vector<double> values = pooled;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<std::uint32_t> rank(pooled.size());
    for (std::size_t i = 0; i < pooled.size(); ++i)
        rank[i] = std::uint32_t(std::lower_bound(values.begin(), values.end(), pooled[i]) - values.begin());

    const std::size_t na = a.size(), nb = b.size(), n = na + nb, u = values.size();
    std::vector<std::uint32_t> total(u, 0), ca(u, 0), cb(u, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++total[rank[i]];
        ++(i < na ? ca : cb)[rank[i]];
    }
    KSResult r;
    r.reps = options.reps;
    r.statistic = statistic_from_counts(ca, cb, double(na), double(nb));

    std::vector<std::uint8_t> hit(options.reps, 0);
    parallel_for(options.reps, options.threads, [&](std::size_t rep) {
        Rng rng(derive_seed(options.seed, rep));
        std::vector<std::uint32_t> xa(u, 0), xb(u, 0);
        if (options.with_replacement) {
            for (std::size_t i = 0; i < na; ++i) ++xa[rank[rng.index(n)]];
            for (std::size_t i = 0; i < nb; ++i) ++xb[rank[rng.index(n)]];
        } else {
            std::vector<std::uint32_t> perm(rank);
            for (std::size_t i = 0; i < na; ++i) {
                const std::size_t j = i + rng.index(n - i);
                std::swap(perm[i], perm[j]);
                ++xa[perm[i]];
            }
            for (std::size_t v = 0; v < u; ++v) xb[v] = total[v] - xa[v];
        }
        hit[rep] = statistic_from_counts(xa, xb, double(na), double(nb)) >= r.statistic - 1e-12;
    });
    r.p_value = double(std::accumulate(hit.begin(), hit.end(), std::size_t{0})) / double(options.reps);
    return r;
}

double kolmogorov_pvalue(double d, std::size_t n) {
    if (n == 0) throw Error("diagnostics", "KS test needs a non-empty sample");
    if (d <= 0) return 1.0;
    if (d >= 1) return 0.0;
    const int m = 2 * (int(double(n) * d) + 1) - 1;
    if (m > 400) return kolmogorov_asymptotic(d, n);
    return std::clamp(1.0 - kolmogorov_cdf_exact(n, d), 0.0, 1.0);
}

UniformityTest ks_uniformity(std::span<const double> values) {
    if (values.empty()) throw Error("diagnostics", "uniformity test needs values");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double n = double(v.size());
    double d = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = std::clamp(v[i], 0.0, 1.0);
        d = std::max({d, double(i + 1) / n - x, x - double(i) / n});
    }
    return {d, kolmogorov_pvalue(d, v.size())};
}

void KSReport::write_csv(std::ostream& out) const {
    out << "field,chain_a,chain_b,statistic,p_value,reps\n";
    for (const auto& r : rows)
        out << csv_field(r.field_id) << ',' << r.chain_a << ',' << r.chain_b << ',' << r.statistic << ','
            << r.p_value << ',' << r.reps << '\n';
}

nlohmann::json KSReport::scatter_json() const {
    std::vector<double> p;
    for (const auto& r : rows) p.push_back(r.p_value);
    std::sort(p.begin(), p.end());
    auto pts = nlohmann::json::array();
    for (std::size_t i = 0; i < p.size(); ++i)
        pts.push_back({{"uniform_quantile", (double(i) + 0.5) / double(p.size())}, {"p_value", p[i]}});
    return pts;
}

nlohmann::json KSReport::to_json() const {
    auto rs = nlohmann::json::array();
    for (const auto& r : rows)
        rs.push_back({{"field", r.field_id},
                      {"chain_a", r.chain_a},
                      {"chain_b", r.chain_b},
                      {"statistic", r.statistic},
                      {"p_value", r.p_value},
                      {"reps", r.reps}});
    return {{"rows", rs},
            {"uniformity", {{"statistic", uniformity.statistic}, {"p_value", uniformity.p_value}}},
            {"uniformity_level", uniformity_level},
            {"approximately_uniform", approximately_uniform},
            {"scatter", scatter_json()}};
}

KSReport compare_chains(std::span<const ChainRun> runs, const Corpus& corpus, std::span<const Index> fields,
                        const KSOptions& options) {
    if (runs.size() < 2) throw Error("diagnostics", "need at least two chains to compare");
    const auto& p0 = runs[0].plan;
    for (const auto& run : runs) {
        const auto& p = run.plan;
        if (p.iterations != p0.iterations || p.continue_prob != p0.continue_prob ||
            p.length_mode != p0.length_mode || p.proposals_per_iteration != p0.proposals_per_iteration || p.thin != p0.thin ||
            run.fields != runs[0].fields)
            throw Error("diagnostics", "chains were run with mismatched plans");
    }
    std::vector<Index> wanted(fields.begin(), fields.end());
    if (wanted.empty()) wanted = runs[0].fields;
    for (Index f : wanted)
        if (!runs[0].has_field(f)) throw Error("diagnostics", "field '" + corpus.fields().at(f).id + "' was not tracked");

    KSReport report;
    std::uint64_t row = 0;
    for (Index f : wanted) {
        for (std::size_t i = 0; i < runs.size(); ++i) {
            for (std::size_t j = i + 1; j < runs.size(); ++j) {
                KSOptions o = options;
                o.seed = derive_seed(options.seed, row++);
                auto r = ks_two_sample(runs[i].trace(f), runs[j].trace(f), o);
                report.rows.push_back({f, corpus.fields()[f].id, i, j, r.statistic, r.p_value, r.reps});
            }
        }
    }
    if (!report.rows.empty()) {
        std::vector<double> p;
        for (const auto& r : report.rows) p.push_back(r.p_value);
        report.uniformity = ks_uniformity(p);
        report.approximately_uniform = report.uniformity.p_value > report.uniformity_level;
    }
    return report;
}

double batch_means_se(std::span<const double> trace, std::size_t batches) {
    if (trace.size() < 2) throw Error("diagnostics", "standard error needs at least two samples");
    batches = std::clamp<std::size_t>(batches, 2, trace.size());
    const std::size_t size = trace.size() / batches;
    std::vector<double> means(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < size; ++i) means[b] += as_alpha(trace[b * size + i]);
        means[b] /= double(size);
    }
    const double mean = std::accumulate(means.begin(), means.end(), 0.0) / double(batches);
    double var = 0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= double(batches - 1);
    return std::sqrt(var / double(batches));
}

}  // namespace homophily
