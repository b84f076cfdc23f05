#include "jklab/space.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>

namespace jklab {

FiniteMetricMeasureSpace FiniteMetricMeasureSpace::lattice_torus(int dim, int side, double spacing,
                                                                 std::size_t max_points) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("lattice_torus: dim must be 1, 2 or 3");
    if (side < 4) throw std::invalid_argument("lattice_torus: side must be >= 4");
    if (!(spacing > 0.0)) throw std::invalid_argument("lattice_torus: spacing must be > 0");
    std::size_t n = 1;
    for (int k = 0; k < dim; ++k) {
        n *= static_cast<std::size_t>(side);
        if (n > max_points)
            throw std::length_error("lattice_torus: point count exceeds the configured cap");
    }
    FiniteMetricMeasureSpace s;
    s.kind_ = Kind::torus;
    s.n_ = n;
    s.dim_ = dim;
    s.side_ = side;
    s.spacing_ = spacing;
    const double cell = std::pow(spacing, dim);
    s.measure_.assign(n, cell);
    s.total_mass_ = cell * static_cast<double>(n);
    double d2 = 0.0;
    for (int k = 0; k < dim; ++k) {
        const double h = spacing * (side / 2);
        d2 += h * h;
    }
    s.diameter_ = std::sqrt(d2);
    s.description_ = {{"builder", "lattice_torus"}, {"dim", dim}, {"side", side},
                      {"spacing", spacing}};
    s.build_profiles();
    return s;
}

double FiniteMetricMeasureSpace::torus_distance(std::size_t i, std::size_t j) const {
    long di = static_cast<long>(i), dj = static_cast<long>(j);
    double acc = 0.0;
    for (int k = 0; k < dim_; ++k) {
        long a = di % side_, b = dj % side_;
        di /= side_;
        dj /= side_;
        long diff = std::labs(a - b);
        diff = std::min(diff, side_ - diff);
        acc += static_cast<double>(diff) * static_cast<double>(diff);
    }
    return spacing_ * std::sqrt(acc);
}

FiniteMetricMeasureSpace FiniteMetricMeasureSpace::sierpinski_graph(int level) {
    if (level < 0 || level > 8)
        throw std::invalid_argument("sierpinski_graph: level must be in [0,8]");

    using Pt = std::pair<long, long>;
    std::map<Pt, std::size_t> ids;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    auto vertex = [&](Pt p) {
        auto [it, fresh] = ids.emplace(p, ids.size());
        (void)fresh;
        return it->second;
    };
    // Corner coordinates scaled by 2^level keep every midpoint integral.
    auto build = [&](auto&& self, int lv, Pt a, Pt b, Pt c) -> void {
        if (lv == 0) {
            const auto ia = vertex(a), ib = vertex(b), ic = vertex(c);
            edges.emplace_back(ia, ib);
            edges.emplace_back(ib, ic);
            edges.emplace_back(ic, ia);
            return;
        }
        const Pt ab{(a.first + b.first) / 2, (a.second + b.second) / 2};
        const Pt bc{(b.first + c.first) / 2, (b.second + c.second) / 2};
        const Pt ca{(c.first + a.first) / 2, (c.second + a.second) / 2};
        self(self, lv - 1, a, ab, ca);
        self(self, lv - 1, ab, b, bc);
        self(self, lv - 1, ca, bc, c);
    };
    const long w = 1L << level;
    build(build, level, {0, 0}, {2 * w, 0}, {w, 2 * w});

    FiniteMetricMeasureSpace s;
    s.kind_ = Kind::graph;
    s.n_ = ids.size();
    s.measure_.assign(s.n_, 1.0);
    s.total_mass_ = static_cast<double>(s.n_);
    s.spacing_ = 1.0;

    std::vector<std::vector<std::uint32_t>> adj(s.n_);
    for (auto [u, v] : edges) {
        adj[u].push_back(static_cast<std::uint32_t>(v));
        adj[v].push_back(static_cast<std::uint32_t>(u));
    }
    std::size_t edge_count = 0;
    for (auto& nb : adj) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        edge_count += nb.size();
    }
    edge_count /= 2;
    s.description_ = {{"builder", "sierpinski_graph"},
                      {"level", level},
                      {"vertices", s.n_},
                      {"edges", edge_count}};

    // all-pairs hop distances by BFS from every source
    s.hops_.assign(s.n_ * s.n_, std::uint16_t(0xffff));
    std::deque<std::uint32_t> queue;
    for (std::size_t src = 0; src < s.n_; ++src) {
        auto* row = &s.hops_[src * s.n_];
        row[src] = 0;
        queue.clear();
        queue.push_back(static_cast<std::uint32_t>(src));
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            const auto du = row[u];
            for (auto v : adj[u])
                if (row[v] == 0xffff) {
                    row[v] = static_cast<std::uint16_t>(du + 1);
                    queue.push_back(v);
                }
        }
    }
    std::uint16_t dia = 0;
    for (auto h : s.hops_) {
        if (h == 0xffff) throw std::runtime_error("sierpinski_graph: graph is disconnected");
        dia = std::max(dia, h);
    }
    s.diameter_ = static_cast<double>(dia);
    s.build_profiles();
    return s;
}

FiniteMetricMeasureSpace FiniteMetricMeasureSpace::from_points(
    std::vector<std::vector<double>> metric, std::vector<double> weights) {
    const std::size_t n = weights.size();
    if (n == 0 || metric.size() != n)
        throw std::invalid_argument("from_points: metric/weights size mismatch");
    FiniteMetricMeasureSpace s;
    s.kind_ = Kind::explicit_metric;
    s.n_ = n;
    s.metric_.assign(n * n, 0.0);
    double dia = 0.0, min_positive = 1e300;
    for (std::size_t i = 0; i < n; ++i) {
        if (metric[i].size() != n) throw std::invalid_argument("from_points: ragged metric");
        if (!(weights[i] > 0.0)) throw std::invalid_argument("from_points: weights must be > 0");
        if (metric[i][i] != 0.0) throw std::invalid_argument("from_points: nonzero diagonal");
        for (std::size_t j = 0; j < n; ++j) {
            if (metric[i][j] < 0.0 || metric[i][j] != metric[j][i])
                throw std::invalid_argument("from_points: metric not symmetric nonnegative");
            s.metric_[i * n + j] = metric[i][j];
            dia = std::max(dia, metric[i][j]);
            if (i != j) min_positive = std::min(min_positive, metric[i][j]);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k)
                if (metric[i][j] > metric[i][k] + metric[k][j] + 1e-12)
                    throw std::invalid_argument("from_points: triangle inequality fails");
    s.measure_ = std::move(weights);
    s.total_mass_ = 0.0;
    for (double w : s.measure_) s.total_mass_ += w;
    s.diameter_ = dia;
    s.spacing_ = min_positive < 1e300 ? min_positive : 1.0;
    s.description_ = {{"builder", "from_points"}, {"points", n}};
    s.build_profiles();
    return s;
}

double FiniteMetricMeasureSpace::distance(std::size_t i, std::size_t j) const {
    if (kind_ == Kind::torus) return torus_distance(i, j);
    if (kind_ == Kind::explicit_metric) return metric_[i * n_ + j];
    return static_cast<double>(hops_[i * n_ + j]);
}

void FiniteMetricMeasureSpace::build_profiles() {
    const std::size_t centers = kind_ == Kind::torus ? 1 : n_;
    profiles_.resize(centers);
    std::vector<std::pair<double, double>> by_d(n_);
    for (std::size_t x = 0; x < centers; ++x) {
        for (std::size_t y = 0; y < n_; ++y) by_d[y] = {distance(x, y), measure_[y]};
        std::sort(by_d.begin(), by_d.end());
        auto& prof = profiles_[x];
        prof.radii.clear();
        prof.cumulative.clear();
        double acc = 0.0;
        std::size_t i = 0;
        while (i < n_) {
            const double d = by_d[i].first;
            while (i < n_ && by_d[i].first == d) acc += by_d[i++].second;
            prof.radii.push_back(d);
            prof.cumulative.push_back(acc);
        }
    }
}

double FiniteMetricMeasureSpace::VolumeProfile::at(double r) const {
    const auto it = std::upper_bound(radii.begin(), radii.end(), r);
    if (it == radii.begin()) return 0.0;
    return cumulative[(it - radii.begin()) - 1];
}

const FiniteMetricMeasureSpace::VolumeProfile& FiniteMetricMeasureSpace::volume_profile(
    std::size_t x) const {
    return profiles_[kind_ == Kind::torus ? 0 : x];
}

double FiniteMetricMeasureSpace::volume(std::size_t x, double r) const {
    if (r < 0.0) throw std::domain_error("volume: radius must be >= 0");
    return volume_profile(x).at(r);
}

std::vector<std::size_t> FiniteMetricMeasureSpace::ball(std::size_t x, double r) const {
    std::vector<std::size_t> out;
    for (std::size_t y = 0; y < n_; ++y)
        if (distance(x, y) <= r) out.push_back(y);
    return out;
}

VolumeDoublingFit check_vd_rvd(const FiniteMetricMeasureSpace& space,
                               const std::vector<double>& radii) {
    if (radii.size() < 2) throw std::invalid_argument("check_vd_rvd: need at least two radii");
    VolumeDoublingFit fit;
    double max_slope = -1e300, min_slope = 1e300;
    std::vector<double> vols(radii.size());
    for (std::size_t x = 0; x < space.size(); ++x) {
        for (std::size_t i = 0; i < radii.size(); ++i) vols[i] = space.volume(x, radii[i]);
        for (std::size_t i = 0; i < radii.size(); ++i)
            for (std::size_t j = i + 1; j < radii.size(); ++j) {
                const double slope =
                    std::log(vols[j] / vols[i]) / std::log(radii[j] / radii[i]);
                max_slope = std::max(max_slope, slope);
                min_slope = std::min(min_slope, slope);
            }
    }
    fit.d2 = max_slope;
    fit.d1 = min_slope;
    fit.c_upper = 1.0;
    fit.c_lower = 1.0;
    fit.pass = std::isfinite(max_slope) && std::isfinite(min_slope) && min_slope > 0.0;
    return fit;
}

double midpoint_scan(const FiniteMetricMeasureSpace& space, std::size_t max_pairs) {
    const std::size_t n = space.size();
    std::size_t tried = 0, hits = 0;
    const std::size_t stride = std::max<std::size_t>(1, n * n / std::max<std::size_t>(1, max_pairs));
    for (std::size_t k = 0; k < n * n && tried < max_pairs; k += stride) {
        const std::size_t x = k / n, y = k % n;
        const double d = space.distance(x, y);
        if (d <= 2.0 * space.spacing()) continue;
        ++tried;
        for (std::size_t z = 0; z < n; ++z)
            if (std::max(space.distance(x, z), space.distance(z, y)) <= 0.75 * d) {
                ++hits;
                break;
            }
    }
    return tried == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(tried);
}

} // namespace jklab
