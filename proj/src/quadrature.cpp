#include "mnar/quadrature.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <numbers>
#include <variant>

#include <Eigen/Eigenvalues>

namespace mnar {

namespace {

// Golub-Welsch: nodes are eigenvalues of the symmetric Jacobi matrix, weights
// are mu0 times the squared first eigenvector components.
QuadratureRule golub_welsch(std::size_t n, double mu0, double (*offdiag)(std::size_t)) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t k = 1; k < n; ++k) {
        const double b = offdiag(k);
        jacobi(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = b;
        jacobi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        rule.nodes[k] = solver.eigenvalues()(kk);
        const double v = solver.eigenvectors()(0, kk);
        rule.weights[k] = mu0 * v * v;
    }
    return rule;
}

double hermite_offdiag(std::size_t k) { return std::sqrt(static_cast<double>(k)); }

double legendre_offdiag(std::size_t k) {
    const double kk = static_cast<double>(k);
    return kk / std::sqrt(4.0 * kk * kk - 1.0);
}

const QuadratureRule& cached_rule(std::map<std::size_t, QuadratureRule>& cache, std::mutex& mutex, std::size_t order,
                                  double mu0, double (*offdiag)(std::size_t)) {
    if (order == 0) throw SpecificationError("quadrature order must be positive");
    std::lock_guard lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, golub_welsch(order, mu0, offdiag)).first;
    return it->second;
}

struct Support {
    double lower;
    double upper;
    double scale;
};

Support support_of(const Marginal& m, const QuadratureOptions& opts) {
    if (const auto* d = std::get_if<NormalMarginal>(&m))
        return {d->mean - opts.normal_truncation * d->sd, d->mean + opts.normal_truncation * d->sd, d->sd};
    if (const auto* d = std::get_if<SkewNormalMarginal>(&m))
        return {d->location - opts.skew_truncation * d->scale, d->location + opts.skew_truncation * d->scale, d->scale};
    const auto& e = std::get<EmpiricalMarginal>(m);
    return {e.lower(), e.upper(), e.bandwidth() * 2.0};
}

void append_legendre_panels(const Marginal& m, double lo, double hi, double panel, const QuadratureOptions& opts,
                            std::vector<WeightedNode>& out) {
    const auto& gl = gauss_legendre(opts.legendre_order);
    const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / panel)));
    const double width = (hi - lo) / static_cast<double>(panels);
    for (std::size_t k = 0; k < panels; ++k) {
        const double a = lo + static_cast<double>(k) * width;
        const double mid = a + 0.5 * width;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double x = mid + 0.5 * width * gl.nodes[i];
            out.push_back({x, 0.5 * width * gl.weights[i] * marginal_density(m, x)});
        }
    }
}

}  // namespace

const QuadratureRule& gauss_hermite(std::size_t order) {
    static std::map<std::size_t, QuadratureRule> cache;
    static std::mutex mutex;
    return cached_rule(cache, mutex, order, 1.0, hermite_offdiag);
}

const QuadratureRule& gauss_legendre(std::size_t order) {
    static std::map<std::size_t, QuadratureRule> cache;
    static std::mutex mutex;
    return cached_rule(cache, mutex, order, 2.0, legendre_offdiag);
}

std::vector<WeightedNode> marginal_rule(const Marginal& marginal, std::span<const Interval> intervals,
                                        const QuadratureOptions& opts) {
    std::vector<WeightedNode> out;
    const auto* normal = std::get_if<NormalMarginal>(&marginal);
    const bool whole_line =
        intervals.size() == 1 && std::isinf(intervals[0].lower) && std::isinf(intervals[0].upper);
    if (normal && whole_line) {
        const auto& gh = gauss_hermite(opts.hermite_x);
        out.reserve(gh.nodes.size());
        for (std::size_t i = 0; i < gh.nodes.size(); ++i)
            out.push_back({normal->mean + normal->sd * gh.nodes[i], gh.weights[i]});
        return out;
    }
    const Support sup = support_of(marginal, opts);
    for (const auto& iv : intervals) {
        const double lo = std::max(iv.lower, sup.lower);
        const double hi = std::min(iv.upper, sup.upper);
        if (!(hi > lo)) continue;
        append_legendre_panels(marginal, lo, hi, opts.panel_width * sup.scale, opts, out);
    }
    return out;
}

QuadratureGrid::QuadratureGrid(const ModelSpec& model, const Region& region, const QuadratureOptions& opts)
    : p_(model.dimension()) {
    if (region.dimension() != p_) throw SpecificationError("region dimension does not match the model");

    std::vector<std::vector<WeightedNode>> per_dim(p_);
    std::size_t combos = 1;
    for (std::size_t j = 0; j < p_; ++j) {
        per_dim[j] = marginal_rule(model.covariates.marginals[j], region.intervals(j), opts);
        combos *= per_dim[j].size();
    }
    if (combos == 0) return;

    const auto& gh = gauss_hermite(opts.hermite_y);
    const double sigma = model.regression.sigma;
    xs_.reserve(combos * gh.nodes.size() * p_);
    ys_.reserve(combos * gh.nodes.size());
    weights_.reserve(combos * gh.nodes.size());

    std::vector<std::size_t> idx(p_, 0);
    std::vector<double> x(p_);
    for (std::size_t c = 0; c < combos; ++c) {
        double wx = 1.0;
        for (std::size_t j = 0; j < p_; ++j) {
            x[j] = per_dim[j][idx[j]].x;
            wx *= per_dim[j][idx[j]].weight;
        }
        const double mu = model.regression.mean(x);
        for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
            xs_.insert(xs_.end(), x.begin(), x.end());
            ys_.push_back(mu + sigma * gh.nodes[k]);
            weights_.push_back(wx * gh.weights[k]);
        }
        for (std::size_t j = 0; j < p_; ++j) {
            if (++idx[j] < per_dim[j].size()) break;
            idx[j] = 0;
        }
    }
}

double QuadratureGrid::mass() const {
    double total = 0.0;
    for (double w : weights_) total += w;
    return total;
}

std::string QuadratureGrid::describe_failure(std::size_t i) const {
    std::ostringstream os;
    os << "non-finite integrand at x=(";
    for (std::size_t j = 0; j < p_; ++j) os << (j ? "," : "") << xs_[i * p_ + j];
    os << "), y=" << ys_[i];
    return os.str();
}

double expect(const Integrand& f, const Region& region, const ModelSpec& model, const QuadratureOptions& opts) {
    return QuadratureGrid(model, region, opts).expect(f);
}

RegionMasses region_masses(const ModelSpec& model, const Region& region, const QuadratureOptions& opts) {
    const QuadratureGrid grid(model, region, opts);
    RegionMasses m{0.0, 0.0};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double pi = mechanism_prob(model.mechanism, grid.x(i), grid.y(i));
        m.recovered += grid.weight(i) * pi;
        m.observed += grid.weight(i) * (1.0 - pi);
    }
    return m;
}

double prob_missing(const ModelSpec& model, const QuadratureOptions& opts) {
    return region_masses(model, Region::unbounded(model.dimension()), opts).recovered;
}

double prob_MO(const ModelSpec& model, const Region& region, const QuadratureOptions& opts) {
    return region_masses(model, region, opts).observed;
}

double prob_MR(const ModelSpec& model, const Region& region, const QuadratureOptions& opts) {
    return region_masses(model, region, opts).recovered;
}

ComponentDensities::ComponentDensities(const ModelSpec& model, const Region& region, const QuadratureOptions& opts)
    : model_(model), region_(region), masses_(region_masses(model, region, opts)) {
    if (!(masses_.recovered > 0.0)) throw DegenerateDesign("Pr(M=1, X in region) is zero");
    if (!(masses_.observed > 0.0)) throw DegenerateDesign("Pr(M=0, X in region) is zero");
}

double ComponentDensities::base_density(std::span<const double> x, double y) const {
    const double mu = model_.regression.mean(x);
    const double z = (y - mu) / model_.regression.sigma;
    const double fy = std::exp(-0.5 * z * z) / (model_.regression.sigma * std::sqrt(2.0 * std::numbers::pi));
    return fy * model_.covariates.density(x);
}

double ComponentDensities::recovered(std::span<const double> x, double y) const {
    if (!region_.contains(x)) return 0.0;
    return mechanism_prob(model_.mechanism, x, y) * base_density(x, y) / masses_.recovered;
}

double ComponentDensities::observed(std::span<const double> x, double y) const {
    if (!region_.contains(x)) return 0.0;
    return (1.0 - mechanism_prob(model_.mechanism, x, y)) * base_density(x, y) / masses_.observed;
}

double joint_density_R(const ModelSpec& model, const Region& region, std::span<const double> x, double y,
                       const QuadratureOptions& opts) {
    return ComponentDensities(model, region, opts).recovered(x, y);
}

double joint_density_O(const ModelSpec& model, const Region& region, std::span<const double> x, double y,
                       const QuadratureOptions& opts) {
    return ComponentDensities(model, region, opts).observed(x, y);
}

}  // namespace mnar
