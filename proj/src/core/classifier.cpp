#include "core/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace subpeak {

namespace {

std::atomic<std::uint64_t> g_monotonicity_violations{0};

std::size_t plane_of(int h, int w)
{
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
}

std::vector<double> to_planes(const FeatureMap& x)
{
    const std::size_t plane = plane_of(x.height(), x.width());
    std::vector<double> out(plane * static_cast<std::size_t>(x.channels()));
    for (int c = 0; c < x.channels(); ++c) {
        const auto vals = x.channel(c).values();
        std::copy(vals.begin(), vals.end(), out.begin() + static_cast<std::ptrdiff_t>(plane * static_cast<std::size_t>(c)));
    }
    return out;
}

double activate(double z, HiddenActivation a)
{
    if (a == HiddenActivation::identity || z > 0.0) {
        return z;
    }
    return kLeakySlope * z;
}

double activate_slope(double z, HiddenActivation a)
{
    if (a == HiddenActivation::identity || z > 0.0) {
        return 1.0;
    }
    return kLeakySlope;
}

// grad[o,i,ky,kx] += sum_{p,q} g_out[o,p,q] * in[i, p+dy, q+dx]
void accumulate_kernel_grad(std::span<const double> g_out, std::span<const double> in, int h, int w,
                            const ConvKernel& k, std::span<double> grad)
{
    const std::size_t plane = plane_of(h, w);
    const int ry = k.kernel_h / 2;
    const int rx = k.kernel_w / 2;
    for (int o = 0; o < k.out_channels; ++o) {
        const double* go = g_out.data() + plane * static_cast<std::size_t>(o);
        for (int i = 0; i < k.in_channels; ++i) {
            const double* src = in.data() + plane * static_cast<std::size_t>(i);
            for (int ky = 0; ky < k.kernel_h; ++ky) {
                const int dy = ky - ry;
                const int r0 = std::max(0, -dy);
                const int r1 = std::min(h, h - dy);
                for (int kx = 0; kx < k.kernel_w; ++kx) {
                    const int dx = kx - rx;
                    const int c0 = std::max(0, -dx);
                    const int c1 = std::min(w, w - dx);
                    double acc = 0.0;
                    for (int r = r0; r < r1; ++r) {
                        const double* grow = go + static_cast<std::ptrdiff_t>(r) * w;
                        const double* srow = src + static_cast<std::ptrdiff_t>(r + dy) * w + dx;
                        for (int c = c0; c < c1; ++c) {
                            acc += grow[c] * srow[c];
                        }
                    }
                    grad[k.offset(o, i) + static_cast<std::size_t>(ky * k.kernel_w + kx)] += acc;
                }
            }
        }
    }
}

// g_in[i, p+dy, q+dx] += g_out[o,p,q] * k[o,i,ky,kx]; g_in is overwritten.
void input_grad(std::span<const double> g_out, int h, int w, const ConvKernel& k, std::span<double> g_in)
{
    const std::size_t plane = plane_of(h, w);
    const int ry = k.kernel_h / 2;
    const int rx = k.kernel_w / 2;
    std::fill(g_in.begin(), g_in.end(), 0.0);
    for (int o = 0; o < k.out_channels; ++o) {
        const double* go = g_out.data() + plane * static_cast<std::size_t>(o);
        for (int i = 0; i < k.in_channels; ++i) {
            double* dst = g_in.data() + plane * static_cast<std::size_t>(i);
            for (int ky = 0; ky < k.kernel_h; ++ky) {
                const int dy = ky - ry;
                const int r0 = std::max(0, -dy);
                const int r1 = std::min(h, h - dy);
                for (int kx = 0; kx < k.kernel_w; ++kx) {
                    const double wt = k.at(o, i, ky, kx);
                    const int dx = kx - rx;
                    const int c0 = std::max(0, -dx);
                    const int c1 = std::min(w, w - dx);
                    for (int r = r0; r < r1; ++r) {
                        const double* grow = go + static_cast<std::ptrdiff_t>(r) * w;
                        double* drow = dst + static_cast<std::ptrdiff_t>(r + dy) * w + dx;
                        for (int c = c0; c < c1; ++c) {
                            drow[c] += wt * grow[c];
                        }
                    }
                }
            }
        }
    }
}

struct Forward {
    std::vector<double> x;
    std::vector<double> z1;
    std::vector<double> h1;
    std::vector<double> f;
};

void forward(const ClassifierWeights& w, const FeatureMap& x, Forward& fw)
{
    const int h = x.height();
    const int wd = x.width();
    const std::size_t plane = plane_of(h, wd);
    fw.x = to_planes(x);
    fw.z1.assign(plane * static_cast<std::size_t>(w.w1.out_channels), 0.0);
    conv2d_same(fw.x, h, wd, w.w1, fw.z1);
    fw.h1.resize(fw.z1.size());
    for (std::size_t k = 0; k < fw.z1.size(); ++k) {
        fw.h1[k] = activate(fw.z1[k], w.hidden);
    }
    fw.f.assign(plane, 0.0);
    conv2d_same(fw.h1, h, wd, w.w2, fw.f);
}

// Row and column argmax of a double plane, lowest index on ties.
void plane_routes(std::span<const double> f, int h, int w, std::vector<int>& row_arg, std::vector<int>& col_arg)
{
    row_arg.assign(static_cast<std::size_t>(h), 0);
    col_arg.assign(static_cast<std::size_t>(w), 0);
    for (int p = 0; p < h; ++p) {
        const double* row = f.data() + static_cast<std::ptrdiff_t>(p) * w;
        int best = 0;
        for (int q = 1; q < w; ++q) {
            if (row[q] > row[best]) {
                best = q;
            }
        }
        row_arg[static_cast<std::size_t>(p)] = best;
    }
    for (int q = 0; q < w; ++q) {
        int best = 0;
        for (int p = 1; p < h; ++p) {
            if (f[static_cast<std::size_t>(p) * static_cast<std::size_t>(w) + static_cast<std::size_t>(q)] >
                f[static_cast<std::size_t>(best) * static_cast<std::size_t>(w) + static_cast<std::size_t>(q)]) {
                best = p;
            }
        }
        col_arg[static_cast<std::size_t>(q)] = best;
    }
}

// Response that is compared with the label: f, or beta * (f + P(f)).
void objective_response(std::span<const double> f, int h, int w, bool rectified, double beta,
                        std::vector<int>& row_arg, std::vector<int>& col_arg, std::vector<double>& r)
{
    r.assign(f.begin(), f.end());
    if (!rectified) {
        return;
    }
    plane_routes(f, h, w, row_arg, col_arg);
    for (int p = 0; p < h; ++p) {
        const double rmax = f[static_cast<std::size_t>(p) * static_cast<std::size_t>(w) +
                              static_cast<std::size_t>(row_arg[static_cast<std::size_t>(p)])];
        for (int q = 0; q < w; ++q) {
            const double cmax = f[static_cast<std::size_t>(col_arg[static_cast<std::size_t>(q)]) * static_cast<std::size_t>(w) +
                                  static_cast<std::size_t>(q)];
            const std::size_t k = static_cast<std::size_t>(p) * static_cast<std::size_t>(w) + static_cast<std::size_t>(q);
            r[k] = beta * (f[k] + (rmax + cmax));
        }
    }
}

void check_memory(const ClassifierWeights& w, const SampleMemory& mem, const ObjectiveOptions& opts)
{
    if (mem.empty()) {
        throw StateError("objective needs a non-empty sample memory");
    }
    for (const auto& g : mem.groups()) {
        for (const auto& s : g.samples) {
            if (s.features.channels() != w.w1.in_channels) {
                throw DimensionError("sample has " + std::to_string(s.features.channels()) +
                                     " channels, classifier expects " + std::to_string(w.w1.in_channels));
            }
            if (s.source < 0 || static_cast<std::size_t>(s.source) >= opts.betas.size()) {
                throw ParameterError("sample source index has no fusion weight");
            }
        }
    }
}

double regularizer(const ClassifierWeights& w)
{
    double s1 = 0.0;
    for (double v : w.w1.weights) {
        s1 += v * v;
    }
    double s2 = 0.0;
    for (double v : w.w2.weights) {
        s2 += v * v;
    }
    return w.lambda1 * s1 + w.lambda2 * s2;
}

double evaluate(const ClassifierWeights& w, const SampleMemory& mem, const ObjectiveOptions& opts,
                std::span<double> grad)
{
    w.validate();
    check_memory(w, mem, opts);
    const bool want_grad = !grad.empty();
    if (want_grad) {
        if (grad.size() != w.parameter_count()) {
            throw DimensionError("gradient buffer has the wrong size");
        }
        std::fill(grad.begin(), grad.end(), 0.0);
    }
    const auto betas = opts.betas.normalized();
    const std::size_t n1 = w.w1.weights.size();
    std::span<double> g1 = want_grad ? grad.subspan(0, n1) : std::span<double>{};
    std::span<double> g2 = want_grad ? grad.subspan(n1) : std::span<double>{};

    Forward fw;
    std::vector<int> row_arg;
    std::vector<int> col_arg;
    std::vector<double> r;
    std::vector<double> gr;
    std::vector<double> dh;

    double total = 0.0;
    for (const auto& group : mem.groups()) {
        double group_sum = 0.0;
        for (const auto& s : group.samples) {
            const int h = s.features.height();
            const int wd = s.features.width();
            const double beta = betas[static_cast<std::size_t>(s.source)];
            forward(w, s.features, fw);
            objective_response(fw.f, h, wd, opts.rectified, beta, row_arg, col_arg, r);

            double sample_sum = 0.0;
            for (std::size_t k = 0; k < r.size(); ++k) {
                const double d = r[k] - s.label[k];
                sample_sum += d * d;
            }
            group_sum += sample_sum;
            if (!want_grad) {
                continue;
            }

            // dL/dr, then through the pooling routes back to dL/df.
            gr.resize(r.size());
            for (std::size_t k = 0; k < r.size(); ++k) {
                gr[k] = 2.0 * group.gamma * (r[k] - s.label[k]);
            }
            if (opts.rectified) {
                std::vector<double> gf(gr.size());
                for (std::size_t k = 0; k < gr.size(); ++k) {
                    gf[k] = beta * gr[k];
                }
                for (int p = 0; p < h; ++p) {
                    double row_sum = 0.0;
                    for (int q = 0; q < wd; ++q) {
                        row_sum += gr[static_cast<std::size_t>(p) * static_cast<std::size_t>(wd) + static_cast<std::size_t>(q)];
                    }
                    gf[static_cast<std::size_t>(p) * static_cast<std::size_t>(wd) +
                       static_cast<std::size_t>(row_arg[static_cast<std::size_t>(p)])] += beta * row_sum;
                }
                for (int q = 0; q < wd; ++q) {
                    double col_sum = 0.0;
                    for (int p = 0; p < h; ++p) {
                        col_sum += gr[static_cast<std::size_t>(p) * static_cast<std::size_t>(wd) + static_cast<std::size_t>(q)];
                    }
                    gf[static_cast<std::size_t>(col_arg[static_cast<std::size_t>(q)]) * static_cast<std::size_t>(wd) +
                       static_cast<std::size_t>(q)] += beta * col_sum;
                }
                gr.swap(gf);
            }

            accumulate_kernel_grad(gr, fw.h1, h, wd, w.w2, g2);
            dh.resize(fw.h1.size());
            input_grad(gr, h, wd, w.w2, dh);
            for (std::size_t k = 0; k < dh.size(); ++k) {
                dh[k] *= activate_slope(fw.z1[k], w.hidden);
            }
            accumulate_kernel_grad(dh, fw.x, h, wd, w.w1, g1);
        }
        total += group.gamma * group_sum;
    }
    total += regularizer(w);
    if (want_grad) {
        for (std::size_t k = 0; k < n1; ++k) {
            g1[k] += 2.0 * w.lambda1 * w.w1.weights[k];
        }
        for (std::size_t k = 0; k < w.w2.weights.size(); ++k) {
            g2[k] += 2.0 * w.lambda2 * w.w2.weights[k];
        }
    }
    return total;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

}  // namespace

std::vector<double> ClassifierWeights::flatten() const
{
    std::vector<double> out;
    out.reserve(parameter_count());
    out.insert(out.end(), w1.weights.begin(), w1.weights.end());
    out.insert(out.end(), w2.weights.begin(), w2.weights.end());
    return out;
}

void ClassifierWeights::assign(std::span<const double> params)
{
    if (params.size() != parameter_count()) {
        throw DimensionError("parameter vector has the wrong size");
    }
    const auto n1 = static_cast<std::ptrdiff_t>(w1.weights.size());
    std::copy(params.begin(), params.begin() + n1, w1.weights.begin());
    std::copy(params.begin() + n1, params.end(), w2.weights.begin());
}

void ClassifierWeights::validate() const
{
    if (w2.in_channels != w1.out_channels || w2.out_channels != 1) {
        throw DimensionError("second layer must map the hidden channels to a single response channel");
    }
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
        throw ParameterError("regularizers must be non-negative");
    }
}

ClassifierWeights ClassifierWeights::random(int in_channels, int mid_channels, int k1, int k2, std::uint64_t seed)
{
    ClassifierWeights w;
    w.w1 = ConvKernel(mid_channels, in_channels, k1, k1);
    w.w2 = ConvKernel(1, mid_channels, k2, k2);
    Rng rng(seed);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_channels * k1 * k1));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(mid_channels * k2 * k2));
    for (double& v : w.w1.weights) {
        v = s1 * rng.normal();
    }
    for (double& v : w.w2.weights) {
        v = s2 * rng.normal();
    }
    return w;
}

SampleMemory::SampleMemory(int capacity, double decay)
    : capacity_(capacity), decay_(decay)
{
    if (capacity < 1) {
        throw ParameterError("sample memory capacity must be at least 1");
    }
    if (!(decay > 0.0 && decay < 1.0)) {
        throw ParameterError("sample memory decay must lie in (0, 1)");
    }
}

void SampleMemory::check_consistent(const TrainingSample& s) const
{
    if (!s.label.same_shape(s.features.channel(0))) {
        throw DimensionError("label dimensions differ from feature dimensions");
    }
    for (const auto& g : groups_) {
        for (const auto& other : g.samples) {
            if (other.source != s.source) {
                continue;
            }
            if (other.features.channels() != s.features.channels() || !other.label.same_shape(s.label)) {
                throw DimensionError("sample dimensions differ from earlier samples of the same source");
            }
        }
    }
}

void SampleMemory::insert(TrainingSample s)
{
    std::vector<TrainingSample> group;
    group.push_back(std::move(s));
    insert_group(std::move(group));
}

void SampleMemory::insert_group(std::vector<TrainingSample> samples)
{
    if (samples.empty()) {
        throw ParameterError("cannot insert an empty sample group");
    }
    for (const auto& s : samples) {
        check_consistent(s);
    }
    for (auto& g : groups_) {
        g.gamma *= (1.0 - decay_);
    }
    groups_.push_back({std::move(samples), groups_.empty() ? 1.0 : decay_});
    while (static_cast<int>(groups_.size()) > capacity_) {
        groups_.pop_front();
    }
    double total = 0.0;
    for (const auto& g : groups_) {
        total += g.gamma;
    }
    for (auto& g : groups_) {
        g.gamma /= total;
    }
}

SampleMemory insert_sample(SampleMemory mem, TrainingSample s)
{
    mem.insert(std::move(s));
    return mem;
}

Grid2D predict(const ClassifierWeights& w, const FeatureMap& x)
{
    w.validate();
    if (x.channels() != w.w1.in_channels) {
        throw DimensionError("feature map has " + std::to_string(x.channels()) + " channels, classifier expects " +
                             std::to_string(w.w1.in_channels));
    }
    Forward fw;
    forward(w, x, fw);
    std::vector<float> vals(fw.f.size());
    std::transform(fw.f.begin(), fw.f.end(), vals.begin(), [](double v) { return static_cast<float>(v); });
    return Grid2D(x.height(), x.width(), std::move(vals));
}

double loss(const ClassifierWeights& w, const SampleMemory& mem, const ObjectiveOptions& opts)
{
    return evaluate(w, mem, opts, {});
}

std::vector<double> gradient(const ClassifierWeights& w, const SampleMemory& mem, const ObjectiveOptions& opts)
{
    std::vector<double> g(w.parameter_count());
    evaluate(w, mem, opts, g);
    return g;
}

double loss_and_gradient(const ClassifierWeights& w, const SampleMemory& mem, const ObjectiveOptions& opts,
                         std::span<double> grad)
{
    if (grad.size() != w.parameter_count()) {
        throw DimensionError("gradient buffer has the wrong size");
    }
    return evaluate(w, mem, opts, grad);
}

void OptimizerConfig::validate() const
{
    if (max_outer_iters < 0) {
        throw ParameterError("max_outer_iters must be non-negative");
    }
    if (!(initial_step > 0.0) || !(shrink > 0.0 && shrink < 1.0) || !(sufficient_decrease > 0.0 && sufficient_decrease < 1.0) ||
        !(curvature > sufficient_decrease && curvature < 1.0) ||
        max_backtracks < 1 || !(grad_tolerance > 0.0)) {
        throw ParameterError("invalid optimizer configuration");
    }
}

ClassifierWeights optimize(const ClassifierWeights& w0, const SampleMemory& mem, const OptimizerConfig& cfg,
                           const ObjectiveOptions& opts, OptimizeReport* report)
{
    cfg.validate();
    OptimizeReport local;
    OptimizeReport& rep = report ? *report : local;
    rep = {};
    if (cfg.max_outer_iters == 0) {
        return w0;
    }

    ClassifierWeights w = w0;
    ClassifierWeights trial = w0;
    const std::size_t n = w.parameter_count();
    std::vector<double> x = w.flatten();
    std::vector<double> g(n);
    std::vector<double> g_new(n);
    std::vector<double> d(n);
    std::vector<double> xt(n);

    struct Probe {
        double a = 0.0;
        double f = 0.0;
        double dg = 0.0;
        std::vector<double> grad;
    };
    // Loss, gradient and directional derivative at x + a*d.
    auto probe = [&](double a, Probe& p) {
        for (std::size_t k = 0; k < n; ++k) {
            xt[k] = x[k] + a * d[k];
        }
        trial.assign(xt);
        p.a = a;
        p.grad.resize(n);
        p.f = loss_and_gradient(trial, mem, opts, p.grad);
        p.dg = dot(p.grad, d);
    };

    double fx = loss_and_gradient(w, mem, opts, g);
    rep.loss_history.push_back(fx);
    for (std::size_t k = 0; k < n; ++k) {
        d[k] = -g[k];
    }
    double alpha = cfg.initial_step / std::max(1.0, std::sqrt(dot(d, d)));
    double prev_gd = 0.0;
    Probe lo;
    Probe hi;
    Probe cur;

    for (int it = 0; it < cfg.max_outer_iters; ++it) {
        const double gnorm2 = dot(g, g);
        if (std::sqrt(gnorm2) < cfg.grad_tolerance) {
            rep.converged = true;
            break;
        }
        double gd = dot(g, d);
        if (!(gd < 0.0)) {
            for (std::size_t k = 0; k < n; ++k) {
                d[k] = -g[k];
            }
            gd = -gnorm2;
            ++rep.restarts;
        }
        if (it > 0 && prev_gd < 0.0) {
            alpha = std::min(alpha * prev_gd / gd, 1e6 * alpha);
        }

        // Strong Wolfe search: bracket, then zoom with safeguarded quadratic
        // interpolation. lo always satisfies sufficient decrease.
        const auto armijo = [&](const Probe& p) {
            return std::isfinite(p.f) && p.f <= fx + cfg.sufficient_decrease * p.a * gd;
        };
        const auto curved = [&](const Probe& p) { return std::abs(p.dg) <= -cfg.curvature * gd; };
        lo = Probe{0.0, fx, gd, {}};
        bool accepted = false;
        bool bracketed = false;
        int evals = 0;
        double a = alpha;
        while (evals < cfg.max_backtracks && !bracketed) {
            probe(a, cur);
            ++evals;
            if (!armijo(cur) || (lo.a > 0.0 && cur.f >= lo.f)) {
                hi = cur;
                bracketed = true;
            } else if (curved(cur)) {
                accepted = true;
                break;
            } else if (cur.dg >= 0.0) {
                hi = lo;
                lo = cur;
                bracketed = true;
            } else {
                lo = cur;
                a *= 2.0;
            }
        }
        while (bracketed && !accepted && evals < cfg.max_backtracks) {
            const double width = hi.a - lo.a;
            double next = lo.a + cfg.shrink * width;
            if (std::isfinite(hi.f)) {
                const double denom = 2.0 * (hi.f - lo.f - lo.dg * width);
                if (denom > 0.0) {
                    const double q = lo.a - lo.dg * width * width / denom;
                    const double lo_edge = std::min(lo.a, hi.a) + 0.1 * std::abs(width);
                    const double hi_edge = std::max(lo.a, hi.a) - 0.1 * std::abs(width);
                    if (q >= lo_edge && q <= hi_edge) {
                        next = q;
                    }
                }
            }
            if (lo.a == 0.0) {
                next = std::min(next, cfg.shrink * hi.a);
            }
            probe(next, cur);
            ++evals;
            if (!armijo(cur) || cur.f >= lo.f) {
                hi = cur;
            } else if (curved(cur)) {
                accepted = true;
            } else {
                if (cur.dg * (hi.a - lo.a) >= 0.0) {
                    hi = lo;
                }
                lo = cur;
            }
        }
        if (!accepted && lo.a > 0.0) {
            cur = lo;
            accepted = true;
        }
        if (!accepted) {
            if (gd != -gnorm2) {
                // Conjugate direction failed; retry from steepest descent next round.
                for (std::size_t k = 0; k < n; ++k) {
                    d[k] = -g[k];
                }
                alpha = cfg.initial_step / std::max(1.0, std::sqrt(gnorm2));
                prev_gd = 0.0;
                ++rep.restarts;
                continue;
            }
            break;
        }
        alpha = cur.a;
        for (std::size_t k = 0; k < n; ++k) {
            xt[k] = x[k] + alpha * d[k];
        }
        const double f_new = cur.f;
        g_new.swap(cur.grad);
        if (f_new > fx) {
            g_monotonicity_violations.fetch_add(1, std::memory_order_relaxed);
        }

        double beta = 0.0;
        if (cfg.variant == CgVariant::fletcher_reeves) {
            beta = dot(g_new, g_new) / gnorm2;
        } else {
            double num = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                num += g_new[k] * (g_new[k] - g[k]);
            }
            beta = std::max(0.0, num / gnorm2);
        }
        // Powell restart: successive gradients far from orthogonal.
        if (std::abs(dot(g_new, g)) >= 0.2 * dot(g_new, g_new)) {
            beta = 0.0;
            ++rep.restarts;
        }
        for (std::size_t k = 0; k < n; ++k) {
            d[k] = -g_new[k] + beta * d[k];
        }
        x.swap(xt);
        g.swap(g_new);
        fx = f_new;
        prev_gd = gd;
        rep.loss_history.push_back(fx);
        ++rep.iterations;
    }
    if (!rep.converged && std::sqrt(dot(g, g)) < cfg.grad_tolerance) {
        rep.converged = true;
    }
    w.assign(x);
    return w;
}

std::uint64_t monotonicity_violations()
{
    return g_monotonicity_violations.load(std::memory_order_relaxed);
}

}  // namespace subpeak
