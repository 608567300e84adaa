#include "gslm/crf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace gslm {

namespace {

constexpr double kDamping = 0.2;      // synchronous update mix-in
constexpr double kFiltEps = 1e-8;     // kernel-average regularizer
constexpr double kUnaryClamp = 1e-6;  // probability clamp before log
constexpr double kPairDrop = 1e-12;   // fast path: drop pairs below this weight

// exp(-t) for t >= 0 as table[floor(32t)] * poly(frac); relative error
// ~2.5e-10, far inside the reference-equivalence budget.
struct ExpNegTable {
    static constexpr int kScale = 32;
    static constexpr int kMax = 1400;
    double table[kMax + 1];
    ExpNegTable() {
        for (int m = 0; m <= kMax; ++m) table[m] = std::exp(-static_cast<double>(m) / kScale);
    }
};

inline double exp_neg(double t) {
    static const ExpNegTable tbl;
    if (t >= 40.0) return 0.0;  // below any kept pair weight
    const int m = static_cast<int>(t * ExpNegTable::kScale);
    const double f = t - static_cast<double>(m) / ExpNegTable::kScale;
    const double ef = 1.0 + f * (-1.0 + f * (0.5 + f * (-1.0 / 6.0 + f * (1.0 / 24.0))));
    return tbl.table[m] * ef;
}

struct Unary {
    int h = 0, w = 0, n = 0;
    std::vector<double> phat;
    std::vector<double> logp;
    std::vector<double> log1p;
};

Unary prepare_unary(const Tensor& fg_prob, int h, int w) {
    if (fg_prob.rank() != 2 || fg_prob.extent(0) != h || fg_prob.extent(1) != w)
        throw std::invalid_argument("densecrf: probability map " + shape_str(fg_prob.shape()) +
                                    " does not match image " + std::to_string(h) + "x" + std::to_string(w));
    Unary u;
    u.h = h;
    u.w = w;
    u.n = h * w;
    u.phat.resize(static_cast<size_t>(u.n));
    u.logp.resize(static_cast<size_t>(u.n));
    u.log1p.resize(static_cast<size_t>(u.n));
    for (int i = 0; i < u.n; ++i) {
        const double v = fg_prob[static_cast<size_t>(i)];
        if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
            throw std::invalid_argument("densecrf: probability " + std::to_string(v) + " outside [0,1]");
        const double c = std::min(std::max(v, kUnaryClamp), 1.0 - kUnaryClamp);
        u.phat[static_cast<size_t>(i)] = c;
        u.logp[static_cast<size_t>(i)] = std::log(c);
        u.log1p[static_cast<size_t>(i)] = std::log(1.0 - c);
    }
    return u;
}

void check_image(const Tensor& image) {
    if (image.rank() != 3 || image.extent(0) != 3)
        throw std::invalid_argument("densecrf: image must be 3xHxW, got " + shape_str(image.shape()));
}

// One damped update for a pixel given kernel sums; writes the new pair.
inline void update_pixel(double logp, double log1p, double qf, double qb,
                         double s0s, double s1s_f, double s1s_b,
                         double s0b, double s1b_f, double s1b_b,
                         double ws, double wb, double& out_f, double& out_b) {
    const double fs_f = (s1s_f + kFiltEps * qf) / (s0s + kFiltEps);
    const double fs_b = (s1s_b + kFiltEps * qb) / (s0s + kFiltEps);
    const double fb_f = (s1b_f + kFiltEps * qf) / (s0b + kFiltEps);
    const double fb_b = (s1b_b + kFiltEps * qb) / (s0b + kFiltEps);
    const double m_f = ws * (fs_f - qf) + wb * (fb_f - qf);
    const double m_b = ws * (fs_b - qb) + wb * (fb_b - qb);
    const double a_f = logp + m_f;
    const double a_b = log1p + m_b;
    const double mx = std::max(a_f, a_b);
    const double e_f = std::exp(a_f - mx);
    const double e_b = std::exp(a_b - mx);
    const double star_f = e_f / (e_f + e_b);
    const double star_b = e_b / (e_f + e_b);
    out_f = (1.0 - kDamping) * qf + kDamping * star_f;
    out_b = (1.0 - kDamping) * qb + kDamping * star_b;
}

}  // namespace

void CrfParams::validate() const {
    if (iterations < 1) throw std::invalid_argument("CrfParams: iterations must be >= 1");
    if (!(spatial_weight > 0.0) || !(bilateral_weight > 0.0))
        throw std::invalid_argument("CrfParams: kernel weights must be positive");
    if (!(spatial_bandwidth > 0.0) || !(color_bandwidth > 0.0) || bilateral_bandwidth < 0.0)
        throw std::invalid_argument("CrfParams: bandwidths must be positive");
}

double CrfParams::resolved_bilateral_bandwidth(int h, int w) const {
    return bilateral_bandwidth > 0.0 ? bilateral_bandwidth : 30.0 * std::max(h, w) / 500.0;
}

struct DenseCrfSolver::Impl {
    CrfParams params;
    int h = 0, w = 0, n = 0;
    int rs = 0;                      // spatial tap radius
    std::vector<double> taps;        // spatial 1-D Gaussian
    std::vector<double> s0s;         // spatial kernel mass per pixel (self excluded)
    std::vector<uint32_t> row_ptr;   // bilateral half pairs (j > i)
    std::vector<uint32_t> cols;
    std::vector<double> wts;
    std::vector<double> s0b;         // bilateral kernel mass per pixel

    // Separable truncated Gaussian, self included; dst may alias nothing.
    void separable(const std::vector<double>& src, std::vector<double>& tmp,
                   std::vector<double>& dst) const {
        for (int y = 0; y < h; ++y) {
            const double* s = src.data() + static_cast<size_t>(y) * w;
            double* o = tmp.data() + static_cast<size_t>(y) * w;
            for (int x = 0; x < w; ++x) {
                double acc = s[x];
                for (int d = 1; d <= rs; ++d) {
                    double v = 0.0;
                    if (x - d >= 0) v += s[x - d];
                    if (x + d < w) v += s[x + d];
                    if (v != 0.0) acc += taps[static_cast<size_t>(d)] * v;
                }
                o[x] = acc;
            }
        }
        for (int x = 0; x < w; ++x)
            for (int y = 0; y < h; ++y) {
                double acc = tmp[static_cast<size_t>(y) * w + x];
                for (int d = 1; d <= rs; ++d) {
                    double v = 0.0;
                    if (y - d >= 0) v += tmp[static_cast<size_t>(y - d) * w + x];
                    if (y + d < h) v += tmp[static_cast<size_t>(y + d) * w + x];
                    if (v != 0.0) acc += taps[static_cast<size_t>(d)] * v;
                }
                dst[static_cast<size_t>(y) * w + x] = acc;
            }
    }

    void build(const Tensor& image) {
        const double tg = params.spatial_bandwidth;
        const double ba = params.resolved_bilateral_bandwidth(h, w);
        const double inv2g = 1.0 / (2.0 * tg * tg);
        const double inv2a = 1.0 / (2.0 * ba * ba);
        const double inv2b = 1.0 / (2.0 * params.color_bandwidth * params.color_bandwidth);

        // Spatial kernel: separable truncated Gaussian, tail below 1e-13.
        const int max_r = std::max(h, w) - 1;
        rs = std::min(max_r, static_cast<int>(std::ceil(tg * std::sqrt(2.0 * std::log(1e13)))));
        taps.resize(static_cast<size_t>(rs) + 1);
        for (int d = 0; d <= rs; ++d)
            taps[static_cast<size_t>(d)] = std::exp(-static_cast<double>(d) * d * inv2g);
        std::vector<double> ones(static_cast<size_t>(n), 1.0), tmp(static_cast<size_t>(n));
        s0s.assign(static_cast<size_t>(n), 0.0);
        separable(ones, tmp, s0s);
        for (int i = 0; i < n; ++i) s0s[static_cast<size_t>(i)] -= 1.0;  // exclude self

        // Bilateral kernel: circular window of half pairs (j > i). The radius
        // cap must cover the image diagonal, not the longer side, or corner
        // pairs with real weight would be lost on small images.
        const int diag = static_cast<int>(std::ceil(std::sqrt(
            static_cast<double>(h - 1) * (h - 1) + static_cast<double>(w - 1) * (w - 1))));
        const int rb = std::min(diag + 1, static_cast<int>(std::ceil(
                                              ba * std::sqrt(2.0 * std::log(1.0 / kPairDrop)))));
        struct Off {
            int dy, dx;
            double wsp, cd2_max;
        };
        std::vector<Off> offs;
        for (int dy = 0; dy <= rb; ++dy)
            for (int dx = (dy == 0 ? 1 : -rb); dx <= rb; ++dx) {
                const double d2 = static_cast<double>(dx) * dx + static_cast<double>(dy) * dy;
                if (d2 > static_cast<double>(rb) * rb) continue;
                const double wsp = std::exp(-d2 * inv2a);
                if (wsp < kPairDrop) continue;
                offs.push_back({dy, dx, wsp, std::log(wsp / kPairDrop) / inv2b});
            }

        // interleaved copy for cache-friendly color distances
        const size_t plane = static_cast<size_t>(n);
        const double* im = image.data();
        std::vector<double> rgb(static_cast<size_t>(n) * 3);
        for (int i = 0; i < n; ++i) {
            rgb[static_cast<size_t>(i) * 3] = im[static_cast<size_t>(i)];
            rgb[static_cast<size_t>(i) * 3 + 1] = im[plane + i];
            rgb[static_cast<size_t>(i) * 3 + 2] = im[2 * plane + i];
        }

        s0b.assign(static_cast<size_t>(n), 0.0);
        row_ptr.assign(static_cast<size_t>(n) + 1, 0);
        cols.clear();
        wts.clear();
        cols.reserve(static_cast<size_t>(n) * 64);
        wts.reserve(static_cast<size_t>(n) * 64);
        const double* rp = rgb.data();
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int i = y * w + x;
                const double r0 = rp[static_cast<size_t>(i) * 3];
                const double g0 = rp[static_cast<size_t>(i) * 3 + 1];
                const double b0 = rp[static_cast<size_t>(i) * 3 + 2];
                for (const Off& o : offs) {
                    const int yy = y + o.dy, xx = x + o.dx;
                    if (yy >= h || xx < 0 || xx >= w) continue;
                    const int j = yy * w + xx;
                    const double dr = r0 - rp[static_cast<size_t>(j) * 3];
                    const double dg = g0 - rp[static_cast<size_t>(j) * 3 + 1];
                    const double db = b0 - rp[static_cast<size_t>(j) * 3 + 2];
                    const double cd2 = dr * dr + dg * dg + db * db;
                    if (cd2 > o.cd2_max) continue;
                    const double kb = o.wsp * exp_neg(cd2 * inv2b);
                    if (kb < kPairDrop) continue;
                    cols.push_back(static_cast<uint32_t>(j));
                    wts.push_back(kb);
                    s0b[static_cast<size_t>(i)] += kb;
                    s0b[static_cast<size_t>(j)] += kb;
                }
                row_ptr[static_cast<size_t>(i) + 1] = static_cast<uint32_t>(cols.size());
            }
    }
};

DenseCrfSolver::DenseCrfSolver(const Tensor& image, const CrfParams& params)
    : impl_(std::make_unique<Impl>()) {
    params.validate();
    check_image(image);
    impl_->params = params;
    impl_->h = image.extent(1);
    impl_->w = image.extent(2);
    impl_->n = impl_->h * impl_->w;
    impl_->build(image);
}

DenseCrfSolver::~DenseCrfSolver() = default;
DenseCrfSolver::DenseCrfSolver(DenseCrfSolver&&) noexcept = default;
DenseCrfSolver& DenseCrfSolver::operator=(DenseCrfSolver&&) noexcept = default;

Tensor DenseCrfSolver::refine(const Tensor& fg_prob) const {
    const Impl& s = *impl_;
    const Unary u = prepare_unary(fg_prob, s.h, s.w);
    const int n = s.n;
    const double ws = s.params.spatial_weight, wb = s.params.bilateral_weight;

    std::vector<double> qf(u.phat), qb(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) qb[static_cast<size_t>(i)] = 1.0 - qf[static_cast<size_t>(i)];
    std::vector<double> tmp(static_cast<size_t>(n));
    std::vector<double> s1s_f(static_cast<size_t>(n)), s1b_f(static_cast<size_t>(n));
    std::vector<double> nf(static_cast<size_t>(n)), nb(static_cast<size_t>(n));

    for (int it = 0; it < s.params.iterations; ++it) {
        s.separable(qf, tmp, s1s_f);
        for (int i = 0; i < n; ++i) s1s_f[static_cast<size_t>(i)] -= qf[static_cast<size_t>(i)];

        std::fill(s1b_f.begin(), s1b_f.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double qi = qf[static_cast<size_t>(i)];
            double acc = 0.0;
            for (uint32_t k = s.row_ptr[static_cast<size_t>(i)]; k < s.row_ptr[static_cast<size_t>(i) + 1]; ++k) {
                const uint32_t j = s.cols[k];
                const double wv = s.wts[k];
                acc += wv * qf[j];
                s1b_f[j] += wv * qi;
            }
            s1b_f[static_cast<size_t>(i)] += acc;
        }

        for (int i = 0; i < n; ++i) {
            const size_t si = static_cast<size_t>(i);
            const double s1sb = s.s0s[si] - s1s_f[si];  // kernel applied to (1 - q)
            const double s1bb = s.s0b[si] - s1b_f[si];
            update_pixel(u.logp[si], u.log1p[si], qf[si], qb[si],
                         s.s0s[si], s1s_f[si], s1sb, s.s0b[si], s1b_f[si], s1bb,
                         ws, wb, nf[si], nb[si]);
        }
        qf.swap(nf);
        qb.swap(nb);
    }

    Tensor out({s.h, s.w});
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = qf[static_cast<size_t>(i)];
    return out;
}

Tensor densecrf_refine(const Tensor& image, const Tensor& fg_prob, const CrfParams& params) {
    return DenseCrfSolver(image, params).refine(fg_prob);
}

Tensor densecrf_refine_reference(const Tensor& image, const Tensor& fg_prob,
                                 const CrfParams& params, const CrfObserver* observer) {
    params.validate();
    check_image(image);
    const int h = image.extent(1), w = image.extent(2);
    const Unary u = prepare_unary(fg_prob, h, w);
    const int n = u.n;
    const double inv2g = 1.0 / (2.0 * params.spatial_bandwidth * params.spatial_bandwidth);
    const double ba = params.resolved_bilateral_bandwidth(h, w);
    const double inv2a = 1.0 / (2.0 * ba * ba);
    const double inv2b = 1.0 / (2.0 * params.color_bandwidth * params.color_bandwidth);
    const double* im = image.data();
    const size_t plane = static_cast<size_t>(n);

    std::vector<double> qf(u.phat), qb(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) qb[static_cast<size_t>(i)] = 1.0 - qf[static_cast<size_t>(i)];
    std::vector<double> nf(static_cast<size_t>(n)), nb(static_cast<size_t>(n));

    for (int it = 0; it < params.iterations; ++it) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int i = y * w + x;
                double s0s = 0.0, s1s_f = 0.0, s1s_b = 0.0;
                double s0b = 0.0, s1b_f = 0.0, s1b_b = 0.0;
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) {
                        const int j = yy * w + xx;
                        if (j == i) continue;
                        const double dx = xx - x, dy = yy - y;
                        const double d2 = dx * dx + dy * dy;
                        const double ks = std::exp(-d2 * inv2g);
                        const double dr = im[static_cast<size_t>(i)] - im[static_cast<size_t>(j)];
                        const double dg = im[plane + i] - im[plane + j];
                        const double db = im[2 * plane + i] - im[2 * plane + j];
                        const double cd2 = dr * dr + dg * dg + db * db;
                        const double kb = std::exp(-d2 * inv2a - cd2 * inv2b);
                        s0s += ks;
                        s1s_f += ks * qf[static_cast<size_t>(j)];
                        s1s_b += ks * qb[static_cast<size_t>(j)];
                        s0b += kb;
                        s1b_f += kb * qf[static_cast<size_t>(j)];
                        s1b_b += kb * qb[static_cast<size_t>(j)];
                    }
                update_pixel(u.logp[static_cast<size_t>(i)], u.log1p[static_cast<size_t>(i)],
                             qf[static_cast<size_t>(i)], qb[static_cast<size_t>(i)],
                             s0s, s1s_f, s1s_b, s0b, s1b_f, s1b_b,
                             params.spatial_weight, params.bilateral_weight,
                             nf[static_cast<size_t>(i)], nb[static_cast<size_t>(i)]);
            }
        qf.swap(nf);
        qb.swap(nb);
        if (observer) (*observer)(it, qf, qb);
    }

    Tensor out({h, w});
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = qf[static_cast<size_t>(i)];
    return out;
}

}  // namespace gslm
