#pragma once

// Radial ground state of the limit problem on R^n:
//
//   -U'' - (n-1)/r U' + U = |U|^{p-2} U,   U'(0) = 0,   U(r) -> 0,
//
// solved by bisection shooting on U(0) with an adaptive RK45 integrator,
// tabulated on a uniform grid with an asymptotic matched tail. Also provides
// bubble evaluation U(r/eps), the limit energy level, an ODE residual check,
// and the two-column profile file format.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace equivar {

struct RadialProfile {
    int dim = 0;              // n in {1,2,3}
    double exponent = 0.0;    // p
    double u0 = 0.0;          // U(0)
    double decay_rate = 0.0;  // fitted slope of log U over the last stored decade
    std::vector<double> r_grid;    // uniform spacing starting at 0
    std::vector<double> u_values;  // strictly positive, strictly decreasing
};

namespace detail {

constexpr double kProfileStep = 1.0 / 1024.0;

struct RadialRhs {
    int n;
    double p;
    // y = (u, u'); the equation reads u'' + (n-1)/r u' = u - |u|^{p-2} u.
    void eval(double r, const double y[2], double dy[2]) const {
        const double u = y[0];
        const double f = u - std::pow(std::abs(u), p - 2.0) * u;
        dy[0] = y[1];
        dy[1] = f - (n > 1 && r > 0.0 ? (n - 1) / r * y[1] : 0.0);
    }
};

// Even-order Taylor start at r = 0. Matching powers of the expansion
// u = u0 + A r^2 + B r^4 + C r^6 against u'' + (n-1)/r u' = f(u) gives
//   2nA = f(u0), 4(n+2)B = f'(u0) A, 6(n+4)C = f'(u0) B + f''(u0) A^2 / 2.
struct SeriesStart {
    double u0, A, B, C;
    SeriesStart(int n, double p, double u0_) : u0(u0_) {
        const double up = std::pow(std::abs(u0), p - 2.0);
        const double f0 = u0 - up * u0;
        const double f1 = 1.0 - (p - 1.0) * up;
        const double f2 = -(p - 1.0) * (p - 2.0) * std::pow(std::abs(u0), p - 3.0);
        A = f0 / (2.0 * n);
        B = f1 * A / (4.0 * (n + 2));
        C = (f1 * B + 0.5 * f2 * A * A) / (6.0 * (n + 4));
    }
    double u(double r) const {
        const double r2 = r * r;
        return u0 + r2 * (A + r2 * (B + r2 * C));
    }
    double v(double r) const {
        const double r2 = r * r;
        return r * (2.0 * A + r2 * (4.0 * B + r2 * 6.0 * C));
    }
};

// One Dormand-Prince 5(4) trial step of size h; fills the error estimate and
// the 5th-order candidate without touching the caller's state.
inline void dp45_trial(const RadialRhs& rhs, double r, const double y[2], double h,
                       double rtol, double atol, double out[2], double& err) {
    static constexpr double c[7] = {0, 1. / 5, 3. / 10, 4. / 5, 8. / 9, 1., 1.};
    static constexpr double a[7][6] = {
        {},
        {1. / 5},
        {3. / 40, 9. / 40},
        {44. / 45, -56. / 15, 32. / 9},
        {19372. / 6561, -25360. / 2187, 64448. / 6561, -212. / 729},
        {9017. / 3168, -355. / 33, 46732. / 5247, 49. / 176, -5103. / 18656},
        {35. / 384, 0., 500. / 1113, 125. / 192, -2187. / 6784, 11. / 84}};
    static constexpr double e[7] = {71. / 57600, 0., -71. / 16695, 71. / 1920,
                                    -17253. / 339200, 22. / 525, -1. / 40};
    double k[7][2];
    rhs.eval(r, y, k[0]);
    for (int s = 1; s < 7; ++s) {
        double ys[2];
        for (int d = 0; d < 2; ++d) {
            double acc = y[d];
            for (int j = 0; j < s; ++j) acc += h * a[s][j] * k[j][d];
            ys[d] = acc;
        }
        rhs.eval(r + c[s] * h, ys, k[s]);
    }
    err = 0.0;
    for (int d = 0; d < 2; ++d) {
        // 5th order solution reuses the a[6] row (FSAL pair)
        double acc = y[d], ee = 0.0;
        for (int j = 0; j < 6; ++j) acc += h * a[6][j] * k[j][d];
        for (int j = 0; j < 7; ++j) ee += h * e[j] * k[j][d];
        out[d] = acc;
        const double sc = atol + rtol * std::max(std::abs(y[d]), std::abs(acc));
        err = std::max(err, std::abs(ee) / sc);
    }
}

struct Dp45 {
    RadialRhs rhs;
    double rtol, atol;
    double h = kProfileStep / 8.0;
    // Advance by one accepted step of size at most hmax.
    void step(double& r, double y[2], double hmax) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            const double hs = std::min(h, hmax);
            double yn[2], err;
            dp45_trial(rhs, r, y, hs, rtol, atol, yn, err);
            const double fac =
                std::clamp(0.9 * std::pow(std::max(err, 1e-12), -0.2), 0.2, 5.0);
            h = std::min(hs * fac, 0.25);
            if (err <= 1.0) {
                r += hs;
                y[0] = yn[0];
                y[1] = yn[1];
                return;
            }
        }
        throw std::runtime_error("ground state: integrator step control failed");
    }
};

// Integrate from the Taylor start at 2H, landing on every grid multiple of H.
// Classification and tabulation both go through here so they follow bitwise
// identical trajectories; a classification produced by a different integrator
// path would hand the tabulated tail an O(path difference) * e^r growing-mode
// error at the asymptotic handover.
//
// on_grid(r, u) is invoked at every landing; returning false stops early.
// Returns +1 overshoot (u crossed zero: U(0) too large), -1 undershoot
// (u turned upward while positive: too small), 0 still decaying at rmax,
// 2 stopped by the callback.
template <class F>
inline int integrate_shot(int n, double p, double u0, double rmax, F&& on_grid) {
    const double H = kProfileStep;
    const SeriesStart series(n, p, u0);
    double r = 2.0 * H;
    double y[2] = {series.u(r), series.v(r)};
    if (y[0] <= 0.0) return 1;
    if (!on_grid(0.0, series.u(0.0)) || !on_grid(H, series.u(H)) || !on_grid(r, y[0]))
        return 2;
    Dp45 stepper{RadialRhs{n, p}, 1e-12, 1e-14 * u0};
    long k = 2;
    while (true) {
        const double target = static_cast<double>(k + 1) * H;
        while (target - r > 1e-9 * H) {
            stepper.step(r, y, target - r);
            if (y[0] <= 0.0) return 1;
            if (y[1] >= 0.0) return -1;
        }
        r = target;
        ++k;
        if (!on_grid(r, y[0])) return 2;
        if (r >= rmax) return 0;
    }
}

inline int classify_shot(int n, double p, double u0, double rmax = 40.0) {
    return integrate_shot(n, p, u0, rmax, [](double, double) { return true; });
}

// Asymptotic tail U ~ C r^{-(n-1)/2} e^{-r} sum_m c_m r^{-m}; substituting
// r^{a-m} e^{-r} into the linearized equation gives the recursion
//   c_m = -(a-m+1)(a+n-1-m) c_{m-1} / (2m),   a = -(n-1)/2.
// (For n = 1 and n = 3 every correction vanishes and the form is exact.)
struct AsymptoticTail {
    double a;
    double c[6];
    explicit AsymptoticTail(int n) : a(-(n - 1) / 2.0) {
        c[0] = 1.0;
        for (int m = 1; m < 6; ++m)
            c[m] = -(a - m + 1) * (a + n - 1 - m) * c[m - 1] / (2.0 * m);
    }
    double shape(double r) const {
        double s = 0.0, rk = 1.0;
        for (int m = 0; m < 6; ++m) {
            s += c[m] / rk;
            rk *= r;
        }
        return std::pow(r, a) * std::exp(-r) * s;
    }
};

inline double fit_decay_rate(const std::vector<double>& r, const std::vector<double>& u) {
    const double floor_u = u.back() * 10.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (size_t i = 0; i < r.size(); ++i) {
        if (u[i] > floor_u) continue;
        const double x = r[i], y = std::log(u[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++m;
    }
    if (m < 2) return 0.0;
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace detail

// Bisection shooting for the decaying positive radial solution. tol is the
// acceptance threshold the caller intends for the ODE residual of the
// returned table; the integration itself always runs at full precision.
inline RadialProfile solve_ground_state(int n, double p, double tol) {
    if (n < 1 || n > 3) throw std::invalid_argument("ground state: n must be 1, 2 or 3");
    if (!(p > 2.0)) throw std::invalid_argument("ground state: p must exceed 2");
    if (n == 3 && !(p < 6.0)) throw std::invalid_argument("ground state: p must be subcritical (p < 6 for n = 3)");
    if (!(tol > 0.0) || tol > 1e-2) throw std::invalid_argument("ground state: tol must lie in (0, 1e-2]");

    double lo = 1.0, hi = 10.0;
    while (detail::classify_shot(n, p, lo) == 1 && lo > 1e-6) lo *= 0.5;
    while (detail::classify_shot(n, p, hi) != 1) {
        hi *= 2.0;
        if (hi > 1e6) throw std::runtime_error("ground state: shooting bracket expansion failed");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (detail::classify_shot(n, p, mid) == 1)
            hi = mid;
        else
            lo = mid;
    }
    const double u0 = lo;  // the undershoot side still decays monotonically

    // Tabulate the shot trajectory, then hand over to the asymptotic tail
    // with a smooth blend over one unit of r so the table has no derivative
    // kink at the handover. The handover happens at u ~ 3e-5 u0, where the
    // growing-mode error of the shot (order ulp(u0) e^r) is still far below
    // the local solution scale.
    const double H = detail::kProfileStep;
    const double u_switch = 3e-5 * u0;
    std::vector<double> rg, uv;
    const int status = detail::integrate_shot(n, p, u0, 40.0, [&](double r, double u) {
        rg.push_back(r);
        uv.push_back(u);
        return u > u_switch;
    });
    if (status != 2 || rg.size() < 1024)
        throw std::runtime_error("ground state: trajectory lost before tail handover");

    const detail::AsymptoticTail tail(n);
    const double rb = rg.back();
    const double C = uv.back() / tail.shape(rb);
    const double ra = rb - 1.0;
    for (size_t i = 0; i < rg.size(); ++i) {
        if (rg[i] <= ra) continue;
        const double t = rg[i] - ra;  // window width 1
        const double w = 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        uv[i] = w * uv[i] + (1.0 - w) * C * tail.shape(rg[i]);
    }
    double rt = rb;
    while (true) {
        rt += H;
        const double ut = C * tail.shape(rt);
        if (ut < 1e-10 * u0 || rt > 40.0) break;
        rg.push_back(rt);
        uv.push_back(ut);
    }

    RadialProfile prof;
    prof.dim = n;
    prof.exponent = p;
    prof.u0 = u0;
    prof.r_grid = std::move(rg);
    prof.u_values = std::move(uv);
    prof.decay_rate = detail::fit_decay_rate(prof.r_grid, prof.u_values);
    (void)tol;
    return prof;
}

// Monotone cubic (Fritsch-Butland harmonic-mean slopes) evaluation of
// U(dist/eps); zero beyond the stored grid, O(1) per call on the uniform grid.
inline double bubble_value(const RadialProfile& prof, double eps, double dist) {
    if (!(eps > 0.0)) throw std::invalid_argument("bubble_value: eps must be positive");
    const double r = std::max(dist, 0.0) / eps;
    const auto& rg = prof.r_grid;
    const auto& uv = prof.u_values;
    const size_t N = rg.size();
    if (N < 4) throw std::invalid_argument("bubble_value: profile too short");
    if (r >= rg.back()) return 0.0;
    const double h = rg[1] - rg[0];
    size_t i = std::min(static_cast<size_t>(r / h), N - 2);
    while (i > 0 && r < rg[i]) --i;
    while (i + 2 < N && r >= rg[i + 1]) ++i;

    auto secant = [&](size_t k) { return (uv[k + 1] - uv[k]) / h; };
    auto node_slope = [&](size_t k) -> double {
        if (k == 0) return secant(0);
        if (k == N - 1) return secant(N - 2);
        const double s0 = secant(k - 1), s1 = secant(k);
        if (s0 * s1 <= 0.0) return 0.0;
        return 2.0 * s0 * s1 / (s0 + s1);
    };
    const double m0 = node_slope(i), m1 = node_slope(i + 1);
    const double t = (r - rg[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * uv[i] + (t3 - 2 * t2 + t) * h * m0 +
           (-2 * t3 + 3 * t2) * uv[i + 1] + (t3 - t2) * h * m1;
}

// Limit level (1/2 - 1/p) * omega_{n-1} * int_0^inf r^{n-1} U^p dr by
// composite Simpson on the stored grid (last odd interval by the 3-point rule).
inline double ground_level(const RadialProfile& prof) {
    const auto& rg = prof.r_grid;
    const auto& uv = prof.u_values;
    const size_t N = rg.size();
    if (N < 4) throw std::invalid_argument("ground_level: profile too short");
    const double h = rg[1] - rg[0];
    const int n = prof.dim;
    const double p = prof.exponent;
    std::vector<double> f(N);
    for (size_t i = 0; i < N; ++i)
        f[i] = (n == 1 ? 1.0 : std::pow(rg[i], n - 1)) * std::pow(uv[i], p);
    double integral = 0.0;
    size_t i = 0;
    for (; i + 2 < N; i += 2) integral += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
    if (i + 1 < N)  // one interval left
        integral += h / 12.0 * (5.0 * f[N - 1] + 8.0 * f[N - 2] - f[N - 3]);
    const double omega = (n == 1) ? 2.0 : (n == 2) ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
    return (0.5 - 1.0 / p) * omega * integral;
}

// Sup-norm ODE residual of the tabulated profile, via 4th-order central
// differences on the uniform grid. U is even in r, so ghost points left of
// r = 0 mirror; at r = 0 the equation degenerates to n U''(0) = U - U^{p-1}.
inline double ode_residual_sup(const RadialProfile& prof) {
    const auto& rg = prof.r_grid;
    const auto& uv = prof.u_values;
    const size_t N = rg.size();
    if (N < 6) throw std::invalid_argument("ode_residual_sup: profile too short");
    const double h = rg[1] - rg[0];
    const int n = prof.dim;
    const double p = prof.exponent;
    auto at = [&](long k) { return uv[static_cast<size_t>(k < 0 ? -k : k)]; };
    double worst = 0.0;
    for (size_t i = 0; i + 2 < N; ++i) {
        const long k = static_cast<long>(i);
        const double upp = (-at(k + 2) + 16 * at(k + 1) - 30 * at(k) + 16 * at(k - 1) - at(k - 2)) / (12 * h * h);
        const double u = uv[i];
        const double nonlinear = std::pow(std::abs(u), p - 2.0) * u;
        double res;
        if (i == 0) {
            res = -n * upp + u - nonlinear;
        } else {
            const double up = (-at(k + 2) + 8 * at(k + 1) - 8 * at(k - 1) + at(k - 2)) / (12 * h);
            res = -upp - (n - 1) / rg[i] * up + u - nonlinear;
        }
        worst = std::max(worst, std::abs(res));
    }
    return worst;
}

inline void write_profile(const RadialProfile& prof, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_profile: cannot open " + path);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "# n=%d p=%.17g u0=%.17g\n", prof.dim, prof.exponent, prof.u0);
    out << buf;
    for (size_t i = 0; i < prof.r_grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", prof.r_grid[i], prof.u_values[i]);
        out << buf;
    }
    if (!out) throw std::runtime_error("write_profile: write failed for " + path);
}

inline RadialProfile read_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_profile: cannot open " + path);
    RadialProfile prof;
    std::string header;
    std::getline(in, header);
    if (std::sscanf(header.c_str(), "# n=%d p=%lg u0=%lg", &prof.dim, &prof.exponent, &prof.u0) != 3)
        throw std::runtime_error("read_profile: bad header in " + path);
    double r, u;
    while (in >> r >> u) {
        prof.r_grid.push_back(r);
        prof.u_values.push_back(u);
    }
    if (prof.r_grid.size() < 4) throw std::runtime_error("read_profile: too few samples in " + path);
    prof.decay_rate = detail::fit_decay_rate(prof.r_grid, prof.u_values);
    return prof;
}

}  // namespace equivar
