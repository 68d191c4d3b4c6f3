#include "dcvar/mortality.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "dcvar/rng.hpp"

namespace dcvar {

void GompertzMakehamParams::validate() const {
    if (!(a > 0.0 && beta > 0.0 && c > 0.0))
        throw std::invalid_argument("gompertz-makeham parameters must be positive");
}

double gm_intensity(double x, const GompertzMakehamParams& p) {
    if (x < 0.0) throw std::invalid_argument("age must be >= 0");
    return p.a + p.beta * std::exp(p.c * x);
}

double integrated_intensity(double x, const GompertzMakehamParams& p) {
    if (x < 0.0) throw std::invalid_argument("age must be >= 0");
    return p.a + (p.beta / p.c) * (std::exp(p.c * (x + 1.0)) - std::exp(p.c * x));
}

double death_prob(double x, double z, const GompertzMakehamParams& p) {
    return 1.0 - std::exp(-std::max(z, 0.0) * integrated_intensity(x, p));
}

void CirParams::validate() const {
    // sigma = 0 is allowed: the deterministic limit is used by consistency tests
    if (!(g > 0.0 && b > 0.0 && sigma >= 0.0))
        throw std::invalid_argument("cir parameters out of range");
    if (!(z0 > 0.0)) throw std::invalid_argument("cir z0 must be positive");
    if (std::abs(rho) > 1.0) throw std::invalid_argument("cir |rho| must be <= 1");
}

FactorPaths simulate_factors(const CirParams& cir_m, const CirParams& cir_l, int n_years,
                             int n_paths, std::uint64_t seed) {
    cir_m.validate();
    cir_l.validate();
    if (n_years < 1 || n_paths < 1) throw std::invalid_argument("n_years and n_paths must be >= 1");

    const double rho = cir_m.rho;
    const double rho_c = std::sqrt(1.0 - rho * rho);
    FactorPaths out;
    out.n_paths = n_paths;
    out.n_years = n_years;
    out.zm.resize(static_cast<std::size_t>(n_paths) * (n_years + 1));
    out.zl.resize(out.zm.size());

    for (int p = 0; p < n_paths; ++p) {
        GaussianStream g(stream_seed(seed, static_cast<std::uint64_t>(p)));
        double zm = cir_m.z0, zl = cir_l.z0;
        std::size_t base = static_cast<std::size_t>(p) * (n_years + 1);
        out.zm[base] = zm;
        out.zl[base] = zl;
        for (int t = 0; t < n_years; ++t) {
            double e1 = g.next(), e2 = g.next();
            double em = e1;
            double el = rho * e1 + rho_c * e2;
            double zmp = std::max(zm, 0.0), zlp = std::max(zl, 0.0);
            zm = zm + (cir_m.g - cir_m.b * zmp) + cir_m.sigma * std::sqrt(zmp) * em;
            zl = zl + (cir_l.g - cir_l.b * zlp) + cir_l.sigma * std::sqrt(zlp) * el;
            out.zm[base + t + 1] = zm;
            out.zl[base + t + 1] = zl;
        }
    }
    return out;
}

void ContractSpec::validate() const {
    if (!(cohort_size > 0.0 && benefit > 0.0)) throw std::invalid_argument("positive amounts required");
    if (age < 0.0) throw std::invalid_argument("age must be >= 0");
    if (loading < 0.0) throw std::invalid_argument("loading must be >= 0");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(v() > 0.0 && v() <= 1.0)) throw std::invalid_argument("discount factor must lie in (0,1]");
}

SurvivorPath survivor_path(double n0, double age, const std::vector<double>& z, int horizon,
                           const GompertzMakehamParams& p) {
    if (!(n0 > 0.0)) throw std::invalid_argument("n0 must be positive");
    if (static_cast<int>(z.size()) < horizon) throw std::invalid_argument("factor path too short");
    SurvivorPath out;
    out.n.resize(horizon + 1);
    out.deaths.resize(horizon);
    out.n[0] = n0;
    for (int t = 0; t < horizon; ++t) {
        double q = death_prob(age + t, z[t], p);
        out.deaths[t] = out.n[t] * q;
        out.n[t + 1] = out.n[t] * (1.0 - q);
    }
    return out;
}

std::vector<double> contract_cashflows(const ContractSpec& contract, const SurvivorPath& path) {
    contract.validate();
    const int T = contract.horizon;
    if (static_cast<int>(path.n.size()) < T + 1)
        throw std::invalid_argument("survivor path shorter than the contract");
    std::vector<double> cf(T + 1, 0.0);
    if (contract.kind == ContractKind::MortalityTerm) {
        for (int t = 0; t < T; ++t)
            cf[t] = contract.premium_loaded() * path.n[t] - contract.benefit * path.deaths[t];
    } else {
        cf[0] = contract.premium_loaded() * path.n[0];
        for (int t = 1; t <= T; ++t) cf[t] = -contract.benefit * path.n[t];
    }
    return cf;
}

double fair_premium(ContractKind kind, const ContractSpec& shape,
                    const GompertzMakehamParams& gm, const CirParams& cir, int n_mc,
                    std::uint64_t seed) {
    if (n_mc < 1) throw std::invalid_argument("n_mc must be >= 1");
    const int T = shape.horizon;
    const double v = shape.v();
    auto paths = simulate_factors(cir, cir, T, n_mc, seed);

    double prem_base = 0.0, benefit_out = 0.0;
    std::vector<double> z(T);
    for (int p = 0; p < n_mc; ++p) {
        for (int t = 0; t < T; ++t) z[t] = paths.m(p, t);
        auto s = survivor_path(1.0, shape.age, z, T, gm);
        if (kind == ContractKind::MortalityTerm) {
            double disc = v;
            for (int t = 0; t < T; ++t, disc *= v) {
                prem_base += disc * s.n[t];
                benefit_out += disc * s.deaths[t];
            }
        } else {
            prem_base += v;  // single premium unit at t=0, discounted one period
            double disc = v * v;
            for (int t = 1; t <= T; ++t, disc *= v) benefit_out += disc * s.n[t];
        }
    }
    if (!(prem_base > 1e-12 * n_mc))
        throw std::runtime_error("fair_premium: vanishing premium base");
    return shape.benefit * benefit_out / prem_base;
}

double AffineBeTable::f(int h, int age_offset, double z) const {
    if (h < 0 || age_offset < 0 || h + age_offset > h_max)
        throw std::out_of_range("affine table lookup out of range");
    return std::exp(A(h, age_offset) - B(h, age_offset) * std::max(z, 0.0));
}

void AffineBeTable::validate() const {
    for (int off = 0; off <= h_max; ++off) {
        if (A(0, off) != 0.0 || B(0, off) != 0.0)
            throw std::logic_error("affine table base must be (0,0)");
        for (int h = 0; h + off <= h_max; ++h)
            if (!std::isfinite(A(h, off)) || !std::isfinite(B(h, off)))
                throw std::logic_error("affine table entries must be finite");
    }
}

AffineBeTable affine_be_coeffs(const GompertzMakehamParams& gm, const CirParams& cir,
                               double base_age, int h_max, bool exact_cir) {
    gm.validate();
    cir.validate();
    if (h_max < 0) throw std::invalid_argument("h_max must be >= 0");

    AffineBeTable t;
    t.base_age = base_age;
    t.h_max = h_max;
    t.A = Eigen::MatrixXd::Constant(h_max + 1, h_max + 1,
                                    std::numeric_limits<double>::quiet_NaN());
    t.B = t.A;
    for (int off = 0; off <= h_max; ++off) {
        t.A(0, off) = 0.0;
        t.B(0, off) = 0.0;
    }
    for (int h = 1; h <= h_max; ++h) {
        for (int off = 0; off + h <= h_max; ++off) {
            double kx = integrated_intensity(base_age + off, gm);
            double ap = t.A(h - 1, off + 1), bp = t.B(h - 1, off + 1);
            double a, b;
            if (!exact_cir) {
                // Euler-consistent transform: E[e^{-uZ'}|z] = e^{-ug -u(1-b)z + u^2 s^2 z/2}
                b = kx + bp * (1.0 - cir.b) - 0.5 * bp * bp * cir.sigma * cir.sigma;
                a = ap - bp * cir.g;
            } else {
                double emb = std::exp(-cir.b);
                if (cir.sigma == 0.0) {
                    b = kx + bp * emb;
                    a = ap - bp * (cir.g / cir.b) * (1.0 - emb);
                } else {
                    double denom = 1.0 + bp * cir.sigma * cir.sigma * (1.0 - emb) / (2.0 * cir.b);
                    if (denom <= 0.0)
                        throw std::runtime_error("affine recursion unstable for these parameters");
                    b = kx + bp * emb / denom;
                    a = ap - (2.0 * cir.g / (cir.sigma * cir.sigma)) * std::log(denom);
                }
            }
            if (b < 0.0)
                throw std::runtime_error("affine recursion unstable for these parameters");
            t.A(h, off) = a;
            t.B(h, off) = b;
        }
    }
    return t;
}

double best_estimate(const ContractSpec& contract, double n_h, double z, int h,
                     const AffineBeTable& table) {
    contract.validate();
    const int T = contract.horizon;
    if (h < 0) throw std::out_of_range("development year must be >= 0");
    if (h > T) return 0.0;
    if (table.h_max < T) throw std::out_of_range("affine table does not cover the contract");
    const double v = contract.v();

    double be = 0.0;
    if (contract.kind == ContractKind::MortalityTerm) {
        // CF_m = P N_m - C (N_m - N_{m+1}) for m = h..T-1
        double disc = v;
        for (int m = h; m < T; ++m, disc *= v) {
            double fj = table.f(m - h, h, z);
            double fj1 = table.f(m + 1 - h, h, z);
            be += disc * (contract.premium_loaded() * fj - contract.benefit * (fj - fj1));
        }
    } else {
        if (h == 0) be += v * contract.premium_loaded();  // single premium, per survivor at 0
        int start = std::max(h, 1);
        double disc = std::pow(v, start - h + 1);
        for (int m = start; m <= T; ++m, disc *= v)
            be -= disc * contract.benefit * table.f(m - h, h, z);
    }
    return n_h * be;
}

std::vector<double> annual_profits(const ContractSpec& contract,
                                   const GompertzMakehamParams& gm,
                                   const std::vector<double>& z, const AffineBeTable& table,
                                   int d_max) {
    contract.validate();
    const int T = contract.horizon;
    if (d_max < 0) d_max = T + 1;
    if (d_max < 1) throw std::invalid_argument("d_max must be >= 1");
    const double v = contract.v();

    // survivors and cash flows up to the last development year we report;
    // BE_d needs z[d], survivors need z[0..d-1]
    const int n_surv = std::min(d_max, T);
    if (static_cast<int>(z.size()) < std::min(d_max, T) + 1)
        throw std::invalid_argument("factor path too short for the requested horizon");
    SurvivorPath surv = survivor_path(contract.cohort_size, contract.age, z, n_surv, gm);

    // cash flows CF_t for t = 0..n_surv (annuity pays through t = T only)
    std::vector<double> cf(n_surv + 1, 0.0);
    if (contract.kind == ContractKind::MortalityTerm) {
        for (int t = 0; t < n_surv && t < T; ++t)
            cf[t] = contract.premium_loaded() * surv.n[t] - contract.benefit * surv.deaths[t];
    } else {
        cf[0] = contract.premium_loaded() * surv.n[0];
        for (int t = 1; t <= n_surv && t <= T; ++t) cf[t] = -contract.benefit * surv.n[t];
    }

    std::vector<double> be(std::min(d_max, T) + 1, 0.0);
    for (int h = 0; h < static_cast<int>(be.size()); ++h)
        be[h] = best_estimate(contract, surv.n[std::min(h, n_surv)], z[h], h, table);

    std::vector<double> x(d_max + 1, 0.0);
    for (int d = 1; d <= d_max; ++d) {
        double be_d = d <= T ? be[d] : 0.0;
        double cf_prev = d - 1 <= n_surv ? cf[d - 1] : 0.0;
        if (d == 1)
            x[d] = cf_prev + be_d;
        else
            x[d] = cf_prev + be_d - be[d - 1] / v;
    }
    return x;
}

namespace {

// Marsaglia-Tsang gamma sampler (shape >= 1) on our deterministic stream.
double gamma_sample(GaussianStream& g, double shape, double rate) {
    double boost = 1.0;
    if (shape < 1.0) {
        boost = std::pow(g.uniform01(), 1.0 / shape);
        shape += 1.0;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double xn, vcube;
        do {
            xn = g.next();
            vcube = 1.0 + c * xn;
        } while (vcube <= 0.0);
        vcube = vcube * vcube * vcube;
        double u = g.uniform01();
        if (u < 1.0 - 0.0331 * xn * xn * xn * xn) return boost * d * vcube / rate;
        if (std::log(u) < 0.5 * xn * xn + d * (1.0 - vcube + std::log(vcube)))
            return boost * d * vcube / rate;
    }
}

}  // namespace

void CasualtyParams::validate() const {
    if (!(alpha > 0.0 && beta > 0.0)) throw std::invalid_argument("gamma parameters must be positive");
    if (theta < 0.0) throw std::invalid_argument("loading must be >= 0");
}

Eigen::MatrixXd casualty_profits(const CasualtyParams& params, int horizon, int n_paths,
                                 std::uint64_t seed) {
    params.validate();
    if (horizon < 1 || n_paths < 1) throw std::invalid_argument("horizon and n_paths must be >= 1");
    const double premium = (1.0 + params.theta) * params.alpha / params.beta;
    Eigen::MatrixXd out(n_paths, horizon);
    for (int p = 0; p < n_paths; ++p) {
        GaussianStream g(stream_seed(seed, static_cast<std::uint64_t>(p)));
        for (int t = 0; t < horizon; ++t)
            out(p, t) = premium - gamma_sample(g, params.alpha, params.beta);
    }
    return out;
}

void InsuranceSetup::validate() const {
    gm.validate();
    cir_m.validate();
    cir_l.validate();
    casualty.validate();
    if (age < 0.0) throw std::invalid_argument("age must be >= 0");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (loading < 0.0) throw std::invalid_argument("loading must be >= 0");
    if (n_ctrl < 1) throw std::invalid_argument("n_ctrl must be >= 1");
    if (n0 < 1) throw std::invalid_argument("n0 must be >= 1");
    if (alpha_if_m < 0.0 || alpha_if_l < 0.0)
        throw std::invalid_argument("in-force exposures must be >= 0");
}

void InsuranceSetup::calibrate() {
    validate();
    const int T = horizon;
    const double v = 1.0 / (1.0 + rate);

    table_m = affine_be_coeffs(gm, cir_m, age, T, exact_cir);
    table_l = affine_be_coeffs(gm, cir_l, age, T, exact_cir);

    // expected survivorship per person from inception, consistent with the scheme
    auto surv_curve = [&](const AffineBeTable& t) {
        std::vector<double> f(T + 1);
        for (int m = 0; m <= T; ++m) f[m] = t.f(m, 0, cir_m.z0);
        return f;
    };
    auto fm = surv_curve(table_m);
    std::vector<double> fl(T + 1);
    for (int m = 0; m <= T; ++m) fl[m] = table_l.f(m, 0, cir_l.z0);

    // mortality term: P sum v^{m+1} E[N_m] = C sum v^{m+1} E[D_m]
    double prem_base = 0.0, death_out = 0.0, disc = v;
    for (int m = 0; m < T; ++m, disc *= v) {
        prem_base += disc * fm[m];
        death_out += disc * (fm[m] - fm[m + 1]);
    }
    mortality = ContractSpec{};
    mortality.kind = ContractKind::MortalityTerm;
    mortality.age = age;
    mortality.benefit = 1.0;
    mortality.loading = loading;
    mortality.horizon = T;
    mortality.rate = rate;
    mortality.premium_pure = death_out / prem_base;
    mortality.cohort_size = 10.0 / death_out;  // discounted benefit outflow 10 per unit

    // longevity annuity: v P^L = R sum_{t>=1} v^{t+1} E[N_t]
    double annuity_out = 0.0;
    disc = v * v;
    for (int t = 1; t <= T; ++t, disc *= v) annuity_out += disc * fl[t];
    longevity = ContractSpec{};
    longevity.kind = ContractKind::LongevityAnnuity;
    longevity.age = age;
    longevity.benefit = 1.0;
    longevity.loading = loading;
    longevity.horizon = T;
    longevity.rate = rate;
    longevity.premium_pure = annuity_out / v;
    longevity.cohort_size = 10.0 / annuity_out;

    // casualty: discounted outflow v * s * alpha/beta = 10
    casualty_scale = 10.0 / (v * casualty.alpha / casualty.beta);
    calibrated = true;
}

double LobProfitCube::at(Lob lob, int k, int i, int d) const {
    if (k < 0 || k >= n_scen || i < 0 || i >= n_uw || d < 1 || d > n_years)
        throw std::out_of_range("profit cube index out of range");
    const std::vector<float>& src = lob == Lob::Mortality ? xm
                                    : lob == Lob::Longevity ? xl
                                                            : xc;
    return src[idx(k, i, d)];
}

double LobProfitCube::surv(Lob lob, int k, int i, int t) const {
    if (lob == Lob::Casualty)
        throw std::invalid_argument("casualty business carries no survivor cohort");
    if (k < 0 || k >= n_scen || i < 0 || i >= n_uw || t < 0 || t > n_years)
        throw std::out_of_range("profit cube index out of range");
    return (lob == Lob::Mortality ? sm : sl)[sidx(k, i, t)];
}

void LobProfitCube::validate() const {
    if (n_scen < 1 || n_uw < 1 || n_years < 1 || n0 < 1 || n0 > n_uw)
        throw std::invalid_argument("bad profit cube dimensions");
    const std::size_t want = static_cast<std::size_t>(n_scen) * n_uw * n_years;
    if (xm.size() != want || xl.size() != want || xc.size() != want)
        throw std::invalid_argument("profit cube storage size mismatch");
    const std::size_t want_s = static_cast<std::size_t>(n_scen) * n_uw * (n_years + 1);
    if (sm.size() != want_s || sl.size() != want_s)
        throw std::invalid_argument("profit cube survivor storage size mismatch");
    for (const auto* v : {&xm, &xl, &xc})
        for (float x : *v)
            if (!std::isfinite(x)) throw std::invalid_argument("profit cube entries must be finite");
    for (const auto* v : {&sm, &sl})
        for (float x : *v)
            if (!(x >= 0.0f && x <= 1.0f))
                throw std::invalid_argument("survivor fractions must lie in [0, 1]");
}

LobProfitCube build_profit_cube(const InsuranceSetup& setup, int n_scen, std::uint64_t seed) {
    if (!setup.calibrated) throw std::logic_error("setup must be calibrated first");
    if (n_scen < 1) throw std::invalid_argument("n_scen must be >= 1");
    const int n = setup.reward_years();
    const int A = setup.n0 + setup.n_ctrl;

    LobProfitCube cube;
    cube.n_scen = n_scen;
    cube.n_uw = A;
    cube.n_years = n;
    cube.n0 = setup.n0;
    cube.v = 1.0 / (1.0 + setup.rate);
    cube.alpha_if_m = setup.alpha_if_m;
    cube.alpha_if_l = setup.alpha_if_l;
    const std::size_t sz = static_cast<std::size_t>(n_scen) * A * n;
    cube.xm.assign(sz, 0.0f);
    cube.xl.assign(sz, 0.0f);
    cube.xc.assign(sz, 0.0f);
    const std::size_t sz_s = static_cast<std::size_t>(n_scen) * A * (n + 1);
    cube.sm.assign(sz_s, 0.0f);
    cube.sl.assign(sz_s, 0.0f);

    auto factors = simulate_factors(setup.cir_m, setup.cir_l, n, n_scen,
                                    stream_seed(seed, 0x6c696665ULL));
    Eigen::MatrixXd cas = casualty_profits(setup.casualty, setup.n_ctrl, n_scen,
                                           stream_seed(seed, 0x63617375ULL));

    std::vector<double> zseg;
    for (int k = 0; k < n_scen; ++k) {
        for (int i = 0; i < A; ++i) {
            const int d_max = n - i;
            if (d_max < 1) continue;
            zseg.resize(d_max + 1);

            const int n_surv = std::min({d_max, setup.mortality.horizon});

            for (int t = 0; t <= d_max; ++t) zseg[t] = factors.m(k, i + t);
            auto xm = annual_profits(setup.mortality, setup.gm, zseg, setup.table_m, d_max);
            for (int d = 1; d <= d_max; ++d)
                cube.xm[cube.idx(k, i, d)] = static_cast<float>(xm[d]);
            auto pm = survivor_path(1.0, setup.age, zseg, n_surv, setup.gm);
            for (int t = 0; t <= n_surv; ++t)
                cube.sm[cube.sidx(k, i, i + t)] = static_cast<float>(pm.n[t]);

            for (int t = 0; t <= d_max; ++t) zseg[t] = factors.l(k, i + t);
            auto xl = annual_profits(setup.longevity, setup.gm, zseg, setup.table_l, d_max);
            for (int d = 1; d <= d_max; ++d)
                cube.xl[cube.idx(k, i, d)] = static_cast<float>(xl[d]);
            auto pl = survivor_path(1.0, setup.age, zseg, n_surv, setup.gm);
            for (int t = 0; t <= n_surv; ++t)
                cube.sl[cube.sidx(k, i, i + t)] = static_cast<float>(pl.n[t]);

            // casualty: single development year, no in-force component
            if (i >= setup.n0) {
                double y = setup.casualty_scale * cas(k, i - setup.n0);
                cube.xc[cube.idx(k, i, 1)] = static_cast<float>(y);
            }
        }
    }
    return cube;
}

AggregateResult aggregate_lob(const LobProfitCube& cube, const Eigen::MatrixXd& controls) {
    const int n_ctrl = cube.n_uw - cube.n0;
    if (controls.rows() != n_ctrl || controls.cols() != 3)
        throw std::invalid_argument("controls must be n_ctrl x 3");

    AggregateResult out;
    out.yearly = Eigen::MatrixXd::Zero(cube.n_scen, cube.n_years);
    out.reward.assign(cube.n_scen, 0.0);
    for (int k = 0; k < cube.n_scen; ++k) {
        for (int i = 0; i < cube.n_uw; ++i) {
            double am, al, ac;
            if (i < cube.n0) {
                am = cube.alpha_if_m;
                al = cube.alpha_if_l;
                ac = 0.0;
            } else {
                am = controls(i - cube.n0, 0);
                al = controls(i - cube.n0, 1);
                ac = controls(i - cube.n0, 2);
            }
            for (int d = 1; d + i <= cube.n_years; ++d) {
                double y = am * cube.xm[cube.idx(k, i, d)] + al * cube.xl[cube.idx(k, i, d)] +
                           ac * cube.xc[cube.idx(k, i, d)];
                out.yearly(k, i + d - 1) += y;
            }
        }
        double disc = cube.v;
        for (int j = 0; j < cube.n_years; ++j, disc *= cube.v)
            out.reward[k] += disc * out.yearly(k, j);
    }
    return out;
}

void export_profit_cube_csv(const LobProfitCube& cube, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "scenario,line,uw_year,dev_year,value\n");
    const char* names[3] = {"M", "L", "C"};
    const std::vector<float>* src[3] = {&cube.xm, &cube.xl, &cube.xc};
    for (int k = 0; k < cube.n_scen; ++k)
        for (int s = 0; s < 3; ++s)
            for (int i = 0; i < cube.n_uw; ++i)
                for (int d = 1; d <= cube.n_years; ++d)
                    std::fprintf(f, "%d,%s,%d,%d,%.9g\n", k, names[s], i, d,
                                 (*src[s])[cube.idx(k, i, d)]);
    std::fclose(f);
}

namespace {
constexpr char kCubeMagic[8] = {'D', 'C', 'V', 'C', 'U', 'B', 'E', '2'};
}

void export_profit_cube_binary(const LobProfitCube& cube, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.write(kCubeMagic, 8);
    int dims[4] = {cube.n_scen, cube.n_uw, cube.n_years, cube.n0};
    double meta[3] = {cube.v, cube.alpha_if_m, cube.alpha_if_l};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    f.write(reinterpret_cast<const char*>(meta), sizeof(meta));
    for (const auto* v : {&cube.xm, &cube.xl, &cube.xc, &cube.sm, &cube.sl})
        f.write(reinterpret_cast<const char*>(v->data()),
                static_cast<std::streamsize>(v->size() * sizeof(float)));
    if (!f) throw std::runtime_error("write failed: " + path);
}

LobProfitCube load_profit_cube_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kCubeMagic, 8) != 0)
        throw std::runtime_error("not a profit cube file: " + path);
    LobProfitCube cube;
    int dims[4];
    double meta[3];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    f.read(reinterpret_cast<char*>(meta), sizeof(meta));
    cube.n_scen = dims[0];
    cube.n_uw = dims[1];
    cube.n_years = dims[2];
    cube.n0 = dims[3];
    cube.v = meta[0];
    cube.alpha_if_m = meta[1];
    cube.alpha_if_l = meta[2];
    if (cube.n_scen < 1 || cube.n_uw < 1 || cube.n_years < 1)
        throw std::runtime_error("corrupt profit cube file: " + path);
    const std::size_t sz = static_cast<std::size_t>(cube.n_scen) * cube.n_uw * cube.n_years;
    for (auto* v : {&cube.xm, &cube.xl, &cube.xc}) {
        v->resize(sz);
        f.read(reinterpret_cast<char*>(v->data()),
               static_cast<std::streamsize>(sz * sizeof(float)));
    }
    const std::size_t sz_s =
        static_cast<std::size_t>(cube.n_scen) * cube.n_uw * (cube.n_years + 1);
    for (auto* v : {&cube.sm, &cube.sl}) {
        v->resize(sz_s);
        f.read(reinterpret_cast<char*>(v->data()),
               static_cast<std::streamsize>(sz_s * sizeof(float)));
    }
    if (!f) throw std::runtime_error("truncated profit cube file: " + path);
    return cube;
}

}  // namespace dcvar
