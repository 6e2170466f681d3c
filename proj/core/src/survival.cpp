#include "mait/survival.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mait/error.hpp"
#include "mait/stats.hpp"

namespace mait {

double HazardCurve::at(double t) const { return at(t, 0.0); }

double HazardCurve::at(double t, double before_first) const {
    auto it = std::upper_bound(time_grid.begin(), time_grid.end(), t);
    if (it == time_grid.begin()) return before_first;
    return chf[(it - time_grid.begin()) - 1];
}

namespace {

struct RiskTable {
    std::vector<double> times;   // distinct, ascending
    std::vector<double> events;  // d_i at each time
    std::vector<double> at_risk; // n_i at each time
};

RiskTable risk_table(std::span<const double> time, std::span<const int> event) {
    std::vector<std::size_t> order(time.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });

    RiskTable rt;
    std::size_t i = 0;
    double at_risk = static_cast<double>(time.size());
    while (i < order.size()) {
        std::size_t j = i;
        double d = 0.0;
        while (j < order.size() && time[order[j]] == time[order[i]]) {
            d += event[order[j]] == 1 ? 1.0 : 0.0;
            ++j;
        }
        if (d > 0.0) {
            rt.times.push_back(time[order[i]]);
            rt.events.push_back(d);
            rt.at_risk.push_back(at_risk);
        }
        at_risk -= static_cast<double>(j - i);
        i = j;
    }
    return rt;
}

} // namespace

HazardCurve nelson_aalen(std::span<const double> time, std::span<const int> event) {
    const RiskTable rt = risk_table(time, event);
    HazardCurve h;
    double cum = 0.0;
    for (std::size_t i = 0; i < rt.times.size(); ++i) {
        cum += rt.events[i] / rt.at_risk[i];
        h.time_grid.push_back(rt.times[i]);
        h.chf.push_back(cum);
    }
    return h;
}

double KaplanMeier::at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return surv[(it - times.begin()) - 1];
}

double KaplanMeier::before(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return surv[(it - times.begin()) - 1];
}

KaplanMeier kaplan_meier(std::span<const double> time, std::span<const int> event) {
    const RiskTable rt = risk_table(time, event);
    KaplanMeier km;
    double s = 1.0;
    for (std::size_t i = 0; i < rt.times.size(); ++i) {
        s *= 1.0 - rt.events[i] / rt.at_risk[i];
        km.times.push_back(rt.times[i]);
        km.surv.push_back(s);
    }
    return km;
}

std::vector<double> event_time_grid(std::span<const double> time, std::span<const int> event,
                                    double horizon) {
    std::vector<double> grid;
    for (std::size_t i = 0; i < time.size(); ++i)
        if (event[i] == 1 && time[i] <= horizon) grid.push_back(time[i]);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

// ---------------------------------------------------------------------------
// Cox proportional hazards with elastic net

double CoxModel::risk_score(std::span<const double> row) const {
    double s = 0.0;
    for (std::size_t c = 0; c < beta.size(); ++c)
        s += beta[c] * (row[c] - feature_mean[c]) / feature_scale[c];
    return s;
}

std::vector<double> CoxModel::risk_scores(const Matrix& x) const {
    if (x.cols != beta.size()) throw PredictionError("cox: feature count mismatch");
    std::vector<double> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) out[r] = risk_score(x.row(r));
    return out;
}

namespace {

double soft(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

} // namespace

CoxModel fit_cox_en(const SurvivalData& d, double lambda, double l1_ratio, int max_iter,
                    double tol) {
    const std::size_t n = d.features.rows;
    const std::size_t p = d.features.cols;
    bool any_event = false;
    for (int e : d.event) any_event = any_event || e == 1;
    if (!any_event) throw TrainingError("fit_cox_en: no events");

    CoxModel m;
    m.feature_names = d.feature_names;
    m.lambda = lambda;
    m.l1_ratio = l1_ratio;
    m.feature_mean.resize(p);
    m.feature_scale.resize(p);
    Matrix xs(n, p);
    for (std::size_t c = 0; c < p; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) s += d.features.at(r, c);
        const double mu = s / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double diff = d.features.at(r, c) - mu;
            ss += diff * diff;
        }
        double scale = std::sqrt(ss / static_cast<double>(n));
        if (scale <= 0.0) scale = 1.0;
        m.feature_mean[c] = mu;
        m.feature_scale[c] = scale;
        for (std::size_t r = 0; r < n; ++r)
            xs.at(r, c) = (d.features.at(r, c) - mu) / scale;
    }

    // rows ordered by time descending for cumulative risk sums
    std::vector<std::size_t> by_time_desc(n);
    std::iota(by_time_desc.begin(), by_time_desc.end(), std::size_t{0});
    std::sort(by_time_desc.begin(), by_time_desc.end(),
              [&](std::size_t a, std::size_t b) { return d.time[a] > d.time[b]; });

    std::vector<double> beta(p, 0.0), eta(n, 0.0);
    std::vector<double> grad_eta(n), hess_eta(n), z(n);
    const double inv_n = 1.0 / static_cast<double>(n);

    for (int outer = 0; outer < max_iter; ++outer) {
        for (std::size_t r = 0; r < n; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < p; ++c) s += beta[c] * xs.at(r, c);
            eta[r] = s;
        }

        // Breslow risk-set sums: S(t) = sum of exp(eta) over rows with time >= t
        std::map<double, double> risk_at_time; // event time -> S(t)
        {
            double cum = 0.0;
            std::size_t i = 0;
            while (i < n) {
                std::size_t j = i;
                const double t = d.time[by_time_desc[i]];
                while (j < n && d.time[by_time_desc[j]] == t) {
                    cum += std::exp(eta[by_time_desc[j]]);
                    ++j;
                }
                risk_at_time[t] = cum;
                i = j;
            }
        }
        // per-row cumulative A = sum over event times <= t_row of d_t/S(t),
        // B likewise with 1/S(t)^2 (Breslow ties share the risk set)
        std::map<double, std::pair<double, double>> event_terms; // t -> (d/S, d/S^2)
        for (std::size_t r = 0; r < n; ++r) {
            if (d.event[r] != 1) continue;
            const double t = d.time[r];
            const double s = risk_at_time[t];
            auto& term = event_terms[t];
            term.first += 1.0 / s;
            term.second += 1.0 / (s * s);
        }
        std::vector<double> cum_a, cum_b, cum_t;
        {
            double a = 0.0, b = 0.0;
            for (const auto& [t, term] : event_terms) {
                a += term.first;
                b += term.second;
                cum_t.push_back(t);
                cum_a.push_back(a);
                cum_b.push_back(b);
            }
        }
        auto lookup_ab = [&](double t) -> std::pair<double, double> {
            auto it = std::upper_bound(cum_t.begin(), cum_t.end(), t);
            if (it == cum_t.begin()) return {0.0, 0.0};
            const std::size_t i = (it - cum_t.begin()) - 1;
            return {cum_a[i], cum_b[i]};
        };
        for (std::size_t r = 0; r < n; ++r) {
            const auto [a, b] = lookup_ab(d.time[r]);
            const double er = std::exp(eta[r]);
            const double dl = (d.event[r] == 1 ? 1.0 : 0.0) - er * a; // d pl / d eta
            double h = er * a - er * er * b;
            if (h < 1e-12) h = 1e-12;
            grad_eta[r] = dl;
            hess_eta[r] = h;
            z[r] = eta[r] + dl / h;
        }

        // cyclic coordinate descent on the weighted least squares surrogate
        std::vector<double> new_beta = beta;
        std::vector<double> resid(n);
        for (std::size_t r = 0; r < n; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < p; ++c) s += new_beta[c] * xs.at(r, c);
            resid[r] = z[r] - s;
        }
        for (int sweep = 0; sweep < 100; ++sweep) {
            double max_delta = 0.0;
            for (std::size_t c = 0; c < p; ++c) {
                double num = 0.0, den = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    const double w = hess_eta[r] * inv_n;
                    num += w * xs.at(r, c) * (resid[r] + xs.at(r, c) * new_beta[c]);
                    den += w * xs.at(r, c) * xs.at(r, c);
                }
                const double denom = den + lambda * (1.0 - l1_ratio);
                double updated = 0.0;
                if (denom > 0.0) updated = soft(num, lambda * l1_ratio) / denom;
                const double delta = updated - new_beta[c];
                if (delta != 0.0) {
                    for (std::size_t r = 0; r < n; ++r) resid[r] -= delta * xs.at(r, c);
                    new_beta[c] = updated;
                    max_delta = std::max(max_delta, std::fabs(delta));
                }
            }
            if (max_delta < tol) break;
        }

        double outer_delta = 0.0;
        for (std::size_t c = 0; c < p; ++c)
            outer_delta = std::max(outer_delta, std::fabs(new_beta[c] - beta[c]));
        beta = std::move(new_beta);
        m.iterations = outer + 1;
        if (outer_delta < tol) break;
    }

    m.beta = beta;

    // Breslow baseline on the fitted predictor
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < p; ++c) s += beta[c] * xs.at(r, c);
        eta[r] = s;
    }
    std::map<double, double> risk_at_time;
    {
        double cum = 0.0;
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            const double t = d.time[by_time_desc[i]];
            while (j < n && d.time[by_time_desc[j]] == t) {
                cum += std::exp(eta[by_time_desc[j]]);
                ++j;
            }
            risk_at_time[t] = cum;
            i = j;
        }
    }
    std::map<double, double> events_at;
    for (std::size_t r = 0; r < n; ++r)
        if (d.event[r] == 1) events_at[d.time[r]] += 1.0;
    double cum = 0.0;
    for (const auto& [t, cnt] : events_at) {
        cum += cnt / risk_at_time[t];
        m.baseline_chf.time_grid.push_back(t);
        m.baseline_chf.chf.push_back(cum);
    }
    return m;
}

std::vector<HazardCurve> predict_chf(const CoxModel& m, const Matrix& x,
                                     std::span<const double> grid) {
    const auto risks = m.risk_scores(x);
    std::vector<HazardCurve> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double mult = std::exp(risks[r]);
        HazardCurve& h = out[r];
        h.time_grid.assign(grid.begin(), grid.end());
        h.chf.resize(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g)
            h.chf[g] = m.baseline_chf.at(grid[g]) * mult;
    }
    return out;
}

// ---------------------------------------------------------------------------
// survival metrics

double concordance_index(std::span<const double> risk, std::span<const double> time,
                         std::span<const int> event) {
    double comparable = 0.0, score = 0.0;
    const std::size_t n = risk.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (event[i] != 1) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (time[i] >= time[j] || i == j) continue;
            comparable += 1.0;
            if (risk[i] > risk[j]) score += 1.0;
            else if (risk[i] == risk[j]) score += 0.5;
        }
    }
    if (comparable == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return score / comparable;
}

std::vector<SurvivalCurve> chf_to_survival(const std::vector<HazardCurve>& chf) {
    std::vector<SurvivalCurve> out(chf.size());
    for (std::size_t i = 0; i < chf.size(); ++i) {
        out[i].time_grid = chf[i].time_grid;
        out[i].chf.resize(chf[i].chf.size());
        for (std::size_t g = 0; g < chf[i].chf.size(); ++g)
            out[i].chf[g] = std::exp(-chf[i].chf[g]);
    }
    return out;
}

double integrated_brier(const std::vector<SurvivalCurve>& surv, std::span<const double> time,
                        std::span<const int> event, std::span<const double> grid,
                        bool* truncated) {
    if (surv.size() != time.size()) throw ArgumentError("integrated_brier: size mismatch");
    const double t_max = *std::max_element(time.begin(), time.end());
    std::vector<double> g(grid.begin(), grid.end());
    const std::size_t before = g.size();
    g.erase(std::remove_if(g.begin(), g.end(), [&](double t) { return t > t_max; }), g.end());
    if (truncated) *truncated = g.size() != before;
    if (g.empty()) throw ArgumentError("integrated_brier: grid entirely beyond observed time");

    std::vector<int> censor_flag(event.size());
    for (std::size_t i = 0; i < event.size(); ++i) censor_flag[i] = 1 - event[i];
    const KaplanMeier ghat = kaplan_meier(time, censor_flag);

    const std::size_t n = time.size();
    std::vector<double> bs(g.size(), 0.0);
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
        const double t = g[gi];
        double total = 0.0;
        const double g_at_t = ghat.at(t);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = surv[i].at(t, 1.0);
            if (time[i] <= t && event[i] == 1) {
                const double w = ghat.before(time[i]);
                if (w > 0.0) total += s * s / w;
            } else if (time[i] > t) {
                if (g_at_t > 0.0) total += (1.0 - s) * (1.0 - s) / g_at_t;
            }
        }
        bs[gi] = total / static_cast<double>(n);
    }
    if (g.size() == 1) return bs[0];
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < g.size(); ++i)
        area += 0.5 * (bs[i] + bs[i + 1]) * (g[i + 1] - g[i]);
    return area / (g.back() - g.front());
}

double cumulative_dynamic_auc(std::span<const double> risk, std::span<const double> time,
                              std::span<const int> event, double t_eval) {
    std::vector<int> censor_flag(event.size());
    for (std::size_t i = 0; i < event.size(); ++i) censor_flag[i] = 1 - event[i];
    const KaplanMeier ghat = kaplan_meier(time, censor_flag);

    std::vector<std::size_t> cases, controls;
    std::vector<double> case_w;
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (time[i] <= t_eval && event[i] == 1) {
            const double g = ghat.before(time[i]);
            if (g > 0.0) {
                cases.push_back(i);
                case_w.push_back(1.0 / g);
            }
        } else if (time[i] > t_eval) {
            controls.push_back(i);
        }
    }
    if (cases.empty() || controls.empty()) return std::numeric_limits<double>::quiet_NaN();

    double num = 0.0, den = 0.0;
    for (std::size_t a = 0; a < cases.size(); ++a) {
        const double ri = risk[cases[a]];
        for (std::size_t j : controls) {
            den += case_w[a];
            if (ri > risk[j]) num += case_w[a];
            else if (ri == risk[j]) num += 0.5 * case_w[a];
        }
    }
    return num / den;
}

TranslationResult chf_to_binary(const std::vector<HazardCurve>& train_curves,
                                std::span<const double> train_time,
                                std::span<const int> train_event,
                                const std::vector<HazardCurve>& test_curves, double horizon) {
    std::vector<std::size_t> event_rows, free_rows;
    for (std::size_t i = 0; i < train_time.size(); ++i) {
        if (train_event[i] == 1) event_rows.push_back(i);
        else if (train_time[i] >= horizon) free_rows.push_back(i);
    }
    if (event_rows.empty() || free_rows.empty())
        throw DataError("chf_to_binary: an outcome class has no eligible training rows");

    auto grid = event_time_grid(train_time, train_event, horizon);
    if (grid.empty()) throw DataError("chf_to_binary: no event times within the horizon");

    TranslationResult res;
    res.medians.grid = grid;
    res.medians.event_count = event_rows.size();
    res.medians.event_free_count = free_rows.size();

    auto median_curve = [&](const std::vector<std::size_t>& rows) {
        std::vector<double> med(grid.size());
        std::vector<double> vals(rows.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                vals[i] = train_curves[rows[i]].at(grid[g]);
            std::sort(vals.begin(), vals.end());
            med[g] = quantile_sorted(vals, 0.5);
        }
        return med;
    };
    res.medians.event_median = median_curve(event_rows);
    res.medians.event_free_median = median_curve(free_rows);

    for (const auto& curve : test_curves) {
        double de = 0.0, df = 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double v = curve.at(grid[g]);
            const double e1 = v - res.medians.event_median[g];
            const double e0 = v - res.medians.event_free_median[g];
            de += e1 * e1;
            df += e0 * e0;
        }
        de = std::sqrt(de);
        df = std::sqrt(df);
        res.distance_event.push_back(de);
        res.distance_event_free.push_back(df);
        res.predicted.push_back(de <= df ? 1 : 0); // tie favors the event class
    }
    return res;
}

} // namespace mait
