// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Rank and linear correlation metrics plus the repeated-split evaluation
// protocol with JSON/CSV reports.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdiqa/aggregate.hpp"
#include "mdiqa/data.hpp"
#include "mdiqa/rng.hpp"

namespace mdiqa {

// Tie-averaged ranks (1-based).
inline std::vector<double> tie_ranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("correlation: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("correlation: need at least 2 samples");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0)
        throw std::invalid_argument("undefined correlation: constant input");
    return cov / std::sqrt(va * vb);
}

// Spearman: Pearson correlation of tie-averaged ranks.
inline double srcc(const std::vector<double>& pred, const std::vector<double>& label) {
    return pearson(tie_ranks(pred), tie_ranks(label));
}

// Pearson linear correlation.
inline double plcc(const std::vector<double>& pred, const std::vector<double>& label) {
    return pearson(pred, label);
}

// ---------------------------------------------------------------------------
// Evaluation reports

struct Prediction {
    double overall = 0.0;
    std::map<std::string, double> dims;
};

struct SplitMetrics {
    int split = 0;
    int train_count = 0;
    int test_count = 0;
    // NaN marks metrics that are undefined on the split (missing/constant labels).
    double srcc_overall = std::numeric_limits<double>::quiet_NaN();
    double plcc_overall = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, double> srcc_dims;
    std::map<std::string, double> plcc_dims;
};

struct EvalReport {
    std::vector<SplitMetrics> splits;
    SplitMetrics mean;  // split = -1, counts summed, metrics averaged over defined splits

    json to_json() const;
    std::string to_csv() const;
};

namespace detail {

inline double mean_defined(const std::vector<double>& xs) {
    double acc = 0.0;
    int cnt = 0;
    for (double x : xs)
        if (!std::isnan(x)) {
            acc += x;
            ++cnt;
        }
    return cnt ? acc / cnt : std::numeric_limits<double>::quiet_NaN();
}

inline json metric_json(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

}  // namespace detail

inline json EvalReport::to_json() const {
    json j;
    auto split_json = [](const SplitMetrics& s) {
        json e;
        e["split"] = s.split;
        e["train_count"] = s.train_count;
        e["test_count"] = s.test_count;
        e["srcc_overall"] = detail::metric_json(s.srcc_overall);
        e["plcc_overall"] = detail::metric_json(s.plcc_overall);
        for (const auto& [k, v] : s.srcc_dims) e["srcc"][k] = detail::metric_json(v);
        for (const auto& [k, v] : s.plcc_dims) e["plcc"][k] = detail::metric_json(v);
        return e;
    };
    j["splits"] = json::array();
    for (const auto& s : splits) j["splits"].push_back(split_json(s));
    j["mean"] = split_json(mean);
    return j;
}

inline std::string EvalReport::to_csv() const {
    std::ostringstream os;
    std::vector<std::string> dims;
    for (const auto& [k, v] : mean.srcc_dims) dims.push_back(k);
    os << "split,train_count,test_count,srcc_overall,plcc_overall";
    for (const auto& d : dims) os << ",srcc_" << d << ",plcc_" << d;
    os << "\n";
    auto fmt = [&](double v) {
        if (std::isnan(v)) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
    };
    auto row = [&](const SplitMetrics& s, const std::string& name) {
        os << name << "," << s.train_count << "," << s.test_count << "," << fmt(s.srcc_overall)
           << "," << fmt(s.plcc_overall);
        for (const auto& d : dims) {
            const auto si = s.srcc_dims.find(d);
            const auto pi = s.plcc_dims.find(d);
            os << "," << (si == s.srcc_dims.end() ? "" : fmt(si->second)) << ","
               << (pi == s.plcc_dims.end() ? "" : fmt(pi->second));
        }
        os << "\n";
    };
    for (const auto& s : splits) row(s, std::to_string(s.split));
    row(mean, "mean");
    return os.str();
}

// Repeated-split protocol over precomputed predictions: for each split an
// (1-holdout):(holdout) partition is drawn from the split seed and metrics are
// computed on the held-out part. Dimensions whose labels are missing or
// constant on a split are reported as undefined.
inline EvalReport evaluate_predictions(const std::vector<MultiDimSample>& samples,
                                       const std::vector<Prediction>& preds,
                                       const DimensionRegistry& reg, int n_splits, double holdout,
                                       std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
    if (samples.size() != preds.size())
        throw std::invalid_argument("evaluate: prediction count mismatch");
    if (n_splits < 1) throw std::invalid_argument("evaluate: need at least one split");
    if (!(holdout > 0.0 && holdout < 1.0))
        throw std::invalid_argument("evaluate: holdout fraction must be in (0,1)");

    EvalReport rep;
    const int n = static_cast<int>(samples.size());
    const int test_count = std::max(1, static_cast<int>(std::lround(holdout * n)));

    for (int s = 0; s < n_splits; ++s) {
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(mix_seed({seed, 0x5317ull, static_cast<std::uint64_t>(s)}));
        rng.shuffle(idx.begin(), idx.end());

        SplitMetrics m;
        m.split = s;
        m.test_count = test_count;
        m.train_count = n - test_count;

        std::vector<double> po, lo;
        for (int k = 0; k < test_count; ++k) {
            const auto& sample = samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
            const auto& pred = preds[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
            if (sample.overall_present) {
                po.push_back(pred.overall);
                lo.push_back(sample.overall_label);
            }
        }
        try {
            m.srcc_overall = srcc(po, lo);
            m.plcc_overall = plcc(po, lo);
        } catch (const std::invalid_argument&) {
        }

        for (const auto& d : reg.all()) {
            std::vector<double> pd, ld;
            for (int k = 0; k < test_count; ++k) {
                const auto& sample = samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
                const auto& pred = preds[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
                const auto li = sample.dim_labels.find(d);
                const auto pi = pred.dims.find(d);
                if (li != sample.dim_labels.end() && pi != pred.dims.end()) {
                    pd.push_back(pi->second);
                    ld.push_back(li->second);
                }
            }
            double sv = std::numeric_limits<double>::quiet_NaN();
            double pv = std::numeric_limits<double>::quiet_NaN();
            if (pd.size() >= 2) {
                try {
                    sv = srcc(pd, ld);
                    pv = plcc(pd, ld);
                } catch (const std::invalid_argument&) {
                }
            }
            if (!pd.empty()) {
                m.srcc_dims[d] = sv;
                m.plcc_dims[d] = pv;
            }
        }
        rep.splits.push_back(std::move(m));
    }

    rep.mean.split = -1;
    for (const auto& s : rep.splits) {
        rep.mean.train_count += s.train_count;
        rep.mean.test_count += s.test_count;
    }
    auto collect = [&](auto getter) {
        std::vector<double> xs;
        for (const auto& s : rep.splits) xs.push_back(getter(s));
        return detail::mean_defined(xs);
    };
    rep.mean.srcc_overall = collect([](const SplitMetrics& s) { return s.srcc_overall; });
    rep.mean.plcc_overall = collect([](const SplitMetrics& s) { return s.plcc_overall; });
    for (const auto& d : reg.all()) {
        std::vector<double> sv, pv;
        for (const auto& s : rep.splits) {
            const auto si = s.srcc_dims.find(d);
            if (si != s.srcc_dims.end()) sv.push_back(si->second);
            const auto pi = s.plcc_dims.find(d);
            if (pi != s.plcc_dims.end()) pv.push_back(pi->second);
        }
        if (!sv.empty()) rep.mean.srcc_dims[d] = detail::mean_defined(sv);
        if (!pv.empty()) rep.mean.plcc_dims[d] = detail::mean_defined(pv);
    }
    return rep;
}

// Model predictions for a sample list (inference mode, native image sizes).
template <typename T>
std::vector<Prediction> predict_all(const Model<T>& model,
                                    const std::vector<MultiDimSample>& samples) {
    std::vector<Prediction> preds;
    preds.reserve(samples.size());
    for (const auto& s : samples) {
        const QualityOutput q = score_image(model, s.image);
        Prediction p;
        p.overall = q.overall;
        p.dims = q.dim_scores;
        preds.push_back(std::move(p));
    }
    return preds;
}

template <typename T>
EvalReport evaluate(const Model<T>& model, const std::vector<MultiDimSample>& samples,
                    int n_splits, double holdout, std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
    return evaluate_predictions(samples, predict_all(model, samples), model.registry(), n_splits,
                                holdout, seed);
}

}  // namespace mdiqa
