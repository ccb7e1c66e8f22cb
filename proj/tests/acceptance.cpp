// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace compass;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kEqd2Tol = 1e-12;
constexpr double kEqd2Budget = 1.0;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdFloor = 1e-7;
constexpr std::size_t kFdParamsPerCase = 100;
constexpr double kFdBudget = 60.0;
constexpr int kOracleRois = 200;
constexpr double kFloatSumRelTol = 1e-12; // mean and moments, summation order differs from the oracle
constexpr double kOracleBudget = 30.0;
constexpr int kAucSets = 1000;
constexpr double kAucTol = 1e-12;
constexpr double kMinAuc = 0.85;
constexpr double kLossRatio = 0.5;
constexpr double kPipelineBudget = 300.0;
constexpr int kPermutations = 20;
constexpr double kPermLo = 0.2, kPermHi = 0.8;
constexpr std::size_t kKeptLo = 30, kKeptHi = 55;
constexpr double kMidpointTol = 1e-12;

int failures = 0;

void report(int id, bool ok, const std::string& what)
{
    std::printf("CRITERION %2d %s  %s\n", id, ok ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    failures += !ok;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------

void criterion_eqd2()
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    const auto g = testing_util::grid(3, 3, 3);
    for (double ab : {2.0, 3.0})
        for (int n : {3, 4, 5}) {
            BedAccumulator acc({ab});
            for (int k = 0; k < n; ++k)
                acc.add_fraction(VoxelVolume::filled(g, 2.0, VolumeRole::Dose));
            const auto eq = acc.cumulative_eqd2();
            for (double v : eq.values())
                worst = std::max(worst, std::abs(v - 2.0 * n));
        }
    const double t = seconds_since(t0);
    report(1, worst <= kEqd2Tol && t < kEqd2Budget,
           fmt("EQD2 of n x 2 Gy = 2n Gy: max |err| %.2e (tol %.0e), %.3f s", worst, kEqd2Tol, t));
}

void criterion_bptt()
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t checked = 0;
    CounterRng rng(2024, 1);
    for (std::size_t nf : {5u, 40u}) {
        const auto p = init_params(nf, 100 + nf);
        std::vector<std::vector<double>> store;
        std::vector<SequenceView> views;
        std::vector<DropoutMask> drops;
        for (int s = 0; s < 3; ++s) {
            const auto len = static_cast<std::size_t>(rng.uniform_int(3, 5));
            std::vector<double> d(len * nf);
            for (auto& x : d)
                x = rng.normal();
            store.push_back(std::move(d));
        }
        for (auto& d : store) {
            views.push_back({d, nf, d.size() / nf});
            drops.push_back(sample_dropout(views.back().length, 0.5, rng));
        }
        // With and without dropout.
        for (bool use_drop : {false, true}) {
            const auto r = oracle::finite_difference_check(
                p, views, use_drop ? std::span<const DropoutMask>(drops) : std::span<const DropoutMask>{},
                kFdParamsPerCase, 7 + nf + use_drop, kFdStep, kFdFloor);
            worst = std::max(worst, r.max_rel_error);
            checked += r.checked;
        }
    }
    const double t = seconds_since(t0);
    report(2, worst < kFdRelTol && checked >= 100 && t < kFdBudget,
           fmt("BPTT vs central differences (h=%.0e, widths 5/40, lengths 3-5): %zu params, max rel err %.2e, %.2f s",
               kFdStep, checked, worst, t));
}

void criterion_feature_oracle()
{
    const auto t0 = std::chrono::steady_clock::now();
    CounterRng rng(31337, 3);
    bool exact = true, sums_ok = true, scale_ok = true, perm_ok = true;
    double worst_sum = 0.0;
    const double cc_choices[] = {0.001, 0.008, 0.015625, 0.027};
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    for (int r = 0; r < kOracleRois; ++r) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, 1000));
        const double cc = cc_choices[rng.uniform_int(0, 3)];
        const bool ties = rng.bernoulli(0.5);
        std::vector<double> d(n);
        for (auto& x : d) {
            x = rng.uniform(0.0, 60.0);
            if (ties)
                x = std::round(x);
        }
        const auto dvh = dvh_features(d, cc);
        const auto dos = dosiomic_features(d);
        // DVH
        const double dmax = *std::max_element(d.begin(), d.end());
        std::size_t k2cc = 1;
        while (static_cast<double>(k2cc) < 2.0 / cc - 1e-9)
            ++k2cc;
        k2cc = std::min(k2cc, n);
        exact &= dvh[0] == dmax;
        exact &= dvh[2] == *std::min_element(d.begin(), d.end());
        exact &= dvh[3] == oracle::kth_largest_pct(d, 5);
        exact &= dvh[4] == oracle::kth_largest_pct(d, 50);
        exact &= dvh[5] == oracle::kth_largest_pct(d, 95);
        exact &= dvh[6] == oracle::kth_largest(d, k2cc);
        exact &= dvh[7] == oracle::pct_ge(d, 5.0);
        exact &= dvh[8] == oracle::pct_ge(d, 10.0);
        exact &= dvh[9] == oracle::pct_ge(d, 20.0);
        const auto sh = oracle::shape(d);
        worst_sum = std::max(worst_sum, rel(dvh[1], sh.mean));
        // Dosiomics
        for (std::size_t i = 0; i < kDxpPercents.size(); ++i)
            exact &= dos[i] == oracle::kth_largest_pct(d, kDxpPercents[i]);
        for (std::size_t i = 0; i < kVxpMaxPercents.size(); ++i)
            exact &= dos[13 + i] == oracle::pct_gt(d, kVxpMaxPercents[i] / 100.0 * dmax);
        if (sh.var > 0 && n > 2) {
            worst_sum = std::max({worst_sum, rel(dos[22], sh.skew), rel(dos[23], sh.kurt),
                                  rel(dos[24], std::sqrt(sh.var) / sh.mean)});
        }
        // Scaling by 2 is exact in binary floating point.
        auto s = d;
        for (auto& x : s)
            x *= 2.0;
        const auto dos2 = dosiomic_features(s);
        for (int i = 0; i < 13; ++i)
            scale_ok &= dos2[i] == 2.0 * dos[i];
        for (int i = 13; i < 22; ++i)
            scale_ok &= dos2[i] == dos[i];
        for (int i = 22; i < 25; ++i)
            scale_ok &= (is_sentinel(dos[i]) && is_sentinel(dos2[i])) || rel(dos2[i], dos[i]) < 1e-10;
        // Permutation.
        auto q = d;
        shuffle(q, rng);
        const auto dvh3 = dvh_features(q, cc);
        const auto dos3 = dosiomic_features(q);
        for (std::size_t i = 0; i < dvh.size(); ++i)
            perm_ok &= i == 1 ? rel(dvh3[i], dvh[i]) < 1e-12 : dvh3[i] == dvh[i];
        for (std::size_t i = 0; i < dos.size(); ++i)
            perm_ok &= i < 22 ? dos3[i] == dos[i]
                              : ((is_sentinel(dos[i]) && is_sentinel(dos3[i])) || rel(dos3[i], dos[i]) < 1e-10);
    }
    sums_ok = worst_sum < kFloatSumRelTol;
    const double t = seconds_since(t0);
    report(3, exact && sums_ok && scale_ok && perm_ok && t < kOracleBudget,
           fmt("feature oracle on %d ROIs: order/count features exact=%s, sums rel err %.1e (tol %.0e), "
               "scale-equivariant=%s, permutation-invariant=%s, %.2f s",
               kOracleRois, exact ? "yes" : "no", worst_sum, kFloatSumRelTol, scale_ok ? "yes" : "no",
               perm_ok ? "yes" : "no", t));
}

void criterion_confusion()
{
    const Confusion c{8, 3, 11, 2};
    const double se = 100 * c.sensitivity(), sp = 100 * c.specificity(), ac = 100 * c.accuracy();
    const bool ok = fmt("%.1f", se) == "80.0" && fmt("%.1f", sp) == "78.6" && fmt("%.1f", ac) == "79.2";
    report(4, ok, fmt("tn=11 tp=8 fp=3 fn=2 -> sensitivity %.1f%%, specificity %.1f%%, accuracy %.1f%%", se, sp, ac));
}

void criterion_auc()
{
    CounterRng rng(555, 5);
    double worst = 0.0;
    for (int k = 0; k < kAucSets; ++k) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(2, 80));
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.uniform_int(0, 10)) / 10.0; // heavy ties
            y[i] = rng.bernoulli(0.5);
        }
        y[0] = 1;
        y[n - 1] = 0;
        worst = std::max(worst, std::abs(auc(s, y) - oracle::pairwise_auc(s, y)));
    }
    report(5, worst <= kAucTol, fmt("rank AUC vs pairwise on %d tied sets: max |diff| %.2e", kAucSets, worst));
}

void criterion_leakage(const std::vector<FeatureVector>& obs, const LabelMap& labels, const std::vector<Fold>& folds,
                       const EvalReport& rep)
{
    bool ok = true;
    int checked = 0;
    for (const auto& fold : folds) {
        auto mutated = obs;
        CounterRng rng(99, fold.index);
        for (auto& o : mutated)
            if (o.patient_id == fold.held_out)
                for (auto& v : o.values)
                    v = rng.bernoulli(0.1) ? kSentinel : v * rng.uniform(0.1, 10.0) + rng.normal(0.0, 50.0);
        const auto [fr, res] = run_fold(mutated, labels, fold, rep.config);
        const auto& base_fr = rep.representations[fold.index];
        const auto& base_res = rep.folds[fold.index];
        ok &= fr.prep == base_fr.prep;
        ok &= fr.autoencoder.params == base_fr.autoencoder.params;
        ok &= res.classifier.weights == base_res.classifier.weights;
        ok &= res.classifier.intercept == base_res.classifier.intercept;
        ok &= res.classifier.embedding_scaler == base_res.classifier.embedding_scaler;
        ++checked;
    }
    report(6, ok,
           fmt("held-out feature mutation leaves preprocessing, autoencoder and classifier identical in %d/%zu folds",
               ok ? checked : 0, folds.size()));
}

struct PipelineRun {
    EvalReport rep;
    std::vector<FeatureVector> obs;
    LabelMap labels;
    std::vector<Fold> folds;
    Cohort cohort;
};

/// Default cohort, LOPO, report, plot and one heatmap slice, all written under `dir`.
PipelineRun run_pipeline(const fs::path& dir)
{
    PipelineRun r;
    CohortConfig cc; // 8 patients, label noise 0.05, seed 42
    r.cohort = generate_cohort(cc);
    r.obs = extract_features(r.cohort);
    r.labels = cohort_labels(r.cohort);
    r.folds = lopo_folds(r.cohort);
    r.rep = evaluate(r.obs, r.labels, r.folds, PipelineConfig{});
    write_report(r.rep, dir);
    std::ifstream in(dir / "trajectories.csv");
    write_text(dir / "trajectories.svg", trajectory_plot_svg(read_trajectories_csv(in)));
    const auto& pc = r.cohort.front();
    const auto cum = cumulative_eqd2(pc, OrganId::Esophagus, pc.fractions.size());
    std::vector<VoxelVolume> cts;
    for (const auto& f : pc.fractions)
        cts.push_back(f.ct);
    export_slice(heatmap(cum, pc.mask(OrganId::Esophagus), OrganId::Esophagus), aip(cts),
                 pc.grid().dims[2] / 2, dir);
    return r;
}

void criterion_heatmap(const Cohort& cohort)
{
    const ToleranceModel tol;
    bool range_ok = true, mono_ok = true, argmax_ok = true;
    double mid_err = 0.0;
    for (auto o : kAllOrgans)
        mid_err = std::max(mid_err, std::abs(voxel_risk(tol.tolerance(o), tol.tolerance(o), tol.width(o)) - 0.5));
    int maps = 0;
    for (const auto& pc : cohort)
        for (auto o : kAllOrgans) {
            const auto& mask = pc.mask(o);
            VoxelVolume prev;
            for (std::size_t t = 1; t <= pc.fractions.size(); ++t) {
                const auto cum = cumulative_eqd2(pc, o, t);
                const auto h = heatmap(cum, mask, o, tol);
                ++maps;
                std::size_t arg_h = 0, arg_d = 0;
                bool first = true;
                for (std::size_t i = 0; i < h.size(); ++i) {
                    range_ok &= h[i] >= 0.0 && h[i] <= 1.0;
                    if (t > 1)
                        mono_ok &= h[i] >= prev[i];
                    if (!mask.contains(i))
                        continue;
                    if (first || h[i] > h[arg_h])
                        arg_h = i;
                    if (first || cum[i] > cum[arg_d])
                        arg_d = i;
                    first = false;
                }
                argmax_ok &= cum[arg_h] == cum[arg_d];
                prev = h;
            }
        }
    report(9, range_ok && mono_ok && argmax_ok && mid_err <= kMidpointTol,
           fmt("heatmaps (%d maps): in [0,1]=%s, |p(D_tol)-0.5| %.1e, monotone=%s, argmax matches EQD2=%s", maps,
               range_ok ? "yes" : "no", mid_err, mono_ok ? "yes" : "no", argmax_ok ? "yes" : "no"));
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

int main()
{
    criterion_eqd2();
    criterion_bptt();
    criterion_feature_oracle();
    criterion_confusion();
    criterion_auc();

    const auto dir_a = testing_util::temp_dir("accept_a");
    const auto t0 = std::chrono::steady_clock::now();
    auto run = run_pipeline(dir_a);
    const auto perm = permutation_aucs(run.rep, run.labels, kPermutations, 42);
    const double t_pipeline = seconds_since(t0);

    criterion_leakage(run.obs, run.labels, run.folds, run.rep);

    double worst_ratio = 0.0;
    for (const auto& r : run.rep.representations)
        worst_ratio = std::max(worst_ratio, r.autoencoder.loss_history.back() / r.autoencoder.loss_history.front());
    double perm_lo = 1.0, perm_hi = 0.0;
    for (double a : perm) {
        perm_lo = std::min(perm_lo, a);
        perm_hi = std::max(perm_hi, a);
    }
    const bool perm_ok = perm_lo >= kPermLo && perm_hi <= kPermHi;
    report(7,
           run.rep.metrics.auc >= kMinAuc && worst_ratio < kLossRatio && t_pipeline < kPipelineBudget && perm_ok,
           fmt("planted signal: pooled AUC %.4f (>= %.2f), worst epoch-%zu/epoch-1 loss %.3f (< %.1f), "
               "%d permutation AUCs in [%.3f, %.3f], %.1f s",
               run.rep.metrics.auc, kMinAuc, run.rep.representations[0].autoencoder.loss_history.size(), worst_ratio,
               kLossRatio, kPermutations, perm_lo, perm_hi, t_pipeline));

    std::size_t kept_lo = 1000, kept_hi = 0;
    for (const auto& r : run.rep.representations) {
        kept_lo = std::min(kept_lo, r.prep.width());
        kept_hi = std::max(kept_hi, r.prep.width());
    }
    report(8, kept_lo >= kKeptLo && kept_hi <= kKeptHi,
           fmt("correlation culling keeps %zu-%zu of 73 features per fold (allowed %zu-%zu)", kept_lo, kept_hi,
               kKeptLo, kKeptHi));

    criterion_heatmap(run.cohort);

    const auto dir_b = testing_util::temp_dir("accept_b");
    run_pipeline(dir_b);
    std::size_t files = 0, same = 0;
    for (const auto& e : fs::directory_iterator(dir_a)) {
        ++files;
        const auto other = dir_b / e.path().filename();
        same += fs::exists(other) && slurp(e.path()) == slurp(other);
    }
    std::size_t files_b = std::distance(fs::directory_iterator(dir_b), fs::directory_iterator{});
    report(10, files > 0 && same == files && files_b == files,
           fmt("rerun is byte-identical: %zu/%zu report, model and SVG files match", same, files));

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
