#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace compass;

TEST(Auc, KnownCases)
{
    const std::vector<int> y{0, 0, 1, 1};
    EXPECT_EQ(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y), 1.0);
    EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y), 0.0);
    EXPECT_EQ(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y), 0.5);
    EXPECT_EQ(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, y), 0.75);
    EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DataError);
}

TEST(Auc, MatchesPairwiseWithTies)
{
    CounterRng rng(17, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(2, 60));
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.uniform_int(0, 8)) / 8.0;
            y[i] = rng.bernoulli(0.4);
        }
        y[0] = 1;
        y[1] = 0;
        EXPECT_NEAR(auc(s, y), oracle::pairwise_auc(s, y), 1e-12);
    }
}

TEST(Brier, Values)
{
    EXPECT_DOUBLE_EQ(brier(std::vector<double>{1.0, 0.0}, std::vector<int>{1, 0}), 0.0);
    EXPECT_DOUBLE_EQ(brier(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}), 0.25);
    EXPECT_THROW(brier(std::vector<double>{1.5}, std::vector<int>{1}), DataError);
}

TEST(Confusion, RatesFromCounts)
{
    Confusion c{8, 3, 11, 2};
    EXPECT_NEAR(100 * c.sensitivity(), 80.0, 0.05);
    EXPECT_NEAR(100 * c.specificity(), 78.6, 0.05);
    EXPECT_NEAR(100 * c.accuracy(), 79.2, 0.05);
    Confusion empty;
    EXPECT_TRUE(is_sentinel(empty.sensitivity()));
}

TEST(Classify, OrganThresholdsInclusive)
{
    const std::vector<ScoredCase> cases{{OrganId::Heart, 0.6, 1},      {OrganId::Heart, 0.59, 0},
                                        {OrganId::Esophagus, 0.4, 0},  {OrganId::Esophagus, 0.39, 1},
                                        {OrganId::SpinalCord, 0.5, 1}, {OrganId::SpinalCord, 0.2, 0}};
    EXPECT_EQ(classify(cases), (Confusion{2, 1, 2, 1}));
}

TEST(Folds, DisjointAndComplete)
{
    const std::vector<std::string> ids{"P01", "P02", "P03", "P04"};
    const auto folds = lopo_folds(ids);
    ASSERT_EQ(folds.size(), 4u);
    for (const auto& f : folds) {
        EXPECT_EQ(f.train.size(), 3u);
        EXPECT_EQ(std::count(f.train.begin(), f.train.end(), f.held_out), 0);
    }
    const std::vector<std::string> dup{"P01", "P01"};
    EXPECT_THROW(lopo_folds(dup), DataError);
}

namespace {

PipelineConfig quick_config()
{
    PipelineConfig pc;
    pc.autoencoder.epochs = 4;
    return pc;
}

const Cohort& cohort4()
{
    static const Cohort c = [] {
        auto cfg = testing_util::small_cohort_config(4, 3);
        cfg.label_noise = 0.0;
        return generate_cohort(cfg);
    }();
    return c;
}

} // namespace

TEST(Lopo, HeldOutFeaturesDoNotReachTraining)
{
    auto obs = extract_features(cohort4());
    const auto folds = lopo_folds(cohort4());
    const auto labels = cohort_labels(cohort4());
    const auto base = fit_representation(obs, folds[1], quick_config());
    for (auto& o : obs)
        if (o.patient_id == folds[1].held_out)
            for (auto& v : o.values)
                v = v * 3.0 + 17.0;
    const auto mutated = fit_representation(obs, folds[1], quick_config());
    EXPECT_EQ(base.prep, mutated.prep);
    EXPECT_EQ(base.autoencoder.params, mutated.autoencoder.params);
    const auto a = fit_supervised(base, labels, {}), b = fit_supervised(mutated, labels, {});
    EXPECT_EQ(a.classifier.weights, b.classifier.weights);
    EXPECT_EQ(a.classifier.intercept, b.classifier.intercept);
}

TEST(Lopo, EvaluateProducesOneTrajectoryPerOrganAndFraction)
{
    const auto rep = evaluate(cohort4(), quick_config());
    ASSERT_EQ(rep.folds.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        ASSERT_EQ(rep.folds[k].trajectories.size(), 3u);
        for (const auto& t : rep.folds[k].trajectories) {
            EXPECT_EQ(t.id.patient_id, cohort4()[k].patient_id);
            EXPECT_EQ(t.probabilities.size(), cohort4()[k].fractions.size());
        }
        EXPECT_EQ(rep.representations[k].prep.fitted_on.size(), 3u);
    }
    EXPECT_EQ(rep.metrics.confusion.total(), 12);
}

TEST(Lopo, ReportFilesAndDeterminism)
{
    const auto a = testing_util::temp_dir("rep_a"), b = testing_util::temp_dir("rep_b");
    write_report(evaluate(cohort4(), quick_config()), a);
    write_report(evaluate(cohort4(), quick_config()), b);
    for (const char* f : {"eval_report.json", "trajectories.csv", "fold_0_model.json", "fold_3_prep.json"}) {
        ASSERT_TRUE(std::filesystem::exists(a / f)) << f;
        std::ifstream fa(a / f), fb(b / f);
        std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
        EXPECT_EQ(sa, sb) << f;
    }
    const auto j = nlohmann::json::parse(std::ifstream(a / "eval_report.json"));
    EXPECT_TRUE(j.contains("config_hash"));
    EXPECT_TRUE(j.contains("deviation_flags"));
    EXPECT_EQ(j["folds"].size(), 4u);
}

TEST(Lopo, PermutationKeepsOrganPrevalence)
{
    const auto rep = evaluate(cohort4(), quick_config());
    const auto aucs = permutation_aucs(rep, cohort_labels(cohort4()), 3, 5);
    ASSERT_EQ(aucs.size(), 3u);
    for (double a : aucs) {
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
    EXPECT_EQ(aucs, permutation_aucs(rep, cohort_labels(cohort4()), 3, 5));
}

TEST(PipelineConfig, JsonRoundTrip)
{
    PipelineConfig c;
    c.autoencoder.epochs = 7;
    c.classifier.l2 = 0.5;
    const auto back = pipeline_config_from_json(nlohmann::json::parse(pipeline_config_json(c).dump()));
    EXPECT_EQ(back.autoencoder.epochs, 7);
    EXPECT_EQ(back.classifier.l2, 0.5);
}
