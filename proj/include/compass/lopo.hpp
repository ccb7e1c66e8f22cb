#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "compass/cohort.hpp"
#include "compass/features.hpp"
#include "compass/gru_autoencoder.hpp"
#include "compass/parallel.hpp"
#include "compass/preprocess.hpp"
#include "compass/risk_classifier.hpp"

namespace compass {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Mann-Whitney AUC: (concordant pairs + 0.5 ties) / (n_pos n_neg), via average ranks.
inline double auc(std::span<const double> scores, std::span<const int> labels)
{
    require(scores.size() == labels.size(), "auc: length mismatch");
    std::size_t n_pos = 0;
    for (int y : labels)
        n_pos += y != 0;
    const std::size_t n_neg = labels.size() - n_pos;
    require(n_pos > 0 && n_neg > 0, "auc: both classes must be present");
    const auto ranks = detail::average_ranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i])
            rank_sum += ranks[i];
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

inline double brier(std::span<const double> probs, std::span<const int> labels)
{
    require(probs.size() == labels.size() && !probs.empty(), "brier: length mismatch or empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        require(probs[i] >= 0.0 && probs[i] <= 1.0, "brier: probability outside [0, 1]");
        const double d = probs[i] - (labels[i] ? 1.0 : 0.0);
        s += d * d;
    }
    return s / static_cast<double>(probs.size());
}

struct Confusion {
    int tp = 0, fp = 0, tn = 0, fn = 0;

    int total() const noexcept { return tp + fp + tn + fn; }
    double sensitivity() const noexcept { return tp + fn ? static_cast<double>(tp) / (tp + fn) : kSentinel; }
    double specificity() const noexcept { return tn + fp ? static_cast<double>(tn) / (tn + fp) : kSentinel; }
    double accuracy() const noexcept { return total() ? static_cast<double>(tp + tn) / total() : kSentinel; }

    friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct ScoredCase {
    OrganId organ;
    double p_final;
    int label;
};

/// Toxic iff p_final >= the organ's threshold.
inline Confusion classify(std::span<const ScoredCase> cases)
{
    Confusion c;
    for (const auto& sc : cases) {
        const bool pred = sc.p_final >= classification_threshold(sc.organ);
        if (pred && sc.label)
            ++c.tp;
        else if (pred)
            ++c.fp;
        else if (sc.label)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

struct Fold {
    std::size_t index = 0;
    std::string held_out;
    std::vector<std::string> train;
};

inline std::vector<Fold> lopo_folds(std::span<const std::string> patient_ids)
{
    require(patient_ids.size() >= 2, "lopo_folds: need at least 2 patients");
    std::vector<std::string> ids(patient_ids.begin(), patient_ids.end());
    std::sort(ids.begin(), ids.end());
    require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), "lopo_folds: duplicate patient id");
    std::vector<Fold> folds;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        Fold f{k, ids[k], {}};
        for (const auto& id : ids)
            if (id != ids[k])
                f.train.push_back(id);
        folds.push_back(std::move(f));
    }
    return folds;
}

inline std::vector<Fold> lopo_folds(const Cohort& cohort)
{
    std::vector<std::string> ids;
    for (const auto& pc : cohort)
        ids.push_back(pc.patient_id);
    return lopo_folds(ids);
}

struct PipelineConfig {
    TrainConfig autoencoder;
    LogRegConfig classifier;
};

inline nlohmann::json pipeline_config_json(const PipelineConfig& c)
{
    return {{"autoencoder", c.autoencoder},
            {"classifier", {{"l2", c.classifier.l2},
                            {"grad_tol", c.classifier.grad_tol},
                            {"max_iterations", c.classifier.max_iterations}}}};
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j)
{
    PipelineConfig c;
    if (j.contains("autoencoder"))
        j.at("autoencoder").get_to(c.autoencoder);
    if (j.contains("classifier")) {
        const auto& cj = j.at("classifier");
        c.classifier.l2 = cj.value("l2", c.classifier.l2);
        c.classifier.grad_tol = cj.value("grad_tol", c.classifier.grad_tol);
        c.classifier.max_iterations = cj.value("max_iterations", c.classifier.max_iterations);
    }
    return c;
}

/// Seed used for a fold's autoencoder.
inline std::uint64_t fold_seed(std::uint64_t base, std::size_t fold_index)
{
    return splitmix64(base ^ (0x5851f42d4c957f2dULL * (fold_index + 1)));
}

using LabelMap = std::map<SequenceId, int>;

inline LabelMap cohort_labels(const Cohort& cohort)
{
    LabelMap m;
    for (const auto& pc : cohort)
        for (const auto& [o, l] : pc.labels)
            m[{pc.patient_id, o}] = l;
    return m;
}

/// Label-free part of a fold: preprocessing and autoencoder, fitted on training patients.
struct FoldRepresentation {
    Fold fold;
    std::uint64_t seed = 0;
    PreprocessModel prep;
    TrainResult autoencoder;
    FeatureSequence train_sequences;
    FeatureSequence test_sequences;
    std::vector<VectorXd> train_embeddings;
};

inline FoldRepresentation fit_representation(std::span<const FeatureVector> observations, const Fold& fold,
                                             const PipelineConfig& cfg)
{
    const std::set<std::string> train_ids(fold.train.begin(), fold.train.end());
    std::vector<FeatureVector> train, test;
    for (const auto& o : observations) {
        if (o.patient_id == fold.held_out)
            test.push_back(o);
        else if (train_ids.count(o.patient_id))
            train.push_back(o);
    }
    require(!train.empty(), "fold " + std::to_string(fold.index) + ": no training observations");
    require(!test.empty(), "fold " + std::to_string(fold.index) + ": held-out patient has no observations");

    FoldRepresentation fr;
    fr.fold = fold;
    fr.seed = fold_seed(cfg.autoencoder.rng_seed, fold.index);
    fr.prep = fit_preprocess(train);
    const auto train_p = apply_preprocess(fr.prep, train);
    const auto test_p = apply_preprocess(fr.prep, test);
    fr.train_sequences = build_sequences(train_p);
    fr.test_sequences = build_sequences(test_p);

    TrainConfig tc = cfg.autoencoder;
    tc.rng_seed = fr.seed;
    fr.autoencoder = compass::train(fr.train_sequences, tc);
    for (std::size_t s = 0; s < fr.train_sequences.size(); ++s)
        fr.train_embeddings.push_back(encode(fr.autoencoder.params, sequence_view(fr.train_sequences, s)));
    return fr;
}

struct FoldResult {
    std::string held_out;
    std::uint64_t seed = 0;
    std::vector<RiskTrajectory> trajectories;
    std::vector<int> labels;
    LogRegParams classifier;
};

inline FoldResult fit_supervised(const FoldRepresentation& fr, const LabelMap& labels, const LogRegConfig& cfg)
{
    std::vector<int> y;
    for (const auto& id : fr.train_sequences.ids) {
        auto it = labels.find(id);
        require(it != labels.end(), "no label for " + id.patient_id + "/" + std::string(to_string(id.organ)));
        y.push_back(it->second);
    }
    FoldResult res;
    res.held_out = fr.fold.held_out;
    res.seed = fr.seed;
    res.classifier = fit_classifier(fr.train_embeddings, y, cfg);
    for (std::size_t s = 0; s < fr.test_sequences.size(); ++s) {
        const auto& id = fr.test_sequences.ids[s];
        res.trajectories.push_back(
            predict_trajectory(id, sequence_view(fr.test_sequences, s), fr.autoencoder.params, res.classifier));
        auto it = labels.find(id);
        require(it != labels.end(), "no label for " + id.patient_id + "/" + std::string(to_string(id.organ)));
        res.labels.push_back(it->second);
    }
    return res;
}

inline std::pair<FoldRepresentation, FoldResult> run_fold(std::span<const FeatureVector> observations,
                                                          const LabelMap& labels, const Fold& fold,
                                                          const PipelineConfig& cfg)
{
    auto fr = fit_representation(observations, fold, cfg);
    auto res = fit_supervised(fr, labels, cfg.classifier);
    return {std::move(fr), std::move(res)};
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct PooledMetrics {
    double auc = 0.0;
    double brier = 0.0;
    Confusion confusion;
};

inline PooledMetrics pooled_metrics(std::span<const FoldResult> folds)
{
    std::vector<double> p;
    std::vector<int> y;
    std::vector<ScoredCase> cases;
    for (const auto& f : folds)
        for (std::size_t i = 0; i < f.trajectories.size(); ++i) {
            p.push_back(f.trajectories[i].p_final);
            y.push_back(f.labels[i]);
            cases.push_back({f.trajectories[i].id.organ, f.trajectories[i].p_final, f.labels[i]});
        }
    return {auc(p, y), brier(p, y), classify(cases)};
}

struct EvalReport {
    PooledMetrics metrics;
    std::vector<FoldRepresentation> representations;
    std::vector<FoldResult> folds;
    PipelineConfig config;
};

inline EvalReport evaluate(std::span<const FeatureVector> observations, const LabelMap& labels,
                           std::span<const Fold> folds, const PipelineConfig& cfg)
{
    EvalReport rep;
    rep.config = cfg;
    rep.representations.resize(folds.size());
    rep.folds.resize(folds.size());
    parallel_for(folds.size(), [&](std::size_t k) {
        auto [fr, res] = run_fold(observations, labels, folds[k], cfg);
        rep.representations[k] = std::move(fr);
        rep.folds[k] = std::move(res);
    });
    rep.metrics = pooled_metrics(rep.folds);
    return rep;
}

inline EvalReport evaluate(const Cohort& cohort, const PipelineConfig& cfg)
{
    const auto obs = extract_features(cohort);
    const auto folds = lopo_folds(cohort);
    return evaluate(obs, cohort_labels(cohort), folds, cfg);
}

/// Label-permutation control. The autoencoder never sees labels, so each
/// permutation only refits the classifiers on the stored fold representations.
/// Null control: labels are shuffled within each organ (so per-organ prevalence
/// is kept), classifiers are refitted on the fixed fold embeddings.
inline std::vector<double> permutation_aucs(const EvalReport& rep, const LabelMap& labels, int n_permutations,
                                            std::uint64_t seed)
{
    std::vector<double> out;
    for (int k = 0; k < n_permutations; ++k) {
        CounterRng rng(seed, 0x9e41 + static_cast<std::uint64_t>(k));
        LabelMap perm;
        for (OrganId o : kAllOrgans) {
            std::vector<SequenceId> ids;
            std::vector<int> y;
            for (const auto& [id, l] : labels)
                if (id.organ == o) {
                    ids.push_back(id);
                    y.push_back(l);
                }
            shuffle(y, rng);
            for (std::size_t i = 0; i < ids.size(); ++i)
                perm[ids[i]] = y[i];
        }
        std::vector<FoldResult> folds(rep.representations.size());
        parallel_for(folds.size(), [&](std::size_t f) {
            folds[f] = fit_supervised(rep.representations[f], perm, rep.config.classifier);
        });
        out.push_back(pooled_metrics(folds).auc);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Non-default interpretations baked into the pipeline, echoed in every report.
inline nlohmann::json deviation_flags()
{
    return {{"culling_uses_abs_rho", true},
            {"dropout_mask", "per-timestep independent"},
            {"weight_decay", "coupled (L2 in gradient)"},
            {"aggregation", "final fraction only"},
            {"autoencoder_batches", "seeded minibatches of autoencoder.batch_size sequences"},
            {"permutation_control", "labels shuffled within organ"}};
}

inline nlohmann::json report_json(const EvalReport& rep, const nlohmann::json& extra_config = {})
{
    const auto& m = rep.metrics;
    nlohmann::json j;
    j["auc"] = m.auc;
    j["brier"] = m.brier;
    j["confusion"] = {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"tn", m.confusion.tn}, {"fn", m.confusion.fn}};
    j["sensitivity"] = m.confusion.sensitivity();
    j["specificity"] = m.confusion.specificity();
    j["accuracy"] = m.confusion.accuracy();
    j["thresholds"] = {{"heart", classification_threshold(OrganId::Heart)},
                       {"esophagus", classification_threshold(OrganId::Esophagus)},
                       {"spinal_cord", classification_threshold(OrganId::SpinalCord)}};
    nlohmann::json cfg = {{"pipeline", pipeline_config_json(rep.config)}};
    if (!extra_config.is_null())
        cfg["run"] = extra_config;
    j["config"] = cfg;
    j["config_hash"] = hex64(fnv1a(cfg.dump()));
    j["deviation_flags"] = deviation_flags();
    j["folds"] = nlohmann::json::array();
    for (std::size_t k = 0; k < rep.folds.size(); ++k) {
        const auto& f = rep.folds[k];
        const auto& r = rep.representations[k];
        nlohmann::json fj;
        fj["fold"] = k;
        fj["held_out"] = f.held_out;
        fj["autoencoder_seed"] = f.seed;
        fj["n_kept_features"] = r.prep.width();
        fj["loss_epoch_first"] = r.autoencoder.loss_history.front();
        fj["loss_epoch_last"] = r.autoencoder.loss_history.back();
        fj["classifier_iterations"] = f.classifier.iterations;
        for (std::size_t i = 0; i < f.trajectories.size(); ++i)
            fj["cases"].push_back({{"organ", to_string(f.trajectories[i].id.organ)},
                                   {"label", f.labels[i]},
                                   {"p_final", f.trajectories[i].p_final},
                                   {"probabilities", f.trajectories[i].probabilities}});
        j["folds"].push_back(fj);
    }
    return j;
}

inline void write_trajectories_csv(const EvalReport& rep, std::ostream& out)
{
    out << "patient,organ,fraction,probability,label\n";
    for (const auto& f : rep.folds)
        for (std::size_t i = 0; i < f.trajectories.size(); ++i) {
            const auto& t = f.trajectories[i];
            for (std::size_t k = 0; k < t.probabilities.size(); ++k)
                out << t.id.patient_id << ',' << to_string(t.id.organ) << ',' << (k + 1) << ','
                    << format_number(t.probabilities[k]) << ',' << f.labels[i] << '\n';
        }
}

inline nlohmann::json fold_model_json(const EvalReport& rep, std::size_t k)
{
    const auto& r = rep.representations[k];
    const auto& f = rep.folds[k];
    return {{"format", "compass-fold-model"},
            {"version", 1},
            {"fold", k},
            {"held_out", f.held_out},
            {"feature_spec_hash", hex64(feature_spec_hash())},
            {"training_seed", r.seed},
            {"config", pipeline_config_json(rep.config)},
            {"kept_feature_indices", r.prep.kept_feature_indices},
            {"loss_history", r.autoencoder.loss_history},
            {"autoencoder", params_to_json(r.autoencoder.params)},
            {"classifier", classifier_to_json(f.classifier, rep.config.classifier)}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << text;
}

/// eval_report.json, trajectories.csv, fold_<k>_model.json, fold_<k>_prep.json.
inline void write_report(const EvalReport& rep, const std::filesystem::path& dir, const nlohmann::json& extra_config = {})
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw DataError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "eval_report.json", report_json(rep, extra_config).dump(2) + "\n");
    std::ofstream csv(dir / "trajectories.csv", std::ios::binary | std::ios::trunc);
    if (!csv)
        throw DataError("cannot write trajectories.csv in " + dir.string());
    write_trajectories_csv(rep, csv);
    for (std::size_t k = 0; k < rep.folds.size(); ++k) {
        write_text(dir / ("fold_" + std::to_string(k) + "_model.json"), fold_model_json(rep, k).dump() + "\n");
        write_text(dir / ("fold_" + std::to_string(k) + "_prep.json"),
                   preprocess_to_json(rep.representations[k].prep).dump(2) + "\n");
    }
}

} // namespace compass
