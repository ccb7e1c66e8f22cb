#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "compass/compass.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace compass;

namespace {

struct RunConfig {
    CohortConfig cohort;
    PipelineConfig pipeline;
    ToleranceModel tolerance;
    int permutations = 0;
};

json tolerance_json(const ToleranceModel& t)
{
    json j;
    for (auto o : kAllOrgans)
        j["tolerance_eqd2_gy"][std::string(to_string(o))] = t.tolerance(o);
    j["width_fraction"] = t.width_fraction;
    for (auto& [o, w] : t.width_gy)
        j["width_gy"][std::string(to_string(o))] = w;
    return j;
}

json run_config_json(const RunConfig& rc)
{
    return {{"cohort", rc.cohort},
            {"pipeline", pipeline_config_json(rc.pipeline)},
            {"heatmap", tolerance_json(rc.tolerance)},
            {"permutations", rc.permutations}};
}

RunConfig load_config(const std::string& path)
{
    RunConfig rc;
    if (path.empty())
        return rc;
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
        if (j.contains("cohort"))
            j.at("cohort").get_to(rc.cohort);
        if (j.contains("pipeline"))
            rc.pipeline = pipeline_config_from_json(j.at("pipeline"));
        if (j.contains("heatmap")) {
            const auto& h = j.at("heatmap");
            if (h.contains("tolerance_eqd2_gy"))
                for (auto& [k, v] : h.at("tolerance_eqd2_gy").items())
                    rc.tolerance.tolerance_eqd2_gy[organ_from_string(k)] = v.get<double>();
            rc.tolerance.width_fraction = h.value("width_fraction", rc.tolerance.width_fraction);
            if (h.contains("width_gy"))
                for (auto& [k, v] : h.at("width_gy").items())
                    rc.tolerance.width_gy[organ_from_string(k)] = v.get<double>();
        }
        rc.permutations = j.value("permutations", 0);
    } catch (const json::exception& e) {
        throw DataError("malformed config " + path + ": " + e.what());
    }
    return rc;
}

void prepare_out(const fs::path& out, const RunConfig& rc, const std::string& command)
{
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec)
        throw DataError("cannot create " + out.string() + ": " + ec.message());
    json j = run_config_json(rc);
    j["command"] = command;
    write_text(out / "run_config.json", j.dump(2) + "\n");
}

Cohort load_or_generate(const std::string& cohort_dir, const RunConfig& rc)
{
    if (!cohort_dir.empty())
        return read_cohort(cohort_dir);
    rc.cohort.validate();
    return generate_cohort(rc.cohort);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"compass: per-fraction toxicity risk from synthetic dose, CT and PET volumes"};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::uint64_t> seed;
    std::string config_path, out_dir = "out";
    app.add_option("--seed", seed, "RNG seed (cohort generator and training)");
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");

    auto* gen = app.add_subcommand("gen", "generate a synthetic cohort");

    std::string cohort_dir;
    auto* feat = app.add_subcommand("features", "extract the feature table");
    feat->add_option("--cohort", cohort_dir, "cohort directory (generated from config when omitted)");

    auto* lopo = app.add_subcommand("lopo", "leave-one-patient-out evaluation");
    lopo->add_option("--cohort", cohort_dir, "cohort directory (generated from config when omitted)");
    int permutations = -1;
    lopo->add_option("--permutations", permutations, "label-permutation controls to run");

    std::string traj_path;
    auto* plot = app.add_subcommand("plot", "plot risk trajectories");
    plot->add_option("--trajectories", traj_path, "trajectories.csv from lopo")->required();

    std::string patient, organ_name = "esophagus";
    int fraction = 0, z = -1;
    auto* heat = app.add_subcommand("heatmap", "voxel risk heatmap for one slice");
    heat->add_option("--cohort", cohort_dir, "cohort directory")->required();
    heat->add_option("--patient", patient, "patient id")->required();
    heat->add_option("--organ", organ_name, "heart | esophagus | spinal_cord");
    heat->add_option("--fraction", fraction, "accumulate through this fraction (default: last)");
    heat->add_option("--z", z, "axial slice (default: slice with the organ's peak EQD2)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        RunConfig rc = load_config(config_path);
        if (seed) {
            rc.cohort.rng_seed = *seed;
            rc.pipeline.autoencoder.rng_seed = *seed;
        }
        if (permutations >= 0)
            rc.permutations = permutations;
        const fs::path out(out_dir);

        if (gen->parsed()) {
            rc.cohort.validate();
            prepare_out(out, rc, "gen");
            const auto cohort = generate_cohort(rc.cohort);
            write_cohort(cohort, out, rc.cohort);
            std::cout << "wrote " << cohort.size() << " patients to " << out.string() << "\n";
        } else if (feat->parsed()) {
            prepare_out(out, rc, "features");
            const auto cohort = load_or_generate(cohort_dir, rc);
            const auto rows = extract_features(cohort);
            write_feature_csv(rows, out / "features.csv");
            std::cout << "wrote " << rows.size() << " rows x " << kFeatureCount << " features\n";
        } else if (lopo->parsed()) {
            prepare_out(out, rc, "lopo");
            const auto cohort = load_or_generate(cohort_dir, rc);
            const auto obs = extract_features(cohort);
            const auto labels = cohort_labels(cohort);
            const auto rep = evaluate(obs, labels, lopo_folds(cohort), rc.pipeline);
            json extra = {{"cohort_source", cohort_dir.empty() ? "generated" : cohort_dir}};
            if (rc.permutations > 0)
                extra["permutation_aucs"] =
                    permutation_aucs(rep, labels, rc.permutations, rc.pipeline.autoencoder.rng_seed);
            write_report(rep, out, extra);
            const auto& m = rep.metrics;
            std::printf("AUC %.4f  Brier %.4f  sens %.3f  spec %.3f  acc %.3f\n", m.auc, m.brier,
                        m.confusion.sensitivity(), m.confusion.specificity(), m.confusion.accuracy());
        } else if (plot->parsed()) {
            std::ifstream in(traj_path);
            if (!in)
                throw DataError("cannot open " + traj_path);
            const auto rows = read_trajectories_csv(in);
            if (rows.empty())
                throw DataError("no trajectories in " + traj_path);
            prepare_out(out, rc, "plot");
            write_text(out / "trajectories.svg", trajectory_plot_svg(rows));
            std::cout << "wrote " << (out / "trajectories.svg").string() << "\n";
        } else if (heat->parsed()) {
            const OrganId organ = organ_from_string(organ_name);
            const auto cohort = read_cohort(cohort_dir);
            const PatientCase* pc = nullptr;
            for (const auto& c : cohort)
                if (c.patient_id == patient)
                    pc = &c;
            if (!pc)
                throw DataError("no patient " + patient + " in " + cohort_dir);
            const std::size_t t = fraction > 0 ? static_cast<std::size_t>(fraction) : pc->fractions.size();
            if (t > pc->fractions.size())
                throw DataError("patient " + patient + " has " + std::to_string(pc->fractions.size()) + " fractions");
            const auto cum = cumulative_eqd2(*pc, organ, t);
            const auto& mask = pc->mask(organ);
            const auto h = heatmap(cum, mask, organ, rc.tolerance);
            std::vector<VoxelVolume> cts;
            for (const auto& f : pc->fractions)
                cts.push_back(f.ct);
            const auto base = aip(cts);
            std::size_t slice = 0;
            if (z >= 0) {
                slice = static_cast<std::size_t>(z);
                if (slice >= cum.grid().dims[2])
                    throw DataError("slice " + std::to_string(z) + " outside the grid");
            } else {
                double best = -1.0;
                for (std::size_t i = 0; i < cum.size(); ++i)
                    if (mask.contains(i) && cum[i] > best) {
                        best = cum[i];
                        slice = cum.grid().coords(i)[2];
                    }
            }
            prepare_out(out, rc, "heatmap");
            export_slice(h, base, slice, out);
            std::cout << "wrote heatmap_slice_z" << slice << " (.svg, .csv) to " << out.string() << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
