// scanmatch command line: simulate, localize, compare, sweep.
//
// Exit codes: 0 success, 1 input error, 2 pipeline failure.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "scanmatch/config.hpp"
#include "scanmatch/pipeline.hpp"
#include "scanmatch/scan_log.hpp"
#include "scanmatch/simworld.hpp"

namespace {

using namespace scanmatch;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ifstream open_in(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw InputError("cannot open '" + path + "'");
    return is;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw InputError("cannot write '" + path + "'");
    return os;
}

World load_world(const std::string& spec)
{
    if (spec == "lab_room")
        return lab_room();
    auto is = open_in(spec);
    return read_world(is);
}

std::vector<LogFrame> load_log(const std::string& path, const PipelineConfig& cfg)
{
    auto is = open_in(path);
    return read_log(is, cfg.scan);
}

std::vector<double> parse_doubles(const std::string& list)
{
    std::vector<double> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');)
        out.push_back(std::stod(item));
    return out;
}

/* "1-10" or "1,2,5" */
std::vector<std::uint64_t> parse_seeds(const std::string& list)
{
    std::vector<std::uint64_t> out;
    if (const auto dash = list.find('-'); dash != std::string::npos) {
        const auto lo = std::stoull(list.substr(0, dash));
        const auto hi = std::stoull(list.substr(dash + 1));
        for (auto s = lo; s <= hi; ++s)
            out.push_back(s);
        return out;
    }
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');)
        out.push_back(std::stoull(item));
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Laser scan matching localization: Harris keypoints + RANSAC + EKF"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("-c,--config", config_path, "key = value configuration file");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a scan log from a world");
    std::string sim_out;
    std::string world_opt, traj_opt;
    std::size_t frames_opt = 0;
    double eta_opt = -1.0;
    std::int64_t seed_opt = -1;
    std::string world_dump;
    sim_cmd->add_option("-o,--output", sim_out, "scan log to write")->required();
    sim_cmd->add_option("--world", world_opt, "lab_room or a world file");
    sim_cmd->add_option("--trajectory", traj_opt,
                        "corridor_loop | sharp_turns | figure_eight");
    sim_cmd->add_option("--frames", frames_opt, "number of scans");
    sim_cmd->add_option("--eta", eta_opt, "outlier fraction");
    sim_cmd->add_option("--seed", seed_opt, "simulation seed");
    sim_cmd->add_option("--dump-world", world_dump, "also write the world segments");

    // localize
    auto* loc_cmd = app.add_subcommand("localize", "Run the pipeline on a scan log");
    std::string log_path, frames_csv, traj_csv, map_pgm;
    loc_cmd->add_option("log", log_path, "scan log")->required();
    loc_cmd->add_option("--csv", frames_csv, "per-frame results");
    loc_cmd->add_option("--trajectory", traj_csv, "fused trajectory");
    loc_cmd->add_option("--map", map_pgm, "global map (PGM, with a .txt sidecar)");

    // compare
    auto* cmp_cmd = app.add_subcommand("compare", "RANSAC vs ICP residuals on one log");
    std::string cmp_log, cmp_out;
    cmp_cmd->add_option("log", cmp_log, "scan log with ground truth")->required();
    cmp_cmd->add_option("-o,--output", cmp_out, "comparison CSV")->required();

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Outlier-fraction sweep over seeds");
    std::string etas = "0,0.1,0.2,0.3,0.4,0.43,0.5,0.6";
    std::string seeds = "1-10";
    std::string sweep_out;
    sweep_cmd->add_option("--eta", etas, "comma-separated outlier fractions");
    sweep_cmd->add_option("--seeds", seeds, "seed list or range, e.g. 1-10");
    sweep_cmd->add_option("-o,--output", sweep_out, "sweep CSV")->required();
    sweep_cmd->add_option("--world", world_opt, "lab_room or a world file");
    sweep_cmd->add_option("--trajectory", traj_opt, "scripted trajectory");
    sweep_cmd->add_option("--frames", frames_opt, "scans per run");

    CLI11_PARSE(app, argc, argv);

    PipelineConfig cfg;
    SimConfig sim;
    try {
        if (!config_path.empty()) {
            auto is = open_in(config_path);
            load_config(is, cfg, sim);
        }
        if (!world_opt.empty())
            sim.world = world_opt;
        if (!traj_opt.empty())
            sim.trajectory = traj_opt;
        if (frames_opt > 0)
            sim.frames = frames_opt;
        if (eta_opt >= 0.0)
            sim.eta = eta_opt;
        if (seed_opt >= 0)
            sim.seed = static_cast<std::uint64_t>(seed_opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    // Input problems surface before any processing starts; everything after
    // that point is a pipeline failure.
    try {
        if (sim_cmd->parsed()) {
            const World world = load_world(sim.world);
            const auto cmds = scripted_trajectory(sim.trajectory);
            auto os = open_out(sim_out);
            std::vector<LogFrame> log;
            try {
                log = simulate_log(world, cmds, simulation_spec(cfg, sim, sim.eta, sim.seed));
            } catch (const std::exception& e) {
                std::cerr << "error: simulation failed: " << e.what() << '\n';
                return 2;
            }
            write_log(os, log, cfg.scan);
            if (!world_dump.empty()) {
                auto ws = open_out(world_dump);
                write_world(ws, world);
            }
            std::cerr << "wrote " << log.size() << " frames to " << sim_out << '\n';
            return 0;
        }

        if (loc_cmd->parsed()) {
            const auto log = load_log(log_path, cfg);
            PipelineOutput out;
            try {
                out = run_pipeline(log, cfg);
            } catch (const std::exception& e) {
                std::cerr << "error: pipeline failed: " << e.what() << '\n';
                return 2;
            }
            if (!frames_csv.empty()) {
                auto os = open_out(frames_csv);
                write_frames_csv(os, out.frames);
            }
            if (!traj_csv.empty()) {
                auto os = open_out(traj_csv);
                write_trajectory_csv(os, out.trajectory);
            }
            if (!map_pgm.empty() && !out.map.empty()) {
                auto os = open_out(map_pgm);
                write_pgm(os, out.map.image);
                auto hs = open_out(map_pgm + ".txt");
                write_map_header(hs, out.map);
            }
            std::size_t measured = 0;
            double runtime = 0.0;
            for (const auto& f : out.frames) {
                measured += f.measured ? 1 : 0;
                runtime += f.runtime_ms;
            }
            std::cerr << log.size() << " frames, " << measured << " measured, "
                      << runtime << " ms\n";
            return 0;
        }

        if (cmp_cmd->parsed()) {
            const auto log = load_log(cmp_log, cfg);
            for (const auto& f : log)
                if (!f.truth)
                    throw InputError("compare needs ground truth in every log line");
            CompareReport rep;
            try {
                rep = compare_matchers(log, cfg);
            } catch (const std::exception& e) {
                std::cerr << "error: pipeline failed: " << e.what() << '\n';
                return 2;
            }
            auto os = open_out(cmp_out);
            write_compare_csv(os, rep);
            std::cerr << "turn p90 heading: ransac " << rep.ransac_turn.p90.dtheta_deg
                      << " deg, icp " << rep.icp_turn.p90.dtheta_deg << " deg\n";
            return 0;
        }

        if (sweep_cmd->parsed()) {
            const World world = load_world(sim.world);
            const auto cmds = scripted_trajectory(sim.trajectory);
            const auto eta_values = parse_doubles(etas);
            const auto seed_values = parse_seeds(seeds);
            auto os = open_out(sweep_out);
            std::vector<SweepCell> cells;
            try {
                cells = noise_sweep(world, cmds, eta_values, seed_values, cfg, sim);
            } catch (const std::exception& e) {
                std::cerr << "error: pipeline failed: " << e.what() << '\n';
                return 2;
            }
            write_sweep_csv(os, cells);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
