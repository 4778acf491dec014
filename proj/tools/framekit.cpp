// framekit: synthesize keyframe logs, merge them, sweep the registration envelope.
#include <iostream>

#include <CLI11.hpp>

#include "framekit/commands.hpp"

namespace cli = framekit::cli;

int main(int argc, char** argv) {
  CLI::App app{"Map merging toolkit for keyframe logs of point-cloud maps"};
  app.require_subcommand(1);

  cli::SynthArgs synth;
  std::string synth_world, synth_out, synth_config;
  std::vector<std::string> synth_missions;
  auto* s = app.add_subcommand("synth", "Simulate missions through a tunnel world and write their logs");
  s->add_option("world", synth_world, "World spec (x1 y1 z1 x2 y2 z2 width height per line)")->required();
  s->add_option("missions", synth_missions, "Mission files")->required();
  s->add_option("-o,--out", synth_out, "Output directory")->required();
  s->add_option("-c,--config", synth_config, "key=value config (projection.*, keyframe.*)");
  s->add_option("--noise", synth.noise, "Range noise sigma in meters")->check(CLI::NonNegativeNumber);
  s->add_option("--seed", synth.seed, "Noise seed");

  cli::MergeArgs merge;
  std::string merge_out, merge_config;
  std::vector<std::string> merge_logs;
  bool downsample = false;
  auto* m = app.add_subcommand("merge", "Merge logs into the frame of the first one");
  m->add_option("logs", merge_logs, "Log prefixes or any of their files, in merge order")->required();
  m->add_option("-c,--config", merge_config, "key=value config (gicp.*, merge.*, union.*, output.*)");
  m->add_option("-o,--out", merge_out, "Output directory")->required();
  auto* ds = m->add_flag("--downsample", downsample, "Voxel-filter the merged map (union.leaf)");

  cli::EnvelopeArgs env;
  std::string env_world, env_sweep, env_out;
  auto* e = app.add_subcommand("envelope", "Registration success over initial offset, yaw and sphere radius");
  e->add_option("world", env_world, "World spec")->required();
  e->add_option("sweep", env_sweep, "Sweep config (offsets, yaws_deg, radii, trials, ...)")->required();
  e->add_option("-o,--out", env_out, "Output CSV")->required();
  e->add_option("--noise", env.noise, "Range noise sigma in meters")->check(CLI::NonNegativeNumber);
  e->add_option("--seed", env.seed, "Noise seed");

  cli::ScenarioArgs scen;
  std::string scen_out;
  auto* sc = app.add_subcommand("scenario", "Write a built-in scenario as world and mission files");
  sc->add_option("name", scen.name, "straight_opposite, t_junction, four_map, wide_junction or narrow")->required();
  sc->add_option("-o,--out", scen_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : cli::kExitUsage;
  }

  if (*s) {
    synth.world = synth_world;
    for (const auto& p : synth_missions) synth.missions.emplace_back(p);
    synth.out_dir = synth_out;
    if (!synth_config.empty()) synth.config = synth_config;
    return cli::cmd_synth(synth, std::cout, std::cerr);
  }
  if (*m) {
    for (const auto& p : merge_logs) merge.logs.emplace_back(p);
    merge.out_dir = merge_out;
    if (!merge_config.empty()) merge.config = merge_config;
    if (ds->count() > 0) merge.downsample = downsample;
    return cli::cmd_merge(merge, std::cout, std::cerr);
  }
  if (*e) {
    env.world = env_world;
    env.sweep = env_sweep;
    env.out_csv = env_out;
    return cli::cmd_envelope(env, std::cout, std::cerr);
  }
  scen.out_dir = scen_out;
  return cli::cmd_scenario(scen, std::cout, std::cerr);
}
