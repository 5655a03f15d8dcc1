#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "celldrain/config.hpp"
#include "celldrain/report.hpp"

namespace {

using namespace celldrain;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "configuration file")->required();
  cmd->add_option("--out", args->out_dir, "output directory");
  cmd->add_option("--seed", args->seed, "override the measurement-noise seed")
      ->each([args](const std::string&) { args->seed_set = true; });
  cmd->add_flag("--quiet", args->quiet, "suppress progress output");
}

struct Loaded {
  ProjectConfig config;
  OutputHeader header;
};

Loaded load(const CommonArgs& args) {
  Loaded loaded{load_config(args.config_path), {}};
  // The header hash records the file as shipped; a --seed override changes
  // the noise realization but not the recorded hash.
  loaded.header.config_hash = config_hash_hex(args.config_path);
  if (args.seed_set) loaded.config.noise_seed = args.seed;
  loaded.header.seed = loaded.config.noise_seed;
  std::filesystem::create_directories(args.out_dir);
  return loaded;
}

int cmd_simulate(const CommonArgs& args) {
  Loaded loaded = load(args);
  const SimConfig sim = loaded.config.sim_config_for(loaded.config.simulate_controller);
  const SimResult result = run_closed_loop(sim);

  const std::string trace_path = args.out_dir + "/trace_" + result.method + ".csv";
  write_trace_csv(trace_path, result, loaded.header);

  const bool ok = result.end == SimEnd::kDischarged;
  std::printf("%s: %s, max Tc %.2f C, %s (trace: %s)\n", result.method.c_str(),
              ok ? format_duration(result.discharge_time).c_str()
                 : (result.end == SimEnd::kTimeout ? "timeout" : "fault"),
              result.max_tc_true,
              result.max_tc_true <= sim.t_constraint ? "constraint satisfied"
                                                     : "constraint violated",
              trace_path.c_str());
  if (result.end == SimEnd::kFault) {
    std::fprintf(stderr, "simulation fault: %s\n", result.fault_message.c_str());
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_benchmark(const CommonArgs& args) {
  Loaded loaded = load(args);
  if (loaded.config.benchmark_controllers.empty()) {
    std::fprintf(stderr, "%s: [simulation] controllers list is empty\n",
                 args.config_path.c_str());
    return kExitConfig;
  }
  const std::vector<SimConfig> cfgs = loaded.config.benchmark_configs();
  const BenchmarkResult result = run_benchmark(cfgs);

  write_benchmark_csv(args.out_dir + "/benchmark.csv", result, loaded.header);
  for (const SimResult& run : result.runs) {
    write_trace_csv(args.out_dir + "/trace_" + run.method + ".csv", run,
                    loaded.header);
  }
  write_panel_csvs(args.out_dir, result, loaded.header);

  if (!args.quiet) std::cout << format_benchmark_table(result);
  return result.any_failed ? kExitRuntime : kExitOk;
}

int cmd_synthesize(const CommonArgs& args, double epsilon, bool epsilon_set) {
  Loaded loaded = load(args);

  // Use the controller selected for simulation if it is an MPC section,
  // otherwise the first MPC section found.
  std::string mpc_name;
  if (loaded.config.controllers.count(loaded.config.simulate_controller) &&
      loaded.config.controllers.at(loaded.config.simulate_controller).kind ==
          ControllerKind::kMpc) {
    mpc_name = loaded.config.simulate_controller;
  } else {
    for (const auto& [name, spec] : loaded.config.controllers) {
      if (spec.kind == ControllerKind::kMpc) {
        mpc_name = name;
        break;
      }
    }
  }
  if (mpc_name.empty()) {
    std::fprintf(stderr, "%s: no MPC controller section in config\n",
                 args.config_path.c_str());
    return kExitConfig;
  }

  SimConfig sim = loaded.config.sim_config_for(mpc_name);
  if (epsilon_set) sim.controller.mpc.epsilon = epsilon;

  try {
    const SynthesisOutput syn = synthesize_for(sim);
    const MpcConfig& mpc = syn.mpc;

    std::printf("feedback gain K = [%.6g, %.6g, %.6g, %.6g]\n", mpc.k_gain[0],
                mpc.k_gain[1], mpc.k_gain[2], mpc.k_gain[3]);
    std::printf("rpi: s=%d alpha=%.4g achieved_eps=%.4g rows=%ld\n",
                mpc.rpi.s_steps, mpc.rpi.alpha, mpc.rpi.epsilon,
                static_cast<long>(mpc.rpi.set.num_rows()));
    const Vec4 scale = state_scale();
    const char* names[] = {"SoC", "V1", "Ts", "Tc"};
    for (int j = 0; j < 4; ++j) {
      Vec4 e = Vec4::Zero();
      e[j] = 1.0;
      const double hi = support(mpc.rpi.set, e) * scale[j];
      const double lo = -support(mpc.rpi.set, -e) * scale[j];
      std::printf("rpi extent %-3s: [%.6g, %.6g]\n", names[j], lo, hi);
    }
    std::printf("tightening: Tc bound %.4f C (margin %.4f C), input [%.4f, %.4f] A\n",
                mpc.tc_bound, mpc.t_max - mpc.tc_bound, mpc.u_lo, mpc.u_hi);

    write_polytope_csv(args.out_dir + "/poly_w.csv", syn.w_set, loaded.header);
    write_polytope_csv(args.out_dir + "/poly_rpi.csv", mpc.rpi.set, loaded.header);
    write_polytope_csv(args.out_dir + "/poly_tightened.csv", mpc.tightened,
                       loaded.header);
    return kExitOk;
  } catch (const OverTightenedError& e) {
    std::fprintf(stderr, "synthesis over-tightened (constraint row %d): %s\n",
                 e.row(), e.what());
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed-loop battery discharge simulation and controller synthesis"};
  app.require_subcommand(1);

  CommonArgs sim_args, bench_args, syn_args;
  double epsilon = 1e-3;
  bool epsilon_set = false;

  CLI::App* simulate = app.add_subcommand("simulate", "run one closed-loop discharge");
  add_common(simulate, &sim_args);
  CLI::App* benchmark =
      app.add_subcommand("benchmark", "run every configured controller");
  add_common(benchmark, &bench_args);
  CLI::App* synthesize =
      app.add_subcommand("synthesize", "run MPC synthesis standalone");
  add_common(synthesize, &syn_args);
  synthesize->add_option("--epsilon", epsilon, "RPI approximation tolerance")
      ->each([&epsilon_set](const std::string&) { epsilon_set = true; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(sim_args);
    if (benchmark->parsed()) return cmd_benchmark(bench_args);
    if (synthesize->parsed()) return cmd_synthesize(syn_args, epsilon, epsilon_set);
  } catch (const celldrain::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}
