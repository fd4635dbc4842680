// Command-line front end for the link simulator: single runs, seed sweeps,
// mode comparison and the consensus harness. Exit status is nonzero exactly
// when a run in oae mode violates an invariant.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "oae/analysis.hpp"
#include "oae/consensus.hpp"
#include "oae/netsim.hpp"

namespace {

using namespace oae;

std::optional<SimMode> parse_mode(const std::string& mode) {
  if (mode.empty()) return std::nullopt;
  if (mode == "oae") return SimMode::Oae;
  if (mode == "fito") return SimMode::Fito;
  throw CLI::ValidationError("--mode must be 'oae' or 'fito'");
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

analysis::ViolationReport sweep(const Scenario& scn, SimMode mode, std::uint64_t seeds,
                                std::uint64_t first_seed) {
  analysis::ViolationReport total;
  for (std::uint64_t s = first_seed; s < first_seed + seeds; ++s) {
    auto sim = sim::Simulator::from_scenario(scn, s, mode);
    sim.run();
    total.merge(analysis::check_invariants(sim.trace()));
  }
  return total;
}

int cmd_run(const std::string& file, std::optional<std::uint64_t> seed,
            const std::string& mode_str, const std::string& trace_out,
            const std::string& report_out, bool machine) {
  Scenario scn = load_scenario(file);
  const auto mode = parse_mode(mode_str);
  auto sim = sim::Simulator::from_scenario(scn, seed, mode);
  sim.run();
  if (!trace_out.empty()) write_or_print(trace_out, sim.trace().to_text());
  auto rep = analysis::check_invariants(sim.trace());
  std::string text = machine ? analysis::report_lines(rep) : analysis::report_text(rep);
  if (!report_out.empty())
    write_or_print(report_out, text);
  else
    std::cout << text;
  const SimMode effective = mode.value_or(scn.mode);
  if (effective == SimMode::Oae && rep.total() > 0) return 1;
  return 0;
}

int cmd_sweep(const std::string& file, std::uint64_t seeds, std::uint64_t first_seed,
              const std::string& mode_str, const std::string& report_out, bool machine) {
  Scenario scn = load_scenario(file);
  const auto mode = parse_mode(mode_str);
  const SimMode effective = mode.value_or(scn.mode);
  auto rep = sweep(scn, effective, seeds, first_seed);
  std::ostringstream os;
  if (machine) {
    os << analysis::report_lines(rep);
  } else {
    os << "sweep " << scn.name << " mode=" << to_token(effective) << " seeds=" << seeds << "\n"
       << analysis::report_text(rep);
  }
  if (!report_out.empty())
    write_or_print(report_out, os.str());
  else
    std::cout << os.str();
  if (effective == SimMode::Oae && rep.total() > 0) return 1;
  return 0;
}

int cmd_compare(const std::string& file, std::uint64_t seeds, std::uint64_t first_seed,
                const std::string& report_out) {
  Scenario scn = load_scenario(file);
  auto oae_rep = sweep(scn, SimMode::Oae, seeds, first_seed);
  auto fito_rep = sweep(scn, SimMode::Fito, seeds, first_seed);
  std::ostringstream os;
  os << "comparison " << scn.name << " seeds=" << seeds << "\n"
     << analysis::comparison_grid(oae_rep, fito_rep);
  if (!report_out.empty())
    write_or_print(report_out, os.str());
  else
    std::cout << os.str();
  return oae_rep.total() > 0 ? 1 : 0;
}

int cmd_consensus(std::size_t n, const std::vector<std::int64_t>& proposals,
                  const std::vector<std::size_t>& crash, bool exhaustive, std::uint64_t seeds) {
  if (exhaustive) {
    auto out = consensus::exhaustive_consensus(n, proposals, 5);
    std::cout << "exhaustive n=" << n << " runs=" << out.runs << " failures=" << out.failures
              << " max_steps=" << out.max_steps << "\n"
              << (out.failures == 0 ? "PASS" : "FAIL")
              << " agreement+validity+wait-free over all schedules\n";
    return out.failures == 0 ? 0 : 1;
  }
  SplitMix64 rng(0xC0FFEE);
  std::size_t failures = 0;
  std::uint64_t max_steps = 0;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    consensus::ConsensusScenario scn;
    scn.n = n;
    scn.proposals = proposals;
    for (std::size_t i = 0; i < n; ++i) scn.start_ticks.push_back(1 + rng.next() % 20);
    for (std::size_t c : crash) scn.crash_set.insert(c);
    scn.crash_tick = 1 + rng.next() % 30;
    scn.seed = rng.next();
    auto r = consensus::run_consensus(scn);
    for (std::size_t i = 0; i < n; ++i) max_steps = std::max(max_steps, r.steps[i]);
    if (!r.agreement || !r.validity || !r.all_live_decided) ++failures;
    if (s == 0) {
      std::cout << "decisions:";
      for (std::size_t i = 0; i < n; ++i) {
        std::cout << " P" << i + 1 << "=";
        if (r.decided[i])
          std::cout << *r.decided[i];
        else
          std::cout << (scn.crash_set.count(i) ? "crashed" : "none");
      }
      std::cout << "\n";
    }
  }
  std::cout << "random schedules=" << seeds << " failures=" << failures
            << " max_steps=" << max_steps << "\n"
            << (failures == 0 ? "PASS" : "FAIL") << " agreement+validity+wait-free\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic duplex-link simulator: reflective atomic transactions "
               "against a forward-only baseline"};
  app.require_subcommand(1);

  std::string file, mode, trace_out, report_out;
  std::uint64_t seeds = 1, first_seed = 1;
  std::optional<std::uint64_t> seed;
  bool machine = false;

  auto* run = app.add_subcommand("run", "run one scenario and audit its trace");
  run->add_option("scenario", file, "scenario file (json)")->required();
  std::uint64_t seed_value = 0;
  bool seed_set = false;
  run->add_option_function<std::uint64_t>(
         "--seed", [&](std::uint64_t v) { seed_value = v; seed_set = true; },
         "override the scenario seed");
  run->add_option("--mode", mode, "oae | fito (default: scenario file)");
  run->add_option("--trace", trace_out, "write the trace here ('-' for stdout)");
  run->add_option("--report", report_out, "write the audit report here");
  run->add_flag("--machine", machine, "key=value report format");

  auto* sw = app.add_subcommand("sweep", "run many seeds and aggregate the audit");
  sw->add_option("scenario", file, "scenario file (json)")->required();
  sw->add_option("--seeds", seeds, "number of seeds")->required();
  sw->add_option("--first-seed", first_seed, "first seed (default 1)");
  sw->add_option("--mode", mode, "oae | fito (default: scenario file)");
  sw->add_option("--report", report_out, "write the report here");
  sw->add_flag("--machine", machine, "key=value report format");

  auto* cmp = app.add_subcommand("compare", "run both modes and print the contrast grid");
  cmp->add_option("scenario", file, "scenario file (json)")->required();
  cmp->add_option("--seeds", seeds, "seeds per mode (default 1)");
  cmp->add_option("--first-seed", first_seed, "first seed (default 1)");
  cmp->add_option("--report", report_out, "write the grid here");

  std::size_t n = 2;
  std::vector<std::int64_t> proposals;
  std::vector<std::size_t> crash;
  bool exhaustive = false;
  std::uint64_t cseeds = 1000;
  auto* cons = app.add_subcommand("consensus", "n-process consensus over link transactions");
  cons->add_option("--n", n, "process count")->required();
  cons->add_option("--proposals", proposals, "one value per process")->required()->delimiter(',');
  cons->add_option("--crash", crash, "0-based indices of crashing processes")->delimiter(',');
  cons->add_flag("--exhaustive", exhaustive, "enumerate all start-offset schedules");
  cons->add_option("--seeds", cseeds, "random schedules when not exhaustive");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (seed_set) seed = seed_value;
      return cmd_run(file, seed, mode, trace_out, report_out, machine);
    }
    if (*sw) return cmd_sweep(file, seeds, first_seed, mode, report_out, machine);
    if (*cmp) return cmd_compare(file, seeds, first_seed, report_out);
    if (*cons) return cmd_consensus(n, proposals, crash, exhaustive, cseeds);
  } catch (const oae::ScenarioError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
