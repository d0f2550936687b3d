#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "microorch/orchestrator.hpp"
#include "microorch/telemetry.hpp"
#include "microorch/wire.hpp"
#include "microorch/workloads.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

microorch::Orchestrator* g_orchestrator = nullptr;

void on_signal(int) {
  if (g_orchestrator) g_orchestrator->request_stop();
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct OrchdOptions {
  std::string fabric, policy, power;
  std::string listen = "127.0.0.1:7601";
  std::string telemetry_listen;
  std::string log = "./telemetry.jsonl";
  double sampling_period_ms = 100.0;
  bool realtime = false;
  bool oneshot = false;
  std::uint64_t seed = 42;
  std::string fn_id = "fft0";
};

int run_orchd(const OrchdOptions& options) {
  microorch::RunConfig config;
  config.fabric_config_path = options.fabric;
  config.policy_config_path = options.policy;
  config.power_config_path = options.power;
  config.clock = options.realtime ? microorch::ClockMode::Realtime
                                  : microorch::ClockMode::Simulated;
  config.log_path = options.log;
  config.sampling_period_ms = options.sampling_period_ms;
  config.seed = options.seed;
  config.oneshot = options.oneshot;
  config.fn_id = options.fn_id;
  try {
    config.event_endpoint = microorch::Endpoint::parse(options.listen);
    if (!options.telemetry_listen.empty()) {
      config.telemetry_endpoint = microorch::Endpoint::parse(options.telemetry_listen);
    }
  } catch (const std::exception& err) {
    std::cerr << "orchd: " << err.what() << "\n";
    return kExitConfig;
  }

  std::unique_ptr<microorch::Orchestrator> orchestrator;
  try {
    orchestrator = std::make_unique<microorch::Orchestrator>(config);
  } catch (const std::exception& err) {
    std::cerr << "orchd: config error: " << err.what() << "\n";
    return kExitConfig;
  }

  g_orchestrator = orchestrator.get();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    int rc = orchestrator->run();
    g_orchestrator = nullptr;
    return rc == 0 ? kExitOk : kExitRuntime;
  } catch (const std::exception& err) {
    g_orchestrator = nullptr;
    std::cerr << "orchd: fatal: " << err.what() << "\n";
    return kExitRuntime;
  }
}

struct EdgeEmuOptions {
  std::string trace;
  std::string connect = "127.0.0.1:7601";
  std::string speed = "1";
  int max_attempts = 20;
  int backoff_ms = 100;
};

int run_edge_emu(const EdgeEmuOptions& options) {
  microorch::EventTrace trace;
  microorch::Endpoint endpoint;
  microorch::ReplayOptions replay_options;
  try {
    trace = microorch::EventTrace::from_csv_file(options.trace);
    endpoint = microorch::Endpoint::parse(options.connect);
    if (options.speed == "inf") {
      replay_options.speed = std::numeric_limits<double>::infinity();
    } else {
      replay_options.speed = std::stod(options.speed);
      if (!(replay_options.speed > 0.0)) throw std::invalid_argument("speed must be > 0");
    }
    replay_options.max_attempts = options.max_attempts;
    replay_options.backoff_ms = options.backoff_ms;
  } catch (const std::exception& err) {
    std::cerr << "edge_emu: config error: " << err.what() << "\n";
    return kExitConfig;
  }
  try {
    microorch::replay(trace, endpoint, replay_options);
    return kExitOk;
  } catch (const std::exception& err) {
    std::cerr << "edge_emu: " << err.what() << "\n";
    return kExitRuntime;
  }
}

struct ReportOptions {
  std::string log = "./telemetry.jsonl";
  std::string svg_dir;
};

int run_telem_report(const ReportOptions& options) {
  try {
    microorch::Report report = microorch::analyze_log(options.log);
    std::cout << microorch::report_text(report);
    if (!options.svg_dir.empty()) {
      std::filesystem::create_directories(options.svg_dir);
      microorch::write_report_svgs(report, options.svg_dir);
      std::cout << "charts: " << options.svg_dir << "/total_w.svg, " << options.svg_dir
                << "/exec_time_ms.svg\n";
    }
    return kExitOk;
  } catch (const std::exception& err) {
    std::cerr << "telem_report: " << err.what() << "\n";
    return kExitRuntime;
  }
}

struct BenchOptions {
  std::string sizes = "8,1024,2048,4096";
  std::string formats = "q1.15,q1.7";
  int seeds = 5;
};

int run_fft_bench(const BenchOptions& options) {
  std::vector<std::uint32_t> sizes;
  std::vector<microorch::FixedPointFormat> formats;
  try {
    for (const std::string& item : split_csv(options.sizes)) {
      unsigned long n = std::stoul(item);
      if (!microorch::valid_fft_length(n)) {
        throw std::invalid_argument("unsupported transform length: " + item);
      }
      sizes.push_back(static_cast<std::uint32_t>(n));
    }
    for (const std::string& item : split_csv(options.formats)) {
      formats.push_back(microorch::FixedPointFormat::parse(item));
    }
    if (sizes.empty()) throw std::invalid_argument("no sizes given");
    if (options.seeds < 1) throw std::invalid_argument("need at least one seed");
  } catch (const std::exception& err) {
    std::cerr << "fft_bench: config error: " << err.what() << "\n";
    return kExitConfig;
  }

  using clock = std::chrono::steady_clock;
  std::cout << "n,variant,wall_time_ms,mse_vs_float\n";
  for (std::uint32_t n : sizes) {
    std::vector<microorch::Signal> inputs;
    std::vector<microorch::Spectrum> references;
    for (int s = 0; s < options.seeds; ++s) {
      std::uint64_t seed = 0x9e3779b9ull * (s + 1) + n;
      auto raw = microorch::generate_signal(microorch::SignalSpec::seeded_uniform(seed), n);
      inputs.push_back(microorch::normalize_signal(raw).signal);
    }

    std::vector<double> float_times;
    for (const auto& input : inputs) {
      auto begun = clock::now();
      references.push_back(microorch::fft_float(input));
      float_times.push_back(
          std::chrono::duration<double, std::milli>(clock::now() - begun).count());
    }
    std::cout << n << ",float," << median(float_times) << ",0\n";

    for (const auto& format : formats) {
      std::vector<double> times;
      std::vector<double> mses;
      for (int s = 0; s < options.seeds; ++s) {
        auto begun = clock::now();
        auto fixed = microorch::fft_fixed(inputs[s], format);
        times.push_back(
            std::chrono::duration<double, std::milli>(clock::now() - begun).count());
        mses.push_back(microorch::mse(fixed.spectrum, references[s]));
      }
      std::cout << n << "," << format.name() << "," << median(times) << "," << median(mses)
                << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"microorch: event-driven micro-orchestrator for a simulated FPGA SoC fabric"};
  app.footer(
      "Exit codes: 0 success, 1 configuration error (flags, config files, trace),\n"
      "2 runtime failure (bind/connect, I/O, empty report input).");
  app.require_subcommand(1);

  OrchdOptions orchd;
  auto* orchd_cmd = app.add_subcommand(
      "orchd", "Run the orchestration daemon: event intake, policy, fabric, telemetry");
  orchd_cmd->add_option("--fabric", orchd.fabric, "Fabric config JSON (default: built-in)")
      ->check(CLI::ExistingFile);
  orchd_cmd->add_option("--policy", orchd.policy, "Policy config JSON (default: built-in)")
      ->check(CLI::ExistingFile);
  orchd_cmd->add_option("--power", orchd.power, "Power model config JSON (default: built-in)")
      ->check(CLI::ExistingFile);
  orchd_cmd->add_option("--listen", orchd.listen, "Event endpoint host:port")
      ->envname("MICROORCH_EVENT_ENDPOINT")
      ->capture_default_str();
  orchd_cmd
      ->add_option("--telemetry-listen", orchd.telemetry_listen,
                   "Telemetry publish endpoint host:port (off when omitted)")
      ->envname("MICROORCH_TELEMETRY_ENDPOINT");
  orchd_cmd->add_option("--log", orchd.log, "Telemetry log path")->capture_default_str();
  orchd_cmd
      ->add_option("--sampling-period-ms", orchd.sampling_period_ms,
                   "Periodic sampling interval (realtime clock only)")
      ->capture_default_str();
  orchd_cmd->add_flag("--realtime", orchd.realtime,
                      "Wall-clock mode: real sleeps, measured execution times");
  orchd_cmd->add_flag("--oneshot", orchd.oneshot,
                      "Exit after the first client disconnects and the queue drains");
  orchd_cmd->add_option("--seed", orchd.seed, "Workload signal seed")->capture_default_str();
  orchd_cmd->add_option("--fn-id", orchd.fn_id, "Managed function instance id")
      ->capture_default_str();

  EdgeEmuOptions edge;
  auto* edge_cmd =
      app.add_subcommand("edge_emu", "Replay a face-count trace against the daemon");
  edge_cmd->add_option("--trace", edge.trace, "Trace CSV with header offset_ms,faces")
      ->required()
      ->check(CLI::ExistingFile);
  edge_cmd->add_option("--connect", edge.connect, "Event endpoint host:port")
      ->envname("MICROORCH_EVENT_ENDPOINT")
      ->capture_default_str();
  edge_cmd->add_option("--speed", edge.speed, "Replay speed multiplier, or 'inf'")
      ->capture_default_str();
  edge_cmd->add_option("--max-attempts", edge.max_attempts, "Connect attempts before giving up")
      ->capture_default_str();
  edge_cmd->add_option("--backoff-ms", edge.backoff_ms, "Base backoff between attempts")
      ->capture_default_str();

  ReportOptions report;
  auto* report_cmd =
      app.add_subcommand("telem_report", "Summarize a telemetry log and emit charts");
  report_cmd->add_option("log", report.log, "Telemetry log path")->capture_default_str();
  report_cmd->add_option("--svg", report.svg_dir,
                         "Directory for SVG chart output (created if missing)");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand(
      "fft_bench", "Compare float and fixed-point FFT wall time and fidelity (CSV to stdout)");
  bench_cmd->add_option("--sizes", bench.sizes, "Comma-separated transform lengths")
      ->capture_default_str();
  bench_cmd->add_option("--formats", bench.formats, "Comma-separated fixed-point tags")
      ->capture_default_str();
  bench_cmd->add_option("--seeds", bench.seeds, "Seeds per size (medians reported)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (app.got_subcommand(orchd_cmd)) return run_orchd(orchd);
  if (app.got_subcommand(edge_cmd)) return run_edge_emu(edge);
  if (app.got_subcommand(report_cmd)) return run_telem_report(report);
  if (app.got_subcommand(bench_cmd)) return run_fft_bench(bench);
  return kExitConfig;
}
