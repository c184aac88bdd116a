// phonotrack command-line front end.
//
// Exit status: 0 on success, 1 when any subject failed, 2 on usage or fatal
// errors.

#include "phonotrack/commands.hpp"
#include "phonotrack/config.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using phonotrack::RunConfig;

struct Overrides {
  std::optional<double> frames;
  std::optional<std::string> method;
  std::optional<std::string> formula;
  std::optional<std::string> units;
  std::optional<std::string> wavelet;
  std::optional<std::string> out;
  std::string config;
  std::string from_report;
  std::vector<std::string> set;
};

void add_common(CLI::App* app, Overrides& o, bool with_method) {
  app->add_option("--frames", o.frames, "Frame length in seconds (default 4)");
  if (with_method)
    app->add_option("--method", o.method, "Envelope: hilbert, shannon, wes or all")
        ->check(CLI::IsMember({"hilbert", "shannon", "wes", "all"}));
  app->add_option("--formula", o.formula, "HR formula: eq7 or cycle")->check(CLI::IsMember({"eq7", "cycle"}));
  app->add_option("--units", o.units, "Time unit of BP coefficients: s or ms")->check(CLI::IsMember({"s", "ms"}));
  app->add_option("--wavelet", o.wavelet, "WES wavelet: morlet, morse or bump")
      ->check(CLI::IsMember({"morlet", "morse", "bump"}));
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--config", o.config, "key = value config file (overrides $PHONOTRACK_CONFIG)");
  app->add_option("--from-report", o.from_report, "Reuse the config embedded in a previous report");
  app->add_option("--set", o.set, "Extra key=value overrides")->take_all();
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg;
  if (!o.from_report.empty()) {
    std::ifstream in(o.from_report);
    if (!in) phonotrack::fail(phonotrack::ErrorCode::FileNotFound, "cannot open " + o.from_report);
    cfg = RunConfig::from_json(nlohmann::json::parse(in).at("config"));
  } else {
    cfg = phonotrack::load_config(o.config);
  }
  for (const auto& kv : o.set) phonotrack::apply_config_text(cfg, kv, "--set");
  if (o.frames) cfg.frame_len_s = *o.frames;
  if (o.method) cfg.method = *o.method;
  if (o.formula) cfg.formula = *o.formula;
  if (o.units) cfg.units = *o.units;
  if (o.wavelet) cfg.wavelet = *o.wavelet;
  if (o.out) cfg.out_dir = *o.out;
  cfg.validate();
  return cfg;
}

int finish(const phonotrack::cli::CommandResult& r, const std::string& what, const RunConfig& cfg) {
  std::cerr << what << ": " << r.report.value("errors", nlohmann::json::array()).size()
            << " error(s); outputs in " << cfg.out_dir << "\n";
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PCG-only heart rate and blood pressure toolkit"};
  app.set_version_flag("--version", std::string(phonotrack::kVersion));
  app.require_subcommand(1);

  std::string dataset;
  std::string spec_file, synth_out = "synth_out";
  std::string coefficients = "table1";
  Overrides o;

  auto* synth = app.add_subcommand("synth", "Write a synthetic PCG/ECG/BP cohort");
  synth->add_option("--spec", spec_file, "Cohort spec (JSON); defaults used when omitted");
  synth->add_option("--out", synth_out, "Output dataset directory");

  auto* hr = app.add_subcommand("hr", "Frame-wise heart rate with ECG agreement");
  hr->add_option("dataset", dataset, "Dataset directory")->required();
  add_common(hr, o, true);

  auto* quality = app.add_subcommand("quality", "Band, WES/ES NRMSE and SNR per subject");
  quality->add_option("dataset", dataset, "Dataset directory")->required();
  add_common(quality, o, false);

  auto* bp = app.add_subcommand("bp", "Blood-pressure model");
  bp->require_subcommand(1);
  auto* fit = bp->add_subcommand("fit", "Fit coefficients on a dataset with reference BP");
  auto* predict = bp->add_subcommand("predict", "Predict BP with a coefficient set");
  auto* loocv = bp->add_subcommand("loocv", "Leave-one-subject-out evaluation");
  for (auto* sub : {fit, predict, loocv}) {
    sub->add_option("dataset", dataset, "Dataset directory")->required();
    add_common(sub, o, false);
  }
  predict->add_option("--coefficients", coefficients, "table1, synthetic or a coefficient JSON file");

  CLI11_PARSE(app, argc, argv);

  try {
    namespace cli = phonotrack::cli;
    if (*synth) {
      nlohmann::json j = nlohmann::json::object();
      if (!spec_file.empty()) {
        std::ifstream in(spec_file);
        if (!in) phonotrack::fail(phonotrack::ErrorCode::FileNotFound, "cannot open " + spec_file);
        j = nlohmann::json::parse(in);
      }
      const auto r = cli::cmd_synth(cli::parse_synth_spec(j), synth_out);
      std::cerr << "synth: wrote " << r.report["subjects"].size() << " subjects to " << synth_out << "\n";
      return 0;
    }
    const auto cfg = resolve(o);
    if (*hr) return finish(cli::cmd_hr(dataset, cfg), "hr", cfg);
    if (*quality) return finish(cli::cmd_quality(dataset, cfg), "quality", cfg);
    if (*fit) return finish(cli::cmd_bp_fit(dataset, cfg), "bp fit", cfg);
    if (*predict) return finish(cli::cmd_bp_predict(dataset, cfg, coefficients), "bp predict", cfg);
    if (*loocv) return finish(cli::cmd_bp_loocv(dataset, cfg), "bp loocv", cfg);
  } catch (const phonotrack::Error& e) {
    std::cerr << "error [" << phonotrack::to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
