#include <chrono>
#include <sstream>

#include "panodepth/errors.hpp"
#include "panodepth/harness.hpp"

namespace panodepth {

std::vector<AblationRow> ablation_configurations() {
  auto row = [](const char* name, bool srb, bool sca, bool stp) {
    AblationRow r;
    r.name = name;
    r.use_srb = srb;
    r.use_sca = sca;
    r.use_stp = stp;
    return r;
  };
  return {row("full", true, true, true),         row("no_sca", true, false, true),
          row("no_srb", false, true, true),      row("no_stp", true, true, false),
          row("no_srb_no_sca", false, false, true), row("no_srb_no_stp", false, true, false)};
}

namespace {

ModelConfig with_toggles(ModelConfig cfg, const AblationRow& row) {
  cfg.srb.enabled = row.use_srb;
  cfg.transformer.use_sca = row.use_sca;
  cfg.transformer.use_stp = row.use_stp;
  return cfg;
}

std::size_t stp_parameter_count(const DepthModel<float>& model) {
  std::size_t n = 0;
  for (const auto& block : model.decoder) {
    if (block.use_stp()) n += block.stp.parameter_count();
  }
  return n;
}

void check_ordering(AblationReport& report, const ModelConfig& base) {
  const auto& rows = report.rows;
  auto find = [&](const std::string& name) -> const AblationRow& {
    for (const auto& r : rows) {
      if (r.name == name) return r;
    }
    throw ContractError("ablation row " + name + " missing");
  };
  const auto& full = find("full");
  for (const auto& r : rows) {
    if (r.name != "full" && r.parameters <= full.parameters) {
      report.ordering_violations.push_back("full (" + std::to_string(full.parameters) +
                                           ") is not strictly smaller than " + r.name + " (" +
                                           std::to_string(r.parameters) + ")");
    }
  }
  const std::pair<const char*, const char*> srb_pairs[] = {
      {"no_srb", "full"}, {"no_srb_no_sca", "no_sca"}, {"no_srb_no_stp", "no_stp"}};
  for (const auto& [without, with] : srb_pairs) {
    const auto& a = find(without);
    const auto& b = find(with);
    if (a.parameters <= b.parameters) {
      report.ordering_violations.push_back(std::string("removing SRB does not increase the count: ") + without + " (" +
                                           std::to_string(a.parameters) + ") vs " + with + " (" +
                                           std::to_string(b.parameters) + ")");
    }
  }
  // STP audit: the difference must be exactly the STP blocks' own count.
  DepthModel<float> full_model(with_toggles(base, full), 0);
  const std::size_t stp = stp_parameter_count(full_model);
  const auto& no_stp = find("no_stp");
  if (full.parameters - no_stp.parameters != stp) {
    report.ordering_violations.push_back("STP audit: full - no_stp = " +
                                         std::to_string(full.parameters - no_stp.parameters) +
                                         " but the STP blocks hold " + std::to_string(stp));
  }
}

}  // namespace

AblationReport ablation_parameter_counts(const ModelConfig& base) {
  AblationReport report;
  for (auto row : ablation_configurations()) {
    DepthModel<float> model(with_toggles(base, row), 0);
    row.parameters = model.parameter_count();
    report.rows.push_back(row);
  }
  check_ordering(report, base);
  return report;
}

AblationReport ablate(const RunConfig& base, const std::string& eval_split, bool train_rows) {
  AblationReport report;
  std::vector<ImageSample> train_samples, eval_samples;
  if (train_rows) {
    const auto manifest = read_manifest(base.manifest);
    train_samples = load_split(manifest, "train", base.model.height, base.model.width);
    eval_samples = load_split(manifest, eval_split, base.model.height, base.model.width);
    if (train_samples.empty()) throw ManifestError(base.manifest + ": no train records");
    if (eval_samples.empty()) throw ManifestError(base.manifest + ": no " + eval_split + " records");
  }
  for (auto row : ablation_configurations()) {
    const auto start = std::chrono::steady_clock::now();
    try {
      RunConfig cfg = base;
      cfg.model = with_toggles(base.model, row);
      row.parameters = DepthModel<float>(cfg.model, cfg.optim.seed).parameter_count();
      if (train_rows) {
        TrainOptions options;
        options.write_outputs = false;
        options.quiet = true;
        const auto trained = train_on(cfg, train_samples, options);
        row.metrics = evaluate_model(*trained.model, eval_samples, cfg.align == "median").aggregate().depth;
      }
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.rows.push_back(row);
  }
  check_ordering(report, base.model);
  return report;
}

nlohmann::json AblationReport::json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j{{"name", r.name},           {"use_srb", r.use_srb}, {"use_sca", r.use_sca},
                     {"use_stp", r.use_stp},     {"parameters", r.parameters},
                     {"metrics", r.metrics},     {"seconds", r.seconds}};
    if (!r.failure.empty()) j["failure"] = r.failure;
    rows_json.push_back(j);
  }
  return {{"rows", rows_json},
          {"reference_parameters_full", 79.67e6},
          {"ordering_violations", ordering_violations}};
}

std::string AblationReport::csv() const {
  std::ostringstream out;
  out << "name,use_srb,use_sca,use_stp,parameters,abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3,seconds,failure\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << r.name << ',' << r.use_srb << ',' << r.use_sca << ',' << r.use_stp << ',' << r.parameters << ','
        << m.abs_rel << ',' << m.sq_rel << ',' << m.rmse << ',' << m.rmse_log << ',' << m.delta1 << ',' << m.delta2
        << ',' << m.delta3 << ',' << r.seconds << ",\"" << r.failure << "\"\n";
  }
  return out.str();
}

}  // namespace panodepth
