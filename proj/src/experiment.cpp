// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>

#include "augflat/checkpoint.hpp"
#include "augflat/harness.hpp"
#include "augflat/numerics.hpp"

namespace augflat::harness {

namespace {

constexpr uint64_t kFlatSeed = 0xf1a7;
constexpr uint64_t kMceSeed = 0x40b;
constexpr uint64_t kAtkSeed = 0xa77;
constexpr uint64_t kPsaSeed = 0x95a;

flatness::FlatnessConfig flatness_from_json(const nlohmann::json& j) {
  flatness::FlatnessConfig cfg = j.value("preset", std::string("cifar")) == "inet"
                                     ? flatness::inet_preset()
                                     : flatness::cifar_preset();
  cfg.tau = j.value("tau", cfg.tau);
  cfg.sigma_lpf = j.value("sigma_lpf", cfg.sigma_lpf);
  cfg.rho_sharp = j.value("rho_sharp", cfg.rho_sharp);
  cfg.mc_samples = j.value("mc_samples", cfg.mc_samples);
  cfg.tol_b = j.value("tol_b", cfg.tol_b);
  if (j.contains("search")) {
    cfg.search.lo = j["search"].value("lo", cfg.search.lo);
    cfg.search.hi = j["search"].value("hi", cfg.search.hi);
    cfg.search.iters = j["search"].value("iters", cfg.search.iters);
  }
  flatness::validate(cfg);
  return cfg;
}

struct Metric {
  std::string name;
  bool lower_better = true;
  std::function<std::optional<double>(const RunRecord&)> get;
};

std::vector<Metric> metric_table(const std::vector<std::string>& attacks) {
  std::vector<Metric> ms;
  ms.push_back({"test_err", true, [](const RunRecord& r) { return r.test_error; }});
  ms.push_back({"mu_pac_bayes", true, [](const RunRecord& r) { return r.flat.pac.mu; }});
  ms.push_back({"lpf", true, [](const RunRecord& r) { return r.flat.lpf.value; }});
  ms.push_back({"eps_sharp", true, [](const RunRecord& r) { return r.flat.sharp.value; }});
  ms.push_back({"b_hat", false, [](const RunRecord& r) { return r.flat.bflat.b_hat; }});
  ms.push_back({"mce", true, [](const RunRecord& r) { return r.robust.mce; }});
  for (const std::string& a : attacks) {
    ms.push_back({"adv_" + a, true, [a](const RunRecord& r) -> std::optional<double> {
                    for (const auto& [name, err] : r.robust.adv_error)
                      if (name == a) return err;
                    return std::nullopt;
                  }});
  }
  return ms;
}

std::optional<double> arm_mean(const std::vector<const RunRecord*>& runs, const Metric& m) {
  std::vector<double> vals;
  for (const RunRecord* r : runs) {
    std::optional<double> v = m.get(*r);
    if (v) vals.push_back(*v);
  }
  if (vals.empty()) return std::nullopt;
  return pairwise_mean(vals);
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  if (cfg.arms.empty()) throw std::invalid_argument("experiment: no arms");
  int erm_count = 0;
  for (const Arm& a : cfg.arms) {
    if (a.name.empty()) throw std::invalid_argument("experiment: unnamed arm");
    if (a.name == "erm") ++erm_count;
    validate(a.train);
  }
  if (erm_count != 1) throw std::invalid_argument("experiment: exactly one arm must be named erm");
  if (cfg.seeds.empty()) throw std::invalid_argument("experiment: at least one seed required");
  if (cfg.psa_thresholds.empty()) throw std::invalid_argument("experiment: no psa thresholds");
  if (cfg.psa_n < 1) throw std::invalid_argument("experiment: psa_n must be >= 1");
  for (const std::string& a : cfg.attacks) robustness::attack_preset(a);
  flatness::validate(cfg.flatness_cfg);
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.name = j.value("name", cfg.name);
  const nlohmann::json& ds = j.at("dataset");
  if (ds.contains("path")) {
    cfg.dataset_path = ds["path"].get<std::string>();
  } else {
    cfg.dataset = synthetic_from_json(ds);
  }
  cfg.dataset_seed = ds.value("seed", 0ULL);
  cfg.scale = nnet::pixel_scale_from_string(ds.value("scale", std::string("unit")));
  cfg.arch = nnet::arch_from_json(j.at("model"));
  for (const auto& arm : j.at("arms"))
    cfg.arms.push_back(Arm{arm.at("name").get<std::string>(),
                           train_config_from_json(arm.value("train", nlohmann::json::object()))});
  cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  if (j.contains("flatness")) cfg.flatness_cfg = flatness_from_json(j["flatness"]);
  if (j.contains("attacks")) cfg.attacks = j["attacks"].get<std::vector<std::string>>();
  if (j.contains("psa")) {
    const nlohmann::json& p = j["psa"];
    if (p.contains("thresholds")) cfg.psa_thresholds = p["thresholds"].get<std::vector<double>>();
    cfg.psa_gamma_star = p.value("gamma_star", cfg.psa_gamma_star);
    cfg.psa_n = p.value("n", cfg.psa_n);
  }
  validate(cfg);
  return cfg;
}

nlohmann::json record_to_json(const RunRecord& r) {
  nlohmann::json j;
  j["arm"] = r.arm;
  j["seed"] = r.seed;
  j["error"] = r.error;
  if (!r.error.empty()) return j;
  j["train_error"] = r.train_error;
  j["test_error"] = r.test_error;
  j["epochs_run"] = r.epochs_run;
  j["early_stopped"] = r.early_stopped;
  j["checkpoint"] = r.checkpoint;
  j["flatness"] = {{"mu_pac_bayes", r.flat.pac.mu},
                   {"sigma_star", r.flat.pac.sigma_star},
                   {"pac_stderr", r.flat.pac.mc_stderr},
                   {"pac_saturated", r.flat.pac.saturated},
                   {"lpf", r.flat.lpf.value},
                   {"lpf_stderr", r.flat.lpf.mc_stderr},
                   {"eps_sharp", r.flat.sharp.value},
                   {"b_hat", r.flat.bflat.b_hat},
                   {"b_stderr", r.flat.bflat.mc_stderr},
                   {"b_saturated", r.flat.bflat.saturated}};
  nlohmann::json adv = nlohmann::json::array();
  for (const auto& [name, err] : r.robust.adv_error) adv.push_back({{"name", name}, {"error", err}});
  nlohmann::json grid = nlohmann::json::array();
  for (const robustness::CorruptionCell& c : r.robust.grid)
    grid.push_back(
        {{"kind", robustness::to_string(c.kind)}, {"severity", c.severity}, {"error", c.error}});
  j["robustness"] = {{"clean_error", r.robust.clean_error},
                     {"mce", r.robust.mce},
                     {"adv", adv},
                     {"grid", grid}};
  if (r.psa) {
    nlohmann::json ecdf = nlohmann::json::array();
    for (const auto& [t, f] : r.psa->ecdf_at) ecdf.push_back({t, f});
    j["psa"] = {{"gamma_star", r.psa->gamma_star},
                {"gamma_a_hat", r.psa->gamma_a_hat},
                {"compliant", r.psa->compliant},
                {"ecdf", ecdf}};
  } else {
    j["psa"] = nullptr;
    j["psa_skip_reason"] = r.psa_skip_reason;
  }
  return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.arm = j.at("arm").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.error = j.value("error", std::string());
  if (!r.error.empty()) return r;
  r.train_error = j.at("train_error").get<double>();
  r.test_error = j.at("test_error").get<double>();
  r.epochs_run = j.at("epochs_run").get<int>();
  r.early_stopped = j.at("early_stopped").get<bool>();
  r.checkpoint = j.value("checkpoint", std::string());
  const nlohmann::json& f = j.at("flatness");
  r.flat.pac.mu = f.at("mu_pac_bayes").get<double>();
  r.flat.pac.sigma_star = f.at("sigma_star").get<double>();
  r.flat.pac.mc_stderr = f.at("pac_stderr").get<double>();
  r.flat.pac.saturated = f.at("pac_saturated").get<int>();
  r.flat.lpf.value = f.at("lpf").get<double>();
  r.flat.lpf.mc_stderr = f.at("lpf_stderr").get<double>();
  r.flat.sharp.value = f.at("eps_sharp").get<double>();
  r.flat.bflat.b_hat = f.at("b_hat").get<double>();
  r.flat.bflat.mc_stderr = f.at("b_stderr").get<double>();
  r.flat.bflat.saturated = f.at("b_saturated").get<int>();
  const nlohmann::json& rb = j.at("robustness");
  r.robust.clean_error = rb.at("clean_error").get<double>();
  r.robust.mce = rb.at("mce").get<double>();
  for (const auto& a : rb.at("adv"))
    r.robust.adv_error.emplace_back(a.at("name").get<std::string>(), a.at("error").get<double>());
  for (const auto& c : rb.at("grid"))
    r.robust.grid.push_back(robustness::CorruptionCell{
        robustness::corruption_from_string(c.at("kind").get<std::string>()),
        c.at("severity").get<int>(), c.at("error").get<double>()});
  if (j.contains("psa") && !j["psa"].is_null()) {
    augment::PsaReport p;
    p.gamma_star = j["psa"].at("gamma_star").get<double>();
    p.gamma_a_hat = j["psa"].at("gamma_a_hat").get<double>();
    p.compliant = j["psa"].at("compliant").get<bool>();
    for (const auto& e : j["psa"].at("ecdf"))
      p.ecdf_at.emplace_back(e[0].get<double>(), e[1].get<double>());
    r.psa = p;
  } else {
    r.psa_skip_reason = j.value("psa_skip_reason", std::string());
  }
  return r;
}

std::string format_delta(double value, double baseline) {
  std::string s = format_double("%+.2f", value - baseline);
  if (s == "+0.00" || s == "-0.00") return "0.00";
  return s;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  validate(cfg);
  std::filesystem::create_directories(out_dir);

  nnet::Dataset full = cfg.dataset_path ? nnet::load_auto(*cfg.dataset_path, cfg.scale)
                                        : make_synthetic(cfg.dataset, cfg.dataset_seed);
  SplitDataset split = split_dataset(full);

  std::vector<RunRecord> records;
  std::vector<std::pair<std::string, double>> timings;

  for (const Arm& arm : cfg.arms) {
    for (uint64_t run_seed : cfg.seeds) {
      RunRecord rec;
      rec.arm = arm.name;
      rec.seed = run_seed;
      auto t0 = std::chrono::steady_clock::now();
      try {
        nnet::Model model(cfg.arch);
        TrainConfig tc = arm.train;
        tc.seed = run_seed;
        TrainResult tr = train(model, split.train, tc);
        rec.epochs_run = static_cast<int>(tr.epoch_loss.size());
        rec.early_stopped = tr.early_stopped;
        rec.train_error = nnet::dataset_error(model, tr.params, split.train);
        rec.test_error = nnet::dataset_error(model, tr.params, split.test);

        std::string ckpt_name = "ckpt-" + arm.name + "-s" + std::to_string(run_seed) + ".bin";
        nnet::save_checkpoint(out_dir + "/" + ckpt_name, model, tr.params, tc.dtype, run_seed);
        rec.checkpoint = ckpt_name;

        flatness::FlatnessConfig fc = cfg.flatness_cfg;
        fc.seed = seed_mix(run_seed, kFlatSeed);
        rec.flat = flatness::evaluate(model, tr.params, split.train, fc, tc.loss);

        rec.robust = robustness::mce(model, tr.params, split.test, robustness::all_corruptions(),
                                     {1, 2, 3, 4, 5}, seed_mix(run_seed, kMceSeed));
        for (size_t a = 0; a < cfg.attacks.size(); ++a) {
          robustness::AttackConfig atk = robustness::attack_preset(cfg.attacks[a]);
          rec.robust.adv_error.emplace_back(
              cfg.attacks[a],
              robustness::adversarial_error(model, tr.params, split.test, atk,
                                            seed_mix(run_seed, kAtkSeed, a), tc.loss));
        }

        if (tc.augmentation) {
          rec.psa = augment::psa_score(*tc.augmentation, split.train, cfg.psa_thresholds,
                                       cfg.psa_gamma_star, cfg.psa_n, seed_mix(run_seed, kPsaSeed));
        } else {
          rec.psa_skip_reason = "arm has no augmentation";
        }
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      timings.emplace_back(arm.name + "/s" + std::to_string(run_seed), secs);
      records.push_back(std::move(rec));
    }
  }

  write_reports(cfg, records, out_dir);

  std::ofstream tlog(out_dir + "/timings.txt");
  for (const auto& [label, secs] : timings) tlog << label << ' ' << format_double("%.3f", secs) << '\n';
  return records;
}

void write_reports(const ExperimentConfig& cfg, const std::vector<RunRecord>& records,
                   const std::string& out_dir) {
  if (records.empty()) throw std::invalid_argument("write_reports: no records");
  std::filesystem::create_directories(out_dir);

  nlohmann::json all = nlohmann::json::array();
  for (const RunRecord& r : records) all.push_back(record_to_json(r));
  std::ofstream jf(out_dir + "/records.json");
  jf << all.dump(2) << '\n';

  std::vector<Metric> metrics = metric_table(cfg.attacks);

  std::vector<const RunRecord*> erm_runs;
  for (const RunRecord& r : records)
    if (r.arm == "erm" && r.error.empty()) erm_runs.push_back(&r);

  std::ofstream csv(out_dir + "/summary.csv");
  csv << "arm,runs,train_err,psa_F_star,psa_gamma_hat,psa_compliant";
  for (const Metric& m : metrics) csv << ',' << m.name;
  csv << ",improvement_rate\n";

  for (const Arm& arm : cfg.arms) {
    std::vector<const RunRecord*> runs;
    for (const RunRecord& r : records)
      if (r.arm == arm.name && r.error.empty()) runs.push_back(&r);

    csv << arm.name << ',' << runs.size();

    if (runs.empty()) {
      csv << ",-,-,-,-";
      for (size_t i = 0; i < metrics.size(); ++i) csv << ",-";
      csv << ",-\n";
      continue;
    }

    std::vector<double> terr;
    for (const RunRecord* r : runs) terr.push_back(r->train_error);
    csv << ',' << format_double("%.4f", pairwise_mean(terr));

    bool has_psa = true;
    for (const RunRecord* r : runs) has_psa = has_psa && r->psa.has_value();
    if (has_psa) {
      std::vector<double> fstar, ghat;
      bool compliant = true;
      for (const RunRecord* r : runs) {
        double f = 0.0;
        for (const auto& [t, v] : r->psa->ecdf_at)
          if (t <= r->psa->gamma_star) f = v;
        fstar.push_back(f);
        ghat.push_back(r->psa->gamma_a_hat);
        compliant = compliant && r->psa->compliant;
      }
      csv << ',' << format_double("%.4f", pairwise_mean(fstar)) << ','
          << format_double("%.4f", pairwise_mean(ghat)) << ',' << (compliant ? "yes" : "no");
    } else {
      csv << ",-,-,-";
    }

    int wins = 0, comparable = 0;
    for (const Metric& m : metrics) {
      std::optional<double> mean = arm_mean(runs, m);
      if (!mean) {
        csv << ",-";
        continue;
      }
      std::optional<double> base = erm_runs.empty() ? std::nullopt : arm_mean(erm_runs, m);
      if (base) {
        csv << ',' << format_double("%.4f", *mean) << " (" << format_delta(*mean, *base) << ")";
        if (arm.name != "erm") {
          ++comparable;
          if (m.lower_better ? *mean < *base : *mean > *base) ++wins;
        }
      } else {
        csv << ',' << format_double("%.4f", *mean);
      }
    }

    if (arm.name == "erm" || comparable == 0)
      csv << ",-\n";
    else
      csv << ',' << wins << '/' << comparable << '\n';
  }
}

}  // namespace augflat::harness
