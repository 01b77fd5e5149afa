#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "layoutforge/condition.hpp"
#include "layoutforge/dataio.hpp"
#include "layoutforge/denoiser.hpp"
#include "layoutforge/diffusion.hpp"
#include "layoutforge/layout.hpp"
#include "layoutforge/metrics.hpp"
#include "layoutforge/raster.hpp"
#include "layoutforge/rng.hpp"
#include "layoutforge/rules.hpp"
#include "layoutforge/sampler.hpp"
#include "layoutforge/train.hpp"

namespace layoutforge {

/// Produces a layout for validation item `index` from its condition.
using Generator = std::function<Layout(std::size_t index, const CorpusItem& item, std::uint64_t seed)>;

struct ItemRow {
  std::size_t index = 0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double alignment = 0.0;
  int violations = 0;
  std::size_t components = 0;

  friend bool operator==(const ItemRow&, const ItemRow&) = default;
};

struct EvalReport {
  std::string label;
  std::size_t samples = 0;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;
  double layout_fd = 0.0;
  double mean_alignment = 0.0;
  long total_violations = 0;
  std::uint64_t config_hash = 0;
  std::vector<ItemRow> rows;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct EvalOptions {
  std::uint64_t seed = 0;
  std::size_t max_items = 0;  // 0 = whole validation split
  RuleConfig rules{};
  nlohmann::json config = nlohmann::json::object();  // hashed into the report
};

namespace detail {
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}
}  // namespace detail

/// Generates one layout per validation item (seeded per item), compares its
/// raster to the item's ground truth, and computes layout-FD between the
/// generated and validation sets.
inline EvalReport evaluate(const Generator& generate, const Corpus& corpus, const EvalOptions& opts,
                           std::string label = "model") {
  if (corpus.validation.empty()) throw DataError("validation split is empty", "data.split_ratio");
  std::vector<std::size_t> indices = corpus.validation;
  if (opts.max_items > 0 && indices.size() > opts.max_items) indices.resize(opts.max_items);

  EvalReport report;
  report.label = std::move(label);
  report.config_hash = fnv1a(opts.config.dump());
  std::vector<Layout> generated, reference;
  std::vector<double> psnrs, ssims;
  double alignment_sum = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& item = corpus.items[indices[k]];
    const Layout out = generate(indices[k], item, derive_seed(opts.seed, indices[k]));
    Layout out_canvas = out;
    out_canvas.canvas_width = item.layout.canvas_width;
    out_canvas.canvas_height = item.layout.canvas_height;
    const auto gen_img = rasterize(out_canvas);
    const auto ref_img = rasterize(item.layout);
    ItemRow row;
    row.index = indices[k];
    row.psnr_db = psnr(gen_img, ref_img);
    row.ssim = ssim(gen_img, ref_img);
    row.alignment = alignment_score(out, opts.rules);
    row.violations = spacing_violations(out, opts.rules);
    row.components = visible_only(out).size();
    psnrs.push_back(row.psnr_db);
    ssims.push_back(row.ssim);
    alignment_sum += row.alignment;
    report.total_violations += row.violations;
    report.rows.push_back(row);
    generated.push_back(out);
    reference.push_back(item.layout);
  }
  report.samples = indices.size();
  std::tie(report.psnr_mean, report.psnr_std) = detail::mean_std(psnrs);
  std::tie(report.ssim_mean, report.ssim_std) = detail::mean_std(ssims);
  report.mean_alignment = alignment_sum / static_cast<double>(indices.size());
  report.layout_fd = layout_fd(generated, reference, opts.rules);
  return report;
}

inline nlohmann::json to_json(const EvalReport& r) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.config_hash));
  return {{"label", r.label},
          {"samples", r.samples},
          {"psnr_db", {{"mean", r.psnr_mean}, {"std", r.psnr_std}}},
          {"ssim", {{"mean", r.ssim_mean}, {"std", r.ssim_std}}},
          {"layout_fd", r.layout_fd},
          {"rules", {{"mean_alignment", r.mean_alignment}, {"total_violations", r.total_violations}}},
          {"config_hash", hash}};
}

/// Inverse of to_json; per-item rows are not part of the JSON form.
inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.label = j.at("label").get<std::string>();
  r.samples = j.at("samples").get<std::size_t>();
  r.psnr_mean = j.at("psnr_db").at("mean").get<double>();
  r.psnr_std = j.at("psnr_db").at("std").get<double>();
  r.ssim_mean = j.at("ssim").at("mean").get<double>();
  r.ssim_std = j.at("ssim").at("std").get<double>();
  r.layout_fd = j.at("layout_fd").get<double>();
  r.mean_alignment = j.at("rules").at("mean_alignment").get<double>();
  r.total_violations = j.at("rules").at("total_violations").get<long>();
  r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  return r;
}

inline std::string rows_to_csv(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "index,psnr_db,ssim,alignment,violations,components\n";
  for (const auto& row : r.rows) {
    os << row.index << ',' << row.psnr_db << ',' << row.ssim << ',' << row.alignment << ',' << row.violations << ','
       << row.components << '\n';
  }
  return os.str();
}

/// Aligned text table, one line per report.
inline std::string format_table(const std::vector<EvalReport>& reports, const std::string& first_column = "Model") {
  std::size_t width = first_column.size();
  for (const auto& r : reports) width = std::max(width, r.label.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width) + 2) << first_column << std::right << std::setw(10) << "PSNR"
     << std::setw(10) << "SSIM" << std::setw(12) << "layout-FD" << std::setw(12) << "alignment" << std::setw(12)
     << "violations" << '\n';
  os << std::fixed;
  for (const auto& r : reports) {
    os << std::left << std::setw(static_cast<int>(width) + 2) << r.label << std::right << std::setprecision(2)
       << std::setw(10) << r.psnr_mean << std::setprecision(3) << std::setw(10) << r.ssim_mean << std::setprecision(3)
       << std::setw(12) << r.layout_fd << std::setprecision(3) << std::setw(12) << r.mean_alignment << std::setw(12)
       << r.total_violations << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Generators

/// Trained denoiser plus the sampling-time switches the ablations toggle.
struct ModelSetup {
  const DenoiserParams* params = nullptr;
  const DiffusionSchedule* schedule = nullptr;
  bool use_condition = true;
  int projection_every = 25;
  bool feedback = false;
  int refine_t_start = 0;  // 0 = T / 2
  double pin_fraction = 0.25;
  RuleConfig rules{};
};

/// Components with the most aligned relations; ceil(fraction * n), at least 1.
inline std::set<std::size_t> best_aligned_components(const Layout& layout, double fraction, const RuleConfig& rules) {
  std::set<std::size_t> pins;
  if (layout.components.empty()) return pins;
  const auto matches = alignment_matches(layout, rules);
  std::vector<std::size_t> order(layout.components.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return matches[a] > matches[b]; });
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(layout.components.size()))));
  for (std::size_t i = 0; i < k && i < order.size(); ++i) pins.insert(order[i]);
  return pins;
}

inline constexpr std::uint64_t kStreamFeedback = 0xFEEDBAC4ULL;

inline Generator model_generator(const ModelSetup& m) {
  return [m](std::size_t, const CorpusItem& item, std::uint64_t seed) {
    SamplerConfig cfg;
    cfg.seed = seed;
    cfg.projection_every = m.projection_every;
    cfg.rules = m.rules;
    if (m.use_condition) cfg.condition = item.condition;
    Layout out = sample(cfg, *m.params, *m.schedule);
    if (m.feedback && !out.components.empty()) {
      cfg.seed = derive_seed(seed, kStreamFeedback);
      const int t_start = m.refine_t_start > 0 ? m.refine_t_start : std::max(1, m.schedule->steps() / 2);
      out = visible_only(refine(out, best_aligned_components(out, m.pin_fraction, m.rules), cfg, t_start, *m.params,
                                *m.schedule));
    }
    return out;
  };
}

/// Returns the ground-truth layout: an upper bound for every metric.
inline Generator identity_generator() {
  return [](std::size_t, const CorpusItem& item, std::uint64_t) { return item.layout; };
}

/// Uniformly random boxes, types and colors.
inline Layout random_layout(Rng& rng) {
  Layout out;
  const int n = 3 + static_cast<int>(rng.below(10));
  for (int i = 0; i < n; ++i) {
    Component c;
    c.type = static_cast<ComponentType>(rng.below(kNumTypes));
    c.w = rng.uniform(0.05, 0.6);
    c.h = rng.uniform(0.03, 0.3);
    c.cx = rng.uniform(0.5 * c.w, 1.0 - 0.5 * c.w);
    c.cy = rng.uniform(0.5 * c.h, 1.0 - 0.5 * c.h);
    c.color = {rng.uniform(), rng.uniform(), rng.uniform()};
    out.components.push_back(c);
  }
  return out;
}

inline Generator random_generator() {
  return [](std::size_t, const CorpusItem&, std::uint64_t seed) {
    Rng rng(seed);
    return random_layout(rng);
  };
}

/// Validation layouts with non-background component centers permuted across
/// the whole set: realistic parts, unstructured arrangement.
inline std::vector<Layout> shuffled_baseline(std::span<const Layout> layouts, std::uint64_t seed) {
  std::vector<std::pair<double, double>> centers;
  for (const auto& l : layouts)
    for (const auto& c : l.components)
      if (rule_participant(c)) centers.emplace_back(c.cx, c.cy);
  Rng rng(seed);
  rng.shuffle(centers.begin(), centers.end());
  std::vector<Layout> out(layouts.begin(), layouts.end());
  std::size_t k = 0;
  for (auto& l : out)
    for (auto& c : l.components)
      if (rule_participant(c)) std::tie(c.cx, c.cy) = centers[k++];
  return out;
}

// ---------------------------------------------------------------------------
// Ablation suite

inline constexpr const char* kFullModelLabel = "Full Model (Ours)";
inline constexpr const char* kNoConditionLabel = "Without Conditional Inputs";
inline constexpr const char* kNoDesignLabel = "Without Design Optimization";
inline constexpr const char* kNoFeedbackLabel = "Without Feedback Mechanism";

struct AblationConfig {
  TrainConfig train{};
  DenoiserDims dims{};
  int projection_every = 25;
  int refine_t_start = 0;
  RuleConfig rules{};
  EvalOptions eval{};
};

struct AblationVariant {
  std::string label;
  TrainConfig train;
  bool use_condition = true;
  int projection_every = 25;
  bool feedback = true;
};

/// The four variants; each differs from the full model only in its flags.
inline std::vector<AblationVariant> ablation_variants(const AblationConfig& base) {
  AblationVariant full{kFullModelLabel, base.train, true, base.projection_every, true};
  AblationVariant no_cond = full;
  no_cond.label = kNoConditionLabel;
  no_cond.train.condition_dropout_p = 1.0;
  no_cond.use_condition = false;
  AblationVariant no_design = full;
  no_design.label = kNoDesignLabel;
  no_design.train.design_penalty_lambda = 0.0;
  no_design.projection_every = 0;
  AblationVariant no_feedback = full;
  no_feedback.label = kNoFeedbackLabel;
  no_feedback.feedback = false;
  return {full, no_cond, no_design, no_feedback};
}

using ProgressCallback = std::function<void(const std::string& variant, int epoch, double loss)>;

/// Trains and evaluates every variant. Variants whose training config equals
/// one already trained reuse those weights (training is deterministic).
inline std::vector<EvalReport> ablation_suite(const Corpus& corpus, const DiffusionSchedule& sched,
                                              const AblationConfig& base, const ProgressCallback& progress = {}) {
  if (corpus.train.empty()) throw DataError("training split is empty", "data.split_ratio");
  std::vector<TrainingExample> data;
  data.reserve(corpus.train.size());
  for (auto i : corpus.train) data.push_back(make_example(corpus.items[i].layout, corpus.items[i].condition));

  struct Trained {
    nlohmann::json key;
    DenoiserParams params;
  };
  std::vector<Trained> cache;
  std::vector<EvalReport> reports;
  for (const auto& v : ablation_variants(base)) {
    const auto key = to_json(v.train);
    auto it = std::find_if(cache.begin(), cache.end(), [&](const Trained& t) { return t.key == key; });
    if (it == cache.end()) {
      auto params = train(data, v.train, sched, base.dims, [&](int epoch, double loss) {
        if (progress) progress(v.label, epoch, loss);
      });
      cache.push_back({key, std::move(params)});
      it = cache.end() - 1;
    }
    ModelSetup setup;
    setup.params = &it->params;
    setup.schedule = &sched;
    setup.use_condition = v.use_condition;
    setup.projection_every = v.projection_every;
    setup.feedback = v.feedback;
    setup.refine_t_start = base.refine_t_start;
    setup.rules = base.rules;
    EvalOptions opts = base.eval;
    opts.rules = base.rules;
    opts.config = {{"variant", v.label},
                   {"train", key},
                   {"use_condition", v.use_condition},
                   {"projection_every", v.projection_every},
                   {"feedback", v.feedback}};
    reports.push_back(evaluate(model_generator(setup), corpus, opts, v.label));
  }
  return reports;
}

}  // namespace layoutforge
