#include "arp/eval.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>

namespace arp::eval {

using nlohmann::json;

namespace {

double two_proportion_half_width(double p1, double p2, int n) {
    return 1.96 * std::sqrt(p1 * (1 - p1) / n + p2 * (1 - p2) / n);
}

AblationArm make_arm(const EvalReport& r, const EvalReport& baseline) {
    AblationArm arm;
    arm.mode = r.mode;
    arm.success_rate = r.success_rate;
    arm.mean_task_loss = r.mean_task_loss;
    arm.delta_success = 100.0 * (r.success_rate - baseline.success_rate);
    arm.delta_interval =
        100.0 * two_proportion_half_width(r.success_rate, baseline.success_rate, r.episodes);
    return arm;
}

} // namespace

AblationReport ablation_suite(Models& models, int seeds_per_template, int template_id) {
    if (!models.planner_noar || !models.planner_ar || !models.ar || !models.ar_sup ||
        !models.invdyn) {
        fail("ablation_suite: all four planner arms plus inverse dynamics are required");
    }
    const auto seeds = eval_seeds(seeds_per_template, template_id);

    AblationReport out;
    out.template_id = template_id;
    out.episodes = seeds_per_template;

    const EvalReport none = run_success_rate(models, seeds, template_id, PlanMode::none);
    const EvalReport pred = run_success_rate(models, seeds, template_id, PlanMode::pred);
    const EvalReport pred_sup = run_success_rate(models, seeds, template_id, PlanMode::pred_sup);
    const EvalReport gt = run_success_rate(models, seeds, template_id, PlanMode::gt);
    const EvalReport random = run_success_rate(models, seeds, template_id, PlanMode::random);
    const EvalReport gt_lat = run_success_rate(models, seeds, template_id, PlanMode::gt_latents);

    out.arms = {make_arm(none, none), make_arm(pred, none), make_arm(pred_sup, none),
                make_arm(gt, none)};
    out.random_baseline = make_arm(random, none);
    out.gt_latents = make_arm(gt_lat, none);
    out.reports["none"] = none;
    out.reports["pred"] = pred;
    out.reports["pred-sup"] = pred_sup;
    out.reports["gt"] = gt;
    out.reports["random"] = random;
    out.reports["gt-latents"] = gt_lat;
    return out;
}

std::string ablation_to_json(const AblationReport& r) {
    json doc;
    doc["template_id"] = r.template_id;
    doc["episodes"] = r.episodes;
    auto arm_json = [](const AblationArm& a) {
        return json{{"mode", a.mode},
                    {"success_rate", a.success_rate},
                    {"mean_task_loss", a.mean_task_loss},
                    {"delta_success_points", a.delta_success},
                    {"delta_interval_points", a.delta_interval}};
    };
    doc["arms"] = json::array();
    for (const auto& a : r.arms) doc["arms"].push_back(arm_json(a));
    doc["random_baseline"] = arm_json(r.random_baseline);
    doc["gt_latents"] = arm_json(r.gt_latents);
    doc["reports"] = json::object();
    for (const auto& [k, v] : r.reports) doc["reports"][k] = json::parse(report_to_json(v));
    return doc.dump(2);
}

std::string ablation_table(const AblationReport& r) {
    static const char* kLabels[] = {"w/o Active Region", "+Active Region (unsup)",
                                    "+Active Region (sup)", "+Active Region (GT)"};
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "template %d, %d episodes per arm\n", r.template_id,
                  r.episodes);
    out += line;
    std::snprintf(line, sizeof(line), "%-26s %10s %8s %12s %10s\n", "arm", "success", "delta",
                  "interval", "task loss");
    out += line;
    for (size_t i = 0; i < r.arms.size(); ++i) {
        const auto& a = r.arms[i];
        std::snprintf(line, sizeof(line), "%-26s %9.1f%% %+7.1f %8.1f pts %10.4f\n", kLabels[i],
                      100.0 * a.success_rate, a.delta_success, a.delta_interval,
                      a.mean_task_loss);
        out += line;
    }
    std::snprintf(line, sizeof(line), "%-26s %9.1f%% %+7.1f %8.1f pts %10.4f\n", "random actions",
                  100.0 * r.random_baseline.success_rate, r.random_baseline.delta_success,
                  r.random_baseline.delta_interval, r.random_baseline.mean_task_loss);
    out += line;
    std::snprintf(line, sizeof(line), "%-26s %9.1f%% %+7.1f %8.1f pts %10.4f\n",
                  "gt latents (decoder ref)", 100.0 * r.gt_latents.success_rate,
                  r.gt_latents.delta_success, r.gt_latents.delta_interval,
                  r.gt_latents.mean_task_loss);
    out += line;
    return out;
}

} // namespace arp::eval
