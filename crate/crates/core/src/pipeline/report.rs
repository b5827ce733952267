//! Text rendering for run reports, phase analytics, and the settings
//! comparison table.

use super::{AnalysisReport, AnalysisSetting, PhaseAnalysis, RunReport, SURROGATE_DISCLAIMER};
use crate::config::SelectionMode;
use crate::select::DifficultyStats;
use crate::textfmt::Sections;

pub fn render_report(report: &RunReport) -> String {
    let mut s = Sections::new();
    s.set("report", "config_hash", &report.config_hash);
    s.set(
        "report",
        "mode",
        match report.mode {
            SelectionMode::Curriculum => "curriculum",
            SelectionMode::SelfEvolved => "self_evolved",
        },
    );
    s.set("report", "phases", report.records.len());
    if report.surrogate {
        s.set("report", "note", SURROGATE_DISCLAIMER);
    }
    s.set("report", "manifest", report.manifest_path.display());
    s.set("report", "coreset", report.coreset_path.display());
    s.set("report", "wall_time_secs", report.wall_time_secs);

    s.set("evaluation", "seeds", report.evaluation.accuracies.len());
    s.set(
        "evaluation",
        "accuracies",
        report
            .evaluation
            .accuracies
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    s.set("evaluation", "mean", report.evaluation.mean);
    s.set("evaluation", "std", report.evaluation.std);

    for r in &report.records {
        let name = format!("phase {}", r.phase);
        set_opt(&mut s, &name, "synthetic_accuracy", r.synthetic_accuracy);
        set_opt(&mut s, &name, "pool_accuracy", r.pool_accuracy);
        set_opt(&mut s, &name, "holdout_accuracy", r.holdout_accuracy);
        s.set(&name, "selected", r.selected.len());
        s.set(&name, "backfill", r.backfill_count);
        set_stats(&mut s, &name, r.difficulty.as_ref());
    }
    s.render()
}

pub fn render_phase_analysis(analysis: &PhaseAnalysis) -> String {
    let mut s = Sections::new();
    s.set("phase_analysis", "phases", analysis.rows.len());
    s.set(
        "phase_analysis",
        "filter_accuracy_nondecreasing",
        analysis.filter_accuracy_nondecreasing,
    );
    s.set(
        "phase_analysis",
        "mean_difficulty_increasing",
        analysis.mean_difficulty_increasing,
    );
    for row in &analysis.rows {
        let name = format!("phase {}", row.phase);
        set_opt(&mut s, &name, "synthetic_accuracy", row.synthetic_accuracy);
        set_opt(&mut s, &name, "pool_accuracy", row.pool_accuracy);
        set_opt(&mut s, &name, "holdout_accuracy", row.holdout_accuracy);
        s.set(&name, "selected", row.selected_count);
        s.set(&name, "backfill", row.backfill_count);
        set_stats(&mut s, &name, row.difficulty.as_ref());
    }
    s.render()
}

pub fn render_analysis(report: &AnalysisReport) -> String {
    let mut s = Sections::new();
    s.set("settings_comparison", "config_hash", &report.config_hash);
    s.set("settings_comparison", "note", report.disclaimer);
    s.set(
        "settings_comparison",
        "betas",
        report
            .betas
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    for (slot, setting) in AnalysisSetting::ALL.iter().enumerate() {
        for (bi, beta) in report.betas.iter().enumerate() {
            let summary = &report.summaries[slot][bi];
            s.set(
                setting.name(),
                &format!("beta_{beta}"),
                format!("{} ± {}", summary.mean, summary.std),
            );
        }
        let row_mean: f64 = report.summaries[slot].iter().map(|e| e.mean).sum::<f64>()
            / report.betas.len() as f64;
        s.set(setting.name(), "mean_over_betas", row_mean);
    }
    s.render()
}

fn set_opt(s: &mut Sections, section: &str, key: &str, value: Option<f64>) {
    match value {
        Some(v) => s.set(section, key, v),
        None => s.set(section, key, "-"),
    }
}

fn set_stats(s: &mut Sections, section: &str, stats: Option<&DifficultyStats>) {
    if let Some(st) = stats {
        s.set(section, "difficulty_min", st.min);
        s.set(section, "difficulty_q1", st.q1);
        s.set(section, "difficulty_median", st.median);
        s.set(section, "difficulty_q3", st.q3);
        s.set(section, "difficulty_max", st.max);
        s.set(section, "difficulty_mean", st.mean);
    }
}
