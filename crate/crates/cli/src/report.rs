use shortdesc_eval::CampaignResults;

/// Render a simple comma-separated table (no quoted fields) as Markdown.
pub fn csv_to_markdown(csv: &str) -> String {
    let mut lines = csv.lines().filter(|l| !l.is_empty());
    let Some(header) = lines.next() else {
        return String::new();
    };
    let cols: Vec<&str> = header.split(',').collect();
    let mut md = format!("| {} |\n|{}\n", cols.join(" | "), "---|".repeat(cols.len()));
    for l in lines {
        md.push_str(&format!("| {} |\n", l.split(',').collect::<Vec<_>>().join(" | ")));
    }
    md
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.3}"))
}

pub fn human_section(r: &CampaignResults) -> String {
    let s = &r.summary;
    let mut md = format!(
        "\n## Human preference: campaign {} ({})\n\n{} items, {} with three counted votes{}.\n\n",
        r.campaign_id,
        r.language,
        s.items,
        s.complete_items,
        if s.partial { " (partial)" } else { "" }
    );
    let ci = s.wilson_95.map_or("-".into(), |(lo, hi)| format!("[{lo:.3}, {hi:.3}]"));
    md.push_str(&format!(
        "Model preferred on {} items, fraction {} (95% Wilson interval {ci}). Fleiss kappa {}. Excluded workers: {}.\n",
        s.model_wins,
        opt(s.model_win_fraction),
        opt(s.fleiss_kappa),
        if s.excluded_workers.is_empty() { "none".into() } else { s.excluded_workers.join(", ") }
    ));
    if !s.score_bins.is_empty() {
        md.push_str("\n| score bin | items | model win fraction |\n|---|---|---|\n");
        for (i, b) in s.score_bins.iter().enumerate() {
            md.push_str(&format!("| {} | {} | {} |\n", i + 1, b.count, opt(b.rate)));
        }
    }
    md
}
