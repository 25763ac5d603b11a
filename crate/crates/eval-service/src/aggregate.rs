use serde::{Deserialize, Serialize};
use shortdesc::analysis::{fleiss_kappa, win_rate_by_quantile, wilson_interval, BinRate, Z95};

use crate::campaign::ItemTruth;
use crate::error::{Result, ServiceError};
use crate::state::{ServiceState, RATERS_PER_ITEM};

pub const SCORE_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Model,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub item_id: String,
    pub entity_id: String,
    pub model_votes: usize,
    pub human_votes: usize,
    /// Majority of three counted votes; `None` until the item has quorum.
    pub winner: Option<Winner>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moverscore: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub items: usize,
    pub complete_items: usize,
    /// Set when some items still lack three counted votes.
    pub partial: bool,
    pub model_wins: usize,
    pub model_win_fraction: Option<f64>,
    pub wilson_95: Option<(f64, f64)>,
    pub fleiss_kappa: Option<f64>,
    pub excluded_workers: Vec<String>,
    /// Model win fraction per quantile bin of the automatic score.
    pub score_bins: Vec<BinRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResults {
    pub campaign_id: String,
    pub language: String,
    pub items: Vec<ItemResult>,
    pub summary: CampaignSummary,
}

/// Majority-of-three per real item; honeypots are left out.
pub fn aggregate_results(state: &ServiceState, campaign_id: &str) -> Result<CampaignResults> {
    let campaign = state
        .campaigns
        .get(campaign_id)
        .ok_or_else(|| ServiceError::NotFound(format!("campaign {campaign_id}")))?;
    let mut items = Vec::new();
    for batch in &campaign.batches {
        for it in &batch.items {
            let ItemTruth::Real { model_option, moverscore } = it.truth else {
                continue;
            };
            let votes = state.counted_votes(&it.item_id);
            let model_votes = votes.iter().filter(|v| v.choice == model_option).count();
            let human_votes = votes.len() - model_votes;
            let winner = (votes.len() == RATERS_PER_ITEM).then(|| {
                if model_votes > human_votes {
                    Winner::Model
                } else {
                    Winner::Human
                }
            });
            items.push(ItemResult {
                item_id: it.item_id.clone(),
                entity_id: it.entity_id.clone(),
                model_votes,
                human_votes,
                winner,
                moverscore,
            });
        }
    }

    let complete: Vec<&ItemResult> = items.iter().filter(|i| i.winner.is_some()).collect();
    let model_wins = complete.iter().filter(|i| i.winner == Some(Winner::Model)).count();
    let n = complete.len();
    let table: Vec<Vec<usize>> = complete.iter().map(|i| vec![i.model_votes, i.human_votes]).collect();
    let kappa = if table.is_empty() {
        None
    } else {
        fleiss_kappa(&table, RATERS_PER_ITEM).map_err(|e| ServiceError::Validation(e.to_string()))?
    };
    let scored: Vec<(f64, bool)> = complete
        .iter()
        .filter_map(|i| i.moverscore.map(|s| (s, i.winner == Some(Winner::Model))))
        .collect();
    let score_bins = if scored.is_empty() {
        Vec::new()
    } else {
        win_rate_by_quantile(&scored, SCORE_BINS).map_err(|e| ServiceError::Validation(e.to_string()))?
    };
    let summary = CampaignSummary {
        items: items.len(),
        complete_items: n,
        partial: n < items.len(),
        model_wins,
        model_win_fraction: (n > 0).then(|| model_wins as f64 / n as f64),
        wilson_95: wilson_interval(model_wins as u64, n as u64, Z95),
        fleiss_kappa: kappa,
        excluded_workers: state
            .workers
            .values()
            .filter(|w| w.excluded)
            .map(|w| w.worker_id.clone())
            .collect(),
        score_bins,
    };
    Ok(CampaignResults {
        campaign_id: campaign_id.to_string(),
        language: campaign.language.clone(),
        items,
        summary,
    })
}
