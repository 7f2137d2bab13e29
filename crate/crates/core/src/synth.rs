//! Deterministic synthetic datasets driven by the LMSR engine, for running
//! the whole pipeline without the real data.
//!
//! Each market has a latent replication probability. Traders hold noisy
//! private beliefs and move the price part of the way toward them; trading
//! is front-loaded in time. Survey answers come from the same population,
//! so every surveyed forecaster has traded.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{parse_timestamp, Dataset, Finding, Millis, PValueCategory, Project, Side, SurveyResponse, Trade, MILLIS_PER_HOUR};
use crate::lmsr::{MarketError, MarketState, DEFAULT_ENDOWMENT, DEFAULT_LIQUIDITY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub markets: usize,
    pub traders: usize,
    pub liquidity_b: f64,
    pub endowment: f64,
    pub min_trades: usize,
    pub max_trades: usize,
    /// Probability that a trader answers the survey for a given finding.
    pub survey_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            markets: 12,
            traders: 40,
            liquidity_b: DEFAULT_LIQUIDITY,
            endowment: DEFAULT_ENDOWMENT,
            min_trades: 26,
            max_trades: 90,
            survey_rate: 0.6,
        }
    }
}

struct Persona {
    id: String,
    /// How strongly the trader's beliefs track the truth, in [0, 1].
    skill: f64,
}

fn belief(rng: &mut ChaCha8Rng, truth: f64, skill: f64) -> f64 {
    let noise = rng.gen_range(-0.3..0.3);
    let informed = 0.5 + skill * (truth - 0.5) + (1.0 - skill) * 0.15;
    (informed + noise).clamp(0.02, 0.98)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn generate(cfg: &SynthConfig) -> Result<Dataset, MarketError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let personas: Vec<Persona> = (0..cfg.traders.max(2))
        .map(|i| Persona {
            id: format!("P{i:03}"),
            skill: rng.gen_range(0.2..1.0),
        })
        .collect();
    let epoch: Millis = parse_timestamp("2015-03-01T00:00:00Z").expect("valid literal");
    let (lo, hi) = (cfg.min_trades.max(1), cfg.max_trades.max(cfg.min_trades.max(1)));

    let mut findings = Vec::with_capacity(cfg.markets);
    let mut trades = Vec::new();
    let mut truths = Vec::with_capacity(cfg.markets);
    for i in 0..cfg.markets {
        let project = Project::ALL[i % Project::ALL.len()];
        let finding_id = format!("{project}-{:03}", i + 1);
        let truth: f64 = rng.gen_range(0.1..0.9);
        let replicated = rng.gen_bool(truth);
        let significant = rng.gen_bool(if replicated { 0.7 } else { 0.3 });
        let original_p_value = if significant {
            10f64.powf(rng.gen_range(-5.0..-2.31)) // below 0.005
        } else {
            10f64.powf(rng.gen_range(-2.29..-1.31)) // 0.005 < p < 0.05
        };
        let p_value_category = PValueCategory::from_p_value(original_p_value, crate::dataset::DEFAULT_PVALUE_THRESHOLD);
        let market_open = epoch + (i as i64) * 24 * 3_600_000;
        let duration_hours = rng.gen_range(240..=336) as i64;
        let market_close = market_open + duration_hours * 3_600_000;

        let beliefs: Vec<f64> = personas.iter().map(|p| belief(&mut rng, truth, p.skill)).collect();
        let mut market = MarketState::new(&finding_id, cfg.liquidity_b, cfg.endowment, personas.iter().map(|p| p.id.clone()))?;
        let n_trades = rng.gen_range(lo..=hi);
        let mut times: Vec<Millis> = (0..n_trades)
            .map(|_| {
                let u: f64 = rng.gen();
                market_open + 1 + (u * u * u * (duration_hours as f64 * MILLIS_PER_HOUR - 2.0)) as Millis
            })
            .collect();
        times.sort_unstable();
        for &ts in &times {
            let who = rng.gen_range(0..personas.len());
            let trader = &personas[who].id;
            let price = market.price()?.price_yes;
            let step = rng.gen_range(0.3..0.8);
            let target = (price + step * (beliefs[who] - price)).clamp(0.01, 0.99);
            let mut delta = cfg.liquidity_b * (logit(target) - logit(price));
            if delta.abs() < 0.01 {
                delta = if rng.gen_bool(0.5) { 0.5 } else { -0.5 };
            }
            let held_yes = market.ledger(trader).map(|l| l.yes_held).unwrap_or(0.0);
            let held_no = market.ledger(trader).map(|l| l.no_held).unwrap_or(0.0);
            let (side, mut qty) = if delta > 0.0 {
                if held_no > 0.0 {
                    (Side::No, -delta.min(held_no))
                } else {
                    (Side::Yes, delta)
                }
            } else if held_yes > 0.0 {
                (Side::Yes, delta.max(-held_yes))
            } else {
                (Side::No, -delta)
            };
            qty = (qty * 100.0).round() / 100.0;
            for _ in 0..8 {
                if qty == 0.0 {
                    break;
                }
                match market.execute_trade(trader, side, qty, ts) {
                    Ok(t) => {
                        trades.push(t);
                        break;
                    }
                    Err(MarketError::InsufficientTokens { .. }) => qty = (qty * 50.0).round() / 100.0,
                    Err(MarketError::InsufficientHoldings { .. }) => break,
                    Err(e) => return Err(e),
                }
            }
        }
        if !trades.iter().any(|t| t.finding_id == finding_id) {
            let ts = market_open + 1;
            trades.push(market.execute_trade(&personas[0].id, Side::Yes, 1.0, ts)?);
        }
        findings.push(Finding {
            finding_id,
            project,
            replicated,
            p_value_category,
            original_p_value: Some(original_p_value),
            market_open,
            market_close,
        });
        truths.push(truth);
    }

    let traded: BTreeSet<&str> = trades.iter().map(|t| t.trader_id.as_str()).collect();
    let mut respondents: Vec<&Persona> = personas.iter().filter(|p| traded.contains(p.id.as_str())).collect();
    let mut surveys = Vec::new();
    for (f, &truth) in findings.iter().zip(&truths) {
        respondents.shuffle(&mut rng);
        let mut answered = 0;
        for p in &respondents {
            if rng.gen_bool(cfg.survey_rate) || answered == 0 {
                let b = (belief(&mut rng, truth, p.skill) * 100.0).round() / 100.0;
                surveys.push(SurveyResponse {
                    finding_id: f.finding_id.clone(),
                    forecaster_id: p.id.clone(),
                    belief: b,
                });
                answered += 1;
            }
        }
    }
    surveys.sort_by(|a, b| (&a.finding_id, &a.forecaster_id).cmp(&(&b.finding_id, &b.forecaster_id)));
    let trades: Vec<Trade> = trades;
    Ok(Dataset::new(findings, surveys, trades))
}
