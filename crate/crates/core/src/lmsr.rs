//! Binary prediction market run by a logarithmic-market-scoring-rule
//! automated market maker.
//!
//! The cost function is `C(q) = b * ln(exp(q_yes / b) + exp(q_no / b))` and
//! the instantaneous YES price is its partial derivative, a softmax over the
//! outstanding quantities. Everything is evaluated in log-sum-exp form so
//! `|q| / b` can reach several hundred without overflow.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Millis, Side, Trade};

pub const DEFAULT_LIQUIDITY: f64 = 100.0;
pub const DEFAULT_ENDOWMENT: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("liquidity parameter must be positive and finite, got {0}")]
    NonPositiveLiquidity(f64),
    #[error("endowment must be nonnegative and finite, got {0}")]
    InvalidEndowment(f64),
    #[error("market is already settled")]
    MarketSettled,
    #[error("unknown trader `{0}`")]
    UnknownTrader(String),
    #[error("trader `{trader}` needs {needed} tokens but holds {available}")]
    InsufficientTokens {
        trader: String,
        needed: f64,
        available: f64,
    },
    #[error("trader `{trader}` cannot sell {requested} {side} contracts, holds {held}")]
    InsufficientHoldings {
        trader: String,
        side: Side,
        requested: f64,
        held: f64,
    },
    #[error("quantity must be finite, got {0}")]
    InvalidQuantity(f64),
    #[error("market `{0}` has no trades")]
    EmptyMarket(String),
    #[error("trade {seq} of market `{finding_id}` has no recorded quantity")]
    MissingQuantity { finding_id: String, seq: usize },
    #[error("{0}")]
    Dataset(String),
}

impl From<DatasetError> for MarketError {
    fn from(e: DatasetError) -> Self {
        MarketError::Dataset(e.to_string())
    }
}

/// The LMSR cost function for a binary market with liquidity `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lmsr {
    b: f64,
}

impl Lmsr {
    pub fn new(b: f64) -> Result<Self, MarketError> {
        if b > 0.0 && b.is_finite() {
            Ok(Lmsr { b })
        } else {
            Err(MarketError::NonPositiveLiquidity(b))
        }
    }

    pub fn liquidity(&self) -> f64 {
        self.b
    }

    /// `C(q_yes, q_no)`.
    pub fn cost(&self, q_yes: f64, q_no: f64) -> f64 {
        let m = q_yes.max(q_no);
        m + self.b * (((q_yes - m) / self.b).exp() + ((q_no - m) / self.b).exp()).ln()
    }

    pub fn price_yes(&self, q_yes: f64, q_no: f64) -> f64 {
        // logistic of the scaled difference, written to avoid overflow
        let z = (q_yes - q_no) / self.b;
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }

    /// `C(q + delta * e_side) - C(q)`.
    ///
    /// Uses `b * ln(1 + p * expm1(delta / b))` where `p` is the current price
    /// of `side`. Large moves, and sells that would put that argument near
    /// `-1`, use a difference of softplus terms instead.
    pub fn cost_to_move(&self, q_yes: f64, q_no: f64, side: Side, delta: f64) -> f64 {
        if delta == 0.0 {
            return 0.0;
        }
        let (own, other) = match side {
            Side::Yes => (q_yes, q_no),
            Side::No => (q_no, q_yes),
        };
        // computed from the side's own quantity so that tiny prices keep
        // their relative precision
        let p = self.price_yes(own, other);
        let x = delta / self.b;
        let arg = p * x.exp_m1();
        if x.abs() < 30.0 && arg > -0.5 {
            self.b * arg.ln_1p()
        } else {
            let z = (own - other) / self.b;
            self.b * (softplus(z + x) - softplus(z))
        }
    }

    /// Worst-case subsidy of the market maker for a binary market.
    pub fn max_loss(&self) -> f64 {
        self.b * std::f64::consts::LN_2
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Prices and, for a hypothetical trade, its cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub price_yes: f64,
    pub price_no: f64,
    /// Tokens paid (negative: received). Zero for a plain price query.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub tokens: f64,
    pub yes_held: f64,
    pub no_held: f64,
}

impl Ledger {
    fn held(&self, side: Side) -> f64 {
        match side {
            Side::Yes => self.yes_held,
            Side::No => self.no_held,
        }
    }

    fn held_mut(&mut self, side: Side) -> &mut f64 {
        match side {
            Side::Yes => &mut self.yes_held,
            Side::No => &mut self.no_held,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarketStatus {
    Open,
    Settled { replicated: bool },
}

/// State of one binary market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    finding_id: String,
    lmsr: Lmsr,
    q_yes: f64,
    q_no: f64,
    ledgers: BTreeMap<String, Ledger>,
    status: MarketStatus,
    endowment: f64,
    /// Tokens collected by the market maker from trades (net of sells).
    maker_intake: f64,
    /// Tokens paid out by the market maker at settlement.
    maker_payout: f64,
}

impl MarketState {
    /// Opens a market with `q = (0, 0)`; every trader starts with `endowment`
    /// tokens and no contracts.
    pub fn new<I, S>(finding_id: impl Into<String>, liquidity_b: f64, endowment: f64, traders: I) -> Result<Self, MarketError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let lmsr = Lmsr::new(liquidity_b)?;
        if !(endowment >= 0.0 && endowment.is_finite()) {
            return Err(MarketError::InvalidEndowment(endowment));
        }
        let ledgers = traders
            .into_iter()
            .map(|t| {
                (
                    t.into(),
                    Ledger {
                        tokens: endowment,
                        ..Ledger::default()
                    },
                )
            })
            .collect();
        Ok(MarketState {
            finding_id: finding_id.into(),
            lmsr,
            q_yes: 0.0,
            q_no: 0.0,
            ledgers,
            status: MarketStatus::Open,
            endowment,
            maker_intake: 0.0,
            maker_payout: 0.0,
        })
    }

    pub fn finding_id(&self) -> &str {
        &self.finding_id
    }

    pub fn lmsr(&self) -> Lmsr {
        self.lmsr
    }

    pub fn quantities(&self) -> (f64, f64) {
        (self.q_yes, self.q_no)
    }

    pub fn status(&self) -> MarketStatus {
        self.status
    }

    pub fn ledger(&self, trader: &str) -> Option<&Ledger> {
        self.ledgers.get(trader)
    }

    pub fn ledgers(&self) -> &BTreeMap<String, Ledger> {
        &self.ledgers
    }

    pub fn endowment(&self) -> f64 {
        self.endowment
    }

    pub fn maker_intake(&self) -> f64 {
        self.maker_intake
    }

    pub fn maker_payout(&self) -> f64 {
        self.maker_payout
    }

    /// Payout minus intake; positive when the market maker lost tokens.
    pub fn maker_loss(&self) -> f64 {
        self.maker_payout - self.maker_intake
    }

    /// Adds a trader with the market's endowment. Existing ledgers are kept.
    pub fn add_trader(&mut self, trader: impl Into<String>) {
        let endowment = self.endowment;
        self.ledgers.entry(trader.into()).or_insert(Ledger {
            tokens: endowment,
            ..Ledger::default()
        });
    }

    fn ensure_open(&self) -> Result<(), MarketError> {
        match self.status {
            MarketStatus::Open => Ok(()),
            MarketStatus::Settled { .. } => Err(MarketError::MarketSettled),
        }
    }

    pub fn price(&self) -> Result<Quote, MarketError> {
        self.ensure_open()?;
        let p = self.lmsr.price_yes(self.q_yes, self.q_no);
        Ok(Quote {
            price_yes: p,
            price_no: 1.0 - p,
            cost: 0.0,
        })
    }

    /// Tokens required to move `quantity` contracts of `side` (negative sells).
    pub fn cost_to_trade(&self, side: Side, quantity: f64) -> Result<f64, MarketError> {
        self.ensure_open()?;
        if !quantity.is_finite() {
            return Err(MarketError::InvalidQuantity(quantity));
        }
        Ok(self.lmsr.cost_to_move(self.q_yes, self.q_no, side, quantity))
    }

    /// Cost of a hypothetical trade together with the prices it would leave.
    pub fn quote(&self, side: Side, quantity: f64) -> Result<Quote, MarketError> {
        let cost = self.cost_to_trade(side, quantity)?;
        let (y, n) = moved(self.q_yes, self.q_no, side, quantity);
        let p = self.lmsr.price_yes(y, n);
        Ok(Quote {
            price_yes: p,
            price_no: 1.0 - p,
            cost,
        })
    }

    /// Executes a trade for `trader`. On error the state is unchanged.
    ///
    /// The returned [`Trade`] records the YES price after the update for
    /// either side.
    pub fn execute_trade(&mut self, trader: &str, side: Side, quantity: f64, timestamp: Millis) -> Result<Trade, MarketError> {
        let cost = self.cost_to_trade(side, quantity)?;
        let ledger = self
            .ledgers
            .get(trader)
            .ok_or_else(|| MarketError::UnknownTrader(trader.to_string()))?;
        let held = ledger.held(side);
        if held + quantity < 0.0 {
            return Err(MarketError::InsufficientHoldings {
                trader: trader.to_string(),
                side,
                requested: -quantity,
                held,
            });
        }
        if ledger.tokens - cost < 0.0 {
            return Err(MarketError::InsufficientTokens {
                trader: trader.to_string(),
                needed: cost,
                available: ledger.tokens,
            });
        }
        let ledger = self.ledgers.get_mut(trader).expect("checked above");
        ledger.tokens -= cost;
        *ledger.held_mut(side) += quantity;
        self.maker_intake += cost;
        (self.q_yes, self.q_no) = moved(self.q_yes, self.q_no, side, quantity);
        Ok(Trade {
            finding_id: self.finding_id.clone(),
            trader_id: trader.to_string(),
            timestamp,
            side,
            quantity: Some(quantity),
            post_trade_price: self.lmsr.price_yes(self.q_yes, self.q_no),
            seq: 0,
        })
    }

    /// Pays one token per winning contract and closes the market. Returns the
    /// final token balance of every trader.
    pub fn settle(&mut self, replicated: bool) -> Result<BTreeMap<String, f64>, MarketError> {
        self.ensure_open()?;
        let winning = if replicated { Side::Yes } else { Side::No };
        let mut payout = 0.0;
        for ledger in self.ledgers.values_mut() {
            let p = ledger.held(winning);
            ledger.tokens += p;
            payout += p;
        }
        self.maker_payout = payout;
        self.status = MarketStatus::Settled { replicated };
        Ok(self.ledgers.iter().map(|(k, l)| (k.clone(), l.tokens)).collect())
    }
}

fn moved(q_yes: f64, q_no: f64, side: Side, quantity: f64) -> (f64, f64) {
    match side {
        Side::Yes => (q_yes + quantity, q_no),
        Side::No => (q_yes, q_no + quantity),
    }
}

/// How recorded trades are turned into a price path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReplayMode {
    /// Use the recorded post-trade prices as they are.
    PriceTaking,
    /// Push the recorded (side, quantity) pairs through a fresh market with
    /// the given liquidity.
    Simulated { liquidity_b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub timestamp: Millis,
    pub price_yes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub finding_id: String,
    pub points: Vec<PricePoint>,
}

impl PriceSeries {
    /// Price of the last trade at or before close: the market forecast.
    pub fn final_price(&self) -> f64 {
        self.points.last().map(|p| p.price_yes).expect("replay never returns an empty series")
    }

    pub fn prices(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.price_yes).collect()
    }
}

/// Replays one market's trades up to its close.
///
/// Simulated replay only moves the market maker's quantities; trader
/// budgets from the original study are unknown and not enforced.
pub fn replay(ds: &Dataset, finding_id: &str, mode: ReplayMode) -> Result<PriceSeries, MarketError> {
    let trades = ds.trades_before_close(finding_id)?;
    if trades.is_empty() {
        return Err(MarketError::EmptyMarket(finding_id.to_string()));
    }
    let points = match mode {
        ReplayMode::PriceTaking => trades
            .iter()
            .map(|t| PricePoint {
                timestamp: t.timestamp,
                price_yes: t.post_trade_price,
            })
            .collect(),
        ReplayMode::Simulated { liquidity_b } => {
            let lmsr = Lmsr::new(liquidity_b)?;
            let (mut q_yes, mut q_no) = (0.0, 0.0);
            let mut out = Vec::with_capacity(trades.len());
            for t in &trades {
                let quantity = t.quantity.ok_or_else(|| MarketError::MissingQuantity {
                    finding_id: finding_id.to_string(),
                    seq: t.seq,
                })?;
                (q_yes, q_no) = moved(q_yes, q_no, t.side, quantity);
                out.push(PricePoint {
                    timestamp: t.timestamp,
                    price_yes: lmsr.price_yes(q_yes, q_no),
                });
            }
            out
        }
    };
    Ok(PriceSeries {
        finding_id: finding_id.to_string(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // High-precision reference values (50-digit evaluation of the closed forms).
    const PRICE_Q10_B100: f64 = 0.524_979_187_478_939_99;
    const COST_BUY10_B100: f64 = 5.124_947_951_362_558_8;
    const COST_BUY5_B100: f64 = 2.531_246_745_334_098_6;

    fn market(b: f64) -> MarketState {
        MarketState::new("f", b, 100.0, ["alice", "bob"]).unwrap()
    }

    #[test]
    fn opening_price_is_one_half() {
        for b in [100.0, 1.0, 1e-3, 1e6] {
            let q = market(b).price().unwrap();
            assert_eq!(q.price_yes, 0.5);
            assert_eq!(q.price_no, 0.5);
        }
        assert_eq!(MarketState::new("f", 0.0, 100.0, ["a"]).unwrap_err(), MarketError::NonPositiveLiquidity(0.0));
        assert!(MarketState::new("f", -1.0, 100.0, ["a"]).is_err());
    }

    #[test]
    fn closed_form_price_and_cost() {
        let lmsr = Lmsr::new(100.0).unwrap();
        assert!((lmsr.price_yes(10.0, 0.0) - PRICE_Q10_B100).abs() < 1e-15);
        assert!((lmsr.cost_to_move(0.0, 0.0, Side::Yes, 10.0) - COST_BUY10_B100).abs() < 1e-12);
        for k in [-500.0, 0.0, 3.7, 1e4] {
            assert_eq!(lmsr.price_yes(k, k), 0.5);
        }
    }

    #[test]
    fn extreme_quantities_stay_finite() {
        let lmsr = Lmsr::new(1.0).unwrap();
        let p = lmsr.price_yes(700.0, 0.0);
        assert!(p <= 1.0 && p.is_finite());
        assert!(lmsr.cost(700.0, -700.0).is_finite());
        assert!((lmsr.cost(700.0, 0.0) - 700.0).abs() < 1e-9);
        assert!(lmsr.cost_to_move(0.0, 0.0, Side::Yes, 700.0).is_finite());
    }

    #[test]
    fn zero_quantity_costs_nothing() {
        assert_eq!(market(100.0).cost_to_trade(Side::No, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn execute_buy_then_partial_sell() {
        let mut m = market(100.0);
        let t = m.execute_trade("alice", Side::Yes, 10.0, 1).unwrap();
        let l = *m.ledger("alice").unwrap();
        assert!((l.tokens - (100.0 - COST_BUY10_B100)).abs() < 1e-12);
        assert_eq!(l.yes_held, 10.0);
        assert!((t.post_trade_price - PRICE_Q10_B100).abs() < 1e-15);

        m.execute_trade("alice", Side::Yes, -5.0, 2).unwrap();
        let l = *m.ledger("alice").unwrap();
        assert_eq!(l.yes_held, 5.0);
        assert!((100.0 - l.tokens - COST_BUY5_B100).abs() < 1e-9);
    }

    #[test]
    fn no_side_trade_records_yes_price() {
        let mut m = market(100.0);
        let t = m.execute_trade("bob", Side::No, 10.0, 1).unwrap();
        assert!((t.post_trade_price - (1.0 - PRICE_Q10_B100)).abs() < 1e-15);
    }

    #[test]
    fn rejected_trades_leave_state_unchanged() {
        let mut m = market(100.0);
        let before = m.clone();
        assert!(matches!(
            m.execute_trade("alice", Side::Yes, 500.0, 1),
            Err(MarketError::InsufficientTokens { .. })
        ));
        assert!(matches!(
            m.execute_trade("alice", Side::No, -1.0, 1),
            Err(MarketError::InsufficientHoldings { .. })
        ));
        assert!(matches!(m.execute_trade("carol", Side::Yes, 1.0, 1), Err(MarketError::UnknownTrader(_))));
        assert_eq!(m, before);
    }

    #[test]
    fn settlement_pays_winning_side() {
        let mut m = market(100.0);
        m.execute_trade("alice", Side::Yes, 10.0, 1).unwrap();
        let tokens = m.ledger("alice").unwrap().tokens;

        let mut yes = m.clone();
        let fin = yes.settle(true).unwrap();
        assert_eq!(fin["alice"], tokens + 10.0);
        assert_eq!(fin["bob"], 100.0);

        let mut no = m.clone();
        assert_eq!(no.settle(false).unwrap()["alice"], tokens);
        assert_eq!(no.settle(false), Err(MarketError::MarketSettled));
        assert_eq!(no.price(), Err(MarketError::MarketSettled));
        assert!(no.execute_trade("alice", Side::Yes, 1.0, 2).is_err());
    }

    #[test]
    fn empty_market_settles_to_endowments() {
        let mut m = market(100.0);
        let fin = m.settle(true).unwrap();
        assert!(fin.values().all(|&t| t == 100.0));
        assert_eq!(m.maker_loss(), 0.0);
    }
}
