//! Open a market, trade on both sides, settle, and check the market maker's
//! loss against its bound.

use replimarket::dataset::Side;
use replimarket::lmsr::{MarketError, MarketState};

fn main() -> Result<(), MarketError> {
    let mut market = MarketState::new("RPP-001", 100.0, 100.0, ["alice", "bob"])?;
    println!("opening price {:.4}", market.price()?.price_yes);

    let quote = market.quote(Side::Yes, 10.0)?;
    println!("10 YES would cost {:.6} and move the price to {:.6}", quote.cost, quote.price_yes);

    market.execute_trade("alice", Side::Yes, 10.0, 0)?;
    market.execute_trade("bob", Side::No, 25.0, 1)?;
    market.execute_trade("alice", Side::Yes, -5.0, 2)?; // sell half back
    println!("price after three trades {:.4}", market.price()?.price_yes);

    match market.execute_trade("bob", Side::Yes, -1.0, 3) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("bob holds no YES"),
    }

    let balances = market.settle(true)?;
    for (trader, tokens) in &balances {
        println!("{trader}: {tokens:.4} tokens");
    }
    println!(
        "market maker net loss {:.4} (bound {:.4})",
        market.maker_loss(),
        market.lmsr().max_loss()
    );
    Ok(())
}
