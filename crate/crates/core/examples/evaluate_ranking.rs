//! Precision, recall and average precision of a ranking against a label set.
//!
//! cargo run --example evaluate_ranking

use std::collections::HashSet;

use puresearch::evaluation::{average_precision, precision_at_k, precision_at_recall, recall_at_k, EvalReport};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ranked = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let relevant: HashSet<&str> = ["a", "c", "d", "h"].into_iter().collect();
    for k in [1, 3, 5, 8] {
        println!(
            "k={k}: precision {:.3} recall {:.3}",
            precision_at_k(&ranked, &relevant, k)?,
            recall_at_k(&ranked, &relevant, k)?
        );
    }
    println!("precision at 15% recall: {:.3}", precision_at_recall(&ranked, &relevant, 0.15)?);
    println!("average precision:       {:.3}", average_precision(&ranked, &relevant)?);
    print!("{}", EvalReport::single(&ranked, &relevant).to_table());
    Ok(())
}
