//! The embedded periodic table. Weights come from a versioned data file
//! rather than a live lookup so results cannot drift under our feet.

use std::collections::HashMap;
use std::sync::OnceLock;

fn table() -> &'static HashMap<&'static str, f64> {
    static TABLE: OnceLock<HashMap<&'static str, f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = HashMap::new();
        for line in include_str!("../../data/atomic-weights.txt").lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let symbol = parts.next().expect("weights table line has a symbol");
            let weight: f64 = parts
                .next()
                .expect("weights table line has a weight")
                .parse()
                .expect("weights table weight parses");
            t.insert(symbol, weight);
        }
        t
    })
}

pub fn is_known_element(symbol: &str) -> bool {
    table().contains_key(symbol)
}

/// Standard atomic weight in u, or `None` for symbols outside the table.
pub fn atomic_weight(symbol: &str) -> Option<f64> {
    table().get(symbol).copied()
}
