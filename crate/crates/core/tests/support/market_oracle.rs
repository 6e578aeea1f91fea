//! Brute-force reference for call-auction clearing. Deliberately naive and
//! independent of the library's sorted prefix-sum implementation.

use mobcoin_core::market::{Order, Side};

pub struct OracleResult {
    pub price: i64,
    pub volume: i64,
    /// fill per order in ascending id order (cents)
    pub fills: Vec<(u64, i64)>,
}

fn executable(orders: &[Order], p: i64) -> i64 {
    let mut demand = 0;
    let mut supply = 0;
    for o in orders {
        match o.side {
            Side::Buy if o.limit.cents() >= p => demand += o.quantity.cents(),
            Side::Sell if o.limit.cents() <= p => supply += o.quantity.cents(),
            _ => {}
        }
    }
    demand.min(supply)
}

/// Price and volume by enumerating every candidate price.
pub fn clear_price_volume(orders: &[Order], floor: i64, cap: i64, prev: i64) -> (i64, i64) {
    let mut candidates: Vec<i64> = orders.iter().map(|o| o.limit.cents()).collect();
    candidates.push(floor);
    candidates.push(cap);
    let mut best: Option<(i64, i64)> = None;
    for &p in &candidates {
        let v = executable(orders, p);
        best = match best {
            None => Some((p, v)),
            Some((bp, bv)) => {
                let key = (-v, (p - prev).abs(), p);
                let bkey = (-bv, (bp - prev).abs(), bp);
                if key < bkey {
                    Some((p, v))
                } else {
                    Some((bp, bv))
                }
            }
        };
    }
    match best {
        Some((p, v)) if v > 0 && !orders.is_empty() => (p, v),
        _ => (prev.clamp(floor, cap), 0),
    }
}

/// Enumerates every integer allocation of `total` units with `0 <= a_i <= cap_i`
/// and returns the one closest to the proportional quotas in squared error;
/// ties prefer giving more to earlier entries.
fn best_apportionment(total: i64, weights: &[i64]) -> Vec<i64> {
    let sum: i64 = weights.iter().sum();
    let mut best: Option<(i128, Vec<i64>)> = None;
    let mut cur = vec![0i64; weights.len()];
    fn rec(i: usize, left: i64, w: &[i64], sum: i64, total: i64, cur: &mut Vec<i64>, best: &mut Option<(i128, Vec<i64>)>) {
        if i == w.len() {
            if left != 0 {
                return;
            }
            let err: i128 = cur
                .iter()
                .zip(w)
                .map(|(&a, &wi)| {
                    let d = a as i128 * sum as i128 - total as i128 * wi as i128;
                    d * d
                })
                .sum();
            let better = match best {
                None => true,
                Some((e, v)) => err < *e || (err == *e && cur > v),
            };
            if better {
                *best = Some((err, cur.clone()));
            }
            return;
        }
        for a in 0..=w[i].min(left) {
            cur[i] = a;
            rec(i + 1, left - a, w, sum, total, cur, best);
        }
        cur[i] = 0;
    }
    rec(0, total, weights, sum, total, &mut cur, &mut best);
    best.map(|b| b.1).unwrap_or_else(|| vec![0; weights.len()])
}

/// Full clearing including rationing, in units of `lot` cents.
pub fn clear(orders: &[Order], floor: i64, cap: i64, prev: i64, lot: i64) -> OracleResult {
    let (price, volume) = clear_price_volume(orders, floor, cap, prev);
    let mut sorted: Vec<&Order> = orders.iter().collect();
    sorted.sort_by_key(|o| o.id);
    let mut fills: Vec<(u64, i64)> = sorted.iter().map(|o| (o.id, 0)).collect();
    if volume > 0 {
        for side in [Side::Buy, Side::Sell] {
            let idx: Vec<usize> = (0..sorted.len())
                .filter(|&i| {
                    let o = sorted[i];
                    o.side == side && if side == Side::Buy { o.limit.cents() >= price } else { o.limit.cents() <= price }
                })
                .collect();
            let weights: Vec<i64> = idx.iter().map(|&i| sorted[i].quantity.cents() / lot).collect();
            let alloc = best_apportionment(volume / lot, &weights);
            for (k, &i) in idx.iter().enumerate() {
                fills[i].1 = alloc[k] * lot;
            }
        }
    }
    OracleResult { price, volume, fills }
}
