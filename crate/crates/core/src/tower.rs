//! Iterated-logarithm comparison against power towers, so tower-sized
//! thresholds never get materialized.

use num_bigint::BigUint;
use num_traits::Zero;
use std::cmp::Ordering;

/// Largest `l` with `base^l <= n`, plus whether `n` is exactly `base^l`.
/// Requires `n >= 1`.
fn ilog(n: &BigUint, base: u32) -> (u64, bool) {
    debug_assert!(!n.is_zero());
    let bits = n.bits();
    let log2b = (base as f64).log2();
    let mut l = (((bits.saturating_sub(1)) as f64) / log2b).floor() as u64;
    let big_base = BigUint::from(base);
    let mut p = big_base.pow(l as u32);
    while p > *n {
        p /= &big_base;
        l -= 1;
    }
    loop {
        let next = &p * &big_base;
        if next <= *n {
            p = next;
            l += 1;
        } else {
            break;
        }
    }
    (l, p == *n)
}

/// Compares `n` with the power tower of height `height` whose top exponent is
/// `top` and whose remaining `height - 1` entries are `delta`. For instance
/// height 3 and top 5 denote `delta^(delta^5)`.
pub fn cmp_power_tower(n: &BigUint, delta: u32, height: u32, top: u32) -> Ordering {
    assert!(height >= 1, "tower height must be positive");
    assert!(delta >= 2, "delta must be at least 2");
    if height == 1 {
        return n.cmp(&BigUint::from(top));
    }
    if n.is_zero() {
        return Ordering::Less;
    }
    let (l, exact) = ilog(n, delta);
    // n = delta^l * r with 1 <= r < delta, so n vs delta^T follows from l vs T
    match cmp_power_tower(&BigUint::from(l), delta, height - 1, top) {
        Ordering::Less => Ordering::Less,
        Ordering::Greater => Ordering::Greater,
        Ordering::Equal => {
            if exact {
                Ordering::Equal
            } else {
                Ordering::Greater
            }
        }
    }
}

/// Decides `n > delta^(P_delta(i, delta + 1))` where `P_delta(j, k)` is the
/// power tower of height `j` with top exponent `k` and the other entries
/// `delta`.
pub fn power_tower_exceeds(n: &BigUint, delta: u32, i: u32) -> bool {
    // delta^(P(i, k)) is itself the tower P(i + 1, k)
    cmp_power_tower(n, delta, i + 1, delta + 1) == Ordering::Greater
}
