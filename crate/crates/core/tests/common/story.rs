//! Random storyline instances and an independent invariant check.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roleseer_core::storyline::{InteractionRound, StorylineLayout};

pub fn random_rounds(seed: u64) -> Vec<InteractionRound> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<String> = (0..rng.random_range(1..14)).map(|i| format!("c{i}")).collect();
    let rounds = rng.random_range(1..20);
    (0..rounds)
        .map(|r| {
            let mut others = pool.clone();
            others.shuffle(&mut rng);
            let k = rng.random_range(0..=others.len().min(8));
            let mut participants = vec!["ego".to_owned()];
            participants.extend(others.into_iter().take(k));
            InteractionRound {
                round_id: r,
                bucket: r as i64,
                start: r as i64 * 600,
                participants,
                snapshot: 0,
            }
        })
        .collect()
}

/// Pairs of players whose vertical order flips between adjacent rounds.
pub fn crossings(layout: &StorylineLayout) -> usize {
    let mut total = 0;
    for w in layout.rounds.windows(2) {
        let shared: Vec<(&String, f64, f64)> = w[0]
            .slots
            .iter()
            .filter_map(|(p, y)| w[1].slots.iter().find(|(q, _)| q == p).map(|(_, y2)| (p, *y, *y2)))
            .collect();
        for i in 0..shared.len() {
            for j in 0..shared.len() {
                if shared[i].1 < shared[j].1 && shared[i].2 > shared[j].2 {
                    total += 1;
                }
            }
        }
    }
    total
}

/// Checks placement, separation and curve invariants.
pub fn check(rounds: &[InteractionRound], l: &StorylineLayout) -> Result<(), String> {
    if l.crossings > l.seed_crossings {
        return Err(format!("crossings grew: {} > {}", l.crossings, l.seed_crossings));
    }
    if crossings(l) != l.crossings {
        return Err(format!("reported {} crossings, recount {}", l.crossings, crossings(l)));
    }
    for (r, p) in rounds.iter().zip(&l.rounds) {
        let mut want: Vec<&String> = r.participants.iter().collect();
        let mut got: Vec<&String> = p.slots.iter().map(|s| &s.0).collect();
        want.sort();
        got.sort();
        if want != got {
            return Err(format!("round {} slots {got:?} != participants {want:?}", r.round_id));
        }
        let mut ys: Vec<f64> = p.slots.iter().map(|s| s.1).collect();
        ys.sort_by(f64::total_cmp);
        let n = ys.len();
        let median = if n % 2 == 1 { ys[n / 2] } else { (ys[n / 2 - 1] + ys[n / 2]) / 2.0 };
        if (median - p.y).abs() > 1e-9 {
            return Err(format!("round {} at y {} but median {median}", r.round_id, p.y));
        }
        if ys.windows(2).any(|w| w[1] - w[0] < l.space - 1e-9) {
            return Err(format!("round {} slots closer than {}", r.round_id, l.space));
        }
    }
    for c in &l.curves {
        for &(x, y) in &c.points {
            let round = l.rounds.iter().find(|r| r.x == x).ok_or("curve point off any round")?;
            if !round.slots.iter().any(|(p, sy)| p == &c.player && *sy == y) {
                return Err(format!("curve of {} leaves its slot at x {x}", c.player));
            }
        }
    }
    Ok(())
}
