use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::matcher::MatchInstance;

/// Conflict-set ordering used to pick which instances a step applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Discovery order.
    Par,
    /// Ascending by sort key.
    Pars,
    /// Exact reverse of `Pars`.
    Pard,
    /// Seeded uniform shuffle, redrawn every step.
    Parr,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Par, Strategy::Pars, Strategy::Pard, Strategy::Parr];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Par => "par",
            Strategy::Pars => "pars",
            Strategy::Pard => "pard",
            Strategy::Parr => "parr",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected par, pars, pard or parr)"))
    }
}

/// Something that orders the pruned conflict set before selection.
pub trait Scheduler: Sync {
    fn order(&self, entries: Vec<MatchInstance>, rng: &mut ChaCha8Rng) -> Vec<MatchInstance>;

    /// Splits seq-ordered `entries` into the first `limit` entries of
    /// [`Scheduler::order`] and the remaining entries in seq order.
    fn select(
        &self,
        entries: Vec<MatchInstance>,
        limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<MatchInstance>, Vec<MatchInstance>) {
        let mut selected = self.order(entries, rng);
        let mut rest = selected.split_off(limit.min(selected.len()));
        rest.sort_by_key(|e| e.seq);
        (selected, rest)
    }
}

impl Scheduler for Strategy {
    fn order(&self, entries: Vec<MatchInstance>, rng: &mut ChaCha8Rng) -> Vec<MatchInstance> {
        order_conflict_set(entries, *self, rng)
    }

    /// Same result as the default, in linear time when `limit` is small.
    fn select(
        &self,
        mut entries: Vec<MatchInstance>,
        limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<MatchInstance>, Vec<MatchInstance>) {
        let limit = limit.min(entries.len());
        match self {
            Strategy::Par => {
                debug_assert!(entries.is_sorted_by_key(|e| e.seq));
                let rest = entries.split_off(limit);
                (entries, rest)
            }
            Strategy::Pars | Strategy::Pard if limit < entries.len() && limit > 0 => {
                let descending = *self == Strategy::Pard;
                let cmp = |a: &usize, b: &usize| {
                    let (a, b) = (&entries[*a], &entries[*b]);
                    let o = a.cmp_sort_key(b).then(a.seq.cmp(&b.seq));
                    if descending {
                        o.reverse()
                    } else {
                        o
                    }
                };
                let mut idx: Vec<usize> = (0..entries.len()).collect();
                idx.select_nth_unstable_by(limit - 1, cmp);
                idx.truncate(limit);
                idx.sort_by(cmp);
                extract(entries, &idx)
            }
            Strategy::Parr => {
                // shuffling indices draws exactly what shuffling entries would
                let mut idx: Vec<usize> = (0..entries.len()).collect();
                idx.shuffle(rng);
                idx.truncate(limit);
                extract(entries, &idx)
            }
            _ => {
                let mut selected = order_conflict_set(entries, *self, rng);
                let mut rest = selected.split_off(limit);
                rest.sort_by_key(|e| e.seq);
                (selected, rest)
            }
        }
    }
}

/// Takes the entries at `picked` (in that order); the others keep their order.
fn extract(entries: Vec<MatchInstance>, picked: &[usize]) -> (Vec<MatchInstance>, Vec<MatchInstance>) {
    let mut slots: Vec<Option<MatchInstance>> = entries.into_iter().map(Some).collect();
    let selected = picked
        .iter()
        .map(|&i| slots[i].take().expect("indices are distinct"))
        .collect();
    (selected, slots.into_iter().flatten().collect())
}

/// Orders conflict-set entries (given in seq order) according to `strategy`.
pub fn order_conflict_set(
    mut entries: Vec<MatchInstance>,
    strategy: Strategy,
    rng: &mut ChaCha8Rng,
) -> Vec<MatchInstance> {
    match strategy {
        Strategy::Par => entries.sort_by_key(|e| e.seq),
        Strategy::Pars | Strategy::Pard => {
            entries.sort_by(|a, b| a.cmp_sort_key(b).then(a.seq.cmp(&b.seq)));
            if strategy == Strategy::Pard {
                entries.reverse();
            }
        }
        Strategy::Parr => entries.shuffle(rng),
    }
    entries
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::ConstraintId;
    use crate::term::{Binding, Term};
    use rand::SeedableRng;

    fn inst(seq: u64, removed: i64) -> MatchInstance {
        let min = |v| Term::compound("min", vec![Term::int(v)]);
        MatchInstance {
            seq,
            rule: "min".into(),
            rule_index: 0,
            kept_ids: vec![ConstraintId(1)],
            removed_ids: vec![ConstraintId(2)],
            binding: Binding::new(),
            head_terms: vec![min(0), min(removed)],
        }
    }

    fn seqs(v: &[MatchInstance]) -> Vec<u64> {
        v.iter().map(|e| e.seq).collect()
    }

    #[test]
    fn pars_sorts_by_key_and_pard_reverses() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let input = vec![inst(0, 3), inst(1, 2)];
        let pars = order_conflict_set(input.clone(), Strategy::Pars, &mut rng);
        assert_eq!(seqs(&pars), vec![1, 0]);
        let pard = order_conflict_set(input.clone(), Strategy::Pard, &mut rng);
        assert_eq!(seqs(&pard), vec![0, 1]);
        let par = order_conflict_set(input, Strategy::Par, &mut rng);
        assert_eq!(seqs(&par), vec![0, 1]);
    }

    #[test]
    fn equal_keys_fall_back_to_seq() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let input = vec![inst(4, 2), inst(2, 2), inst(3, 1)];
        let pars = order_conflict_set(input.clone(), Strategy::Pars, &mut rng);
        assert_eq!(seqs(&pars), vec![3, 2, 4]);
        let pard = order_conflict_set(input, Strategy::Pard, &mut rng);
        assert_eq!(seqs(&pard), vec![4, 2, 3]);
    }

    #[test]
    fn parr_is_deterministic_per_seed() {
        let input: Vec<MatchInstance> = (0..20).map(|i| inst(i, i as i64)).collect();
        let a = order_conflict_set(input.clone(), Strategy::Parr, &mut ChaCha8Rng::seed_from_u64(7));
        let b = order_conflict_set(input.clone(), Strategy::Parr, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(seqs(&a), seqs(&b));
        let mut sorted = seqs(&a);
        sorted.sort();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }

    struct Plain(Strategy);

    impl Scheduler for Plain {
        fn order(&self, entries: Vec<MatchInstance>, rng: &mut ChaCha8Rng) -> Vec<MatchInstance> {
            self.0.order(entries, rng)
        }
    }

    #[test]
    fn fast_selection_agrees_with_order_then_split() {
        let input: Vec<MatchInstance> = (0..30).map(|i| inst(i, (i as i64 * 7) % 11)).collect();
        for s in Strategy::ALL {
            for limit in [0, 1, 2, 5, 29, 30, 40] {
                let mut r1 = ChaCha8Rng::seed_from_u64(limit as u64);
                let mut r2 = r1.clone();
                let (a, b) = s.select(input.clone(), limit, &mut r1);
                let (c, d) = Plain(s).select(input.clone(), limit, &mut r2);
                assert_eq!((seqs(&a), seqs(&b)), (seqs(&c), seqs(&d)), "{s} {limit}");
                assert_eq!(r1, r2);
            }
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>(), Ok(s));
        }
        assert!("random".parse::<Strategy>().is_err());
    }
}
