//! Stratified test/validation split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BenchmarkItem, EvalError};
use crate::pipeline::QueryType;

const ALL_TYPES: [QueryType; 5] = [
    QueryType::Analytical,
    QueryType::Visual,
    QueryType::Contextual,
    QueryType::Navigation,
    QueryType::Unanswerable,
];

/// Splits per type, sending `round(n * ratio)` items of each type to the
/// test side. Both sides keep corpus order.
pub fn stratified_split(
    items: &[BenchmarkItem],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<BenchmarkItem>, Vec<BenchmarkItem>), EvalError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(EvalError::InvalidRatio(ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut to_test = vec![false; items.len()];
    for kind in ALL_TYPES {
        let mut idx: Vec<usize> = (0..items.len()).filter(|&i| items[i].type_label == kind).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(EvalError::InsufficientItems { kind, have: idx.len() });
        }
        idx.shuffle(&mut rng);
        let take = (idx.len() as f64 * ratio).round() as usize;
        for &i in &idx[..take] {
            to_test[i] = true;
        }
    }
    let (test, validation): (Vec<_>, Vec<_>) = items.iter().cloned().zip(to_test).partition(|(_, t)| *t);
    Ok((
        test.into_iter().map(|(i, _)| i).collect(),
        validation.into_iter().map(|(i, _)| i).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn synthetic(counts: &[(QueryType, usize)]) -> Vec<BenchmarkItem> {
        let mut out = Vec::new();
        for &(kind, n) in counts {
            for i in 0..n {
                out.push(BenchmarkItem {
                    id: format!("{}-{i}", kind.as_str()),
                    chart_id: "bar".into(),
                    question: format!("q{i}"),
                    type_label: kind,
                    ground_truth: String::new(),
                    answerable: true,
                    open_ended: false,
                    cursor_context: None,
                });
            }
        }
        out
    }

    #[test]
    fn ratio_one_leaves_validation_empty() {
        let items = synthetic(&[(QueryType::Analytical, 5), (QueryType::Visual, 3)]);
        let (test, val) = stratified_split(&items, 1.0, 1).unwrap();
        assert_eq!(test.len(), 8);
        assert!(val.is_empty());
    }

    #[test]
    fn rejects_singleton_types_and_bad_ratios() {
        let items = synthetic(&[(QueryType::Analytical, 5), (QueryType::Visual, 1)]);
        assert_eq!(
            stratified_split(&items, 0.8, 1),
            Err(EvalError::InsufficientItems { kind: QueryType::Visual, have: 1 })
        );
        assert!(stratified_split(&items, 1.5, 1).is_err());
    }

    proptest! {
        #[test]
        fn split_is_deterministic_stratified_and_exhaustive(
            a in 2usize..60, v in 2usize..30, c in 2usize..30, n in 2usize..20,
            ratio in 0.0f64..=1.0, seed in any::<u64>(),
        ) {
            let counts = [(QueryType::Analytical, a), (QueryType::Visual, v), (QueryType::Contextual, c), (QueryType::Navigation, n)];
            let items = synthetic(&counts);
            let (test, val) = stratified_split(&items, ratio, seed).unwrap();
            prop_assert_eq!(stratified_split(&items, ratio, seed).unwrap(), (test.clone(), val.clone()));
            prop_assert_eq!(test.len() + val.len(), items.len());
            let mut ids: Vec<&str> = test.iter().chain(&val).map(|i| i.id.as_str()).collect();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), items.len());
            for (kind, total) in counts {
                let got = test.iter().filter(|i| i.type_label == kind).count() as f64;
                prop_assert!((got - total as f64 * ratio).abs() <= 1.0);
            }
        }
    }
}
