//! Few-shot example retrieval by embedding similarity.

use serde::{Deserialize, Serialize};

use super::{PipelineError, QueryType};
use crate::gateway::{cosine_similarity, EmbeddingVector, Gateway};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub question: String,
    pub kind: QueryType,
    pub embedding: EmbeddingVector,
}

/// Labeled questions from the validation split, embedded once up front.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExampleBank {
    pub entries: Vec<BankEntry>,
}

impl ExampleBank {
    pub fn build<'a>(gateway: &Gateway, items: impl IntoIterator<Item = (&'a str, QueryType)>) -> Result<ExampleBank, PipelineError> {
        let mut entries = Vec::new();
        for (question, kind) in items {
            entries.push(BankEntry {
                question: question.to_string(),
                kind,
                embedding: gateway.embed(question)?,
            });
        }
        Ok(ExampleBank { entries })
    }

    pub fn count(&self, kind: QueryType) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }
}

/// The `k` most similar bank questions for each classifiable type, in
/// [`QueryType::CLASSES`] order. Ties keep bank order.
pub fn select_examples<'b>(
    query: &[f64],
    bank: &'b ExampleBank,
    k: usize,
) -> Result<Vec<(QueryType, Vec<&'b BankEntry>)>, PipelineError> {
    let mut out = Vec::new();
    for kind in QueryType::CLASSES {
        let have = bank.count(kind);
        if have < k {
            return Err(PipelineError::InsufficientBank { kind, have, need: k });
        }
        let mut scored: Vec<(f64, usize, &BankEntry)> = Vec::new();
        for (i, e) in bank.entries.iter().enumerate().filter(|(_, e)| e.kind == kind) {
            // an all-zero embedding (no alphanumeric tokens) scores lowest
            let s = cosine_similarity(query, &e.embedding).unwrap_or(-2.0);
            scored.push((s, i, e));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        out.push((kind, scored.into_iter().take(k).map(|(_, _, e)| e).collect()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::hashed_embedding;

    fn toy_bank() -> ExampleBank {
        let items = [
            ("What is the highest anomaly?", QueryType::Analytical),
            ("Which year had the lowest anomaly?", QueryType::Analytical),
            ("What color is Europe?", QueryType::Visual),
            ("Is the line going up?", QueryType::Visual),
            ("What is an anomaly?", QueryType::Contextual),
            ("Where does this data come from?", QueryType::Contextual),
            ("Where am I?", QueryType::Navigation),
            ("Take me to the x-axis", QueryType::Navigation),
        ];
        ExampleBank {
            entries: items
                .iter()
                .map(|(q, k)| BankEntry {
                    question: q.to_string(),
                    kind: *k,
                    embedding: hashed_embedding(q),
                })
                .collect(),
        }
    }

    #[test]
    fn identical_query_ranks_first() {
        let bank = toy_bank();
        let q = hashed_embedding("Which year had the lowest anomaly?");
        let sel = select_examples(&q, &bank, 1).unwrap();
        assert_eq!(sel[0].1[0].question, "Which year had the lowest anomaly?");
    }

    #[test]
    fn selection_matches_brute_force_ranking() {
        let bank = toy_bank();
        for query in ["What is the anomaly in 2020?", "What color is the line?", "Where is the legend?", "x"] {
            let q = hashed_embedding(query);
            let sel = select_examples(&q, &bank, 2).unwrap();
            for (kind, picked) in &sel {
                // brute force: score every pair, best first, earlier index on ties
                let mut all: Vec<(usize, f64)> = bank
                    .entries
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.kind == *kind)
                    .map(|(i, e)| {
                        let dot: f64 = q.iter().zip(&e.embedding).map(|(a, b)| a * b).sum();
                        let nq = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let ne = e.embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
                        (i, if nq == 0.0 || ne == 0.0 { -2.0 } else { dot / (nq * ne) })
                    })
                    .collect();
                all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                let want: Vec<&str> = all.iter().take(2).map(|(i, _)| bank.entries[*i].question.as_str()).collect();
                let got: Vec<&str> = picked.iter().map(|e| e.question.as_str()).collect();
                assert_eq!(got, want, "{query} {kind:?}");
            }
        }
    }

    #[test]
    fn k_per_type_and_insufficient_bank() {
        let bank = toy_bank();
        let q = hashed_embedding("anything");
        let sel = select_examples(&q, &bank, 2).unwrap();
        assert_eq!(sel.iter().map(|(_, v)| v.len()).sum::<usize>(), 8);
        assert!(matches!(
            select_examples(&q, &bank, 3),
            Err(PipelineError::InsufficientBank { have: 2, need: 3, .. })
        ));
    }
}
