use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Weighted sources for the mixer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub sources: Vec<(String, f64)>,
    pub seed: u64,
}

impl MixSpec {
    pub fn uniform<S: AsRef<str>>(ids: &[S], seed: u64) -> Self {
        Self {
            sources: ids.iter().map(|s| (s.as_ref().to_string(), 1.0)).collect(),
            seed,
        }
    }
}

/// One mixer output: an item of a source, indexed in `MixSpec::sources` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Draw {
    pub source: usize,
    pub index: usize,
}

/// Infinite deterministic stream over several datasets. Each source is read in
/// a shuffled order that is reshuffled whenever it wraps.
#[derive(Debug, Clone)]
pub struct Mixer {
    choose: WeightedIndex<f64>,
    orders: Vec<Vec<usize>>,
    cursors: Vec<usize>,
    rng: ChaCha8Rng,
}

impl Mixer {
    /// `datasets` lists every known id with its item count.
    pub fn new(spec: &MixSpec, datasets: &[(&str, usize)]) -> Result<Self, CorpusError> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut weights = Vec::new();
        let mut orders = Vec::new();
        for (id, w) in &spec.sources {
            let &(_, len) = datasets
                .iter()
                .find(|(name, _)| name == id)
                .ok_or_else(|| CorpusError::UnknownDataset(id.clone()))?;
            if !(w.is_finite() && *w >= 0.0) {
                return Err(CorpusError::InvalidWeight { id: id.clone(), weight: *w });
            }
            if *w > 0.0 && len == 0 {
                return Err(CorpusError::EmptyDataset(id.clone()));
            }
            let mut order: Vec<usize> = (0..len).collect();
            order.shuffle(&mut rng);
            orders.push(order);
            weights.push(*w);
        }
        let choose = WeightedIndex::new(&weights).map_err(|_| CorpusError::ZeroWeights)?;
        Ok(Self {
            choose,
            cursors: vec![0; orders.len()],
            orders,
            rng,
        })
    }

    /// Discards the next `n` draws.
    pub fn fast_forward(&mut self, n: usize) {
        for _ in 0..n {
            self.next();
        }
    }
}

impl Iterator for Mixer {
    type Item = Draw;

    fn next(&mut self) -> Option<Draw> {
        let source = self.choose.sample(&mut self.rng);
        if self.cursors[source] == self.orders[source].len() {
            self.orders[source].shuffle(&mut self.rng);
            self.cursors[source] = 0;
        }
        let index = self.orders[source][self.cursors[source]];
        self.cursors[source] += 1;
        Some(Draw { source, index })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(w: &[f64], seed: u64) -> MixSpec {
        MixSpec {
            sources: w.iter().enumerate().map(|(i, &w)| (format!("s{i}"), w)).collect(),
            seed,
        }
    }

    const DATA: [(&str, usize); 2] = [("s0", 5), ("s1", 7)];

    #[test]
    fn single_source_visits_each_item_once_per_epoch() {
        let mut m = Mixer::new(&spec(&[1.0], 3), &DATA).unwrap();
        for _ in 0..3 {
            let mut epoch: Vec<usize> = m.by_ref().take(5).map(|d| d.index).collect();
            epoch.sort();
            assert_eq!(epoch, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn zero_weight_source_never_appears() {
        let m = Mixer::new(&spec(&[1.0, 0.0], 1), &DATA).unwrap();
        assert!(m.take(1000).all(|d| d.source == 0));
    }

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<Draw> = Mixer::new(&spec(&[1.0, 2.0], 9), &DATA).unwrap().take(200).collect();
        let b: Vec<Draw> = Mixer::new(&spec(&[1.0, 2.0], 9), &DATA).unwrap().take(200).collect();
        assert_eq!(a, b);
        let mut c = Mixer::new(&spec(&[1.0, 2.0], 9), &DATA).unwrap();
        c.fast_forward(50);
        assert_eq!(c.take(150).collect::<Vec<_>>(), a[50..]);
    }

    #[test]
    fn errors() {
        assert!(matches!(Mixer::new(&spec(&[0.0, 0.0], 1), &DATA), Err(CorpusError::ZeroWeights)));
        let bad = MixSpec {
            sources: vec![("nope".into(), 1.0)],
            seed: 0,
        };
        assert!(matches!(Mixer::new(&bad, &DATA), Err(CorpusError::UnknownDataset(_))));
        assert!(matches!(Mixer::new(&spec(&[1.0], 0), &[("s0", 0)]), Err(CorpusError::EmptyDataset(_))));
    }
}
