//! Per-island MAP-Elites grid.

use serde::{Deserialize, Serialize};

use super::Candidate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub island: usize,
    pub bins: usize,
    /// Row-major by (complexity bin, score bin).
    cells: Vec<Option<Candidate>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Insertion {
    EmptyCell,
    Improved,
    /// Incumbent kept; ties favour the incumbent.
    Rejected,
}

impl Insertion {
    pub fn inserted(self) -> bool {
        self != Insertion::Rejected
    }
}

impl Archive {
    pub fn new(island: usize, bins: usize) -> Self {
        Self {
            island,
            bins,
            cells: vec![None; bins * bins],
        }
    }

    fn slot(&self, cell: (usize, usize)) -> usize {
        cell.0 * self.bins + cell.1
    }

    pub fn get(&self, cell: (usize, usize)) -> Option<&Candidate> {
        self.cells[self.slot(cell)].as_ref()
    }

    /// Inserts an evaluated candidate when its cell is empty or it is strictly fitter.
    pub fn insert(&mut self, c: Candidate) -> Insertion {
        let (Some(cell), Some(fit)) = (c.features, c.fitness) else {
            return Insertion::Rejected;
        };
        let slot = self.slot(cell);
        match &self.cells[slot] {
            None => {
                self.cells[slot] = Some(c);
                Insertion::EmptyCell
            }
            Some(inc) if fit > inc.fitness.unwrap_or(f64::NEG_INFINITY) => {
                self.cells[slot] = Some(c);
                Insertion::Improved
            }
            Some(_) => Insertion::Rejected,
        }
    }

    /// Occupied cells in (complexity, score) order.
    pub fn occupied(&self) -> Vec<&Candidate> {
        self.cells.iter().flatten().collect()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `n` fittest occupants, ties to the lowest id.
    pub fn elites(&self, n: usize) -> Vec<Candidate> {
        let mut all: Vec<&Candidate> = self.occupied();
        all.sort_by(|a, b| {
            b.fitness
                .unwrap_or(0.0)
                .total_cmp(&a.fitness.unwrap_or(0.0))
                .then(a.id.cmp(&b.id))
        });
        all.into_iter().take(n).cloned().collect()
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.occupied().into_iter().min_by(|a, b| {
            b.fitness
                .unwrap_or(0.0)
                .total_cmp(&a.fitness.unwrap_or(0.0))
                .then(a.id.cmp(&b.id))
        })
    }
}
