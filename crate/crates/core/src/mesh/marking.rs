use crate::error::{Error, Result};

/// Cells selected for refinement, in descending indicator order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkedSet {
    pub cell_ids: Vec<usize>,
}

impl MarkedSet {
    pub fn len(&self) -> usize {
        self.cell_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_ids.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cell_ids.contains(&cell)
    }

    /// Cell ids in ascending order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.cell_ids.clone();
        v.sort_unstable();
        v
    }
}

/// Dörfler (bulk) marking: the shortest prefix of the cells sorted by
/// descending indicator whose sum reaches `alpha` times the total.
/// Equal indicators keep ascending cell order.
pub fn dorfler_mark(indicators: &[f64], alpha: f64) -> Result<MarkedSet> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidFraction(alpha));
    }
    for (cell, &value) in indicators.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidIndicator { cell, value });
        }
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]));
    let total: f64 = indicators.iter().sum();
    let target = alpha * total;
    let mut acc = 0.0;
    let mut cell_ids = Vec::new();
    for &c in &order {
        if !cell_ids.is_empty() && acc >= target {
            break;
        }
        acc += indicators[c];
        cell_ids.push(c);
    }
    Ok(MarkedSet { cell_ids })
}
