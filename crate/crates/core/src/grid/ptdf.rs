use ndarray::Array2;

use super::PowerGrid;
use crate::error::{Error, Result};

/// Slack-referenced DC sensitivities: `entries[[q, b]]` is the MW flow on
/// branch `q` (positive from `from_bus` to `to_bus`) per MW injected at bus
/// position `b` and withdrawn at the slack.
#[derive(Debug, Clone, PartialEq)]
pub struct PtdfMatrix {
    pub entries: Array2<f64>,
    pub slack_bus: usize,
}

impl PtdfMatrix {
    pub fn num_branches(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_buses(&self) -> usize {
        self.entries.ncols()
    }

    /// Branch flows for a bus injection vector (MW, ordered by bus position).
    pub fn flows(&self, injections: &[f64]) -> Vec<f64> {
        assert_eq!(injections.len(), self.num_buses(), "injection length");
        self.entries
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(injections).map(|(a, p)| a * p).sum())
            .collect()
    }
}

pub fn compute_ptdf(grid: &PowerGrid) -> Result<PtdfMatrix> {
    let n = grid.num_buses();
    let slack = grid
        .bus_index(grid.slack_bus)
        .ok_or_else(|| Error::InvalidGrid(format!("slack bus {} does not exist", grid.slack_bus)))?;

    let mut ends = Vec::with_capacity(grid.num_branches());
    for br in &grid.branches {
        let f = grid.bus_index(br.from_bus);
        let t = grid.bus_index(br.to_bus);
        match (f, t) {
            (Some(f), Some(t)) if br.reactance > 0.0 => ends.push((f, t, 1.0 / br.reactance)),
            _ => return Err(Error::InvalidGrid(format!("branch {} is not usable", br.id))),
        }
    }

    // Reduced susceptance matrix without the slack row/column.
    let red: Vec<usize> = (0..n).filter(|&b| b != slack).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &b) in red.iter().enumerate() {
        pos[b] = k;
    }
    let m = red.len();
    let mut bmat = vec![0.0; m * m];
    for &(f, t, y) in &ends {
        for (a, b, s) in [(f, f, y), (t, t, y), (f, t, -y), (t, f, -y)] {
            if pos[a] != usize::MAX && pos[b] != usize::MAX {
                bmat[pos[a] * m + pos[b]] += s;
            }
        }
    }

    // Cholesky factor, in place (lower triangle).
    for j in 0..m {
        let mut d = bmat[j * m + j];
        for k in 0..j {
            d -= bmat[j * m + k] * bmat[j * m + k];
        }
        if d <= 1e-12 * (1.0 + bmat[j * m + j].abs()) {
            return Err(Error::SingularSusceptance { bus: grid.buses[red[j]].id });
        }
        let d = d.sqrt();
        bmat[j * m + j] = d;
        for i in j + 1..m {
            let mut s = bmat[i * m + j];
            for k in 0..j {
                s -= bmat[i * m + k] * bmat[j * m + k];
            }
            bmat[i * m + j] = s / d;
        }
    }

    // Columns of the inverse: X e_k.
    let mut x = vec![0.0; m * m];
    let mut col = vec![0.0; m];
    for k in 0..m {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[k] = 1.0;
        for i in 0..m {
            let mut s = col[i];
            for j in 0..i {
                s -= bmat[i * m + j] * col[j];
            }
            col[i] = s / bmat[i * m + i];
        }
        for i in (0..m).rev() {
            let mut s = col[i];
            for j in i + 1..m {
                s -= bmat[j * m + i] * col[j];
            }
            col[i] = s / bmat[i * m + i];
        }
        for i in 0..m {
            x[i * m + k] = col[i];
        }
    }

    let mut entries = Array2::zeros((ends.len(), n));
    for (q, &(f, t, y)) in ends.iter().enumerate() {
        for (k, &b) in red.iter().enumerate() {
            let xf = if pos[f] == usize::MAX { 0.0 } else { x[pos[f] * m + k] };
            let xt = if pos[t] == usize::MAX { 0.0 } else { x[pos[t] * m + k] };
            entries[[q, b]] = y * (xf - xt);
        }
    }
    Ok(PtdfMatrix { entries, slack_bus: grid.slack_bus })
}
