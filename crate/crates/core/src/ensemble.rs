use crate::error::{Error, Result};

/// `N` particle positions in `R^d` at one time instant, stored row-major.
/// Equivalently, the empirical measure putting mass `1/N` on each row.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    positions: Vec<f64>,
    n: usize,
    dim: usize,
    time: f64,
}

impl Ensemble {
    pub fn from_flat(n: usize, dim: usize, positions: Vec<f64>, time: f64) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::InvalidInput(format!(
                "ensemble needs N >= 1 and d >= 1, got N = {n}, d = {dim}"
            )));
        }
        if positions.len() != n * dim {
            return Err(Error::InvalidDimension(format!(
                "expected {} coordinates for N = {n}, d = {dim}, got {}",
                n * dim,
                positions.len()
            )));
        }
        if let Some(k) = positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate in particle {}",
                k / dim
            )));
        }
        Ok(Self {
            positions,
            n,
            dim,
            time,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::InvalidDimension(format!(
                "ragged rows: expected length {dim}, found {}",
                bad.len()
            )));
        }
        Self::from_flat(rows.len(), dim, rows.concat(), 0.0)
    }

    /// One-dimensional convenience constructor.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.len(), 1, values.to_vec(), 0.0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.positions.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.positions
    }

    pub(crate) fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    /// Appends particles at the given positions.
    pub fn push_rows(&mut self, rows: &[Vec<f64>]) -> Result<()> {
        for r in rows {
            if r.len() != self.dim {
                return Err(Error::InvalidDimension(format!(
                    "row of length {} pushed into a d = {} ensemble",
                    r.len(),
                    self.dim
                )));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite coordinate".into()));
            }
            self.positions.extend_from_slice(r);
            self.n += 1;
        }
        Ok(())
    }

    /// Empirical mean `(1/N) sum_i V^i`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (acc, x) in m.iter_mut().zip(r) {
                *acc += x;
            }
        }
        let inv = 1.0 / self.n as f64;
        m.iter_mut().for_each(|x| *x *= inv);
        m
    }
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        assert!(Ensemble::from_flat(0, 1, vec![], 0.0).is_err());
        assert!(Ensemble::from_flat(2, 2, vec![1.0; 3], 0.0).is_err());
        assert!(Ensemble::from_flat(1, 1, vec![f64::NAN], 0.0).is_err());
        assert!(Ensemble::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let e = Ensemble::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.row(1), &[3.0, 4.0]);
        assert_eq!(e.mean(), vec![2.0, 3.0]);
    }

    #[test]
    fn push_rows_grows() {
        let mut e = Ensemble::from_scalars(&[0.0]).unwrap();
        e.push_rows(&[vec![2.0]]).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e.push_rows(&[vec![1.0, 1.0]]).is_err());
    }
}
