use crate::error::{Error, Result};

/// Loss values together with a stable argsort that is maintained under
/// single-entry updates by bubbling the changed entry into place.
///
/// Ties are ordered by original index, so the permutation always equals the
/// one produced by a full stable sort of `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedLossTable {
    values: Vec<f64>,
    /// `perm[r]` is the index holding rank `r`.
    perm: Vec<usize>,
    /// `rank[i]` is the position of index `i` in `perm`.
    rank: Vec<usize>,
}

impl SortedLossTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Size("loss table must hold at least one value".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite loss {} at index {i}", values[i])));
        }
        let mut perm: Vec<usize> = (0..values.len()).collect();
        // Finite values, so `partial_cmp` is total; `sort_by` is stable.
        perm.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let mut rank = vec![0; values.len()];
        for (r, &i) in perm.iter().enumerate() {
            rank[i] = r;
        }
        Ok(SortedLossTable { values, perm, rank })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn rank(&self) -> &[usize] {
        &self.rank
    }

    /// Value at sorted position `r`.
    #[inline]
    pub fn sorted(&self, r: usize) -> f64 {
        self.values[self.perm[r]]
    }

    pub fn sorted_values(&self) -> Vec<f64> {
        self.perm.iter().map(|&i| self.values[i]).collect()
    }

    #[inline]
    fn before(&self, a: usize, b: usize) -> bool {
        let (va, vb) = (self.values[a], self.values[b]);
        va < vb || (va == vb && a < b)
    }

    /// Sets `values[j] = v` and restores the sort order, returning the number
    /// of adjacent transpositions performed.
    pub fn update(&mut self, j: usize, v: f64) -> Result<usize> {
        let n = self.values.len();
        if j >= n {
            return Err(Error::Index { index: j, len: n });
        }
        if !v.is_finite() {
            return Err(Error::Data(format!("non-finite loss {v} at index {j}")));
        }
        self.values[j] = v;
        let mut pos = self.rank[j];
        let mut swaps = 0;
        while pos > 0 && self.before(j, self.perm[pos - 1]) {
            let other = self.perm[pos - 1];
            self.perm[pos] = other;
            self.rank[other] = pos;
            pos -= 1;
            swaps += 1;
        }
        while pos + 1 < n && self.before(self.perm[pos + 1], j) {
            let other = self.perm[pos + 1];
            self.perm[pos] = other;
            self.rank[other] = pos;
            pos += 1;
            swaps += 1;
        }
        self.perm[pos] = j;
        self.rank[j] = pos;
        Ok(swaps)
    }
}
