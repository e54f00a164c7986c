//! Reduction of the fixed-user suggestion problem to QUBO and Ising form.
//!
//! For a trained model and a fixed user code `u0`, the item code `m` that
//! maximizes the predicted rating is the minimizer of a quadratic binary
//! problem over the item bits: absorbing the user part into the linear terms
//! and constants gives `energy(m) + offset == -predict(model, u0|m)` exactly.
//! A second change of variables (`spin = 2 bit - 1`) yields the equivalent
//! Ising form used by annealing samplers.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fm::FmModel;

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Quadratic unconstrained binary optimization problem
/// `energy(x) = sum_i linear[i] x_i + sum_{i<j} quadratic[i,j] x_i x_j`,
/// with couplings stored strictly upper-triangular and a carried constant
/// `offset` that is not part of [`Self::energy`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    n: usize,
    linear: Vec<f64>,
    quadratic: Vec<f64>,
    offset: f64,
}

impl QuboProblem {
    /// Builds a problem from linear terms and (i, j, weight) couplings.
    /// Symmetric and duplicate couplings are folded by summation; diagonal
    /// entries are folded into the linear terms (x^2 = x for binary x).
    pub fn new(
        linear: Vec<f64>,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
        offset: f64,
    ) -> Result<Self> {
        let n = linear.len();
        let mut quadratic = vec![0.0; pair_count(n)];
        let mut problem = QuboProblem {
            n,
            linear,
            quadratic: Vec::new(),
            offset,
        };
        for (i, j, weight) in couplings {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            if hi >= n {
                return Err(Error::IndexOutOfRange {
                    what: "variables",
                    index: hi,
                    size: n,
                });
            }
            if lo == hi {
                problem.linear[lo] += weight;
            } else {
                quadratic[pair_index(n, lo, hi)] += weight;
            }
        }
        problem.quadratic = quadratic;
        Ok(problem)
    }

    pub(crate) fn from_packed(linear: Vec<f64>, quadratic: Vec<f64>, offset: f64) -> Self {
        debug_assert_eq!(quadratic.len(), pair_count(linear.len()));
        QuboProblem {
            n: linear.len(),
            linear,
            quadratic,
            offset,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Coupling between two distinct variables (order-insensitive).
    pub fn coupling(&self, i: usize, j: usize) -> Result<f64> {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        if hi >= self.n {
            return Err(Error::IndexOutOfRange {
                what: "variables",
                index: hi,
                size: self.n,
            });
        }
        if lo == hi {
            return Err(Error::InvalidConfig(
                "coupling requires two distinct variables".into(),
            ));
        }
        Ok(self.quadratic[pair_index(self.n, lo, hi)])
    }

    /// The constant such that `energy(x) + offset` equals the quantity the
    /// problem was derived from.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Energy of a binary assignment, excluding the offset.
    pub fn energy(&self, x: &[u8]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        for (index, &b) in x.iter().enumerate() {
            if b > 1 {
                return Err(Error::NonBinaryEntry {
                    index,
                    value: b as f64,
                });
            }
        }
        let mut e = 0.0;
        for i in 0..self.n {
            if x[i] == 1 {
                e += self.linear[i];
                for j in (i + 1)..self.n {
                    if x[j] == 1 {
                        e += self.quadratic[pair_index(self.n, i, j)];
                    }
                }
            }
        }
        Ok(e)
    }
}

/// Ising problem `energy(s) = sum_i h[i] s_i + sum_{i<j} j[i,j] s_i s_j`
/// over spins in {-1, +1}, with the same offset convention as
/// [`QuboProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    n: usize,
    h: Vec<f64>,
    j: Vec<f64>,
    offset: f64,
}

impl IsingProblem {
    /// Builds a problem from fields and (i, j, weight) couplings. Symmetric
    /// and duplicate couplings fold by summation; diagonal entries fold into
    /// the offset (s^2 = 1 for spins).
    pub fn new(
        h: Vec<f64>,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
        offset: f64,
    ) -> Result<Self> {
        let n = h.len();
        let mut j_packed = vec![0.0; pair_count(n)];
        let mut total_offset = offset;
        for (i, j, weight) in couplings {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            if hi >= n {
                return Err(Error::IndexOutOfRange {
                    what: "variables",
                    index: hi,
                    size: n,
                });
            }
            if lo == hi {
                total_offset += weight;
            } else {
                j_packed[pair_index(n, lo, hi)] += weight;
            }
        }
        Ok(IsingProblem {
            n,
            h,
            j: j_packed,
            offset: total_offset,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn fields(&self) -> &[f64] {
        &self.h
    }

    /// Coupling between two distinct spins (order-insensitive).
    pub fn coupling(&self, i: usize, j: usize) -> Result<f64> {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        if hi >= self.n {
            return Err(Error::IndexOutOfRange {
                what: "variables",
                index: hi,
                size: self.n,
            });
        }
        if lo == hi {
            return Err(Error::InvalidConfig(
                "coupling requires two distinct variables".into(),
            ));
        }
        Ok(self.j[pair_index(self.n, lo, hi)])
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Largest magnitude among fields and couplings; zero for a problem
    /// with no variables.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.h
            .iter()
            .chain(&self.j)
            .fold(0.0f64, |acc, &w| acc.max(w.abs()))
    }

    /// Dense symmetric coupling matrix (row-major n*n, zero diagonal), for
    /// samplers that need O(n) local-field updates.
    pub(crate) fn dense_couplings(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let w = self.j[pair_index(self.n, i, j)];
                dense[i * self.n + j] = w;
                dense[j * self.n + i] = w;
            }
        }
        dense
    }

    /// Energy of a spin assignment, excluding the offset.
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: spins.len(),
            });
        }
        for (index, &s) in spins.iter().enumerate() {
            if s != 1 && s != -1 {
                return Err(Error::NonSpinEntry { index, value: s });
            }
        }
        let mut e = 0.0;
        for i in 0..self.n {
            let si = spins[i] as f64;
            e += self.h[i] * si;
            for j in (i + 1)..self.n {
                e += self.j[pair_index(self.n, i, j)] * si * spins[j] as f64;
            }
        }
        Ok(e)
    }
}

/// Reduces the suggestion problem for one user to a QUBO over the item bits.
///
/// The minimizing assignment of the result is the item code maximizing the
/// predicted rating, and for every item code `m`:
/// `energy(m) + offset == -predict(model, u0|m)`.
pub fn reduce_for_user(model: &FmModel, u0: &[u8]) -> Result<QuboProblem> {
    let n_u = model.user_bits();
    let n_m = model.item_bits();
    if u0.len() != n_u {
        return Err(Error::DimensionMismatch {
            expected: n_u,
            got: u0.len(),
        });
    }
    for (index, &b) in u0.iter().enumerate() {
        if b > 1 {
            return Err(Error::NonBinaryEntry {
                index,
                value: b as f64,
            });
        }
    }
    if n_m == 0 {
        return Err(Error::Empty { what: "item bits" });
    }

    let k = model.latent_dim();
    // Latent sum over the user's active bits; each item bit interacts with
    // the whole fixed user part only through this vector.
    let mut user_latent = vec![0.0f64; k];
    for j in 0..n_u {
        if u0[j] == 1 {
            for (acc, &vjf) in user_latent.iter_mut().zip(model.latent(j)) {
                *acc += vjf;
            }
        }
    }

    let w = model.linear_weights();
    let mut linear = Vec::with_capacity(n_m);
    for i in 0..n_m {
        let vi = model.latent(n_u + i);
        let mut cross = 0.0;
        for f in 0..k {
            cross += user_latent[f] * vi[f];
        }
        linear.push(-(w[n_u + i] + cross));
    }

    let mut quadratic = vec![0.0; pair_count(n_m)];
    for i in 0..n_m {
        for j in (i + 1)..n_m {
            quadratic[pair_index(n_m, i, j)] = -model.interaction(n_u + i, n_u + j);
        }
    }

    let mut constant = model.w0();
    for j in 0..n_u {
        if u0[j] == 1 {
            constant += w[j];
            for l in (j + 1)..n_u {
                if u0[l] == 1 {
                    constant += model.interaction(j, l);
                }
            }
        }
    }

    Ok(QuboProblem::from_packed(linear, quadratic, -constant))
}

/// Converts a QUBO to the equivalent Ising problem via `x = (s + 1) / 2`.
///
/// For every binary `x` and its spin image `s`:
/// `ising.energy(s) + ising.offset() == qubo.energy(x) + qubo.offset()`.
pub fn qubo_to_ising(qubo: &QuboProblem) -> IsingProblem {
    let n = qubo.n;
    let mut h: Vec<f64> = qubo.linear.iter().map(|&w| w / 2.0).collect();
    let mut j = vec![0.0; pair_count(n)];
    let mut offset = qubo.offset + h.iter().sum::<f64>();
    for a in 0..n {
        for b in (a + 1)..n {
            let w = qubo.quadratic[pair_index(n, a, b)];
            let quarter = w / 4.0;
            j[pair_index(n, a, b)] = quarter;
            h[a] += quarter;
            h[b] += quarter;
            offset += quarter;
        }
    }
    IsingProblem { n, h, j, offset }
}

/// Converts spins to the bits they encode (`+1 -> 1`, `-1 -> 0`).
pub fn spins_to_bits(spins: &[i8]) -> Result<Vec<u8>> {
    spins
        .iter()
        .enumerate()
        .map(|(index, &s)| match s {
            1 => Ok(1u8),
            -1 => Ok(0u8),
            other => Err(Error::NonSpinEntry {
                index,
                value: other,
            }),
        })
        .collect()
}

/// Converts bits to spins (`1 -> +1`, `0 -> -1`).
pub fn bits_to_spins(bits: &[u8]) -> Result<Vec<i8>> {
    bits.iter()
        .enumerate()
        .map(|(index, &b)| match b {
            1 => Ok(1i8),
            0 => Ok(-1i8),
            other => Err(Error::NonBinaryEntry {
                index,
                value: other as f64,
            }),
        })
        .collect()
}

fn coefficients_to_text(offset: f64, linear: &[f64], quadratic: &[f64], n: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!("# offset {offset}\n"));
    for (i, &w) in linear.iter().enumerate() {
        out.push_str(&format!("{i} {i} {w}\n"));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let w = quadratic[pair_index(n, i, j)];
            if w.to_bits() != 0.0f64.to_bits() {
                out.push_str(&format!("{i} {j} {w}\n"));
            }
        }
    }
    out
}

fn coefficients_from_text(text: &str, label: &str) -> Result<(f64, Vec<(usize, usize, f64)>)> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: label.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty input".into()))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("#") || head.next() != Some("offset") {
        return Err(parse_err(1, format!("expected '# offset <value>', got {header:?}")));
    }
    let offset: f64 = head
        .next()
        .ok_or_else(|| parse_err(1, "missing offset value".into()))?
        .parse()
        .map_err(|e| parse_err(1, format!("bad offset: {e}")))?;

    let mut entries = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut cols = trimmed.split_whitespace();
        let i: usize = cols
            .next()
            .ok_or_else(|| parse_err(line_no, "missing row index".into()))?
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad row index: {e}")))?;
        let j: usize = cols
            .next()
            .ok_or_else(|| parse_err(line_no, "missing column index".into()))?
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad column index: {e}")))?;
        let w: f64 = cols
            .next()
            .ok_or_else(|| parse_err(line_no, "missing coefficient".into()))?
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad coefficient: {e}")))?;
        if !w.is_finite() {
            return Err(parse_err(line_no, format!("non-finite coefficient {w}")));
        }
        if cols.next().is_some() {
            return Err(parse_err(line_no, "trailing fields".into()));
        }
        entries.push((i, j, w));
    }
    Ok((offset, entries))
}

fn vars_from_entries(entries: &[(usize, usize, f64)]) -> usize {
    entries
        .iter()
        .map(|&(i, j, _)| i.max(j) + 1)
        .max()
        .unwrap_or(0)
}

/// Serializes a QUBO as `# offset <value>` followed by `i i <linear>` and
/// `i j <coupling>` lines (0-based, i < j). Every linear term is written,
/// so the variable count round-trips; zero couplings are omitted.
pub fn qubo_to_text(qubo: &QuboProblem) -> String {
    coefficients_to_text(qubo.offset, &qubo.linear, &qubo.quadratic, qubo.n)
}

/// Parses the format written by [`qubo_to_text`]; values round-trip
/// bit-exactly.
pub fn qubo_from_text(text: &str) -> Result<QuboProblem> {
    qubo_from_text_labeled(text, "<qubo>")
}

fn qubo_from_text_labeled(text: &str, label: &str) -> Result<QuboProblem> {
    let (offset, entries) = coefficients_from_text(text, label)?;
    let n = vars_from_entries(&entries);
    let mut linear = vec![0.0; n];
    let mut linear_seen = vec![false; n];
    let mut quadratic = vec![0.0; pair_count(n)];
    let mut quadratic_seen = vec![false; pair_count(n)];
    for (i, j, w) in entries {
        if i == j {
            if linear_seen[i] {
                linear[i] += w;
            } else {
                linear[i] = w;
                linear_seen[i] = true;
            }
        } else {
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            let slot = pair_index(n, lo, hi);
            if quadratic_seen[slot] {
                quadratic[slot] += w;
            } else {
                quadratic[slot] = w;
                quadratic_seen[slot] = true;
            }
        }
    }
    Ok(QuboProblem::from_packed(linear, quadratic, offset))
}

/// Serializes an Ising problem in the same layout as [`qubo_to_text`],
/// with fields on the diagonal lines.
pub fn ising_to_text(ising: &IsingProblem) -> String {
    coefficients_to_text(ising.offset, &ising.h, &ising.j, ising.n)
}

/// Parses the format written by [`ising_to_text`]; values round-trip
/// bit-exactly.
pub fn ising_from_text(text: &str) -> Result<IsingProblem> {
    ising_from_text_labeled(text, "<ising>")
}

fn ising_from_text_labeled(text: &str, label: &str) -> Result<IsingProblem> {
    let (offset, entries) = coefficients_from_text(text, label)?;
    let n = vars_from_entries(&entries);
    let mut h = vec![0.0; n];
    let mut h_seen = vec![false; n];
    let mut j_packed = vec![0.0; pair_count(n)];
    let mut j_seen = vec![false; pair_count(n)];
    for (i, j, w) in entries {
        if i == j {
            if h_seen[i] {
                h[i] += w;
            } else {
                h[i] = w;
                h_seen[i] = true;
            }
        } else {
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            let slot = pair_index(n, lo, hi);
            if j_seen[slot] {
                j_packed[slot] += w;
            } else {
                j_packed[slot] = w;
                j_seen[slot] = true;
            }
        }
    }
    Ok(IsingProblem {
        n,
        h,
        j: j_packed,
        offset,
    })
}

pub fn write_qubo_file(path: impl AsRef<Path>, qubo: &QuboProblem) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, qubo_to_text(qubo))
        .map_err(|e| Error::io(format!("write {}", path.display()), e))
}

pub fn read_qubo_file(path: impl AsRef<Path>) -> Result<QuboProblem> {
    let path = path.as_ref();
    let text = read_text(path)?;
    qubo_from_text_labeled(&text, &path.display().to_string())
}

pub fn write_ising_file(path: impl AsRef<Path>, ising: &IsingProblem) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ising_to_text(ising))
        .map_err(|e| Error::io(format!("write {}", path.display()), e))
}

pub fn read_ising_file(path: impl AsRef<Path>) -> Result<IsingProblem> {
    let path = path.as_ref();
    let text = read_text(path)?;
    ising_from_text_labeled(&text, &path.display().to_string())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_index;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_model(user_bits: usize, item_bits: usize, k: usize, seed: u64) -> FmModel {
        let mut rng = crate::rng::seeded_rng(seed, 97, 0);
        let d = user_bits + item_bits;
        FmModel::from_parts(
            rng.random_range(-1.0..1.0),
            (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..d * k).map(|_| rng.random_range(-0.5..0.5)).collect(),
            user_bits,
            item_bits,
            k,
        )
        .unwrap()
    }

    fn random_qubo(n: usize, seed: u64) -> QuboProblem {
        let mut rng = crate::rng::seeded_rng(seed, 96, 0);
        let linear: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut couplings = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                couplings.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
        QuboProblem::new(linear, couplings, rng.random_range(-3.0..3.0)).unwrap()
    }

    #[test]
    fn energy_matches_hand_values() {
        let q = QuboProblem::new(vec![1.0, 2.0], [(0, 1, -0.5)], 0.0).unwrap();
        assert_eq!(q.energy(&[0, 0]).unwrap(), 0.0);
        assert_eq!(q.energy(&[1, 0]).unwrap(), 1.0);
        assert_eq!(q.energy(&[1, 1]).unwrap(), 2.5);
        let zero = QuboProblem::new(vec![0.0; 3], [], 0.0).unwrap();
        assert_eq!(zero.energy(&[1, 0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn energy_validates_inputs() {
        let q = QuboProblem::new(vec![1.0, 2.0], [], 0.0).unwrap();
        assert!(matches!(
            q.energy(&[1]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            q.energy(&[1, 3]),
            Err(Error::NonBinaryEntry { index: 1, .. })
        ));
        let ising = IsingProblem::new(vec![1.0, 2.0], [], 0.0).unwrap();
        assert!(matches!(
            ising.energy(&[1, 0]),
            Err(Error::NonSpinEntry { index: 1, .. })
        ));
    }

    #[test]
    fn couplings_fold_symmetric_entries() {
        let q = QuboProblem::new(vec![0.0, 0.0], [(0, 1, 1.0), (1, 0, 2.0)], 0.0).unwrap();
        assert_eq!(q.coupling(0, 1).unwrap(), 3.0);
        assert_eq!(q.coupling(1, 0).unwrap(), 3.0);
        let q = QuboProblem::new(vec![1.0], [(0, 0, 2.0)], 0.0).unwrap();
        assert_eq!(q.linear(), &[3.0]);
    }

    #[test]
    fn reduction_matches_hand_example() {
        // d = 2, w = (1, 2), <v_u, v_m> = 3, u0 = (1).
        let model = FmModel::from_parts(0.0, vec![1.0, 2.0], vec![1.0, 3.0], 1, 1, 1).unwrap();
        let q = reduce_for_user(&model, &[1]).unwrap();
        assert_eq!(q.num_vars(), 1);
        assert_eq!(q.linear(), &[-5.0]);
        assert_eq!(q.offset(), -1.0);
        // energy(m=1) + offset = -6 = -predict((1,1)).
        assert_eq!(q.energy(&[1]).unwrap() + q.offset(), -6.0);
        assert_eq!(q.energy(&[0]).unwrap() + q.offset(), -1.0);
    }

    #[test]
    fn zero_model_reduces_to_zero_problem() {
        let model = FmModel::zeroed(2, 3, 4);
        let q = reduce_for_user(&model, &[1, 0]).unwrap();
        assert!(q.linear().iter().all(|&w| w == 0.0));
        assert_eq!(q.offset(), 0.0);
    }

    #[test]
    fn reduction_identity_holds_exhaustively() {
        for seed in 0..10u64 {
            let user_bits = 2 + (seed as usize % 3);
            let item_bits = 3 + (seed as usize % 5);
            let model = random_model(user_bits, item_bits, 6, seed);
            let mut rng = crate::rng::seeded_rng(seed, 95, 0);
            let u0: Vec<u8> = (0..user_bits).map(|_| rng.random_range(0..=1u8)).collect();
            let q = reduce_for_user(&model, &u0).unwrap();
            for value in 0..(1usize << item_bits) {
                let m = encode_index(value, item_bits).unwrap();
                let mut x = u0.clone();
                x.extend_from_slice(&m);
                let lhs = q.energy(&m).unwrap() + q.offset();
                let rhs = -model.predict(&x).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-9,
                    "seed {seed} value {value}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn argmin_of_reduction_is_argmax_of_prediction() {
        let model = random_model(3, 6, 4, 77);
        let u0 = vec![1, 0, 1];
        let q = reduce_for_user(&model, &u0).unwrap();
        let mut best_energy = (f64::INFINITY, 0usize);
        let mut best_rating = (f64::NEG_INFINITY, 0usize);
        for value in 0..(1usize << 6) {
            let m = encode_index(value, 6).unwrap();
            let e = q.energy(&m).unwrap();
            if e < best_energy.0 {
                best_energy = (e, value);
            }
            let mut x = u0.clone();
            x.extend_from_slice(&m);
            let y = model.predict(&x).unwrap();
            if y > best_rating.0 {
                best_rating = (y, value);
            }
        }
        assert_eq!(best_energy.1, best_rating.1);
    }

    #[test]
    fn ising_transform_matches_hand_example() {
        // One variable with linear weight 2: h = 1, offset gains 1.
        let q = QuboProblem::new(vec![2.0], [], 0.0).unwrap();
        let ising = qubo_to_ising(&q);
        assert_eq!(ising.fields(), &[1.0]);
        assert_eq!(ising.offset(), 1.0);
        assert_eq!(ising.energy(&[-1]).unwrap() + ising.offset(), 0.0);
        assert_eq!(ising.energy(&[1]).unwrap() + ising.offset(), 2.0);
    }

    #[test]
    fn zero_qubo_maps_to_zero_ising() {
        let q = QuboProblem::new(vec![0.0; 4], [], 0.0).unwrap();
        let ising = qubo_to_ising(&q);
        assert!(ising.fields().iter().all(|&h| h == 0.0));
        assert_eq!(ising.offset(), 0.0);
    }

    #[test]
    fn ising_energy_identity_holds_exhaustively() {
        for seed in 0..20u64 {
            let n = 1 + (seed as usize % 10);
            let q = random_qubo(n, seed);
            let ising = qubo_to_ising(&q);
            for value in 0..(1usize << n) {
                let x = encode_index(value, n).unwrap();
                let spins = bits_to_spins(&x).unwrap();
                let lhs = ising.energy(&spins).unwrap() + ising.offset();
                let rhs = q.energy(&x).unwrap() + q.offset();
                assert!(
                    (lhs - rhs).abs() <= 1e-9,
                    "seed {seed} value {value}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn spin_bit_conversions_round_trip() {
        let bits = vec![1, 0, 0, 1, 1];
        let spins = bits_to_spins(&bits).unwrap();
        assert_eq!(spins, vec![1, -1, -1, 1, 1]);
        assert_eq!(spins_to_bits(&spins).unwrap(), bits);
        assert!(spins_to_bits(&[0]).is_err());
        assert!(bits_to_spins(&[2]).is_err());
    }

    #[test]
    fn text_export_has_documented_shape() {
        let q = QuboProblem::new(vec![1.5, 0.0], [(0, 1, -0.25)], -1.25).unwrap();
        let text = qubo_to_text(&q);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# offset -1.25");
        assert_eq!(lines[1], "0 0 1.5");
        assert_eq!(lines[2], "1 1 0");
        assert_eq!(lines[3], "0 1 -0.25");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        for seed in 0..20u64 {
            let q = random_qubo(1 + (seed as usize % 12), seed);
            let back = qubo_from_text(&qubo_to_text(&q)).unwrap();
            assert_eq!(back.num_vars(), q.num_vars());
            assert_eq!(back.offset().to_bits(), q.offset().to_bits());
            for (a, b) in back.linear().iter().zip(q.linear()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            for i in 0..q.num_vars() {
                for j in (i + 1)..q.num_vars() {
                    assert_eq!(
                        back.coupling(i, j).unwrap().to_bits(),
                        q.coupling(i, j).unwrap().to_bits()
                    );
                }
            }
            let ising = qubo_to_ising(&q);
            let ising_back = ising_from_text(&ising_to_text(&ising)).unwrap();
            assert_eq!(ising_back, ising);
        }
    }

    #[test]
    fn text_round_trip_preserves_negative_zero_and_tiny_values() {
        let q = QuboProblem::from_packed(vec![-0.0, 1e-300], vec![-0.0], 5e-324);
        let back = qubo_from_text(&qubo_to_text(&q)).unwrap();
        assert_eq!(back.linear()[0].to_bits(), (-0.0f64).to_bits());
        assert_eq!(back.linear()[1].to_bits(), 1e-300f64.to_bits());
        assert_eq!(back.coupling(0, 1).unwrap().to_bits(), (-0.0f64).to_bits());
        assert_eq!(back.offset().to_bits(), 5e-324f64.to_bits());
    }

    #[test]
    fn text_import_folds_duplicate_entries() {
        let q = qubo_from_text("# offset 0\n0 0 1.0\n0 0 0.5\n0 1 1.0\n1 0 2.0\n").unwrap();
        assert_eq!(q.num_vars(), 2);
        assert_eq!(q.linear(), &[1.5, 0.0]);
        assert_eq!(q.coupling(0, 1).unwrap(), 3.0);
    }

    #[test]
    fn text_parser_reports_line_numbers() {
        let err = qubo_from_text("# offset 0\n0 0 1.0\n0 1 oops\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        assert!(qubo_from_text("nonsense\n").is_err());
    }

    #[test]
    fn reduce_validates_user_code() {
        let model = FmModel::zeroed(2, 3, 1);
        assert!(matches!(
            reduce_for_user(&model, &[1]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            reduce_for_user(&model, &[1, 2]),
            Err(Error::NonBinaryEntry { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn qubo_and_ising_agree_on_random_states(seed in 0u64..500, n in 1usize..8) {
            let q = random_qubo(n, seed);
            let ising = qubo_to_ising(&q);
            let mut rng = crate::rng::seeded_rng(seed, 94, 0);
            let x: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1u8)).collect();
            let spins = bits_to_spins(&x).unwrap();
            let lhs = ising.energy(&spins).unwrap() + ising.offset();
            let rhs = q.energy(&x).unwrap() + q.offset();
            prop_assert!((lhs - rhs).abs() <= 1e-9);
        }
    }
}
