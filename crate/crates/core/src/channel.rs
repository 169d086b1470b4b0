//! Discrete memoryless channels, per-symbol loss, single-symbol denoisers,
//! and the estimated-loss / pseudo-label matrices built from them.
//!
//! The estimated loss `L = pinv(PI) * rho` is the device that lets a denoiser
//! be scored (and a network be trained) from the noisy data alone: its
//! expectation under the channel reproduces the true expected loss of every
//! single-symbol denoiser.

use std::fmt;
use std::path::Path;

use crate::error::{NdudeError, Result};
use crate::matrix::Mat;

/// Row-sum tolerance when validating a transition matrix.
const ROW_SUM_TOL: f64 = 1e-12;
/// Pivot / Gram-determinant tolerance below which a channel is treated as
/// rank deficient.
const RANK_TOL: f64 = 1e-9;
/// Tolerance for the `PI * pinv(PI) * PI == PI` sanity check.
const PINV_CHECK_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelFamily {
    /// Binary symmetric channel with crossover probability `delta`.
    Bsc { delta: f64 },
    /// Symmetric channel over `size` symbols: diagonal `1 - delta`,
    /// off-diagonal `delta / (size - 1)`.
    Qsc { size: usize, delta: f64 },
    General,
}

/// A known discrete memoryless channel: the row-stochastic transition matrix
/// `PI` (|X| x |Z|) and its Moore-Penrose pseudo-inverse.
#[derive(Clone, Debug)]
pub struct ChannelModel {
    pi: Mat,
    pi_pinv: Mat,
    family: ChannelFamily,
}

impl ChannelModel {
    pub fn bsc(delta: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&delta) {
            return Err(NdudeError::InvalidParameter(format!(
                "BSC delta must be in [0, 0.5), got {delta}"
            )));
        }
        let pi = Mat::from_rows(&[vec![1.0 - delta, delta], vec![delta, 1.0 - delta]])?;
        Self::validated(pi, ChannelFamily::Bsc { delta })
    }

    pub fn qsc(size: usize, delta: f64) -> Result<Self> {
        if size < 2 {
            return Err(NdudeError::InvalidParameter(format!(
                "symmetric channel needs at least 2 symbols, got {size}"
            )));
        }
        let limit = (size - 1) as f64 / size as f64;
        if !(0.0..limit).contains(&delta) {
            return Err(NdudeError::InvalidParameter(format!(
                "QSC({size}) delta must be in [0, {limit}), got {delta}"
            )));
        }
        let off = delta / (size - 1) as f64;
        let pi = Mat::from_fn(size, size, |r, c| if r == c { 1.0 - delta } else { off });
        Self::validated(pi, ChannelFamily::Qsc { size, delta })
    }

    /// A general channel from an arbitrary row-stochastic full-row-rank matrix.
    pub fn from_matrix(pi: Mat) -> Result<Self> {
        Self::validated(pi, ChannelFamily::General)
    }

    /// For a symmetric-family channel, the same family with `delta` scaled by
    /// `factor` (e.g. 0.8 and 1.2 for mismatched-channel experiments).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if factor <= 0.0 {
            return Err(NdudeError::InvalidParameter(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        match self.family {
            ChannelFamily::Bsc { delta } => Self::bsc(delta * factor),
            ChannelFamily::Qsc { size, delta } => Self::qsc(size, delta * factor),
            ChannelFamily::General => Err(NdudeError::InvalidParameter(
                "only symmetric-family channels can be delta-scaled".into(),
            )),
        }
    }

    fn validated(pi: Mat, family: ChannelFamily) -> Result<Self> {
        for r in 0..pi.rows() {
            let row = pi.row(r);
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(NdudeError::InvalidParameter(format!(
                    "channel row {r} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(NdudeError::InvalidParameter(format!(
                    "channel row {r} sums to {sum}, not 1"
                )));
            }
        }
        let pi_pinv = pseudo_inverse(&pi)?;
        let check = pi.matmul(&pi_pinv)?.matmul(&pi)?;
        if check.max_abs_diff(&pi) > PINV_CHECK_TOL {
            return Err(NdudeError::SingularChannel(
                "pseudo-inverse residual exceeds tolerance".into(),
            ));
        }
        Ok(ChannelModel { pi, pi_pinv, family })
    }

    pub fn pi(&self) -> &Mat {
        &self.pi
    }

    pub fn pi_pinv(&self) -> &Mat {
        &self.pi_pinv
    }

    pub fn family(&self) -> ChannelFamily {
        self.family
    }

    pub fn delta(&self) -> Option<f64> {
        match self.family {
            ChannelFamily::Bsc { delta } | ChannelFamily::Qsc { delta, .. } => Some(delta),
            ChannelFamily::General => None,
        }
    }

    /// Clean-alphabet size |X|.
    pub fn x_size(&self) -> usize {
        self.pi.rows()
    }

    /// Noisy-alphabet size |Z|.
    pub fn z_size(&self) -> usize {
        self.pi.cols()
    }

    /// Parses `bsc:<delta>`, `qsc:<size>:<delta>`, or a matrix file path.
    pub fn from_spec(spec: &str) -> Result<Self> {
        if let Some(rest) = spec.strip_prefix("bsc:") {
            let delta = parse_f64(rest, "bsc delta")?;
            return Self::bsc(delta);
        }
        if let Some(rest) = spec.strip_prefix("qsc:") {
            let (size, delta) = rest.split_once(':').ok_or_else(|| {
                NdudeError::InvalidParameter(format!("qsc spec needs qsc:<size>:<delta>: {spec}"))
            })?;
            let size = size.parse::<usize>().map_err(|_| {
                NdudeError::InvalidParameter(format!("bad qsc size in {spec}"))
            })?;
            let delta = parse_f64(delta, "qsc delta")?;
            return Self::qsc(size, delta);
        }
        Self::from_file(Path::new(spec))
    }

    /// Loads a matrix file: first line `|X| |Z|`, then |X| rows of decimals.
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_matrix(read_matrix_file(path)?)
    }

    /// Short human/manifest description.
    pub fn describe(&self) -> String {
        match self.family {
            ChannelFamily::Bsc { delta } => format!("bsc:{delta}"),
            ChannelFamily::Qsc { size, delta } => format!("qsc:{size}:{delta}"),
            ChannelFamily::General => format!("general:{}x{}", self.pi.rows(), self.pi.cols()),
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| NdudeError::InvalidParameter(format!("bad {what}: {s}")))
}

fn read_matrix_file(path: &Path) -> Result<Mat> {
    let text = std::fs::read_to_string(path).map_err(|e| NdudeError::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| NdudeError::format(path, "empty matrix file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| NdudeError::format(path, format!("bad header line: {header}")))?;
    if dims.len() != 2 {
        return Err(NdudeError::format(path, "header must be `rows cols`"));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(rows);
    for _ in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| NdudeError::format(path, "fewer rows than header declares"))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| NdudeError::format(path, format!("bad row: {line}")))?;
        if row.len() != cols {
            return Err(NdudeError::format(
                path,
                format!("row has {} entries, expected {cols}", row.len()),
            ));
        }
        data.push(row);
    }
    Mat::from_rows(&data)
}

/// Writes a matrix in the plain-text format accepted by [`read_matrix_file`].
pub fn write_matrix_file(path: &Path, m: &Mat) -> Result<()> {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| NdudeError::io(path, e))
}

/// Moore-Penrose pseudo-inverse of a full-row-rank matrix.
///
/// Square matrices are inverted by Gaussian elimination with partial
/// pivoting; wide matrices use `A^T (A A^T)^-1`. Tall matrices cannot have
/// full row rank and are rejected, as is any pivot below the rank tolerance.
pub fn pseudo_inverse(m: &Mat) -> Result<Mat> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(NdudeError::InvalidParameter("empty matrix".into()));
    }
    if m.rows() > m.cols() {
        return Err(NdudeError::SingularChannel(format!(
            "{}x{} matrix cannot have full row rank",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() == m.cols() {
        return invert_square(m);
    }
    let gram = m.matmul(&m.transpose())?;
    let gram_inv = invert_square(&gram)?;
    m.transpose().matmul(&gram_inv)
}

fn invert_square(m: &Mat) -> Result<Mat> {
    let n = m.rows();
    // Augmented [m | I], reduced in place.
    let mut a = m.clone();
    let mut inv = Mat::identity(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                a.get(r1, col)
                    .abs()
                    .partial_cmp(&a.get(r2, col).abs())
                    .unwrap()
            })
            .unwrap();
        let pivot = a.get(pivot_row, col);
        if pivot.abs() <= RANK_TOL {
            return Err(NdudeError::SingularChannel(format!(
                "pivot {} at column {col} is below rank tolerance",
                pivot.abs()
            )));
        }
        if pivot_row != col {
            swap_rows(&mut a, pivot_row, col);
            swap_rows(&mut inv, pivot_row, col);
        }
        let inv_pivot = 1.0 / a.get(col, col);
        scale_row(&mut a, col, inv_pivot);
        scale_row(&mut inv, col, inv_pivot);
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a.get(r, col);
            if factor == 0.0 {
                continue;
            }
            axpy_row(&mut a, r, col, -factor);
            axpy_row(&mut inv, r, col, -factor);
        }
    }
    Ok(inv)
}

fn swap_rows(m: &mut Mat, r1: usize, r2: usize) {
    for c in 0..m.cols() {
        let tmp = m.get(r1, c);
        m.set(r1, c, m.get(r2, c));
        m.set(r2, c, tmp);
    }
}

fn scale_row(m: &mut Mat, r: usize, factor: f64) {
    for v in m.row_mut(r) {
        *v *= factor;
    }
}

/// row[dst] += factor * row[src]
fn axpy_row(m: &mut Mat, dst: usize, src: usize, factor: f64) {
    for c in 0..m.cols() {
        let v = m.get(dst, c) + factor * m.get(src, c);
        m.set(dst, c, v);
    }
}

/// Per-symbol loss `Lambda` (|X| x |Xhat|) and its maximum entry.
#[derive(Clone, Debug)]
pub struct LossModel {
    lambda: Mat,
    lambda_max: f64,
}

impl LossModel {
    pub fn hamming(size: usize) -> Self {
        let lambda = Mat::from_fn(size, size, |r, c| if r == c { 0.0 } else { 1.0 });
        let lambda_max = lambda.max_entry();
        LossModel { lambda, lambda_max }
    }

    pub fn from_matrix(lambda: Mat) -> Result<Self> {
        if lambda.data().iter().any(|&v| v < 0.0) {
            return Err(NdudeError::InvalidParameter(
                "loss entries must be non-negative".into(),
            ));
        }
        let lambda_max = lambda.max_entry();
        Ok(LossModel { lambda, lambda_max })
    }

    /// Parses `hamming:<size>` or a matrix file path.
    pub fn from_spec(spec: &str) -> Result<Self> {
        if let Some(rest) = spec.strip_prefix("hamming:") {
            let size = rest.parse::<usize>().map_err(|_| {
                NdudeError::InvalidParameter(format!("bad hamming size: {rest}"))
            })?;
            return Ok(Self::hamming(size));
        }
        Self::from_matrix(read_matrix_file(Path::new(spec))?)
    }

    pub fn lambda(&self) -> &Mat {
        &self.lambda
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    #[inline]
    pub fn get(&self, x: usize, xhat: usize) -> f64 {
        self.lambda.get(x, xhat)
    }

    pub fn x_size(&self) -> usize {
        self.lambda.rows()
    }

    pub fn xhat_size(&self) -> usize {
        self.lambda.cols()
    }
}

/// The set S of all maps from the noisy alphabet to the reconstruction
/// alphabet. A map with index `j` sends noisy symbol `z` to the `z`-th
/// base-|Xhat| digit of `j`, least-significant digit first.
#[derive(Clone, Copy, Debug)]
pub struct SingletDenoiserSet {
    z_size: usize,
    xhat_size: usize,
    count: usize,
}

impl SingletDenoiserSet {
    /// Caps |S| so a full-head enumeration stays practical.
    const MAX_COUNT: usize = 1 << 20;

    pub fn new(z_size: usize, xhat_size: usize) -> Result<Self> {
        if z_size == 0 || xhat_size == 0 {
            return Err(NdudeError::InvalidParameter(
                "alphabets must be non-empty".into(),
            ));
        }
        let count = xhat_size
            .checked_pow(z_size as u32)
            .filter(|&c| c <= Self::MAX_COUNT)
            .ok_or_else(|| {
                NdudeError::InvalidParameter(format!(
                    "|Xhat|^|Z| = {xhat_size}^{z_size} exceeds the supported size"
                ))
            })?;
        Ok(SingletDenoiserSet {
            z_size,
            xhat_size,
            count,
        })
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    pub fn xhat_size(&self) -> usize {
        self.xhat_size
    }

    /// |S| = |Xhat|^|Z|.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Applies denoiser `index` to noisy symbol `z`.
    #[inline]
    pub fn apply(&self, index: usize, z: u8) -> u8 {
        debug_assert!(index < self.count && (z as usize) < self.z_size);
        let mut j = index;
        for _ in 0..z {
            j /= self.xhat_size;
        }
        (j % self.xhat_size) as u8
    }

    /// The full mapping table of denoiser `index`, indexed by z.
    pub fn mapping(&self, index: usize) -> Vec<u8> {
        (0..self.z_size as u8).map(|z| self.apply(index, z)).collect()
    }

    /// Inverse of [`Self::mapping`].
    pub fn index_of(&self, mapping: &[u8]) -> Result<usize> {
        if mapping.len() != self.z_size {
            return Err(NdudeError::DimensionMismatch(format!(
                "mapping has {} entries, expected {}",
                mapping.len(),
                self.z_size
            )));
        }
        let mut index = 0usize;
        for (z, &xhat) in mapping.iter().enumerate() {
            if xhat as usize >= self.xhat_size {
                return Err(NdudeError::InvalidParameter(format!(
                    "mapping value {xhat} outside reconstruction alphabet"
                )));
            }
            index += (xhat as usize) * self.xhat_size.pow(z as u32);
        }
        Ok(index)
    }
}

/// Expected-loss matrix `rho` (|X| x |S|): `rho(x, s) = sum_z PI(x,z) *
/// Lambda(x, s(z))`.
pub fn rho_matrix(ch: &ChannelModel, loss: &LossModel, s_set: &SingletDenoiserSet) -> Result<Mat> {
    check_dims(ch, loss, s_set)?;
    let mut rho = Mat::zeros(ch.x_size(), s_set.count());
    for x in 0..ch.x_size() {
        for s in 0..s_set.count() {
            let mut acc = 0.0;
            for z in 0..ch.z_size() {
                acc += ch.pi().get(x, z) * loss.get(x, s_set.apply(s, z as u8) as usize);
            }
            rho.set(x, s, acc);
        }
    }
    Ok(rho)
}

/// Partial expected loss for one noisy symbol:
/// `rho_z(x, xhat) = PI(x, z) * Lambda(x, xhat)`.
pub fn rho_partial(ch: &ChannelModel, loss: &LossModel, z: usize) -> Mat {
    Mat::from_fn(ch.x_size(), loss.xhat_size(), |x, xhat| {
        ch.pi().get(x, z) * loss.get(x, xhat)
    })
}

fn check_dims(ch: &ChannelModel, loss: &LossModel, s_set: &SingletDenoiserSet) -> Result<()> {
    if loss.x_size() != ch.x_size() {
        return Err(NdudeError::DimensionMismatch(format!(
            "loss has |X|={}, channel has |X|={}",
            loss.x_size(),
            ch.x_size()
        )));
    }
    if s_set.z_size() != ch.z_size() || s_set.xhat_size() != loss.xhat_size() {
        return Err(NdudeError::DimensionMismatch(
            "singlet set does not match channel/loss alphabets".into(),
        ));
    }
    Ok(())
}

/// Estimated-loss and pseudo-label matrices, in both the full-enumeration
/// form (over S) and the per-noisy-symbol partial form used by the reduced
/// output head.
#[derive(Clone, Debug)]
pub struct PseudoLabelSet {
    /// Estimated loss `L = pinv(PI) * rho`, |Z| x |S|.
    pub l: Mat,
    /// Non-negative pseudo-labels `L_new = L_max - L`.
    pub l_new: Mat,
    pub l_max: f64,
    /// `L_z = pinv(PI) * rho_z`, one |Z| x |Xhat| matrix per z.
    pub partial_l: Vec<Mat>,
    /// `L_new,z = L_max_partial - L_z`, non-negative.
    pub partial_l_new: Vec<Mat>,
    /// Single maximum over all z and entries of `L_z`.
    pub partial_l_max: f64,
}

pub fn pseudo_labels(
    ch: &ChannelModel,
    loss: &LossModel,
    s_set: &SingletDenoiserSet,
) -> Result<PseudoLabelSet> {
    let rho = rho_matrix(ch, loss, s_set)?;
    let l = ch.pi_pinv().matmul(&rho)?;
    let l_max = l.max_entry();
    let l_new = l.affine(-1.0, l_max);

    let partial_l: Vec<Mat> = (0..ch.z_size())
        .map(|z| ch.pi_pinv().matmul(&rho_partial(ch, loss, z)))
        .collect::<Result<_>>()?;
    let partial_l_max = partial_l
        .iter()
        .map(Mat::max_entry)
        .fold(f64::NEG_INFINITY, f64::max);
    let partial_l_new = partial_l
        .iter()
        .map(|m| m.affine(-1.0, partial_l_max))
        .collect();

    Ok(PseudoLabelSet {
        l,
        l_new,
        l_max,
        partial_l,
        partial_l_new,
        partial_l_max,
    })
}

/// Ground-truth label matrices for supervised pre-training. Rows are indexed
/// by the pair `(x, z)` as `x * |Z| + z`.
#[derive(Clone, Debug)]
pub struct TrueLabelSet {
    /// `rho_true((x,z), s) = Lambda(x, s(z))`.
    pub rho_true: Mat,
    /// `L_true = Lambda_max - rho_true`, non-negative.
    pub l_true: Mat,
    pub lambda_max: f64,
    z_size: usize,
}

impl TrueLabelSet {
    #[inline]
    pub fn row_index(&self, x: u8, z: u8) -> usize {
        x as usize * self.z_size + z as usize
    }

    pub fn label_row(&self, x: u8, z: u8) -> &[f64] {
        self.l_true.row(self.row_index(x, z))
    }
}

pub fn true_labels(loss: &LossModel, s_set: &SingletDenoiserSet, z_size: usize) -> Result<TrueLabelSet> {
    if s_set.z_size() != z_size || s_set.xhat_size() != loss.xhat_size() {
        return Err(NdudeError::DimensionMismatch(
            "singlet set does not match loss/z alphabets".into(),
        ));
    }
    let rho_true = Mat::from_fn(loss.x_size() * z_size, s_set.count(), |row, s| {
        let x = row / z_size;
        let z = (row % z_size) as u8;
        loss.get(x, s_set.apply(s, z) as usize)
    });
    let lambda_max = loss.lambda_max();
    let l_true = rho_true.affine(-1.0, lambda_max);
    Ok(TrueLabelSet {
        rho_true,
        l_true,
        lambda_max,
        z_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn approx_rows(m: &Mat, rows: &[Vec<f64>], tol: f64) {
        assert_eq!(m.rows(), rows.len());
        for (r, expect) in rows.iter().enumerate() {
            for (c, e) in expect.iter().enumerate() {
                assert!(
                    (m.get(r, c) - e).abs() <= tol,
                    "({r},{c}): got {}, want {e}",
                    m.get(r, c)
                );
            }
        }
    }

    #[test]
    fn bsc_matrix_and_pinv() {
        let ch = ChannelModel::bsc(0.1).unwrap();
        approx_rows(ch.pi(), &[vec![0.9, 0.1], vec![0.1, 0.9]], 0.0);
        // Closed form (1/(1-2d)) * [[1-d, -d], [-d, 1-d]].
        approx_rows(
            ch.pi_pinv(),
            &[vec![1.125, -0.125], vec![-0.125, 1.125]],
            1e-12,
        );
        let prod = ch.pi().matmul(ch.pi_pinv()).unwrap();
        assert!(prod.max_abs_diff(&Mat::identity(2)) < 1e-12);
    }

    #[test]
    fn bsc_zero_is_identity() {
        let ch = ChannelModel::bsc(0.0).unwrap();
        assert!(ch.pi().max_abs_diff(&Mat::identity(2)) == 0.0);
    }

    #[test]
    fn bsc_range_checked() {
        assert!(ChannelModel::bsc(0.5).is_err());
        assert!(ChannelModel::bsc(0.7).is_err());
        assert!(ChannelModel::bsc(-0.01).is_err());
    }

    #[test]
    fn qsc_values() {
        let ch = ChannelModel::qsc(4, 0.1).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { 0.9 } else { 0.1 / 3.0 };
                assert!((ch.pi().get(r, c) - want).abs() < 1e-15);
            }
        }
        let prod = ch.pi().matmul(ch.pi_pinv()).unwrap();
        assert!(prod.max_abs_diff(&Mat::identity(4)) < 1e-9);
    }

    #[test]
    fn qsc_zero_is_identity() {
        let ch = ChannelModel::qsc(4, 0.0).unwrap();
        assert!(ch.pi().max_abs_diff(&Mat::identity(4)) == 0.0);
    }

    #[test]
    fn qsc_two_equals_bsc() {
        let q = ChannelModel::qsc(2, 0.1).unwrap();
        let b = ChannelModel::bsc(0.1).unwrap();
        assert!(q.pi().max_abs_diff(b.pi()) == 0.0);
    }

    #[test]
    fn qsc_range_checked() {
        assert!(ChannelModel::qsc(4, 0.75).is_err());
        assert!(ChannelModel::qsc(1, 0.1).is_err());
    }

    #[test]
    fn scaling_deltas() {
        let base = ChannelModel::qsc(4, 0.1).unwrap();
        let lo = base.scaled(0.8).unwrap();
        assert!((lo.delta().unwrap() - 0.08).abs() < 1e-15);
        let same = base.scaled(1.0).unwrap();
        assert!(same.pi().max_abs_diff(base.pi()) == 0.0);
        let hi = base.scaled(1.2).unwrap();
        assert!((hi.delta().unwrap() - 0.12).abs() < 1e-15);
        // Out of range after scaling, and non-symmetric channels refuse.
        assert!(base.scaled(8.0).is_err());
        let general = ChannelModel::from_matrix(base.pi().clone()).unwrap();
        assert!(general.scaled(0.8).is_err());
    }

    #[test]
    fn pinv_identity() {
        let i = Mat::identity(3);
        assert!(pseudo_inverse(&i).unwrap().max_abs_diff(&i) == 0.0);
    }

    #[test]
    fn pinv_rejects_rank_deficient() {
        let m = Mat::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        match pseudo_inverse(&m) {
            Err(NdudeError::SingularChannel(_)) => {}
            other => panic!("expected singular-channel error, got {other:?}"),
        }
    }

    #[test]
    fn pinv_rejects_tall() {
        let m = Mat::zeros(3, 2);
        assert!(pseudo_inverse(&m).is_err());
    }

    #[test]
    fn pinv_penrose_conditions_on_random_wide_matrices() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..50 {
            let rows = 2 + rng.next_below(7); // up to 8
            let cols = rows + rng.next_below(8 - rows + 1);
            // Diagonally dominated rows keep the matrix comfortably full rank.
            let m = Mat::from_fn(rows, cols, |r, c| {
                let base = if r == c { 2.0 } else { 0.0 };
                base + rng.next_f64()
            });
            let p = pseudo_inverse(&m).unwrap();
            let mpm = m.matmul(&p).unwrap().matmul(&m).unwrap();
            assert!(mpm.max_abs_diff(&m) < 1e-9, "A A+ A == A");
            let pmp = p.matmul(&m).unwrap().matmul(&p).unwrap();
            assert!(pmp.max_abs_diff(&p) < 1e-9, "A+ A A+ == A+");
            let ap = m.matmul(&p).unwrap();
            assert!(ap.max_abs_diff(&ap.transpose()) < 1e-9, "(A A+) symmetric");
            let pa = p.matmul(&m).unwrap();
            assert!(pa.max_abs_diff(&pa.transpose()) < 1e-9, "(A+ A) symmetric");
        }
    }

    #[test]
    fn singlet_digit_convention() {
        let s = SingletDenoiserSet::new(2, 2).unwrap();
        assert_eq!(s.count(), 4);
        assert_eq!(s.mapping(0), vec![0, 0]); // always-0
        assert_eq!(s.mapping(1), vec![1, 0]); // flip
        assert_eq!(s.mapping(2), vec![0, 1]); // say-what-you-see
        assert_eq!(s.mapping(3), vec![1, 1]); // always-1
    }

    #[test]
    fn singlet_round_trip_binary_and_dna() {
        for (z, x) in [(2usize, 2usize), (4, 4), (2, 3)] {
            let s = SingletDenoiserSet::new(z, x).unwrap();
            for j in 0..s.count() {
                assert_eq!(s.index_of(&s.mapping(j)).unwrap(), j);
            }
        }
    }

    #[test]
    fn singlet_overflow_rejected() {
        assert!(SingletDenoiserSet::new(64, 64).is_err());
    }

    #[test]
    fn rho_bsc_hamming_rows() {
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let s = SingletDenoiserSet::new(2, 2).unwrap();
        let rho = rho_matrix(&ch, &loss, &s).unwrap();
        // Direct expectation enumeration: rho(x, s) = sum_z PI(x,z) L(x,s(z)).
        // Note flip and say-what-you-see cost the same from either x by the
        // BSC/Hamming symmetry.
        approx_rows(
            &rho,
            &[vec![0.0, 0.9, 0.1, 1.0], vec![1.0, 0.9, 0.1, 0.0]],
            1e-15,
        );
    }

    #[test]
    fn rho_noiseless_say_what_you_see_is_zero() {
        let ch = ChannelModel::bsc(0.0).unwrap();
        let loss = LossModel::hamming(2);
        let s = SingletDenoiserSet::new(2, 2).unwrap();
        let rho = rho_matrix(&ch, &loss, &s).unwrap();
        let sws = s.index_of(&[0, 1]).unwrap();
        assert_eq!(rho.get(0, sws), 0.0);
        assert_eq!(rho.get(1, sws), 0.0);
    }

    #[test]
    fn pseudo_label_rows_bsc() {
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let s = SingletDenoiserSet::new(2, 2).unwrap();
        let p = pseudo_labels(&ch, &loss, &s).unwrap();
        // Pinv(PI) * rho by hand, confirmed by the unbiasedness oracle
        // PI * L == rho.
        approx_rows(
            &p.l,
            &[vec![-0.125, 0.9, 0.1, 1.125], vec![1.125, 0.9, 0.1, -0.125]],
            1e-12,
        );
        assert!((p.l_max - 1.125).abs() < 1e-12);
        approx_rows(
            &p.l_new,
            &[vec![1.25, 0.225, 1.025, 0.0], vec![0.0, 0.225, 1.025, 1.25]],
            1e-12,
        );
        assert!(p.l_new.data().iter().all(|&v| v >= -1e-12));
        assert!(p
            .partial_l_new
            .iter()
            .all(|m| m.data().iter().all(|&v| v >= -1e-12)));
    }

    #[test]
    fn pseudo_label_unbiasedness_random_channels() {
        // PI * L == rho for random full-row-rank channels and random
        // non-negative losses.
        let mut rng = SplitMix64::new(2024);
        for _ in 0..60 {
            let n = 2 + rng.next_below(3);
            let pi = random_channel_matrix(&mut rng, n);
            let ch = ChannelModel::from_matrix(pi).unwrap();
            let loss =
                LossModel::from_matrix(Mat::from_fn(n, n, |_, _| 3.0 * rng.next_f64())).unwrap();
            let s = SingletDenoiserSet::new(n, n).unwrap();
            let rho = rho_matrix(&ch, &loss, &s).unwrap();
            let p = pseudo_labels(&ch, &loss, &s).unwrap();
            let recon = ch.pi().matmul(&p.l).unwrap();
            assert!(recon.max_abs_diff(&rho) < 1e-9);
        }
    }

    pub(crate) fn random_channel_matrix(rng: &mut SplitMix64, n: usize) -> Mat {
        // Diagonally dominant rows normalized to 1: always full rank.
        let mut m = Mat::from_fn(n, n, |r, c| if r == c { n as f64 } else { rng.next_f64() });
        for r in 0..n {
            let sum: f64 = m.row(r).iter().sum();
            for v in m.row_mut(r) {
                *v /= sum;
            }
        }
        m
    }

    #[test]
    fn decomposition_sums() {
        let ch = ChannelModel::qsc(4, 0.1).unwrap();
        let loss = LossModel::hamming(4);
        let s = SingletDenoiserSet::new(4, 4).unwrap();
        let p = pseudo_labels(&ch, &loss, &s).unwrap();

        // sum_z L_z == L within 1e-9.
        for zr in 0..4 {
            for sc in 0..s.count() {
                let joint = p.l.get(zr, sc);
                let mapping = s.mapping(sc);
                let split: f64 = (0..4)
                    .map(|z| p.partial_l[z].get(zr, mapping[z] as usize))
                    .sum();
                assert!((joint - split).abs() < 1e-9, "L({zr},{sc})");
            }
        }

        // rho(x, s) == sum_z rho_z(x, s(z)) exactly, for all 256 singlets.
        let rho = rho_matrix(&ch, &loss, &s).unwrap();
        let partials: Vec<Mat> = (0..4).map(|z| rho_partial(&ch, &loss, z)).collect();
        for x in 0..4 {
            for sc in 0..s.count() {
                let mapping = s.mapping(sc);
                let mut acc = 0.0;
                for z in 0..4 {
                    acc += partials[z].get(x, mapping[z] as usize);
                }
                assert_eq!(acc, rho.get(x, sc), "exact decomposition at ({x},{sc})");
            }
        }
    }

    #[test]
    fn true_label_rows() {
        let loss = LossModel::hamming(2);
        let s = SingletDenoiserSet::new(2, 2).unwrap();
        let t = true_labels(&loss, &s, 2).unwrap();
        assert_eq!(t.label_row(0, 0), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(t.label_row(1, 1), &[0.0, 0.0, 1.0, 1.0]);
        assert!(t.l_true.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn true_labels_zero_loss() {
        let loss = LossModel::from_matrix(Mat::zeros(2, 2)).unwrap();
        let s = SingletDenoiserSet::new(2, 2).unwrap();
        let t = true_labels(&loss, &s, 2).unwrap();
        assert!(t.l_true.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spec_parsing() {
        assert!(ChannelModel::from_spec("bsc:0.1").is_ok());
        assert!(ChannelModel::from_spec("qsc:4:0.1").is_ok());
        assert!(ChannelModel::from_spec("bsc:0.7").is_err());
        assert!(ChannelModel::from_spec("qsc:4").is_err());
        assert!(LossModel::from_spec("hamming:4").is_ok());
        assert!(LossModel::from_spec("hamming:x").is_err());
    }

    #[test]
    fn matrix_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chan.txt");
        let ch = ChannelModel::qsc(3, 0.15).unwrap();
        write_matrix_file(&path, ch.pi()).unwrap();
        let loaded = ChannelModel::from_file(&path).unwrap();
        assert!(loaded.pi().max_abs_diff(ch.pi()) == 0.0);
        assert_eq!(loaded.family(), ChannelFamily::General);

        std::fs::write(&path, "2 2\n0.9 0.1\n").unwrap();
        assert!(matches!(
            ChannelModel::from_file(&path),
            Err(NdudeError::Format { .. })
        ));
    }
}
