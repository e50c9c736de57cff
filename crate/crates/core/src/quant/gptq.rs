//! Batched GPTQ for groups of equally shaped expert matrices.
//!
//! Columns are quantized left to right. After each column the rounding
//! error, scaled by the inverse-Hessian Cholesky factor, is pushed into the
//! columns that are still unquantized. Updates outside the current block
//! of [`LAZY_BLOCK_SIZE`] columns are deferred and applied once per block.
//!
//! All experts of a group advance through the columns together. Every
//! expert sees exactly the arithmetic it would see on its own, so the
//! batched result is bit-identical to solving the experts one at a time.

use nalgebra::linalg::Cholesky;

use super::grid::{make_grid, rtn_quantize, GridMode, Levels};
use super::hessian::Hessian;
use super::matrix::{QuantizedMatrix, WeightMatrix};
use crate::{Error, Result};

/// Relative Hessian dampening, as a fraction of the mean diagonal.
pub const DEFAULT_DAMPING: f64 = 0.1;
pub const DEFAULT_GROUP_SIZE: usize = 16;
pub const LAZY_BLOCK_SIZE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallbackReason {
    /// No calibration token reached this expert.
    EmptyHessian,
    /// Cholesky factorization hit a non-positive pivot after dampening.
    NotPositiveDefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveOutcome {
    Gptq,
    /// Round-to-nearest was requested.
    Rtn,
    RtnFallback(FallbackReason),
}

impl SolveOutcome {
    pub fn is_fallback(&self) -> bool {
        matches!(self, SolveOutcome::RtnFallback(_))
    }
}

/// Experts that are quantized together. All weight matrices share one shape.
#[derive(Debug, Clone)]
pub struct ExpertGroup {
    experts: Vec<(WeightMatrix, Hessian)>,
}

impl ExpertGroup {
    pub fn new(experts: Vec<(WeightMatrix, Hessian)>) -> Result<Self> {
        let Some((first, _)) = experts.first() else {
            return Err(Error::invalid("expert group must not be empty"));
        };
        let (rows, cols) = (first.rows(), first.cols());
        for (i, (w, h)) in experts.iter().enumerate() {
            if w.rows() != rows || w.cols() != cols {
                return Err(Error::shape(format!(
                    "expert {i} is {}x{}, group is {rows}x{cols}",
                    w.rows(),
                    w.cols()
                )));
            }
            if h.dim() != cols {
                return Err(Error::shape(format!(
                    "expert {i} Hessian is {0}x{0}, expected {cols}x{cols}",
                    h.dim()
                )));
            }
        }
        Ok(Self { experts })
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn experts(&self) -> &[(WeightMatrix, Hessian)] {
        &self.experts
    }
}

#[derive(Debug, Clone)]
pub struct GroupSolution {
    pub matrices: Vec<QuantizedMatrix>,
    pub outcomes: Vec<SolveOutcome>,
}

impl GroupSolution {
    pub fn fallbacks(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_fallback()).count()
    }
}

/// Per-expert solver state. The working weights are stored column-major so
/// that the column being quantized is contiguous.
struct Solver {
    rows: usize,
    cols: usize,
    work: Vec<f64>,
    // Upper Cholesky factor of the damped inverse Hessian, row-major.
    factor: Vec<f64>,
    levels: Vec<Levels>,
    codes: Vec<u8>,
    block_err: Vec<f64>,
}

impl Solver {
    fn quantize_column(&mut self, i: usize, block_start: usize, block_end: usize) {
        let rows = self.rows;
        let d = self.factor[i * self.cols + i];
        let j = i - block_start;
        for r in 0..rows {
            let w = self.work[i * rows + r];
            let code = self.levels[r].nearest(w);
            self.codes[r * self.cols + i] = code;
            self.block_err[j * rows + r] = (w - self.levels[r].value(code)) / d;
        }
        for k in i + 1..block_end {
            let u = self.factor[i * self.cols + k];
            let err = &self.block_err[j * rows..(j + 1) * rows];
            let col = &mut self.work[k * rows..(k + 1) * rows];
            for (w, e) in col.iter_mut().zip(err) {
                *w -= e * u;
            }
        }
    }

    fn flush_block(&mut self, block_start: usize, block_end: usize) {
        let rows = self.rows;
        for k in block_end..self.cols {
            for i in block_start..block_end {
                let u = self.factor[i * self.cols + k];
                let j = i - block_start;
                let err = &self.block_err[j * rows..(j + 1) * rows];
                let col = &mut self.work[k * rows..(k + 1) * rows];
                for (w, e) in col.iter_mut().zip(err) {
                    *w -= e * u;
                }
            }
        }
    }
}

/// Upper Cholesky factor of `(H + δ·mean(diag H)·I)⁻¹`, or the reason it
/// does not exist.
fn inverse_factor(h: &Hessian, damping: f64) -> std::result::Result<Vec<f64>, FallbackReason> {
    if h.is_empty() {
        return Err(FallbackReason::EmptyHessian);
    }
    let n = h.dim();
    let mut m = h.to_dmatrix();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(FallbackReason::NotPositiveDefinite);
    }
    let mean_diag = (0..n).map(|i| m[(i, i)]).sum::<f64>() / n as f64;
    let damp = damping * mean_diag;
    for i in 0..n {
        m[(i, i)] += damp;
    }
    let chol = Cholesky::new(m).ok_or(FallbackReason::NotPositiveDefinite)?;
    let inv = chol.inverse();
    let chol = Cholesky::new(inv).ok_or(FallbackReason::NotPositiveDefinite)?;
    let l = chol.l();
    let mut upper = vec![0.0; n * n];
    for i in 0..n {
        for k in i..n {
            upper[i * n + k] = l[(k, i)];
        }
    }
    if upper.iter().any(|v| !v.is_finite()) || (0..n).any(|i| upper[i * n + i] <= 0.0) {
        return Err(FallbackReason::NotPositiveDefinite);
    }
    Ok(upper)
}

/// Quantizes every expert of `group` with batched GPTQ.
///
/// Experts whose Hessian is empty or not positive definite after dampening
/// are rounded to nearest instead; the returned outcomes record which.
pub fn gptq_quantize(group: &ExpertGroup, mode: GridMode, damping: f64) -> Result<GroupSolution> {
    if !(damping.is_finite() && damping >= 0.0) {
        return Err(Error::invalid(format!(
            "damping must be non-negative, got {damping}"
        )));
    }
    let n = group.len();
    let mut matrices: Vec<Option<QuantizedMatrix>> = vec![None; n];
    let mut outcomes = vec![SolveOutcome::Gptq; n];
    let mut solvers = Vec::new();
    let mut solver_index = Vec::new();

    for (e, (w, h)) in group.experts().iter().enumerate() {
        let grid = make_grid(w, mode);
        match inverse_factor(h, damping) {
            Err(reason) => {
                outcomes[e] = SolveOutcome::RtnFallback(reason);
                matrices[e] = Some(rtn_quantize(w, &grid));
            }
            Ok(factor) => {
                let (rows, cols) = (w.rows(), w.cols());
                let mut work = vec![0.0; rows * cols];
                for r in 0..rows {
                    for (c, &v) in w.row(r).iter().enumerate() {
                        work[c * rows + r] = v;
                    }
                }
                solvers.push(Solver {
                    rows,
                    cols,
                    work,
                    factor,
                    levels: (0..rows).map(|r| grid.levels(r)).collect(),
                    codes: vec![0; rows * cols],
                    block_err: vec![0.0; rows * LAZY_BLOCK_SIZE],
                });
                solver_index.push((e, grid.rows));
            }
        }
    }

    if let Some(cols) = solvers.first().map(|s| s.cols) {
        let mut start = 0;
        while start < cols {
            let end = (start + LAZY_BLOCK_SIZE).min(cols);
            for i in start..end {
                for s in solvers.iter_mut() {
                    s.quantize_column(i, start, end);
                }
            }
            for s in solvers.iter_mut() {
                s.flush_block(start, end);
            }
            start = end;
        }
    }

    for (s, (e, row_minmax)) in solvers.into_iter().zip(solver_index) {
        matrices[e] = Some(QuantizedMatrix {
            mode,
            rows: s.rows,
            cols: s.cols,
            codes: s.codes,
            row_minmax,
        });
    }

    Ok(GroupSolution {
        matrices: matrices
            .into_iter()
            .map(|m| m.expect("every expert solved"))
            .collect(),
        outcomes,
    })
}

/// Solves a single expert.
pub fn gptq_quantize_one(
    w: &WeightMatrix,
    h: &Hessian,
    mode: GridMode,
    damping: f64,
) -> Result<(QuantizedMatrix, SolveOutcome)> {
    let group = ExpertGroup::new(vec![(w.clone(), h.clone())])?;
    let mut sol = gptq_quantize(&group, mode, damping)?;
    Ok((sol.matrices.remove(0), sol.outcomes[0]))
}

/// Layer reconstruction error `‖Q X − W X‖²_F`, evaluated as
/// `Σ_r (q_r − w_r)ᵀ H (q_r − w_r)` with the undamped Hessian.
pub fn objective(w: &WeightMatrix, q: &QuantizedMatrix, h: &Hessian) -> f64 {
    assert_eq!((w.rows(), w.cols()), (q.rows, q.cols));
    let n = w.cols();
    let deq = q.dequantize();
    let mut total = 0.0;
    let mut diff = vec![0.0; n];
    for r in 0..w.rows() {
        for (c, d) in diff.iter_mut().enumerate() {
            *d = deq[r * n + c] - w.row(r)[c];
        }
        for i in 0..n {
            let hi = &h.entries()[i * n..(i + 1) * n];
            let dot: f64 = hi.iter().zip(&diff).map(|(a, b)| a * b).sum();
            total += diff[i] * dot;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::{accumulate_hessian, TokenBlock};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_weights(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> WeightMatrix {
        let v = (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        WeightMatrix::new(rows, cols, v).unwrap()
    }

    fn random_hessian(rng: &mut ChaCha8Rng, dim: usize, tokens: usize) -> Hessian {
        let v = (0..dim * tokens)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        accumulate_hessian(&TokenBlock::new(dim, v).unwrap(), None).unwrap()
    }

    /// Textbook GPTQ without lazy blocking, written against the formula.
    fn reference_gptq(w: &WeightMatrix, h: &Hessian, mode: GridMode, damping: f64) -> Vec<u8> {
        let n = w.cols();
        let grid = make_grid(w, mode);
        let u = inverse_factor(h, damping).unwrap();
        let mut codes = vec![0u8; w.rows() * n];
        for r in 0..w.rows() {
            let levels = grid.levels(r);
            let mut row = w.row(r).to_vec();
            for i in 0..n {
                let c = levels.nearest(row[i]);
                codes[r * n + i] = c;
                let err = (row[i] - levels.value(c)) / u[i * n + i];
                for k in i + 1..n {
                    row[k] -= err * u[i * n + k];
                }
            }
        }
        codes
    }

    #[test]
    fn identity_hessian_reduces_to_rtn() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for mode in [GridMode::Ternary, GridMode::TwoBit] {
            for _ in 0..20 {
                let rows = rng.random_range(1..9);
                let cols = rng.random_range(1..300);
                let w = random_weights(&mut rng, rows, cols);
                let (q, outcome) =
                    gptq_quantize_one(&w, &Hessian::identity(cols), mode, DEFAULT_DAMPING).unwrap();
                assert_eq!(outcome, SolveOutcome::Gptq);
                assert_eq!(q, rtn_quantize(&w, &make_grid(&w, mode)));
            }
        }
    }

    #[test]
    fn matches_unblocked_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for cols in [5, 64, 128] {
            let w = random_weights(&mut rng, 6, cols);
            let h = random_hessian(&mut rng, cols, 4 * cols);
            let (q, _) = gptq_quantize_one(&w, &h, GridMode::Ternary, DEFAULT_DAMPING).unwrap();
            assert_eq!(
                q.codes,
                reference_gptq(&w, &h, GridMode::Ternary, DEFAULT_DAMPING)
            );
        }
    }

    #[test]
    fn lazy_blocks_agree_with_reference_on_wide_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cols = 300;
        let w = random_weights(&mut rng, 8, cols);
        let h = random_hessian(&mut rng, cols, 2 * cols);
        let (q, _) = gptq_quantize_one(&w, &h, GridMode::Ternary, DEFAULT_DAMPING).unwrap();
        let reference = reference_gptq(&w, &h, GridMode::Ternary, DEFAULT_DAMPING);
        let differing = q
            .codes
            .iter()
            .zip(&reference)
            .filter(|(a, b)| a != b)
            .count();
        // Only floating point reassociation separates the two.
        assert!(differing <= 2, "{differing} codes differ");
    }

    #[test]
    fn singular_hessian_falls_back_to_rtn() {
        let w = WeightMatrix::from_rows(&[vec![0.3, -0.2, 0.9]]).unwrap();
        let zero = Hessian::from_entries(3, vec![0.0; 9], 10).unwrap();
        let (q, outcome) =
            gptq_quantize_one(&w, &zero, GridMode::Ternary, DEFAULT_DAMPING).unwrap();
        assert_eq!(
            outcome,
            SolveOutcome::RtnFallback(FallbackReason::NotPositiveDefinite)
        );
        assert_eq!(q, rtn_quantize(&w, &make_grid(&w, GridMode::Ternary)));

        let indefinite = Hessian::from_entries(2, vec![1.0, 0.0, 0.0, -5.0], 4).unwrap();
        let w = WeightMatrix::from_rows(&[vec![0.3, -0.2]]).unwrap();
        let (_, outcome) =
            gptq_quantize_one(&w, &indefinite, GridMode::Ternary, DEFAULT_DAMPING).unwrap();
        assert_eq!(
            outcome,
            SolveOutcome::RtnFallback(FallbackReason::NotPositiveDefinite)
        );
    }

    #[test]
    fn empty_hessian_falls_back_to_rtn() {
        let w = WeightMatrix::from_rows(&[vec![0.3, -0.2]]).unwrap();
        let h = accumulate_hessian(&TokenBlock::empty(2), None).unwrap();
        let (_, outcome) = gptq_quantize_one(&w, &h, GridMode::Ternary, DEFAULT_DAMPING).unwrap();
        assert_eq!(
            outcome,
            SolveOutcome::RtnFallback(FallbackReason::EmptyHessian)
        );
    }

    #[test]
    fn copies_of_one_expert_quantize_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random_weights(&mut rng, 4, 32);
        let h = random_hessian(&mut rng, 32, 64);
        let group = ExpertGroup::new(vec![(w, h); 16]).unwrap();
        let sol = gptq_quantize(&group, GridMode::Ternary, DEFAULT_DAMPING).unwrap();
        assert!(sol.matrices.windows(2).all(|p| p[0] == p[1]));
    }

    #[test]
    fn mixed_group_keeps_fallback_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w1 = random_weights(&mut rng, 3, 16);
        let w2 = random_weights(&mut rng, 3, 16);
        let h1 = random_hessian(&mut rng, 16, 40);
        let h2 = accumulate_hessian(&TokenBlock::empty(16), None).unwrap();
        let group = ExpertGroup::new(vec![(w1.clone(), h1.clone()), (w2.clone(), h2)]).unwrap();
        let sol = gptq_quantize(&group, GridMode::Ternary, DEFAULT_DAMPING).unwrap();
        assert_eq!(sol.fallbacks(), 1);
        assert_eq!(
            sol.matrices[0],
            gptq_quantize_one(&w1, &h1, GridMode::Ternary, DEFAULT_DAMPING)
                .unwrap()
                .0
        );
        assert_eq!(
            sol.matrices[1],
            rtn_quantize(&w2, &make_grid(&w2, GridMode::Ternary))
        );
    }

    #[test]
    fn group_shapes_are_checked() {
        let a = WeightMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        let b = WeightMatrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(ExpertGroup::new(vec![
            (a.clone(), Hessian::identity(2)),
            (b, Hessian::identity(3))
        ])
        .is_err());
        assert!(ExpertGroup::new(vec![(a, Hessian::identity(3))]).is_err());
        assert!(ExpertGroup::new(vec![]).is_err());
    }

    #[test]
    fn objective_is_zero_for_exact_grid_weights() {
        let w = WeightMatrix::from_rows(&[vec![-1.0, 0.0, 2.0]]).unwrap();
        let q = rtn_quantize(&w, &make_grid(&w, GridMode::Ternary));
        assert_eq!(objective(&w, &q, &Hessian::identity(3)), 0.0);
    }
}
