use super::{GraphemeSeq, ScorerError, ScorerParams, OP_DEL, OP_INS, OP_SUB};
use crate::lattice::LabelSeq;
use crate::logmath::{log_add, log_softmax, log_sum_exp};

/// Locally normalized log-probabilities derived from [`ScorerParams`].
///
/// Build once per parameter snapshot and reuse across sequence pairs.
#[derive(Debug, Clone)]
pub struct ScorerTables {
    num_phonemes: usize,
    num_graphemes: usize,
    /// log softmax(op_logits)
    pub(crate) op: [f64; 3],
    /// log(p_sub + p_del): stopping once every phoneme is read
    pub(crate) end: f64,
    /// per-row log softmax of the emission logits
    pub(crate) emit: Vec<f64>,
}

impl ScorerTables {
    pub fn new(params: &ScorerParams) -> Self {
        let op_v = log_softmax(&params.op_logits);
        let op = [op_v[0], op_v[1], op_v[2]];
        let g = params.num_graphemes();
        let emit = params
            .emit_logits
            .chunks_exact(g)
            .flat_map(log_softmax)
            .collect();
        Self {
            num_phonemes: params.num_phonemes(),
            num_graphemes: g,
            op,
            end: log_add(op[OP_SUB], op[OP_DEL]),
            emit,
        }
    }

    pub fn num_graphemes(&self) -> usize {
        self.num_graphemes
    }

    pub fn num_phonemes(&self) -> usize {
        self.num_phonemes
    }

    #[inline]
    pub(crate) fn emit(&self, row: usize, g: usize) -> f64 {
        self.emit[row * self.num_graphemes + g]
    }

    pub(crate) fn insert_row(&self) -> usize {
        self.num_phonemes
    }

    pub(crate) fn check(&self, h: &LabelSeq, y: &GraphemeSeq) -> Result<(), ScorerError> {
        if let Some(&p) = h.iter().find(|&&p| p >= self.num_phonemes) {
            return Err(ScorerError::PhonemeOutOfRange(p));
        }
        if let Some(&g) = y.iter().find(|&&g| g >= self.num_graphemes) {
            return Err(ScorerError::GraphemeOutOfRange(g));
        }
        Ok(())
    }

    /// `log p(y | h)`.
    pub fn logprob(&self, h: &LabelSeq, y: &GraphemeSeq) -> Result<f64, ScorerError> {
        self.check(h, y)?;
        let grid = Grid::new(h.as_slice(), y.as_slice());
        let alpha = self.forward(&grid);
        // rounding can push a certain path a hair above zero
        Ok((alpha[grid.at(grid.nh, grid.ny)] + self.end).min(0.0))
    }

    /// `log p(y | h)` and its gradient with respect to every logit.
    pub fn logprob_grad(
        &self,
        h: &LabelSeq,
        y: &GraphemeSeq,
    ) -> Result<(f64, ScorerParams), ScorerError> {
        self.check(h, y)?;
        let grid = Grid::new(h.as_slice(), y.as_slice());
        let alpha = self.forward(&grid);
        let logz = (alpha[grid.at(grid.nh, grid.ny)] + self.end).min(0.0);
        if logz == f64::NEG_INFINITY {
            return Err(ScorerError::ImpossiblePair);
        }
        let beta = self.backward(&grid);

        // expected counts of every local decision
        let (mut n_sub, mut n_ins, mut n_del, mut n_tins) = (0.0, 0.0, 0.0, 0.0);
        let mut emit_counts = vec![0.0; (self.num_phonemes + 1) * self.num_graphemes];
        let ins_row = self.insert_row();
        let post = |a: f64, edge: f64, b: f64| (a + edge + b - logz).exp();
        for j in 0..=grid.nh {
            for i in 0..=grid.ny {
                let a = alpha[grid.at(j, i)];
                if a == f64::NEG_INFINITY {
                    continue;
                }
                if i < grid.ny {
                    let g = grid.y[i];
                    let e = self.op[OP_INS] + self.emit(ins_row, g);
                    let w = post(a, e, beta[grid.at(j, i + 1)]);
                    if j < grid.nh {
                        n_ins += w;
                    } else {
                        n_tins += w;
                    }
                    emit_counts[ins_row * self.num_graphemes + g] += w;
                }
                if j < grid.nh {
                    let p = grid.h[j];
                    if i < grid.ny {
                        let g = grid.y[i];
                        let e = self.op[OP_SUB] + self.emit(p, g);
                        let w = post(a, e, beta[grid.at(j + 1, i + 1)]);
                        n_sub += w;
                        emit_counts[p * self.num_graphemes + g] += w;
                    }
                    n_del += post(a, self.op[OP_DEL], beta[grid.at(j + 1, i)]);
                }
            }
        }

        let mut grad = ScorerParams::uniform(self.num_phonemes, self.num_graphemes);
        let p_op = self.op.map(f64::exp);
        let p_end = self.end.exp();
        // non-terminal ops and terminal inserts: count * (onehot - p)
        let nonterminal = [n_sub, n_ins + n_tins, n_del];
        let total_ops: f64 = nonterminal.iter().sum::<f64>() + 1.0;
        for k in 0..3 {
            grad.op_logits[k] = nonterminal[k] - total_ops * p_op[k];
        }
        // the single stop event: d log(p_sub + p_del) = q - p
        grad.op_logits[OP_SUB] += p_op[OP_SUB] / p_end;
        grad.op_logits[OP_DEL] += p_op[OP_DEL] / p_end;

        for (row, counts) in emit_counts.chunks_exact(self.num_graphemes).enumerate() {
            let n: f64 = counts.iter().sum();
            if n == 0.0 {
                continue;
            }
            let lp = &self.emit[row * self.num_graphemes..(row + 1) * self.num_graphemes];
            for (g, (&c, &l)) in counts.iter().zip(lp).enumerate() {
                grad.emit_row_mut(row)[g] = c - n * l.exp();
            }
        }
        Ok((logz, grad))
    }

    fn forward(&self, grid: &Grid) -> Vec<f64> {
        let mut alpha = vec![f64::NEG_INFINITY; grid.cells()];
        alpha[0] = 0.0;
        let ins_row = self.insert_row();
        for j in 0..=grid.nh {
            for i in 0..=grid.ny {
                let a = alpha[grid.at(j, i)];
                if a == f64::NEG_INFINITY {
                    continue;
                }
                if i < grid.ny {
                    let g = grid.y[i];
                    let k = grid.at(j, i + 1);
                    alpha[k] = log_add(alpha[k], a + self.op[OP_INS] + self.emit(ins_row, g));
                }
                if j < grid.nh {
                    let p = grid.h[j];
                    if i < grid.ny {
                        let k = grid.at(j + 1, i + 1);
                        alpha[k] = log_add(alpha[k], a + self.op[OP_SUB] + self.emit(p, grid.y[i]));
                    }
                    let k = grid.at(j + 1, i);
                    alpha[k] = log_add(alpha[k], a + self.op[OP_DEL]);
                }
            }
        }
        alpha
    }

    fn backward(&self, grid: &Grid) -> Vec<f64> {
        let mut beta = vec![f64::NEG_INFINITY; grid.cells()];
        let ins_row = self.insert_row();
        for j in (0..=grid.nh).rev() {
            for i in (0..=grid.ny).rev() {
                let mut terms = [f64::NEG_INFINITY; 4];
                if j == grid.nh && i == grid.ny {
                    terms[0] = self.end;
                }
                if i < grid.ny {
                    terms[1] =
                        self.op[OP_INS] + self.emit(ins_row, grid.y[i]) + beta[grid.at(j, i + 1)];
                }
                if j < grid.nh {
                    if i < grid.ny {
                        terms[2] = self.op[OP_SUB]
                            + self.emit(grid.h[j], grid.y[i])
                            + beta[grid.at(j + 1, i + 1)];
                    }
                    terms[3] = self.op[OP_DEL] + beta[grid.at(j + 1, i)];
                }
                beta[grid.at(j, i)] = log_sum_exp(&terms);
            }
        }
        beta
    }
}

struct Grid<'a> {
    h: &'a [usize],
    y: &'a [usize],
    nh: usize,
    ny: usize,
}

impl<'a> Grid<'a> {
    fn new(h: &'a [usize], y: &'a [usize]) -> Self {
        Self {
            h,
            y,
            nh: h.len(),
            ny: y.len(),
        }
    }

    fn cells(&self) -> usize {
        (self.nh + 1) * (self.ny + 1)
    }

    #[inline]
    fn at(&self, j: usize, i: usize) -> usize {
        j * (self.ny + 1) + i
    }
}

/// `log p(y | h)` under the edit-op transducer.
pub fn seq_logprob(
    params: &ScorerParams,
    h: &LabelSeq,
    y: &GraphemeSeq,
) -> Result<f64, ScorerError> {
    ScorerTables::new(params).logprob(h, y)
}

/// Exact gradient of [`seq_logprob`] by forward-backward expected counts.
pub fn seq_logprob_grad(
    params: &ScorerParams,
    h: &LabelSeq,
    y: &GraphemeSeq,
) -> Result<ScorerParams, ScorerError> {
    ScorerTables::new(params).logprob_grad(h, y).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forced() -> ScorerParams {
        // a -> A with certainty, almost never insert or delete
        let mut p = ScorerParams::uniform(1, 2);
        p.emit_row_mut(0).copy_from_slice(&[40.0, 0.0]);
        p.op_logits = [40.0, 0.0, 0.0];
        p
    }

    #[test]
    fn forced_single_path() {
        let lp = seq_logprob(
            &forced(),
            &LabelSeq::new(vec![0]),
            &GraphemeSeq::new(vec![0]),
        )
        .unwrap();
        assert!(lp.abs() < 1e-6 && lp <= 0.0, "{lp}");
    }

    #[test]
    fn empty_pair_is_stop_probability() {
        let p = ScorerParams::uniform(1, 2);
        let lp = seq_logprob(&p, &LabelSeq::empty(), &GraphemeSeq::default()).unwrap();
        assert!((lp - (2.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_symbols() {
        let p = ScorerParams::uniform(1, 2);
        assert_eq!(
            seq_logprob(&p, &LabelSeq::new(vec![1]), &GraphemeSeq::default()).unwrap_err(),
            ScorerError::PhonemeOutOfRange(1)
        );
        assert_eq!(
            seq_logprob(&p, &LabelSeq::empty(), &GraphemeSeq::new(vec![2])).unwrap_err(),
            ScorerError::GraphemeOutOfRange(2)
        );
    }

    #[test]
    fn unused_phoneme_row_has_zero_gradient() {
        let mut p = ScorerParams::uniform(3, 2);
        p.emit_logits
            .iter_mut()
            .enumerate()
            .for_each(|(i, x)| *x = 0.3 * i as f64);
        let g = seq_logprob_grad(
            &p,
            &LabelSeq::new(vec![0, 2]),
            &GraphemeSeq::new(vec![1, 0]),
        )
        .unwrap();
        assert!(g.emit_row(1).iter().all(|&x| x == 0.0));
        assert!(g.emit_row(0).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn gradient_sums_to_zero_within_each_softmax_group() {
        let mut p = ScorerParams::uniform(2, 3);
        p.emit_logits
            .iter_mut()
            .enumerate()
            .for_each(|(i, x)| *x = (i as f64).cos());
        p.op_logits = [0.4, -0.3, 0.1];
        let g = seq_logprob_grad(
            &p,
            &LabelSeq::new(vec![1, 0, 1]),
            &GraphemeSeq::new(vec![2, 2]),
        )
        .unwrap();
        for r in 0..3 {
            assert!(g.emit_row(r).iter().sum::<f64>().abs() < 1e-12);
        }
        assert!(g.op_logits.iter().sum::<f64>().abs() < 1e-12);
    }
}
