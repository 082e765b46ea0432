use super::{GraphemeSeq, ScorerParams, ScorerTables, OP_DEL, OP_INS, OP_SUB};
use crate::lattice::LabelSeq;
use crate::logmath::{log_add, log_sum_exp};

/// Forward mass over phoneme positions after emitting a fixed prefix.
#[derive(Clone)]
struct PrefixState {
    graphemes: Vec<usize>,
    /// log mass at (j, prefix_len) for j in 0..=|h|, deletions included
    mass: Vec<f64>,
    /// log P(output starts with `graphemes`)
    logp: f64,
}

/// Beam search for the most probable grapheme strings given `h`.
///
/// Prefixes are extended one grapheme at a time under the transducer's
/// left-to-right factorization, keeping the `beam` most probable prefixes.
/// Since no completion can be more probable than its prefix, the search stops
/// once `beam` finished strings all beat the best open prefix. Strings are cut
/// at `max_len` graphemes. Results are sorted by exact `log p(y | h)`, ties
/// going to the shorter then lexicographically smaller string.
pub fn decode_y(
    params: &ScorerParams,
    h: &LabelSeq,
    beam: usize,
    max_len: usize,
) -> Vec<(GraphemeSeq, f64)> {
    let tables = ScorerTables::new(params);
    decode_with_tables(&tables, h, beam, max_len)
}

pub(crate) fn decode_with_tables(
    t: &ScorerTables,
    h: &LabelSeq,
    beam: usize,
    max_len: usize,
) -> Vec<(GraphemeSeq, f64)> {
    let beam = beam.max(1);
    let h = h.as_slice();
    let nh = h.len();
    let ins_row = t.insert_row();

    let close_deletions = |mass: &mut Vec<f64>| {
        for j in 0..nh {
            mass[j + 1] = log_add(mass[j + 1], mass[j] + t.op[OP_DEL]);
        }
    };

    let mut start = vec![f64::NEG_INFINITY; nh + 1];
    start[0] = 0.0;
    close_deletions(&mut start);
    let mut open = vec![PrefixState {
        graphemes: Vec::new(),
        mass: start,
        logp: 0.0,
    }];
    let mut finished: Vec<(Vec<usize>, f64)> = Vec::new();

    for len in 0..=max_len {
        let mut children: Vec<PrefixState> = Vec::new();
        for state in &open {
            finished.push((state.graphemes.clone(), state.mass[nh] + t.end));
            if len == max_len {
                continue;
            }
            for g in 0..t.num_graphemes() {
                let ins = t.op[OP_INS] + t.emit(ins_row, g);
                let mut mass = vec![f64::NEG_INFINITY; nh + 1];
                for j in 0..=nh {
                    let m = state.mass[j];
                    if m == f64::NEG_INFINITY {
                        continue;
                    }
                    mass[j] = log_add(mass[j], m + ins);
                    if j < nh {
                        mass[j + 1] = log_add(mass[j + 1], m + t.op[OP_SUB] + t.emit(h[j], g));
                    }
                }
                let logp = log_sum_exp(&mass);
                close_deletions(&mut mass);
                let mut graphemes = state.graphemes.clone();
                graphemes.push(g);
                children.push(PrefixState {
                    graphemes,
                    mass,
                    logp,
                });
            }
        }
        rank(&mut finished);
        finished.truncate(beam);
        children.sort_by(|a, b| {
            b.logp
                .total_cmp(&a.logp)
                .then_with(|| a.graphemes.cmp(&b.graphemes))
        });
        children.truncate(beam);
        let bar = if finished.len() == beam {
            finished[beam - 1].1
        } else {
            f64::NEG_INFINITY
        };
        children.retain(|c| c.logp > bar);
        if children.is_empty() {
            break;
        }
        open = children;
    }

    let hseq = LabelSeq::new(h.to_vec());
    let mut out: Vec<(GraphemeSeq, f64)> = finished
        .into_iter()
        .map(|(g, _)| {
            let y = GraphemeSeq::new(g);
            let lp = t
                .logprob(&hseq, &y)
                .expect("symbols come from the scorer's own inventory");
            (y, lp)
        })
        .collect();
    out.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.0.len().cmp(&b.0.len()))
            .then_with(|| a.0.cmp(&b.0))
    });
    out
}

fn rank(v: &mut [(Vec<usize>, f64)]) {
    v.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.0.len().cmp(&b.0.len()))
            .then_with(|| a.0.cmp(&b.0))
    });
}
