//! Under-decimated paraunitary operators.
//!
//! Keeping one output block out of every window of `q` turns the `M×M`
//! paraunitary system into an `M × qM` sensing operator, ending at the
//! `M × L` sampling matrix `[H_0 … H_K]` when `q = K + 1`. The window size
//! can change from one window to the next.
//!
//! [`DecimatedAnalyzer`] evaluates the lattice lazily: when a retained block
//! time arrives it pulls only the stage outputs that block depends on,
//! memoized by `(stage, block time)` over the last `K + 1` block times. A
//! node whose lower half alone is wanted runs only the rotation stages that
//! finalize those coordinates and is completed later if its upper half is
//! asked for. Every value is produced by the same floating-point operations
//! as the full lattice, so retained blocks match a full run exactly.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{check_len, invalid, Error, Result};
use crate::givens::{rotation_count, stage_offset, GivensTransform};
use crate::paraunitary::{Lattice, ParaunitarySpec, PolyphaseCoeffs};

/// Sequence of windows; window `w` spans `q_w` input blocks and keeps its last.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecimationSchedule {
    windows: Vec<usize>,
}

impl DecimationSchedule {
    pub fn new(windows: Vec<usize>) -> Result<Self> {
        if let Some(pos) = windows.iter().position(|&q| q == 0) {
            return Err(invalid("q", format!("window {pos} has q = 0; q must be >= 1")));
        }
        Ok(Self { windows })
    }

    /// `count` windows of the same size.
    pub fn constant(q: usize, count: usize) -> Result<Self> {
        Self::new(vec![q; count])
    }

    /// Windows of a constant `q` covering at least `blocks` input blocks.
    pub fn covering(q: usize, blocks: usize) -> Result<Self> {
        Self::constant(q, blocks.div_ceil(q.max(1)))
    }

    pub fn push(&mut self, q: usize) -> Result<()> {
        if q == 0 {
            return Err(invalid("q", "must be >= 1"));
        }
        self.windows.push(q);
        Ok(())
    }

    pub fn windows(&self) -> &[usize] {
        &self.windows
    }

    pub fn total_blocks(&self) -> usize {
        self.windows.iter().sum()
    }

    /// Block times of the kept outputs.
    pub fn retained_times(&self) -> Vec<u64> {
        let mut start = 0u64;
        self.windows
            .iter()
            .map(|&q| {
                let t = start + q as u64 - 1;
                start += q as u64;
                t
            })
            .collect()
    }

    /// Parses `window_index,q,blocks` rows.
    ///
    /// Each row is a run of windows sharing one `q`; `blocks` is the input
    /// span of the run and must be a positive multiple of `q`. `window_index`
    /// is the index of the run's first window, so the first row has 0 and
    /// each later row continues where the previous run ended. A header line
    /// and blank lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut windows = Vec::new();
        let mut expected_index = 0usize;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("window_index") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(invalid("schedule", format!("line {}: expected 3 fields", line_no + 1)));
            }
            let parse = |s: &str, name: &'static str| {
                s.parse::<usize>()
                    .map_err(|_| invalid(name, format!("line {}: `{s}` is not a count", line_no + 1)))
            };
            let index = parse(fields[0], "window_index")?;
            let q = parse(fields[1], "q")?;
            let blocks = parse(fields[2], "blocks")?;
            if index != expected_index {
                return Err(invalid(
                    "window_index",
                    format!("line {}: expected {expected_index}, got {index}", line_no + 1),
                ));
            }
            if q == 0 || blocks == 0 || blocks % q != 0 {
                return Err(invalid(
                    "blocks",
                    format!("line {}: blocks must be a positive multiple of q", line_no + 1),
                ));
            }
            windows.extend(std::iter::repeat_n(q, blocks / q));
            expected_index += blocks / q;
        }
        Self::new(windows)
    }

    /// Inverse of [`DecimationSchedule::from_csv`], merging equal neighbours.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("window_index,q,blocks\n");
        let mut index = 0;
        let mut i = 0;
        while i < self.windows.len() {
            let q = self.windows[i];
            let run = self.windows[i..].iter().take_while(|&&w| w == q).count();
            let _ = writeln!(out, "{index},{q},{}", run * q);
            index += run;
            i += run;
        }
        out
    }
}

/// Unitary-stage and rotation counts of a decimated run against the
/// critically decimated run over the same input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCount {
    pub blocks: u64,
    pub executed_stages: u64,
    pub executed_rotations: u64,
    pub baseline_stages: u64,
    pub baseline_rotations: u64,
}

impl WorkCount {
    /// `baseline / executed` in unitary-stage applications.
    pub fn stage_ratio(&self) -> f64 {
        ratio(self.baseline_stages, self.executed_stages)
    }

    pub fn rotation_ratio(&self) -> f64 {
        ratio(self.baseline_rotations, self.executed_rotations)
    }
}

fn ratio(baseline: u64, executed: u64) -> f64 {
    if executed == 0 {
        if baseline == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        baseline as f64 / executed as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Progress {
    Empty,
    /// Coordinates `0..M/2` final.
    Lower,
    Full,
}

#[derive(Debug, Clone)]
struct Node {
    time: Option<u64>,
    progress: Progress,
    data: Vec<f64>,
}

/// One lattice node touched by the evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeVisit {
    pub stage: usize,
    pub time: u64,
    /// Whether the node ended fully evaluated (false: lower half only).
    pub full: bool,
}

/// A kept output block and its block time.
#[derive(Debug, Clone, PartialEq)]
pub struct RetainedBlock {
    pub time: u64,
    pub data: Vec<f64>,
}

/// Streaming decimated analysis with demand-driven pruning.
#[derive(Debug, Clone)]
pub struct DecimatedAnalyzer {
    spec: ParaunitarySpec,
    stages: Vec<GivensTransform>,
    pending: VecDeque<usize>,
    window_start: u64,
    next_time: u64,
    inputs: Vec<(Option<u64>, Vec<f64>)>,
    /// `memo[time % (K+1)][stage]`
    memo: Vec<Vec<Node>>,
    work: WorkCount,
    trace: Option<Vec<NodeVisit>>,
}

impl DecimatedAnalyzer {
    pub fn new(spec: ParaunitarySpec) -> Self {
        let m = spec.m();
        let depth = spec.order() + 1;
        let node = Node {
            time: None,
            progress: Progress::Empty,
            data: vec![0.0; m],
        };
        Self {
            spec,
            stages: (0..depth).map(|n| GivensTransform::new(spec.stage(n))).collect(),
            pending: VecDeque::new(),
            window_start: 0,
            next_time: 0,
            inputs: vec![(None, vec![0.0; m]); depth],
            memo: vec![vec![node; depth]; depth],
            work: WorkCount::default(),
            trace: None,
        }
    }

    pub fn with_schedule(spec: ParaunitarySpec, schedule: &DecimationSchedule) -> Self {
        let mut a = Self::new(spec);
        a.pending.extend(schedule.windows().iter().copied());
        a
    }

    /// Records every node visit; see [`DecimatedAnalyzer::trace`].
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> Option<&[NodeVisit]> {
        self.trace.as_deref()
    }

    /// Queues one more window of size `q` behind those already pending.
    pub fn set_compression(&mut self, q: usize) -> Result<()> {
        if q == 0 {
            return Err(invalid("q", "must be >= 1"));
        }
        self.pending.push_back(q);
        Ok(())
    }

    pub fn pending_windows(&self) -> usize {
        self.pending.len()
    }

    pub fn work(&self) -> WorkCount {
        self.work
    }

    /// Consumes one input block; returns the output if this block closes a window.
    pub fn push(&mut self, block: &[f64]) -> Result<Option<RetainedBlock>> {
        let m = self.spec.m();
        check_len("block", m, block.len())?;
        let t = self.next_time;
        let q = *self
            .pending
            .front()
            .ok_or(Error::ScheduleExhausted { block: t })?;

        let depth = self.spec.order() + 1;
        let slot = &mut self.inputs[(t % depth as u64) as usize];
        slot.0 = Some(t);
        slot.1.copy_from_slice(block);

        let k = self.spec.order() as u64;
        let l = rotation_count(m) as u64;
        self.work.blocks += 1;
        self.work.baseline_stages += k + 1;
        self.work.baseline_rotations += (k + 1) * l;
        self.next_time += 1;

        if t == self.window_start + q as u64 - 1 {
            self.pending.pop_front();
            self.window_start = t + 1;
            let top = self.spec.order();
            self.evaluate(top, t, Progress::Full);
            let data = self.node(top, t).to_vec();
            return Ok(Some(RetainedBlock { time: t, data }));
        }
        Ok(None)
    }

    fn node(&self, stage: usize, time: u64) -> &[f64] {
        let depth = self.spec.order() as u64 + 1;
        let node = &self.memo[(time % depth) as usize][stage];
        debug_assert_eq!(node.time, Some(time));
        &node.data
    }

    /// Brings node `(stage, time)` to at least `need`, pulling its inputs first.
    fn evaluate(&mut self, stage: usize, time: u64, need: Progress) {
        let m = self.spec.m();
        let half = m / 2;
        let depth = self.spec.order() as u64 + 1;
        let slot = (time % depth) as usize;

        if self.memo[slot][stage].time != Some(time) {
            let mut input = vec![0.0; m];
            if stage == 0 {
                let (tag, x) = &self.inputs[slot];
                debug_assert_eq!(*tag, Some(time));
                input.copy_from_slice(x);
            } else {
                self.evaluate(stage - 1, time, Progress::Lower);
                input[..half].copy_from_slice(&self.node(stage - 1, time)[..half]);
                if time > 0 {
                    self.evaluate(stage - 1, time - 1, Progress::Full);
                    input[half..].copy_from_slice(&self.node(stage - 1, time - 1)[half..]);
                }
            }
            let node = &mut self.memo[slot][stage];
            node.time = Some(time);
            node.progress = Progress::Empty;
            node.data = input;
        }

        let node = &mut self.memo[slot][stage];
        if node.progress >= need {
            return;
        }
        let transform = &mut self.stages[stage];
        let lower_rotations = stage_offset(m, half) as u64;
        let all_rotations = rotation_count(m) as u64;
        if node.progress == Progress::Empty {
            self.work.executed_stages += 1;
        }
        match (node.progress, need) {
            (Progress::Empty, Progress::Lower) => {
                transform.apply_stages(&mut node.data, 0..half).expect("node width");
                transform.apply_signs(&mut node.data, 0..half).expect("node width");
                self.work.executed_rotations += lower_rotations;
            }
            (Progress::Empty, Progress::Full) => {
                transform.apply(&mut node.data).expect("node width");
                self.work.executed_rotations += all_rotations;
            }
            (Progress::Lower, Progress::Full) => {
                transform.apply_stages(&mut node.data, half..m).expect("node width");
                transform.apply_signs(&mut node.data, half..m).expect("node width");
                self.work.executed_rotations += all_rotations - lower_rotations;
            }
            _ => unreachable!("progress only moves forward"),
        }
        node.progress = need;
        if let Some(trace) = &mut self.trace {
            let full = need == Progress::Full;
            match trace.iter_mut().find(|v| v.stage == stage && v.time == time) {
                Some(v) => v.full |= full,
                None => trace.push(NodeVisit { stage, time, full }),
            }
        }
    }
}

/// Outputs and work of a completed decimated run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecimatedRun {
    pub retained: Vec<RetainedBlock>,
    pub work: WorkCount,
}

impl DecimatedRun {
    pub fn work_report(&self) -> WorkCount {
        self.work
    }

    pub fn blocks(&self) -> Vec<Vec<f64>> {
        self.retained.iter().map(|r| r.data.clone()).collect()
    }
}

/// Runs `blocks` through the decimated analyzer under `schedule`.
///
/// A trailing partial window produces no output.
pub fn forward_decimated(
    spec: ParaunitarySpec,
    blocks: &[Vec<f64>],
    schedule: &DecimationSchedule,
) -> Result<DecimatedRun> {
    if schedule.total_blocks() < blocks.len() {
        return Err(Error::ScheduleExhausted {
            block: schedule.total_blocks() as u64,
        });
    }
    let mut analyzer = DecimatedAnalyzer::with_schedule(spec, schedule);
    let mut retained = Vec::new();
    for b in blocks {
        if let Some(r) = analyzer.push(b)? {
            retained.push(r);
        }
    }
    Ok(DecimatedRun {
        retained,
        work: analyzer.work(),
    })
}

/// Transpose of [`forward_decimated`] over `total_blocks` input blocks.
///
/// The kept measurements are placed at their block times, every other output
/// position is zero, and the causal inverse lattice runs over the result; its
/// output shifted back by `K` blocks is the adjoint.
pub fn adjoint_decimated(
    spec: ParaunitarySpec,
    retained: &[Vec<f64>],
    schedule: &DecimationSchedule,
    total_blocks: usize,
) -> Result<Vec<Vec<f64>>> {
    let m = spec.m();
    let times: Vec<u64> = schedule
        .retained_times()
        .into_iter()
        .filter(|&t| t < total_blocks as u64)
        .collect();
    check_len("retained", times.len(), retained.len())?;
    let mut full = vec![vec![0.0; m]; total_blocks];
    for (&t, y) in times.iter().zip(retained) {
        check_len("retained block", m, y.len())?;
        full[t as usize].copy_from_slice(y);
    }
    let mut lattice = Lattice::inverse(spec);
    for block in full.iter_mut() {
        lattice.process_in_place(block)?;
    }
    full.extend(lattice.flush());
    let out = full.split_off(spec.order());
    Ok(out)
}

/// `[H_{qi}, …, H_{qi+q-1}]` for `i = 0..=⌊K/q⌋`, zero past `H_K`.
pub fn downsampled_coefficients(coeffs: &PolyphaseCoeffs, q: usize) -> Result<Vec<DMatrix<f64>>> {
    if q == 0 {
        return Err(invalid("q", "must be >= 1"));
    }
    let m = coeffs.m();
    let groups = coeffs.order() / q + 1;
    Ok((0..groups)
        .map(|i| {
            let mut block = DMatrix::zeros(m, q * m);
            for p in 0..q {
                let n = q * i + p;
                if n <= coeffs.order() {
                    block.columns_mut(p * m, m).copy_from(&coeffs.matrices()[n]);
                }
            }
            block
        })
        .collect())
}

/// The `M × L` matrix `[H_0, …, H_K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMatrix {
    matrix: DMatrix<f64>,
}

impl SamplingMatrix {
    pub fn from_coefficients(coeffs: &PolyphaseCoeffs) -> Self {
        let q = coeffs.order() + 1;
        let matrix = downsampled_coefficients(coeffs, q)
            .expect("q >= 1")
            .swap_remove(0);
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `max |B Bᵀ - I|`.
    pub fn row_orthonormality_error(&self) -> f64 {
        let m = self.matrix.nrows();
        (&self.matrix * self.matrix.transpose() - DMatrix::<f64>::identity(m, m)).amax()
    }

    /// `B` times the newest-first stack `[x_t; x_{t-1}; …; x_{t-K}]`.
    pub fn apply_window(&self, newest_first: &[Vec<f64>]) -> Result<Vec<f64>> {
        let m = self.matrix.nrows();
        check_len("window", self.matrix.ncols() / m, newest_first.len())?;
        let stacked: Vec<f64> = newest_first.iter().flatten().copied().collect();
        check_len("window samples", self.matrix.ncols(), stacked.len())?;
        Ok((&self.matrix * nalgebra::DVector::from_vec(stacked)).data.into())
    }

    /// `Bᵀ y`, split back into newest-first blocks.
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<Vec<f64>>> {
        let m = self.matrix.nrows();
        check_len("y", m, y.len())?;
        let x = self.matrix.transpose() * nalgebra::DVector::from_column_slice(y);
        Ok(x.as_slice().chunks(m).map(<[f64]>::to_vec).collect())
    }
}

/// A decimated analyzer over a fixed span, viewed as a linear map on flat vectors.
#[derive(Debug, Clone)]
pub struct DecimatedOperator {
    spec: ParaunitarySpec,
    schedule: DecimationSchedule,
    blocks: usize,
}

impl DecimatedOperator {
    pub fn new(spec: ParaunitarySpec, schedule: DecimationSchedule, blocks: usize) -> Result<Self> {
        if schedule.total_blocks() < blocks {
            return Err(Error::ScheduleExhausted {
                block: schedule.total_blocks() as u64,
            });
        }
        Ok(Self { spec, schedule, blocks })
    }

    /// Input length: `blocks · M`.
    pub fn cols(&self) -> usize {
        self.blocks * self.spec.m()
    }

    /// Measurement count: kept blocks times `M`.
    pub fn rows(&self) -> usize {
        let kept = self
            .schedule
            .retained_times()
            .iter()
            .filter(|&&t| t < self.blocks as u64)
            .count();
        kept * self.spec.m()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("x", self.cols(), x.len())?;
        let blocks: Vec<Vec<f64>> = x.chunks(self.spec.m()).map(<[f64]>::to_vec).collect();
        let run = forward_decimated(self.spec, &blocks, &self.schedule)?;
        Ok(run.retained.into_iter().flat_map(|r| r.data).collect())
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("y", self.rows(), y.len())?;
        let retained: Vec<Vec<f64>> = y.chunks(self.spec.m()).map(<[f64]>::to_vec).collect();
        let x = adjoint_decimated(self.spec, &retained, &self.schedule, self.blocks)?;
        Ok(x.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paraunitary::{coefficients, forward_stream};
    use crate::prng::SeedStream;

    fn stream(m: usize, blocks: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut s = SeedStream::new(seed);
        (0..blocks)
            .map(|_| (0..m).map(|_| s.uniform_unit() * 2.0 - 1.0).collect())
            .collect()
    }

    fn discard_oracle(spec: ParaunitarySpec, x: &[Vec<f64>], schedule: &DecimationSchedule) -> Vec<Vec<f64>> {
        let full = forward_stream(spec, x).unwrap();
        schedule
            .retained_times()
            .into_iter()
            .filter(|&t| (t as usize) < x.len())
            .map(|t| full[t as usize].clone())
            .collect()
    }

    #[test]
    fn schedule_validation_and_times() {
        assert!(DecimationSchedule::new(vec![1, 0]).is_err());
        let s = DecimationSchedule::new(vec![1, 3, 2]).unwrap();
        assert_eq!(s.retained_times(), vec![0, 3, 5]);
        assert_eq!(s.total_blocks(), 6);
        assert_eq!(DecimationSchedule::covering(4, 9).unwrap().windows(), &[4, 4, 4]);
    }

    #[test]
    fn schedule_csv_round_trip() {
        let s = DecimationSchedule::new(vec![1, 1, 3, 5, 5, 2]).unwrap();
        let text = s.to_csv();
        assert_eq!(text, "window_index,q,blocks\n0,1,2\n2,3,3\n3,5,10\n5,2,2\n");
        assert!(DecimationSchedule::from_csv("0,1,2\n1,3,3\n").is_err());
        assert_eq!(DecimationSchedule::from_csv(&text).unwrap(), s);
        assert!(DecimationSchedule::from_csv("0,3,4\n").is_err());
        assert!(DecimationSchedule::from_csv("1,3,3\n").is_err());
        assert!(DecimationSchedule::from_csv("0,x,3\n").is_err());
        assert!(DecimationSchedule::from_csv("0,3\n").is_err());
    }

    #[test]
    fn downsampled_groups() {
        let spec = ParaunitarySpec::new(4, 4, 1).unwrap();
        let c = coefficients(&spec);
        let q1 = downsampled_coefficients(&c, 1).unwrap();
        assert_eq!(q1.len(), 5);
        assert_eq!(q1[2], c.matrices()[2]);

        let q2 = downsampled_coefficients(&c, 2).unwrap();
        assert_eq!(q2.len(), 3);
        assert_eq!(q2[1].columns(0, 4), c.matrices()[2].columns(0, 4));
        assert_eq!(q2[1].columns(4, 4), c.matrices()[3].columns(0, 4));
        assert_eq!(q2[2].columns(0, 4), c.matrices()[4].columns(0, 4));
        assert!(q2[2].columns(4, 4).iter().all(|&v| v == 0.0));

        let ql = downsampled_coefficients(&c, 5).unwrap();
        assert_eq!(ql.len(), 1);
        assert_eq!(ql[0].ncols(), spec.filter_length());
        assert!(downsampled_coefficients(&c, 0).is_err());
    }

    #[test]
    fn unit_compression_equals_full_stream() {
        let spec = ParaunitarySpec::new(6, 3, 4).unwrap();
        let x = stream(6, 10, 2);
        let sched = DecimationSchedule::constant(1, 10).unwrap();
        let run = forward_decimated(spec, &x, &sched).unwrap();
        let full = forward_stream(spec, &x).unwrap();
        assert_eq!(run.blocks(), full[..10].to_vec());
        assert_eq!(run.work.stage_ratio(), 1.0);
        assert_eq!(run.work.executed_stages, run.work.baseline_stages);
        // the newest block's lower stages never need their upper halves
        assert!(run.work.executed_rotations < run.work.baseline_rotations);
    }

    #[test]
    fn fixed_compression_matches_discard_oracle() {
        let spec = ParaunitarySpec::new(8, 4, 0xD1CE).unwrap();
        let x = stream(8, 30, 5);
        let sched = DecimationSchedule::constant(3, 10).unwrap();
        let run = forward_decimated(spec, &x, &sched).unwrap();
        assert_eq!(run.blocks(), discard_oracle(spec, &x, &sched));
        assert!(run.work.executed_stages <= run.work.baseline_stages);
    }

    #[test]
    fn full_decimation_matches_sampling_matrix() {
        let spec = ParaunitarySpec::new(4, 3, 12).unwrap();
        let b = SamplingMatrix::from_coefficients(&coefficients(&spec));
        assert!(b.row_orthonormality_error() < 1e-10);
        let x = stream(4, 12, 8);
        let sched = DecimationSchedule::constant(4, 3).unwrap();
        let run = forward_decimated(spec, &x, &sched).unwrap();
        for r in &run.retained {
            let t = r.time as usize;
            let window: Vec<Vec<f64>> = (0..4).map(|i| x[t - i].clone()).collect();
            let dense = b.apply_window(&window).unwrap();
            for (a, d) in r.data.iter().zip(&dense) {
                assert!((a - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_identity_and_dense_transpose() {
        let spec = ParaunitarySpec::new(4, 3, 99).unwrap();
        let sched = DecimationSchedule::new(vec![2, 4, 1, 4, 3]).unwrap();
        let op = DecimatedOperator::new(spec, sched, 14).unwrap();
        let x: Vec<f64> = stream(op.cols(), 1, 1).remove(0);
        let y: Vec<f64> = stream(op.rows(), 1, 2).remove(0);
        let ax = op.apply(&x).unwrap();
        let aty = op.adjoint(&y).unwrap();
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        assert!(op.adjoint(&vec![0.0; op.rows()]).unwrap().iter().all(|&v| v == 0.0));

        // ↓L: adjoint of one window is Bᵀ y laid out oldest block first
        let b = SamplingMatrix::from_coefficients(&coefficients(&spec));
        let sched = DecimationSchedule::constant(4, 1).unwrap();
        let y = vec![0.5, -1.0, 2.0, 0.25];
        let est = adjoint_decimated(spec, std::slice::from_ref(&y), &sched, 4).unwrap();
        let dense = b.apply_transpose(&y).unwrap();
        for i in 0..4 {
            for c in 0..4 {
                assert!((est[3 - i][c] - dense[i][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn incremental_windows_match_upfront_schedule() {
        let spec = ParaunitarySpec::new(4, 2, 3).unwrap();
        let x = stream(4, 27, 6);
        let qs = [1, 3, 5, 1, 3, 5, 1, 3, 5];
        let upfront = forward_decimated(spec, &x, &DecimationSchedule::new(qs.to_vec()).unwrap()).unwrap();

        let mut a = DecimatedAnalyzer::new(spec);
        let mut got = Vec::new();
        let mut qi = qs.iter();
        a.set_compression(*qi.next().unwrap()).unwrap();
        for b in &x {
            if let Some(r) = a.push(b).unwrap() {
                got.push(r);
                // never alters blocks already emitted
                if let Some(&q) = qi.next() {
                    a.set_compression(q).unwrap();
                }
            }
        }
        assert_eq!(got, upfront.retained);
        assert_eq!(
            upfront.blocks(),
            discard_oracle(spec, &x, &DecimationSchedule::new(qs.to_vec()).unwrap())
        );
    }

    #[test]
    fn exhausted_schedule_is_an_error() {
        let spec = ParaunitarySpec::new(4, 1, 3).unwrap();
        let x = stream(4, 5, 6);
        let sched = DecimationSchedule::constant(2, 2).unwrap();
        assert_eq!(
            forward_decimated(spec, &x, &sched).unwrap_err(),
            Error::ScheduleExhausted { block: 4 }
        );
        let mut a = DecimatedAnalyzer::new(spec);
        assert_eq!(a.push(&x[0]).unwrap_err(), Error::ScheduleExhausted { block: 0 });
        assert!(a.set_compression(0).is_err());
    }

    #[test]
    fn full_decimation_prunes_the_triangle() {
        let k = 4;
        let spec = ParaunitarySpec::new(8, k, 21).unwrap();
        let x = stream(8, 10, 3);
        let sched = DecimationSchedule::constant(k + 1, 2).unwrap();
        let mut a = DecimatedAnalyzer::with_schedule(spec, &sched);
        a.enable_trace();
        for b in &x {
            a.push(b).unwrap();
        }
        let visits = a.trace().unwrap();
        // second window: retained t = 9, node (s, t') needed iff t' >= 9 - (K - s)
        for s in 0..=k {
            for t in 5..10u64 {
                let needed = t + (k - s) as u64 >= 9;
                let visit = visits.iter().find(|v| v.stage == s && v.time == t);
                assert_eq!(visit.is_some(), needed, "stage {s} time {t}");
                if let Some(v) = visit {
                    // the newest block below the top only feeds forward its lower half
                    assert_eq!(v.full, !(t == 9 && s < k));
                }
            }
        }
        let work = a.work();
        assert_eq!(work.executed_stages, 2 * 15);
        assert_eq!(work.baseline_stages, 10 * 5);
    }

    #[test]
    fn work_never_exceeds_baseline() {
        let spec = ParaunitarySpec::new(6, 3, 8).unwrap();
        let x = stream(6, 40, 1);
        let mut previous = u64::MAX;
        for q in 1..=6 {
            let sched = DecimationSchedule::covering(q, 40).unwrap();
            let w = forward_decimated(spec, &x, &sched).unwrap().work;
            assert!(w.executed_stages <= w.baseline_stages);
            assert!(w.executed_rotations <= w.baseline_rotations);
            assert!(w.executed_stages <= previous, "q = {q}");
            previous = w.executed_stages;
        }
    }

    #[test]
    fn order_zero_decimation() {
        let spec = ParaunitarySpec::new(2, 0, 5).unwrap();
        let x = stream(2, 6, 1);
        let sched = DecimationSchedule::constant(3, 2).unwrap();
        let run = forward_decimated(spec, &x, &sched).unwrap();
        assert_eq!(run.blocks(), discard_oracle(spec, &x, &sched));
        assert_eq!(run.work.executed_stages, 2);
    }
}
