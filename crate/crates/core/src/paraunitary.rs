//! Random paraunitary filter banks built from a cascade of random unitary stages.
//!
//! Data flows through `U_0`, then for each `n = 1..=K` a delay shuffle
//! followed by `U_n`. The forward shuffle delays channels `M/2..M` by one
//! block; the inverse lattice runs `U_Kᵀ` first and its shuffle delays the
//! complementary channels `0..M/2`, so the forward and inverse cascades
//! compose to a pure delay of `K` blocks.
//!
//! In column-vector form the forward system is
//! `H(z) = U_K Λ(z) U_{K-1} ⋯ Λ(z) U_0 = Σ_i H_i z^-i`, i.e. `y_t = Σ_i H_i x_{t-i}`.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{check_len, invalid, Result};
use crate::givens::{GivensTransform, UnitarySpec};
use crate::prng::derive_child_seed;

/// Cascade description: `M` channels, order `K`, and the master seed from
/// which every stage seed is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParaunitarySpec {
    m: usize,
    order: usize,
    master_seed: u64,
    subsets: usize,
}

impl ParaunitarySpec {
    pub fn new(m: usize, order: usize, master_seed: u64) -> Result<Self> {
        Self::with_subsets(m, order, master_seed, m)
    }

    pub fn with_subsets(m: usize, order: usize, master_seed: u64, subsets: usize) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(invalid("m", format!("channel count must be even and >= 2, got {m}")));
        }
        if subsets == 0 {
            return Err(invalid("subsets", "must be positive"));
        }
        Ok(Self {
            m,
            order,
            master_seed,
            subsets,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn subsets(&self) -> usize {
        self.subsets
    }

    /// Same cascade truncated or extended to order `k`; shared stages keep their seeds.
    pub fn with_order(&self, order: usize) -> Self {
        Self { order, ..*self }
    }

    /// Unitary stage `n`, seeded by `derive_child_seed(master_seed, n)`.
    pub fn stage(&self, n: usize) -> UnitarySpec {
        UnitarySpec::with_subsets(self.m, derive_child_seed(self.master_seed, n as u64), self.subsets)
            .expect("validated dimensions")
    }

    /// `L = (K + 1) M`.
    pub fn filter_length(&self) -> usize {
        filter_length(self.m, self.order)
    }
}

pub fn filter_length(m: usize, order: usize) -> usize {
    (order + 1) * m
}

/// Which half of the channels a shuffle delays by one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayMask {
    /// `Λ(z)`: channels `M/2..M` delayed.
    Upper,
    /// `Λ̃(z) = z⁻¹Λ(1/z)`: channels `0..M/2` delayed.
    Lower,
}

impl DelayMask {
    pub fn delayed(&self, m: usize) -> Range<usize> {
        match self {
            DelayMask::Upper => m / 2..m,
            DelayMask::Lower => 0..m / 2,
        }
    }

    pub fn is_delayed(&self, m: usize, channel: usize) -> bool {
        self.delayed(m).contains(&channel)
    }
}

/// Delay registers of a running lattice: one `M/2` register per shuffle.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    registers: Vec<Vec<f64>>,
    blocks: u64,
}

impl LatticeState {
    fn new(m: usize, order: usize) -> Self {
        Self {
            registers: vec![vec![0.0; m / 2]; order],
            blocks: 0,
        }
    }

    /// Always `K · M/2`.
    pub fn stored_samples(&self) -> usize {
        self.registers.iter().map(Vec::len).sum()
    }

    pub fn blocks(&self) -> u64 {
        self.blocks
    }

    pub fn registers(&self) -> &[Vec<f64>] {
        &self.registers
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

/// Streaming realization of a [`ParaunitarySpec`] or its causal inverse.
#[derive(Debug, Clone)]
pub struct Lattice {
    spec: ParaunitarySpec,
    direction: Direction,
    /// Indexed by stage number `n`, not by application order.
    stages: Vec<GivensTransform>,
    state: LatticeState,
}

impl Lattice {
    /// Analysis cascade `U_0, Λ, U_1, …, Λ, U_K`.
    pub fn forward(spec: ParaunitarySpec) -> Self {
        Self::build(spec, Direction::Forward)
    }

    /// Synthesis cascade `U_Kᵀ, Λ̃, U_{K-1}ᵀ, …, Λ̃, U_0ᵀ`; undoes
    /// [`Lattice::forward`] up to a delay of exactly `K` blocks.
    pub fn inverse(spec: ParaunitarySpec) -> Self {
        Self::build(spec, Direction::Inverse)
    }

    fn build(spec: ParaunitarySpec, direction: Direction) -> Self {
        let stages = (0..=spec.order).map(|n| GivensTransform::new(spec.stage(n))).collect();
        Self {
            spec,
            direction,
            stages,
            state: LatticeState::new(spec.m, spec.order),
        }
    }

    pub fn spec(&self) -> &ParaunitarySpec {
        &self.spec
    }

    pub fn state(&self) -> &LatticeState {
        &self.state
    }

    pub fn order(&self) -> usize {
        self.spec.order
    }

    /// Transforms one block in place.
    pub fn process_in_place(&mut self, block: &mut [f64]) -> Result<()> {
        check_len("block", self.spec.m, block.len())?;
        let k = self.spec.order;
        match self.direction {
            Direction::Forward => {
                self.stages[0].apply(block)?;
                for n in 1..=k {
                    shuffle(block, &mut self.state.registers[n - 1], DelayMask::Upper);
                    self.stages[n].apply(block)?;
                }
            }
            Direction::Inverse => {
                self.stages[k].apply_inverse(block)?;
                for n in (0..k).rev() {
                    shuffle(block, &mut self.state.registers[n], DelayMask::Lower);
                    self.stages[n].apply_inverse(block)?;
                }
            }
        }
        self.state.blocks += 1;
        Ok(())
    }

    pub fn process(&mut self, block: &[f64]) -> Result<Vec<f64>> {
        let mut out = block.to_vec();
        self.process_in_place(&mut out)?;
        Ok(out)
    }

    /// Feeds `K` zero blocks and returns what they push out of the registers.
    pub fn flush(&mut self) -> Vec<Vec<f64>> {
        (0..self.spec.order)
            .map(|_| {
                self.process(&vec![0.0; self.spec.m])
                    .expect("block has the lattice width")
            })
            .collect()
    }

    /// Zeroes every register.
    pub fn reset(&mut self) {
        self.state = LatticeState::new(self.spec.m, self.spec.order);
    }

    /// Changes the order between blocks.
    ///
    /// Added stages get their derived seeds and zeroed registers; removed
    /// stages drop their registers. Applying the matching change to a peer
    /// inverse lattice at the right block is up to the caller.
    pub fn set_order(&mut self, order: usize) {
        let m = self.spec.m;
        self.spec = self.spec.with_order(order);
        self.stages.truncate(order + 1);
        while self.stages.len() < order + 1 {
            let n = self.stages.len();
            self.stages.push(GivensTransform::new(self.spec.stage(n)));
        }
        self.state.registers.truncate(order);
        self.state.registers.resize(order, vec![0.0; m / 2]);
    }
}

/// Swaps the delayed channels of `block` with the register contents.
fn shuffle(block: &mut [f64], register: &mut [f64], mask: DelayMask) {
    let delayed = mask.delayed(block.len());
    block[delayed].swap_with_slice(register);
}

/// Runs a whole stream through a forward lattice, flushing the tail.
pub fn forward_stream(spec: ParaunitarySpec, blocks: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut lattice = Lattice::forward(spec);
    let mut out = blocks.iter().map(|b| lattice.process(b)).collect::<Result<Vec<_>>>()?;
    out.extend(lattice.flush());
    Ok(out)
}

/// Runs a whole stream through an inverse lattice, flushing the tail.
pub fn inverse_stream(spec: ParaunitarySpec, blocks: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut lattice = Lattice::inverse(spec);
    let mut out = blocks.iter().map(|b| lattice.process(b)).collect::<Result<Vec<_>>>()?;
    out.extend(lattice.flush());
    Ok(out)
}

/// Polyphase coefficient matrices `H_0..H_K` of `H(z) = Σ_i H_i z^-i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyphaseCoeffs {
    matrices: Vec<DMatrix<f64>>,
}

impl PolyphaseCoeffs {
    pub fn from_matrices(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = matrices.first().ok_or_else(|| invalid("matrices", "need at least one"))?;
        let m = first.nrows();
        for h in &matrices {
            if h.nrows() != m || h.ncols() != m {
                return Err(invalid("matrices", "all coefficients must be square of equal size"));
            }
        }
        Ok(Self { matrices })
    }

    pub fn m(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn order(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// `H_i`, or the zero matrix past the order.
    pub fn get(&self, i: usize) -> DMatrix<f64> {
        self.matrices
            .get(i)
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.m(), self.m()))
    }

    /// `H(1) = Σ_i H_i`.
    pub fn sum(&self) -> DMatrix<f64> {
        self.matrices
            .iter()
            .fold(DMatrix::zeros(self.m(), self.m()), |acc, h| acc + h)
    }

    /// Largest deviation of `Σ_i H_iᵀ H_{i+lag}` from `δ_{lag,0} I` over all lags.
    pub fn paraunitarity_error(&self) -> f64 {
        let m = self.m();
        let k = self.order() as isize;
        let mut worst: f64 = 0.0;
        for lag in -k..=k {
            let mut acc = DMatrix::<f64>::zeros(m, m);
            for i in 0..=k {
                let j = i + lag;
                if (0..=k).contains(&j) {
                    acc += self.matrices[i as usize].transpose() * &self.matrices[j as usize];
                }
            }
            if lag == 0 {
                acc -= DMatrix::<f64>::identity(m, m);
            }
            worst = worst.max(acc.amax());
        }
        worst
    }

    /// Full block convolution `y_t = Σ_i H_i x_{t-i}`, `T + K` output blocks.
    pub fn convolve(&self, blocks: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let m = self.m();
        for b in blocks {
            check_len("block", m, b.len())?;
        }
        let k = self.order();
        let total = blocks.len() + k;
        let mut out = vec![vec![0.0; m]; if blocks.is_empty() { 0 } else { total }];
        for (t, y) in out.iter_mut().enumerate() {
            for (i, h) in self.matrices.iter().enumerate() {
                if t < i || t - i >= blocks.len() {
                    continue;
                }
                let x = nalgebra::DVectorView::from_slice(&blocks[t - i], m);
                let hx = h * x;
                for (dst, v) in y.iter_mut().zip(hx.iter()) {
                    *dst += v;
                }
            }
        }
        Ok(out)
    }
}

/// Coefficients of the forward cascade by appending one stage at a time.
///
/// Starting from `E(z) = U_0`, each stage gives `F(z) = U_n Λ(z) E(z)`.
/// Splitting `U_n Λ(z) = U′_n + z⁻¹ U″_n`, where `U′_n` keeps the columns of
/// undelayed channels and `U″_n` those of delayed ones, the coefficients are
/// `F_0 = U′_n E_0`, `F_k = U′_n E_k + U″_n E_{k-1}`, `F_n = U″_n E_{n-1}`.
pub fn coefficients(spec: &ParaunitarySpec) -> PolyphaseCoeffs {
    let m = spec.m;
    let half = m / 2;
    let mut current = vec![GivensTransform::new(spec.stage(0)).materialize()];
    for n in 1..=spec.order {
        let u = GivensTransform::new(spec.stage(n)).materialize();
        let mut undelayed = u.clone();
        undelayed.columns_mut(half, m - half).fill(0.0);
        let mut delayed = u;
        delayed.columns_mut(0, half).fill(0.0);

        let mut next = Vec::with_capacity(current.len() + 1);
        for k in 0..=current.len() {
            let mut f = DMatrix::zeros(m, m);
            if let Some(e) = current.get(k) {
                f += &undelayed * e;
            }
            if k > 0 {
                f += &delayed * &current[k - 1];
            }
            next.push(f);
        }
        current = next;
    }
    PolyphaseCoeffs { matrices: current }
}

/// Causal inverse `G_i = H_{K-i}ᵀ`, i.e. `z^-K Hᵀ(1/z)`.
pub fn paraconjugate(coeffs: &PolyphaseCoeffs) -> PolyphaseCoeffs {
    PolyphaseCoeffs {
        matrices: coeffs.matrices.iter().rev().map(|h| h.transpose()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::givens::{apply_unitary, apply_unitary_inverse, materialize};

    fn stream(m: usize, blocks: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut s = crate::prng::SeedStream::new(seed);
        (0..blocks)
            .map(|_| (0..m).map(|_| s.uniform_unit() * 2.0 - 1.0).collect())
            .collect()
    }

    fn max_abs(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn odd_channel_counts_are_rejected() {
        assert!(ParaunitarySpec::new(5, 1, 0).is_err());
        assert!(ParaunitarySpec::new(0, 1, 0).is_err());
        assert!(ParaunitarySpec::new(6, 0, 0).is_ok());
    }

    #[test]
    fn filter_lengths() {
        assert_eq!(ParaunitarySpec::new(8, 4, 1).unwrap().filter_length(), 40);
        assert_eq!(ParaunitarySpec::new(8, 0, 1).unwrap().filter_length(), 8);
        let spec = ParaunitarySpec::new(4, 3, 1).unwrap();
        assert_eq!(spec.filter_length(), 4 * coefficients(&spec).matrices().len());
    }

    #[test]
    fn masks_split_channels_in_half() {
        assert_eq!(DelayMask::Upper.delayed(8), 4..8);
        assert_eq!(DelayMask::Lower.delayed(8), 0..4);
        assert!(DelayMask::Upper.is_delayed(8, 7));
        assert!(!DelayMask::Upper.is_delayed(8, 3));
    }

    #[test]
    fn order_zero_is_a_single_unitary() {
        let spec = ParaunitarySpec::new(6, 0, 42).unwrap();
        let x = vec![1.0, -1.0, 2.0, 0.5, 3.0, -2.0];
        let mut f = Lattice::forward(spec);
        assert_eq!(f.process(&x).unwrap(), apply_unitary(&spec.stage(0), &x).unwrap());
        assert!(f.flush().is_empty());
        let mut g = Lattice::inverse(spec);
        assert_eq!(g.process(&x).unwrap(), apply_unitary_inverse(&spec.stage(0), &x).unwrap());
        let c = coefficients(&spec);
        assert_eq!(c.matrices().len(), 1);
        assert_eq!(c.matrices()[0], materialize(&spec.stage(0)));
    }

    #[test]
    fn state_holds_k_half_blocks() {
        let spec = ParaunitarySpec::new(8, 5, 3).unwrap();
        let lattice = Lattice::forward(spec);
        assert_eq!(lattice.state().stored_samples(), 5 * 4);
    }

    #[test]
    fn impulse_response_reproduces_coefficients() {
        let spec = ParaunitarySpec::new(8, 3, 0x5EED).unwrap();
        let coeffs = coefficients(&spec);
        for k in [0, 3, 7] {
            let mut e = vec![0.0; 8];
            e[k] = 1.0;
            let out = forward_stream(spec, &[e]).unwrap();
            assert_eq!(out.len(), 4);
            for (i, block) in out.iter().enumerate() {
                for r in 0..8 {
                    assert!((block[r] - coeffs.matrices()[i][(r, k)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn perfect_reconstruction_is_a_k_block_delay() {
        let spec = ParaunitarySpec::new(8, 3, 77).unwrap();
        let x = stream(8, 20, 1);
        let mut f = Lattice::forward(spec);
        let mut g = Lattice::inverse(spec);
        let mut out = Vec::new();
        for b in &x {
            let y = f.process(b).unwrap();
            out.push(g.process(&y).unwrap());
        }
        for (t, o) in out.iter().enumerate() {
            let expected = if t >= 3 { x[t - 3].clone() } else { vec![0.0; 8] };
            for (a, b) in o.iter().zip(&expected) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
        let spec1 = ParaunitarySpec::new(4, 1, 5).unwrap();
        let x = stream(4, 5, 2);
        let y = forward_stream(spec1, &x).unwrap();
        let z = inverse_stream(spec1, &y).unwrap();
        assert!(z[0].iter().all(|v| v.abs() < 1e-12));
        assert!(max_abs(&z[1..6], &x) < 1e-12);
    }

    #[test]
    fn energy_is_preserved_through_flush() {
        let spec = ParaunitarySpec::new(6, 4, 11).unwrap();
        let x = stream(6, 12, 9);
        let y = forward_stream(spec, &x).unwrap();
        let ex: f64 = x.iter().flatten().map(|v| v * v).sum();
        let ey: f64 = y.iter().flatten().map(|v| v * v).sum();
        assert!(((ex - ey) / ex).abs() < 1e-10);
    }

    #[test]
    fn flush_twice_yields_zero_blocks() {
        let spec = ParaunitarySpec::new(4, 2, 1).unwrap();
        let mut f = Lattice::forward(spec);
        f.process(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let first = f.flush();
        assert!(first.iter().flatten().any(|v| v.abs() > 0.0));
        let second = f.flush();
        assert_eq!(second.len(), 2);
        assert!(second.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn coefficient_sum_is_the_stage_product() {
        let spec = ParaunitarySpec::new(6, 3, 8).unwrap();
        let coeffs = coefficients(&spec);
        let mut product = materialize(&spec.stage(0));
        for n in 1..=3 {
            product = materialize(&spec.stage(n)) * product;
        }
        assert!((coeffs.sum() - product).amax() < 1e-12);
        assert!(coeffs.paraunitarity_error() < 1e-10);
    }

    #[test]
    fn paraconjugate_inverts_at_lag_k() {
        let spec = ParaunitarySpec::new(4, 2, 19).unwrap();
        let h = coefficients(&spec);
        let g = paraconjugate(&h);
        assert_eq!(paraconjugate(&g), h);
        for lag in 0..=4 {
            let mut acc = DMatrix::<f64>::zeros(4, 4);
            for i in 0..=2usize {
                if lag >= i && lag - i <= 2 {
                    acc += g.get(i) * h.get(lag - i);
                }
            }
            if lag == 2 {
                acc -= DMatrix::<f64>::identity(4, 4);
            }
            assert!(acc.amax() < 1e-10, "lag {lag}");
        }
        let single = coefficients(&spec.with_order(0));
        assert_eq!(paraconjugate(&single).matrices()[0], single.matrices()[0].transpose());
    }

    #[test]
    fn set_order_matches_fresh_systems() {
        let spec = ParaunitarySpec::new(4, 0, 23).unwrap();
        let mut f = Lattice::forward(spec);
        f.set_order(0);
        assert_eq!(f.order(), 0);
        f.process(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        f.set_order(2);
        let fresh = coefficients(&spec.with_order(2));
        let mut out = vec![f.process(&[0.0, 1.0, 0.0, 0.0]).unwrap()];
        out.extend(f.flush());
        for (i, block) in out.iter().enumerate() {
            for r in 0..4 {
                assert!((block[r] - fresh.matrices()[i][(r, 1)]).abs() < 1e-12);
            }
        }

        f.set_order(0);
        assert_eq!(f.state().stored_samples(), 0);
        let x = [0.3, -0.1, 2.0, 1.0];
        assert_eq!(f.process(&x).unwrap(), apply_unitary(&spec.stage(0), &x).unwrap());
    }

    #[test]
    fn dimension_mismatch_names_block() {
        let spec = ParaunitarySpec::new(4, 1, 0).unwrap();
        let err = Lattice::forward(spec).process(&[0.0; 3]).unwrap_err();
        assert!(err.to_string().contains("block"));
    }
}
