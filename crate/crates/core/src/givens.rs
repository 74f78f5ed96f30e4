//! Random orthogonal transforms as streamed Givens rotations.
//!
//! An `M`-point transform is the rotation plan over every plane `(i, j)`,
//! `i < j`, grouped into stages `i = 0..M-1` with `j` ascending inside a
//! stage, followed by a diagonal `±1` reflection. Stage 0 touches the data
//! first; coordinate `i` is never touched again after stage `i`, which is
//! what lets a projection onto the first `N` coordinates drop every stage
//! from `N` on.
//!
//! No matrix is ever stored. Angles are regenerated subset by subset from a
//! [`SeedHierarchy`], forwards for the transform and backwards for its
//! inverse, so working memory stays at one data vector plus one angle subset.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{check_len, invalid, Result};
use crate::prng::{Order, SeedHierarchy};

/// Number of planes in an `m`-point rotation plan, `m(m-1)/2`.
pub fn rotation_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Index of the first angle of stage `stage` in an `m`-point plan.
pub fn stage_offset(m: usize, stage: usize) -> usize {
    let stage = stage.min(m.saturating_sub(1));
    stage * (m - 1) - stage * stage.saturating_sub(1) / 2
}

/// Rotations executed when projecting `m` coordinates onto the first `n`.
pub fn projection_rotation_count(m: usize, n: usize) -> usize {
    stage_offset(m, n)
}

/// Identifies one deterministic random `M`-point orthogonal transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitarySpec {
    m: usize,
    seed: u64,
    subsets: usize,
}

impl UnitarySpec {
    /// Spec with the default `N_s = M` angle subsets.
    pub fn new(m: usize, seed: u64) -> Result<Self> {
        Self::with_subsets(m, seed, m)
    }

    pub fn with_subsets(m: usize, seed: u64, subsets: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "transform size must be at least 1"));
        }
        if subsets == 0 {
            return Err(invalid("subsets", "must be positive"));
        }
        Ok(Self { m, seed, subsets })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn subsets(&self) -> usize {
        self.subsets
    }

    pub fn rotation_count(&self) -> usize {
        rotation_count(self.m)
    }

    pub fn hierarchy(&self) -> SeedHierarchy {
        SeedHierarchy::new(self.seed, self.rotation_count(), self.subsets)
            .expect("subset count validated at construction")
    }
}

/// The first `n` rows of a [`UnitarySpec`]'s transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionSpec {
    unitary: UnitarySpec,
    n: usize,
}

impl ProjectionSpec {
    pub fn new(unitary: UnitarySpec, n: usize) -> Result<Self> {
        if n == 0 || n > unitary.m {
            return Err(invalid("n", format!("must satisfy 1 <= n <= m = {}", unitary.m)));
        }
        Ok(Self { unitary, n })
    }

    pub fn unitary(&self) -> &UnitarySpec {
        &self.unitary
    }

    pub fn m(&self) -> usize {
        self.unitary.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stages `0..n` survive; the last `max(0, m - n - 1)` are dropped.
    pub fn retained_stages(&self) -> usize {
        self.n.min(self.unitary.m - 1)
    }

    pub fn executed_rotations(&self) -> usize {
        projection_rotation_count(self.unitary.m, self.n)
    }
}

/// Walks the rotation plan in generation order starting from any angle index.
#[derive(Debug, Clone, Copy)]
pub struct PlanCursor {
    m: usize,
    i: usize,
    j: usize,
}

impl PlanCursor {
    /// Cursor positioned on angle `index` of an `m`-point plan.
    pub fn at(m: usize, index: usize) -> Self {
        let mut i = 0;
        let mut rest = index;
        while i + 1 < m && rest >= m - 1 - i {
            rest -= m - 1 - i;
            i += 1;
        }
        Self { m, i, j: i + 1 + rest }
    }

    pub fn plane(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    pub fn advance(&mut self) {
        self.j += 1;
        if self.j >= self.m {
            self.i += 1;
            self.j = self.i + 1;
        }
    }

    pub fn retreat(&mut self) {
        if self.j == self.i + 1 {
            self.i -= 1;
            self.j = self.m - 1;
        } else {
            self.j -= 1;
        }
    }
}

impl Iterator for PlanCursor {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        if self.i + 1 >= self.m {
            return None;
        }
        let plane = self.plane();
        self.advance();
        Some(plane)
    }
}

/// Rotates rows `i` and `j` of a row-major buffer with `width` lanes:
/// `x_i <- c x_i - s x_j`, `x_j <- s x_i + c x_j`.
#[inline]
fn rotate_rows(buf: &mut [f64], width: usize, i: usize, j: usize, c: f64, s: f64) {
    debug_assert!(i < j);
    let (head, tail) = buf.split_at_mut(j * width);
    let row_i = &mut head[i * width..(i + 1) * width];
    let row_j = &mut tail[..width];
    for (a, b) in row_i.iter_mut().zip(row_j.iter_mut()) {
        let (xa, xb) = (*a, *b);
        *a = c * xa - s * xb;
        *b = s * xa + c * xb;
    }
}

/// Applies the planes for angles `start..start + angles.len()` in plan order.
pub fn apply_rotation_sequence(x: &mut [f64], start: usize, angles: &[f64]) {
    apply_rotations_lanes(x, x.len(), 1, start, angles);
}

/// Undoes [`apply_rotation_sequence`]: same planes, reverse order, negated angles.
///
/// `angles` is given in forward order.
pub fn apply_rotation_sequence_inverse(x: &mut [f64], start: usize, angles: &[f64]) {
    if angles.is_empty() {
        return;
    }
    let m = x.len();
    let mut cursor = PlanCursor::at(m, start + angles.len() - 1);
    for (n, &theta) in angles.iter().rev().enumerate() {
        if n > 0 {
            cursor.retreat();
        }
        let (i, j) = cursor.plane();
        let (s, c) = theta.sin_cos();
        rotate_rows(x, 1, i, j, c, -s);
    }
}

fn apply_rotations_lanes(buf: &mut [f64], m: usize, width: usize, start: usize, angles: &[f64]) {
    let mut cursor = PlanCursor::at(m, start);
    for &theta in angles {
        let (i, j) = cursor.plane();
        let (s, c) = theta.sin_cos();
        rotate_rows(buf, width, i, j, c, s);
        cursor.advance();
    }
}

/// Working state for streaming one [`UnitarySpec`] over caller-owned data.
///
/// Holds a single angle-subset buffer; child seeds are re-derived on demand.
#[derive(Debug, Clone)]
pub struct GivensTransform {
    spec: UnitarySpec,
    hierarchy: SeedHierarchy,
    angles: Vec<f64>,
}

impl GivensTransform {
    pub fn new(spec: UnitarySpec) -> Self {
        let hierarchy = spec.hierarchy();
        let angles = Vec::with_capacity(hierarchy.subset_size());
        Self {
            spec,
            hierarchy,
            angles,
        }
    }

    pub fn spec(&self) -> &UnitarySpec {
        &self.spec
    }

    /// Samples held while transforming: the data vector plus the angle buffer.
    pub fn storage_footprint(&self) -> usize {
        self.spec.m + self.angles.capacity().max(self.hierarchy.subset_size())
    }

    /// `x <- U x`.
    pub fn apply(&mut self, x: &mut [f64]) -> Result<()> {
        check_len("x", self.spec.m, x.len())?;
        self.rotate_lanes(x, 1, 0..self.spec.rotation_count(), Order::Forward)?;
        self.reflect_lanes(x, 1, 0..self.spec.m);
        Ok(())
    }

    /// `x <- Uᵀ x`.
    pub fn apply_inverse(&mut self, x: &mut [f64]) -> Result<()> {
        check_len("x", self.spec.m, x.len())?;
        self.reflect_lanes(x, 1, 0..self.spec.m);
        self.rotate_lanes(x, 1, 0..self.spec.rotation_count(), Order::Reverse)
    }

    /// Runs the rotations of `stages` (forward direction) without the reflection.
    pub fn apply_stages(&mut self, x: &mut [f64], stages: Range<usize>) -> Result<()> {
        check_len("x", self.spec.m, x.len())?;
        let m = self.spec.m;
        let angles = stage_offset(m, stages.start)..stage_offset(m, stages.end.max(stages.start));
        self.rotate_lanes(x, 1, angles, Order::Forward)
    }

    /// Multiplies `x[c]` by the reflection sign of coordinate `c`, for `c` in `coords`.
    pub fn apply_signs(&mut self, x: &mut [f64], coords: Range<usize>) -> Result<()> {
        check_len("x", self.spec.m, x.len())?;
        self.reflect_lanes(x, 1, coords);
        Ok(())
    }

    /// Dense `M×M` matrix of the transform.
    pub fn materialize(&mut self) -> DMatrix<f64> {
        let m = self.spec.m;
        let mut rows = vec![0.0; m * m];
        for k in 0..m {
            rows[k * m + k] = 1.0;
        }
        self.rotate_lanes(&mut rows, m, 0..self.spec.rotation_count(), Order::Forward)
            .expect("plan spans are valid");
        self.reflect_lanes(&mut rows, m, 0..m);
        DMatrix::from_row_slice(m, m, &rows)
    }

    /// Applies the planes for angle indices `range` to a row-major buffer of
    /// `width` lanes, regenerating one subset at a time.
    fn rotate_lanes(&mut self, buf: &mut [f64], width: usize, range: Range<usize>, order: Order) -> Result<()> {
        if range.is_empty() {
            return Ok(());
        }
        let m = self.spec.m;
        let first = self.hierarchy.subset_of(range.start);
        let last = self.hierarchy.subset_of(range.end - 1);
        let subsets: Box<dyn Iterator<Item = usize>> = match order {
            Order::Forward => Box::new(first..=last),
            Order::Reverse => Box::new((first..=last).rev()),
        };
        for k in subsets {
            let sub = self.hierarchy.subset_range(k)?;
            let spans = PlanCursor::at(m, sub.start).take(sub.len()).map(|(i, j)| (j - i) as u32);
            self.hierarchy.fill_angle_subset(k, order, spans, &mut self.angles)?;
            let lo = range.start.max(sub.start);
            let hi = range.end.min(sub.end);
            match order {
                Order::Forward => {
                    let angles = &self.angles[lo - sub.start..hi - sub.start];
                    apply_rotations_lanes(buf, m, width, lo, angles);
                }
                Order::Reverse => {
                    // buffer holds the subset back to front
                    let angles = &self.angles[sub.end - hi..sub.end - lo];
                    let mut cursor = PlanCursor::at(m, hi - 1);
                    for (n, &theta) in angles.iter().enumerate() {
                        if n > 0 {
                            cursor.retreat();
                        }
                        let (i, j) = cursor.plane();
                        let (s, c) = theta.sin_cos();
                        rotate_rows(buf, width, i, j, c, -s);
                    }
                }
            }
        }
        Ok(())
    }

    fn reflect_lanes(&self, buf: &mut [f64], width: usize, coords: Range<usize>) {
        let mut signs = self.hierarchy.sign_stream();
        for c in 0..coords.end {
            let s = signs.sample_sign();
            if c >= coords.start && s < 0.0 {
                for v in &mut buf[c * width..(c + 1) * width] {
                    *v = -*v;
                }
            }
        }
    }
}

/// `U x` for the transform identified by `spec`.
pub fn apply_unitary(spec: &UnitarySpec, x: &[f64]) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    GivensTransform::new(*spec).apply(&mut y)?;
    Ok(y)
}

/// `Uᵀ y` for the transform identified by `spec`.
pub fn apply_unitary_inverse(spec: &UnitarySpec, y: &[f64]) -> Result<Vec<f64>> {
    let mut x = y.to_vec();
    GivensTransform::new(*spec).apply_inverse(&mut x)?;
    Ok(x)
}

/// Dense matrix of `spec`'s transform.
pub fn materialize(spec: &UnitarySpec) -> DMatrix<f64> {
    GivensTransform::new(*spec).materialize()
}

/// `A x`, where `A` is the first `n` rows of the full transform.
pub fn project(pspec: &ProjectionSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_len("x", pspec.m(), x.len())?;
    let mut buf = x.to_vec();
    let mut t = GivensTransform::new(pspec.unitary);
    t.rotate_lanes(&mut buf, 1, 0..pspec.executed_rotations(), Order::Forward)?;
    t.reflect_lanes(&mut buf, 1, 0..pspec.n);
    buf.truncate(pspec.n);
    Ok(buf)
}

/// `Aᵀ y`: zero-pads `y` to `m` coordinates and undoes the retained rotations.
pub fn project_transpose(pspec: &ProjectionSpec, y: &[f64]) -> Result<Vec<f64>> {
    check_len("y", pspec.n, y.len())?;
    let mut buf = vec![0.0; pspec.m()];
    buf[..pspec.n].copy_from_slice(y);
    let mut t = GivensTransform::new(pspec.unitary);
    t.reflect_lanes(&mut buf, 1, 0..pspec.n);
    t.rotate_lanes(&mut buf, 1, 0..pspec.executed_rotations(), Order::Reverse)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn counts() {
        assert_eq!(rotation_count(1), 0);
        assert_eq!(rotation_count(2), 1);
        assert_eq!(rotation_count(4), 6);
        assert_eq!(projection_rotation_count(4, 2), 5);
        assert_eq!(projection_rotation_count(4, 4), 6);
        assert_eq!(projection_rotation_count(4, 3), 6);
        for m in 1usize..20 {
            for n in 1..=m {
                let discarded = (m - n).saturating_sub(1) * (m - n) / 2usize;
                assert_eq!(projection_rotation_count(m, n), rotation_count(m) - discarded);
            }
        }
    }

    #[test]
    fn cursor_walks_plan_order() {
        let planes: Vec<_> = PlanCursor::at(4, 0).collect();
        assert_eq!(planes, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        for idx in 0..6 {
            assert_eq!(PlanCursor::at(4, idx).plane(), planes[idx]);
        }
        let mut c = PlanCursor::at(4, 5);
        for idx in (0..5).rev() {
            c.retreat();
            assert_eq!(c.plane(), planes[idx]);
        }
    }

    #[test]
    fn zero_angles_are_identity() {
        let x = [1.0, -2.0, 3.5, 0.25, 9.0];
        let mut y = x;
        apply_rotation_sequence(&mut y, 0, &[0.0; 10]);
        assert_eq!(y, x);
        apply_rotation_sequence_inverse(&mut y, 0, &[0.0; 10]);
        assert_eq!(y, x);
    }

    #[test]
    fn two_point_rotation_convention() {
        let theta = 0.3_f64;
        let mut y = [2.0, 5.0];
        apply_rotation_sequence(&mut y, 0, &[theta]);
        let (s, c) = theta.sin_cos();
        assert!((y[0] - (2.0 * c - 5.0 * s)).abs() < 1e-15);
        assert!((y[1] - (2.0 * s + 5.0 * c)).abs() < 1e-15);
    }

    #[test]
    fn sequence_inverse_round_trips() {
        let angles: Vec<f64> = (0..15).map(|k| 0.1 * k as f64 - 0.7).collect();
        let x: Vec<f64> = (0..6).map(|k| (k as f64).sin()).collect();
        let mut y = x.clone();
        apply_rotation_sequence(&mut y, 0, &angles);
        apply_rotation_sequence_inverse(&mut y, 0, &angles);
        assert!(max_abs_diff(&x, &y) < 1e-14);
    }

    #[test]
    fn single_point_is_a_sign() {
        let spec = UnitarySpec::new(1, 77).unwrap();
        let u = materialize(&spec);
        assert_eq!(u.nrows(), 1);
        assert_eq!(u[(0, 0)].abs(), 1.0);
        let y = apply_unitary(&spec, &[3.0]).unwrap();
        assert_eq!(y[0], 3.0 * u[(0, 0)]);
    }

    #[test]
    fn two_point_matrix_is_a_signed_rotation() {
        let spec = UnitarySpec::new(2, 1234).unwrap();
        let u = materialize(&spec);
        let h = spec.hierarchy();
        let theta = h.angle_subset(0, Order::Forward, [1]).unwrap()[0];
        let (s, c) = theta.sin_cos();
        let mut signs = h.sign_stream();
        let (s0, s1) = (signs.sample_sign(), signs.sample_sign());
        let expected = [[s0 * c, -s0 * s], [s1 * s, s1 * c]];
        for r in 0..2 {
            for col in 0..2 {
                assert!((u[(r, col)] - expected[r][col]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn apply_matches_dense_matrix() {
        let spec = UnitarySpec::new(8, 0xABCD).unwrap();
        let u = materialize(&spec);
        let x: Vec<f64> = (0..8).map(|k| 1.0 + k as f64 * 0.5).collect();
        let y = apply_unitary(&spec, &x).unwrap();
        let dense = &u * nalgebra::DVector::from_column_slice(&x);
        assert!(max_abs_diff(&y, dense.as_slice()) < 1e-12);
        let back = apply_unitary_inverse(&spec, &y).unwrap();
        assert!(max_abs_diff(&back, &x) < 1e-12 * 8.0);
        let dense_t = u.transpose() * nalgebra::DVector::from_column_slice(&y);
        assert!(max_abs_diff(&back, dense_t.as_slice()) < 1e-12);
    }

    #[test]
    fn subset_count_does_not_break_round_trip() {
        for subsets in [1, 3, 7, 100] {
            let spec = UnitarySpec::with_subsets(9, 5, subsets).unwrap();
            let x: Vec<f64> = (0..9).map(|k| (k * k) as f64).collect();
            let y = apply_unitary(&spec, &x).unwrap();
            let back = apply_unitary_inverse(&spec, &y).unwrap();
            assert!(max_abs_diff(&back, &x) < 1e-12 * 100.0);
        }
    }

    #[test]
    fn unitary_at_sixteen() {
        let u = materialize(&UnitarySpec::new(16, 9).unwrap());
        let err = (u.transpose() * &u - DMatrix::identity(16, 16)).amax();
        assert!(err <= 1e-10);
    }

    #[test]
    fn projection_matches_row_selection() {
        let full = UnitarySpec::new(8, 31).unwrap();
        let u = materialize(&full);
        let p = ProjectionSpec::new(full, 3).unwrap();
        let x: Vec<f64> = (0..8).map(|k| (k as f64 * 0.7).cos()).collect();
        let y = project(&p, &x).unwrap();
        let dense = u.rows(0, 3) * nalgebra::DVector::from_column_slice(&x);
        assert!(max_abs_diff(&y, dense.as_slice()) < 1e-12);

        let back = project_transpose(&p, &y).unwrap();
        let dense_t = u.rows(0, 3).transpose() * nalgebra::DVector::from_column_slice(&y);
        assert!(max_abs_diff(&back, dense_t.as_slice()) < 1e-12);
        let again = project(&p, &back).unwrap();
        assert!(max_abs_diff(&again, &y) < 1e-10);
    }

    #[test]
    fn full_projection_equals_transform() {
        let full = UnitarySpec::new(6, 2).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let p = ProjectionSpec::new(full, 6).unwrap();
        assert_eq!(project(&p, &x).unwrap(), apply_unitary(&full, &x).unwrap());
        assert_eq!(project_transpose(&p, &[0.0; 6]).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn dimension_errors() {
        let spec = UnitarySpec::new(4, 1).unwrap();
        assert!(matches!(
            apply_unitary(&spec, &[1.0; 3]),
            Err(Error::DimensionMismatch { field: "x", expected: 4, actual: 3 })
        ));
        assert!(apply_unitary_inverse(&spec, &[1.0; 5]).is_err());
        assert!(ProjectionSpec::new(spec, 5).is_err());
        assert!(ProjectionSpec::new(spec, 0).is_err());
        let p = ProjectionSpec::new(spec, 2).unwrap();
        assert!(project(&p, &[0.0; 2]).is_err());
        assert!(project_transpose(&p, &[0.0; 4]).is_err());
        assert!(UnitarySpec::new(0, 1).is_err());
    }

    #[test]
    fn staged_application_composes() {
        let spec = UnitarySpec::new(10, 4).unwrap();
        let x: Vec<f64> = (0..10).map(|k| k as f64 - 4.5).collect();
        let mut t = GivensTransform::new(spec);
        let mut y = x.clone();
        t.apply_stages(&mut y, 0..4).unwrap();
        t.apply_stages(&mut y, 4..9).unwrap();
        t.apply_signs(&mut y, 0..3).unwrap();
        t.apply_signs(&mut y, 3..10).unwrap();
        assert_eq!(y, apply_unitary(&spec, &x).unwrap());
    }
}
