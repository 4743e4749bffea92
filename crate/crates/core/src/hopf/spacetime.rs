//! Real coordinates for trajectories and assembly of space-time Jacobians.
//!
//! A trajectory with modes `0..=n_t` on a state of dimension `d` is stored in
//! `d S` real unknowns, `S = 2 n_t + 1`, in contiguous blocks of `S` slots per
//! state component: slot 0 is `Re û(0)` and slots `2n - 1`, `2n` are
//! `Re û(n)`, `Im û(n)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::linalg::SparseMatrix;
use crate::periodic_space::{Grid, PeriodicTrajectory};
use crate::problem::collocation_points;

pub type Triplets = Vec<(usize, usize, f64)>;

#[derive(Clone, Debug)]
pub struct SpaceTime {
    grid: Grid,
    n_t: usize,
    slots: usize,
    samples: usize,
    /// Synthesis `u(t_q) = Σ_s synth[q][s] x_s`.
    synth: Vec<Vec<f64>>,
    /// Analysis, the left inverse of synthesis on the stored modes.
    anal: Vec<Vec<f64>>,
}

impl SpaceTime {
    pub fn new(grid: Grid, n_t: usize) -> Self {
        assert!(n_t >= 1, "the space-time layout needs n_t >= 1");
        let slots = 2 * n_t + 1;
        let m = collocation_points(n_t);
        let mut synth = vec![vec![0.0; slots]; m];
        let mut anal = vec![vec![0.0; m]; slots];
        for q in 0..m {
            let t = 2.0 * PI * q as f64 / m as f64;
            synth[q][0] = 1.0;
            anal[0][q] = 1.0 / m as f64;
            for n in 1..=n_t {
                let (s, c) = (n as f64 * t).sin_cos();
                synth[q][2 * n - 1] = 2.0 * c;
                synth[q][2 * n] = -2.0 * s;
                anal[2 * n - 1][q] = c / m as f64;
                anal[2 * n][q] = -s / m as f64;
            }
        }
        Self { grid, n_t, slots, samples: m, synth, anal }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn state_dim(&self) -> usize {
        self.grid.dim()
    }

    /// Number of real unknowns of a trajectory.
    pub fn size(&self) -> usize {
        self.grid.dim() * self.slots
    }

    /// Position of slot `slot` of state component `k`. The two fields are
    /// interleaved per grid point, which keeps the space-time matrices banded.
    pub fn index(&self, k: usize, slot: usize) -> usize {
        let nx = self.grid.nx;
        (2 * (k % nx) + k / nx) * self.slots + slot
    }

    pub fn to_slots(&self, u: &PeriodicTrajectory) -> Vec<f64> {
        assert_eq!((*u.grid(), u.n_t()), (self.grid, self.n_t), "trajectory does not match the layout");
        let mut x = vec![0.0; self.size()];
        for (k, z) in u.mode(0).iter().enumerate() {
            x[self.index(k, 0)] = z.re;
        }
        for n in 1..=self.n_t {
            for (k, z) in u.mode(n).iter().enumerate() {
                x[self.index(k, 2 * n - 1)] = z.re;
                x[self.index(k, 2 * n)] = z.im;
            }
        }
        x
    }

    pub fn from_slots(&self, x: &[f64]) -> PeriodicTrajectory {
        let d = self.grid.dim();
        let modes = (0..=self.n_t)
            .map(|n| {
                (0..d)
                    .map(|k| {
                        if n == 0 {
                            Complex64::new(x[self.index(k, 0)], 0.0)
                        } else {
                            Complex64::new(x[self.index(k, 2 * n - 1)], x[self.index(k, 2 * n)])
                        }
                    })
                    .collect()
            })
            .collect();
        PeriodicTrajectory::from_modes(self.grid, modes).expect("slot vector has the layout shape")
    }

    /// Triplets of `d/dt - scale A`; `A` acts on every slot alike.
    pub fn linear_part(&self, a: &SparseMatrix, scale: f64) -> Triplets {
        let s = self.slots;
        let mut t = Vec::with_capacity(a.nnz() * s + 2 * self.size());
        for (r, c, v) in a.iter() {
            for slot in 0..s {
                t.push((self.index(r, slot), self.index(c, slot), -scale * v));
            }
        }
        for k in 0..self.grid.dim() {
            for n in 1..=self.n_t {
                let (re, im) = (self.index(k, 2 * n - 1), self.index(k, 2 * n));
                t.push((re, im, -(n as f64)));
                t.push((im, re, n as f64));
            }
        }
        t
    }

    /// Triplets of `-scale F diag(J_q) E`: the derivative of the collocated
    /// map `u ↦ F h(E u)` when `J_q` is the Jacobian of `h` at sample `q`.
    /// Entries constant in time act as the identity on the slots.
    pub fn collocated_part(&self, jacobians: &[SparseMatrix], scale: f64) -> Triplets {
        assert_eq!(jacobians.len(), self.samples, "one Jacobian per collocation point");
        let mut entries: std::collections::BTreeMap<(usize, usize), Vec<f64>> = Default::default();
        for (q, j) in jacobians.iter().enumerate() {
            for (r, c, v) in j.iter() {
                entries.entry((r, c)).or_insert_with(|| vec![0.0; self.samples])[q] += v;
            }
        }
        let entries: Vec<_> = entries.into_iter().collect();
        entries.par_iter().flat_map_iter(|((r, c), values)| self.block(*r, *c, values, scale)).collect()
    }

    fn block(&self, r: usize, c: usize, values: &[f64], scale: f64) -> Triplets {
        let s = self.slots;
        let size = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if size == 0.0 {
            return Vec::new();
        }
        if values.iter().all(|v| *v == values[0]) {
            return (0..s).map(|slot| (self.index(r, slot), self.index(c, slot), -scale * values[0])).collect();
        }
        let mut out = Vec::new();
        let cutoff = 1e-15 * size;
        for (so, row) in self.anal.iter().enumerate() {
            for si in 0..s {
                let v: f64 = (0..self.samples).map(|q| row[q] * values[q] * self.synth[q][si]).sum();
                if v.abs() > cutoff {
                    out.push((self.index(r, so), self.index(c, si), -scale * v));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic_space::time_derivative;

    fn traj(grid: Grid, n_t: usize) -> PeriodicTrajectory {
        let modes = (0..=n_t)
            .map(|n| {
                (0..grid.dim())
                    .map(|k| {
                        let x = (k + 3 * n) as f64;
                        Complex64::new(x.sin(), if n == 0 { 0.0 } else { (0.7 * x).cos() })
                    })
                    .collect()
            })
            .collect();
        PeriodicTrajectory::from_modes(grid, modes).unwrap()
    }

    #[test]
    fn slots_round_trip_and_time_derivative() {
        let grid = Grid::new(1.0, 0.5).unwrap();
        let st = SpaceTime::new(grid, 3);
        let u = traj(grid, 3);
        let x = st.to_slots(&u);
        assert_eq!(st.from_slots(&x), u);

        let zero = SparseMatrix::from_triplets(grid.dim(), grid.dim(), &[]);
        let d = SparseMatrix::from_triplets(st.size(), st.size(), &st.linear_part(&zero, 1.0));
        let want = st.to_slots(&time_derivative(&u));
        let got = d.matvec(&x);
        assert!(got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn collocated_part_matches_sampled_product() {
        let grid = Grid::new(1.0, 0.5).unwrap();
        let n_t = 3;
        let st = SpaceTime::new(grid, n_t);
        let d = grid.dim();
        // J(t) = diag(1 + cos t, 2 sin 2t, ...): time dependent diagonal.
        let js: Vec<SparseMatrix> = (0..st.samples())
            .map(|q| {
                let t = 2.0 * PI * q as f64 / st.samples() as f64;
                let diag: Vec<f64> = (0..d).map(|k| 1.0 + (k as f64 * t).cos()).collect();
                SparseMatrix::diagonal(&diag)
            })
            .collect();
        let m = SparseMatrix::from_triplets(st.size(), st.size(), &st.collocated_part(&js, -1.0));
        let u = traj(grid, n_t);
        let samples: Vec<Vec<f64>> = u.samples(st.samples()).iter().zip(&js).map(|(s, j)| j.matvec(s)).collect();
        let want = st.to_slots(&PeriodicTrajectory::from_samples(grid, n_t, &samples).unwrap());
        let got = m.matvec(&st.to_slots(&u));
        let err = got.iter().zip(&want).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err < 1e-13, "{err}");
    }
}
