//! Linear drift of the cavity + two-mode mechanical system in the real
//! quadrature basis (X_c, P_c, x, p_x, y, p_y), with X = a + a†,
//! P = −i(a − a†) for each mode.

use num_complex::Complex64;
use serde::Serialize;

use crate::eigen::{eigenvalues, SquareMatrix};
use crate::error::{Error, Result};
use crate::model::SystemParams;

pub const DIM: usize = 6;

/// Quadrature labels in state-vector order.
pub const QUADRATURES: [&str; DIM] = ["X_c", "P_c", "x", "p_x", "y", "p_y"];

#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    m: SquareMatrix,
}

impl DriftMatrix {
    pub fn from_rows(rows: [[f64; DIM]; DIM]) -> Self {
        DriftMatrix {
            m: SquareMatrix::from_rows(rows),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m.get(i, j)
    }

    pub fn rows(&self) -> [[f64; DIM]; DIM] {
        let mut out = [[0.0; DIM]; DIM];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m.get(i, j);
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        eigenvalues(&self.m)
    }

    pub fn as_matrix(&self) -> &SquareMatrix {
        &self.m
    }
}

/// One normal mode: a conjugate eigenvalue pair λ, λ̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenMode {
    /// |Im λ|, rad/s.
    pub frequency: f64,
    /// −2 Re λ, the energy linewidth, rad/s.
    pub decay: f64,
}

pub fn build_drift(p: &SystemParams) -> DriftMatrix {
    let c = p.couplings();
    let (k2, d) = (0.5 * p.kappa(), p.delta());
    let (gx2, gy2) = (2.0 * c.g_x, 2.0 * c.g_y);
    let (ox, oy) = (p.omega_x(), p.omega_y());
    let (hx, hy) = (0.5 * p.gamma_x(), 0.5 * p.gamma_y());
    DriftMatrix::from_rows([
        [-k2, -d, 0.0, 0.0, 0.0, 0.0],
        [d, -k2, gx2, 0.0, gy2, 0.0],
        [0.0, 0.0, -hx, ox, 0.0, 0.0],
        [gx2, 0.0, -ox, -hx, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -hy, oy],
        [gy2, 0.0, 0.0, 0.0, -oy, -hy],
    ])
}

/// Groups eigenvalues into conjugate pairs. Eigenvalues within `tol` of the
/// real axis are treated as real and paired with their nearest real
/// neighbour (overdamped modes, frequency 0).
pub fn pair_modes(eigs: &[Complex64], tol: f64) -> Result<Vec<EigenMode>> {
    let mut upper: Vec<Complex64> = eigs.iter().copied().filter(|e| e.im > tol).collect();
    let mut lower: Vec<Complex64> = eigs.iter().copied().filter(|e| e.im < -tol).collect();
    let mut real: Vec<f64> = eigs.iter().filter(|e| e.im.abs() <= tol).map(|e| e.re).collect();

    if upper.len() != lower.len() || real.len() % 2 != 0 {
        return Err(Error::Pairing {
            residual: f64::INFINITY,
            tolerance: tol,
        });
    }
    upper.sort_by(|a, b| a.im.total_cmp(&b.im));

    let mut modes = Vec::with_capacity(eigs.len() / 2);
    for u in upper {
        let (j, residual) = lower
            .iter()
            .enumerate()
            .map(|(j, l)| (j, (l.conj() - u).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty by count check");
        if residual > tol {
            return Err(Error::Pairing {
                residual,
                tolerance: tol,
            });
        }
        let l = lower.swap_remove(j);
        modes.push(EigenMode {
            frequency: 0.5 * (u.im - l.im),
            decay: -(u.re + l.re),
        });
    }
    real.sort_by(f64::total_cmp);
    for pair in real.chunks(2) {
        modes.push(EigenMode {
            frequency: 0.0,
            decay: -(pair[0] + pair[1]),
        });
    }
    modes.sort_by(|a, b| {
        a.frequency
            .total_cmp(&b.frequency)
            .then(a.decay.total_cmp(&b.decay))
    });
    Ok(modes)
}

/// The three normal modes, sorted by frequency (ties by decay).
pub fn eigenmodes(d: &DriftMatrix) -> Result<Vec<EigenMode>> {
    let eigs = d.eigenvalues()?;
    pair_modes(&eigs, 1e-8 * d.norm())
}

/// Largest real part among the eigenvalues.
pub fn spectral_abscissa(d: &DriftMatrix) -> Result<f64> {
    Ok(d
        .eigenvalues()?
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// True iff every eigenvalue lies strictly in the left half plane. A matrix
/// whose eigenvalues cannot be computed is reported as not stable.
pub fn is_stable(d: &DriftMatrix) -> bool {
    match spectral_abscissa(d) {
        Ok(max_re) => max_re < 0.0,
        Err(e) => {
            log::warn!("stability check failed: {e}");
            false
        }
    }
}

/// Errors with [`Error::Unstable`] unless the drift is stable.
pub fn require_stable(d: &DriftMatrix) -> Result<()> {
    let max_real = spectral_abscissa(d)?;
    if max_real < 0.0 {
        Ok(())
    } else {
        Err(Error::Unstable { max_real })
    }
}
