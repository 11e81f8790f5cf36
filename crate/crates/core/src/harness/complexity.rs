//! Complex-multiplication counts per AO iteration.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dims {
    pub users: u64,
    pub n_t: u64,
    pub n_r: u64,
    pub elements: u64,
    pub layers: u64,
}

/// Cost of one reduced-variable precoder update.
pub fn c_x(d: &Dims) -> u64 {
    let k3 = d.users.pow(3);
    if d.n_t >= d.users * d.n_r {
        k3 * d.n_r.pow(3)
    } else {
        k3 * d.n_t * d.n_r.pow(2)
    }
}

/// `I_U (K N_t² N_r + N_t³) + N N_t² + I_φ (L N³ + N_t³)`.
pub fn c_dpc(d: &Dims, i_u: f64, i_phi: f64) -> f64 {
    let (k, nt, nr, n, l) = (d.users as f64, d.n_t as f64, d.n_r as f64, d.elements as f64, d.layers as f64);
    i_u * (k * nt * nt * nr + nt.powi(3)) + n * nt * nt + i_phi * (l * n.powi(3) + nt.powi(3))
}

/// `I_X C_x + K N N_t² + I_φ L N³`.
pub fn c_lin(d: &Dims, i_x: f64, i_phi: f64) -> f64 {
    let (k, nt, n, l) = (d.users as f64, d.n_t as f64, d.elements as f64, d.layers as f64);
    i_x * c_x(d) as f64 + k * n * nt * nt + i_phi * l * n.powi(3)
}

/// One row of the complexity table.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ComplexityRow {
    pub users: u64,
    pub i_u: f64,
    pub i_phi_dpc: f64,
    pub c_dpc: f64,
    pub i_x: f64,
    pub i_phi_lin: f64,
    pub c_lin: f64,
}

impl ComplexityRow {
    pub fn new(d: &Dims, i_u: f64, i_phi_dpc: f64, i_x: f64, i_phi_lin: f64) -> ComplexityRow {
        ComplexityRow {
            users: d.users,
            i_u,
            i_phi_dpc,
            c_dpc: c_dpc(d, i_u, i_phi_dpc),
            i_x,
            i_phi_lin,
            c_lin: c_lin(d, i_x, i_phi_lin),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(users: u64) -> Dims {
        Dims { users, n_t: 16, n_r: 2, elements: 100, layers: 4 }
    }

    #[test]
    fn update_cost_branches() {
        assert_eq!(c_x(&dims(4)), 64 * 8);
        assert_eq!(c_x(&dims(8)), 512 * 8);
        assert_eq!(c_x(&dims(12)), 1728 * 16 * 4);
    }

    #[test]
    fn degenerate_counts() {
        let d = dims(4);
        assert_eq!(c_dpc(&d, 0.0, 0.0), 100.0 * 256.0);
        assert_eq!(c_lin(&d, 0.0, 0.0), 4.0 * 100.0 * 256.0);
    }
}
