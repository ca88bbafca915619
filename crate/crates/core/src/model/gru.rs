//! GRU cell with the update convention `h′ = (1 − z) ⊙ h + z ⊙ h̃`.

use super::params::GruParams;
use super::tensor::{add_assign, matvec_acc, matvec_t_acc, outer_acc, sigmoid, Tensor};
use crate::error::{Error, Result};

/// Intermediate values of one forward step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct GruCache {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub rh: Vec<f64>,
    pub n: Vec<f64>,
}

fn affine(w: &Tensor, x: &[f64], u: &Tensor, h: &[f64], b: &Tensor) -> Vec<f64> {
    let mut a = b.values().to_vec();
    matvec_acc(&mut a, w, x);
    matvec_acc(&mut a, u, h);
    a
}

pub(crate) fn forward(x: &[f64], h: &[f64], p: &GruParams) -> (Vec<f64>, GruCache) {
    let z: Vec<f64> = affine(&p.w_z, x, &p.u_z, h, &p.b_z).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = affine(&p.w_r, x, &p.u_r, h, &p.b_r).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let n: Vec<f64> = affine(&p.w_h, x, &p.u_h, &rh, &p.b_h).into_iter().map(f64::tanh).collect();
    let out = (0..h.len()).map(|i| (1.0 - z[i]) * h[i] + z[i] * n[i]).collect();
    let cache = GruCache {
        x: x.to_vec(),
        h: h.to_vec(),
        z,
        r,
        rh,
        n,
    };
    (out, cache)
}

/// Single GRU step with shape checking.
pub fn gru_cell(x: &[f64], h: &[f64], p: &GruParams) -> Result<Vec<f64>> {
    if x.len() != p.input_size() || h.len() != p.hidden_size() {
        return Err(Error::Shape(format!(
            "gru_cell expects input {} / hidden {}, got {} / {}",
            p.input_size(),
            p.hidden_size(),
            x.len(),
            h.len()
        )));
    }
    Ok(forward(x, h, p).0)
}

/// Accumulates parameter gradients into `g`; returns `(dx, dh_prev)`.
pub(crate) fn backward(
    dout: &[f64],
    c: &GruCache,
    p: &GruParams,
    g: &mut GruParams,
) -> (Vec<f64>, Vec<f64>) {
    let hs = c.h.len();
    let mut dx = vec![0.0; c.x.len()];
    let mut dh = vec![0.0; hs];

    let mut da_n = vec![0.0; hs];
    let mut da_z = vec![0.0; hs];
    for i in 0..hs {
        dh[i] = dout[i] * (1.0 - c.z[i]);
        da_n[i] = dout[i] * c.z[i] * (1.0 - c.n[i] * c.n[i]);
        da_z[i] = dout[i] * (c.n[i] - c.h[i]) * c.z[i] * (1.0 - c.z[i]);
    }

    outer_acc(&mut g.w_h, &da_n, &c.x);
    outer_acc(&mut g.u_h, &da_n, &c.rh);
    add_assign(g.b_h.values_mut(), &da_n);
    matvec_t_acc(&mut dx, &p.w_h, &da_n);
    let mut drh = vec![0.0; hs];
    matvec_t_acc(&mut drh, &p.u_h, &da_n);

    let mut da_r = vec![0.0; hs];
    for i in 0..hs {
        dh[i] += drh[i] * c.r[i];
        da_r[i] = drh[i] * c.h[i] * c.r[i] * (1.0 - c.r[i]);
    }

    let gates = [
        (&da_z, &p.w_z, &p.u_z, &mut g.w_z, &mut g.u_z, &mut g.b_z),
        (&da_r, &p.w_r, &p.u_r, &mut g.w_r, &mut g.u_r, &mut g.b_r),
    ];
    for (da, w, u, gw, gu, gb) in gates {
        outer_acc(gw, da, &c.x);
        outer_acc(gu, da, &c.h);
        add_assign(gb.values_mut(), da);
        matvec_t_acc(&mut dx, w, da);
        matvec_t_acc(&mut dh, u, da);
    }
    (dx, dh)
}
