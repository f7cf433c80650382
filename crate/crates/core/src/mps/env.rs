//! Partial contractions `<bra| W |ket>` of an MPO sandwich.
//!
//! A left environment at site `k` covers sites `0..k` and has shape
//! `(bra bond, mpo bond, ket bond)`; a right environment covers `k+1..L` with
//! the same axis order.

use num_complex::Complex64 as C64;

use super::{MatrixProductOperator, MatrixProductState};
use crate::tensor::{tensordot, Tensor, ONE};

fn trivial() -> Tensor {
    Tensor::from_vec(&[1, 1, 1], vec![ONE])
}

pub(crate) fn extend_left(env: &Tensor, bra: &Tensor, w: &Tensor, ket: &Tensor) -> Tensor {
    let x = tensordot(env, &[2], ket, &[0]); // (a', w, t, b)
    let y = tensordot(&x, &[1, 2], w, &[0, 2]); // (a', b, s, w')
    tensordot(&bra.conj(), &[0, 1], &y, &[0, 2]).permute(&[0, 2, 1])
}

pub(crate) fn extend_right(env: &Tensor, bra: &Tensor, w: &Tensor, ket: &Tensor) -> Tensor {
    let x = tensordot(ket, &[2], env, &[2]); // (a, t, b', w')
    let y = tensordot(w, &[2, 3], &x, &[1, 3]); // (w, s, a, b')
    tensordot(&bra.conj(), &[1, 2], &y, &[1, 3]) // (a', w, a)
}

/// Cached left/right environments for a fixed MPO, refreshed site by site
/// during a sweep.
#[derive(Clone, Debug)]
pub struct Environment {
    left: Vec<Option<Tensor>>,
    right: Vec<Option<Tensor>>,
}

impl Environment {
    /// Builds every environment needed to work at `site`.
    pub fn new(bra: &MatrixProductState, mpo: &MatrixProductOperator, ket: &MatrixProductState, site: usize) -> Self {
        let len = bra.len();
        let mut env = Self {
            left: vec![None; len],
            right: vec![None; len],
        };
        env.left[0] = Some(trivial());
        env.right[len - 1] = Some(trivial());
        for k in 0..site {
            env.update_left(k, bra, mpo, ket);
        }
        for k in (site + 1..len).rev() {
            env.update_right(k, bra, mpo, ket);
        }
        env
    }

    /// Recomputes the left environment of site `k + 1` from site `k`.
    pub fn update_left(
        &mut self,
        k: usize,
        bra: &MatrixProductState,
        mpo: &MatrixProductOperator,
        ket: &MatrixProductState,
    ) {
        let prev = self.left[k].as_ref().expect("left environment available");
        let next = extend_left(prev, bra.tensor(k), mpo.tensor(k), ket.tensor(k));
        self.left[k + 1] = Some(next);
    }

    /// Recomputes the right environment of site `k - 1` from site `k`.
    pub fn update_right(
        &mut self,
        k: usize,
        bra: &MatrixProductState,
        mpo: &MatrixProductOperator,
        ket: &MatrixProductState,
    ) {
        let prev = self.right[k].as_ref().expect("right environment available");
        let next = extend_right(prev, bra.tensor(k), mpo.tensor(k), ket.tensor(k));
        self.right[k - 1] = Some(next);
    }

    pub fn left(&self, site: usize) -> &Tensor {
        self.left[site].as_ref().expect("left environment available")
    }

    pub fn right(&self, site: usize) -> &Tensor {
        self.right[site].as_ref().expect("right environment available")
    }

    /// Effective single-site operator at `site` as a dense matrix acting on the
    /// flattened `(dl, d, dr)` site tensor.
    pub fn local_matrix(&self, site: usize, w: &Tensor) -> (usize, Vec<C64>) {
        let l = self.left(site);
        let r = self.right(site);
        let x = tensordot(l, &[1], w, &[0]); // (a', a, s, t, w')
        let y = tensordot(&x, &[4], r, &[1]); // (a', a, s, t, b', b)
        let y = y.permute(&[0, 2, 4, 1, 3, 5]);
        let n = y.shape()[0] * y.shape()[1] * y.shape()[2];
        (n, y.into_data())
    }

    /// Effective operator applied to the ket site tensor, shape `(dl', d, dr')`.
    pub fn local_vector(&self, site: usize, w: &Tensor, ket_site: &Tensor) -> Tensor {
        let l = self.left(site);
        let r = self.right(site);
        let x = tensordot(l, &[2], ket_site, &[0]); // (a', w, t, d)
        let y = tensordot(&x, &[1, 2], w, &[0, 2]); // (a', d, s, w')
        tensordot(&y, &[1, 3], r, &[2, 1]) // (a', s, b')
    }
}

/// Second environment type: two stacked MPO layers `<bra| W1 W2 |ket>`,
/// used for `<psi|O^2|psi>` without forming O^2.
pub struct Environment2;

impl Environment2 {
    pub fn contract(
        bra: &MatrixProductState,
        outer: &MatrixProductOperator,
        inner: &MatrixProductOperator,
        ket: &MatrixProductState,
    ) -> C64 {
        // env[a', w1, w2, a]
        let mut env = Tensor::from_vec(&[1, 1, 1, 1], vec![ONE]);
        for k in 0..bra.len() {
            let x = tensordot(&env, &[3], ket.tensor(k), &[0]); // (a', w1, w2, t, b)
            let y = tensordot(&x, &[2, 3], inner.tensor(k), &[0, 2]); // (a', w1, b, u, w2')
            let z = tensordot(&y, &[1, 3], outer.tensor(k), &[0, 2]); // (a', b, w2', s, w1')
            env = tensordot(&bra.tensor(k).conj(), &[0, 1], &z, &[0, 3]) // (b', b, w2', w1')
                .permute(&[0, 3, 2, 1]);
        }
        env.data()[0]
    }
}

/// Full contraction `<bra|W|ket>`.
pub(crate) fn sandwich(bra: &MatrixProductState, mpo: &MatrixProductOperator, ket: &MatrixProductState) -> C64 {
    let mut env = trivial();
    for k in 0..bra.len() {
        env = extend_left(&env, bra.tensor(k), mpo.tensor(k), ket.tensor(k));
    }
    env.data()[0]
}
