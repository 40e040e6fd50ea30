//! Standard one- and two-qubit gates.

use nalgebra::DMatrix;

use crate::tensor::{Operator, C64, ONE, ZERO};

fn qubit_gate(entries: [[C64; 2]; 2]) -> Operator {
    Operator::new(DMatrix::from_fn(2, 2, |r, c| entries[r][c]), vec![2]).expect("2x2")
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn pauli_x() -> Operator {
    qubit_gate([[ZERO, ONE], [ONE, ZERO]])
}

pub fn pauli_y() -> Operator {
    let i = C64::i();
    qubit_gate([[ZERO, -i], [i, ZERO]])
}

pub fn pauli_z() -> Operator {
    qubit_gate([[ONE, ZERO], [ZERO, -ONE]])
}

pub fn hadamard() -> Operator {
    let s = re(std::f64::consts::FRAC_1_SQRT_2);
    qubit_gate([[s, s], [s, -s]])
}

/// `exp(-i θ X / 2)`.
pub fn rx(theta: f64) -> Operator {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    qubit_gate([[re(c), C64::new(0.0, -s)], [C64::new(0.0, -s), re(c)]])
}

/// `exp(-i θ Y / 2)`.
pub fn ry(theta: f64) -> Operator {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    qubit_gate([[re(c), re(-s)], [re(s), re(c)]])
}

/// `exp(-i θ Z / 2)`.
pub fn rz(theta: f64) -> Operator {
    let h = theta / 2.0;
    qubit_gate([[C64::from_polar(1.0, -h), ZERO], [ZERO, C64::from_polar(1.0, h)]])
}

/// CNOT with the first qubit as control.
pub fn cnot() -> Operator {
    let mut op = Operator::zeros(vec![2, 2]);
    for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        op.set(r, c, ONE);
    }
    op
}

/// Swap of two `d`-dimensional factors.
pub fn swap(d: usize) -> Operator {
    let mut op = Operator::zeros(vec![d, d]);
    for i in 0..d {
        for j in 0..d {
            op.set(j * d + i, i * d + j, ONE);
        }
    }
    op
}
