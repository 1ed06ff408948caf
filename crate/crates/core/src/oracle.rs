//! Brute-force check on the recursion: solve the `n × n` system
//! `Σ_j c_j e^{λ(j) T_i} = u_i` by Gaussian elimination with full pivoting at
//! twice the trace precision, and bound the solution error a posteriori.

use rug::Float;

use crate::error::{Error, Result};
use crate::forward::Trace;
use crate::operator::OperatorSpec;
use crate::precision::{inflate, ulp_factor, BOUND_BITS};

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub c: Vec<Float>,
    /// Bound on `|c̃_k - c_k|` where `c` solves the system with the exact
    /// samples, assuming the trace has no modes beyond `n`.
    pub budget: Vec<Float>,
    /// `|M^{-1}|`, kept to price model tails via [`OracleSolution::tail_budget`].
    inverse_abs: Vec<Vec<Float>>,
    pub precision: u32,
}

impl OracleSolution {
    /// `Σ_i |M^{-1}_{ki}| tail_i`: the effect of sample contributions
    /// `|tail_i|` from modes the system does not model.
    pub fn tail_budget(&self, tail: &[Float]) -> Vec<Float> {
        self.inverse_abs
            .iter()
            .map(|row| {
                let mut s = Float::with_val(BOUND_BITS, 0);
                for (a, t) in row.iter().zip(tail) {
                    s += Float::with_val(BOUND_BITS, a * t);
                }
                inflate(s * 1.1)
            })
            .collect()
    }
}

pub fn oracle_recover(trace: &Trace, spec: &OperatorSpec, n: usize) -> Result<Vec<Float>> {
    Ok(oracle_solve(trace, spec, n)?.c)
}

pub fn oracle_solve(trace: &Trace, spec: &OperatorSpec, n: usize) -> Result<OracleSolution> {
    if n == 0 || n > trace.len() {
        return Err(Error::InvalidArgument(format!("oracle needs 1 <= n <= {}, got {n}", trace.len())));
    }
    let p = 2 * trace.mantissa_bits + 64;
    let times = trace.model_times();
    let lambdas: Vec<Float> = (1..=n as u64).map(|j| spec.lambda_float(j, p)).collect();

    let mut m = vec![vec![Float::new(p); n]; n];
    let mut dm = vec![vec![Float::new(BOUND_BITS); n]; n];
    for i in 0..n {
        let t = Float::with_val(p, &times[i]);
        for j in 0..n {
            let e = Float::with_val(p, &lambdas[j] * &t);
            let v = Float::with_val(p, e.exp_ref());
            // exp of a rounded exponent: relative error ≤ (|e| + 2) 2^{1-p}
            dm[i][j] = inflate(
                Float::with_val(BOUND_BITS, v.abs_ref())
                    * (Float::with_val(BOUND_BITS, e.abs_ref()) + 2u32)
                    * ulp_factor(p - 1),
            );
            m[i][j] = v;
        }
    }
    let u: Vec<Float> = trace.samples[..n].iter().map(|s| Float::with_val(p, s)).collect();

    let lu = FullPivotLu::factor(m.clone())?;
    let c = lu.solve(&u);
    let inverse: Vec<Vec<Float>> = {
        let cols: Vec<Vec<Float>> = (0..n)
            .map(|i| {
                let mut e = vec![Float::with_val(p, 0); n];
                e[i] = Float::with_val(p, 1);
                lu.solve(&e)
            })
            .collect();
        (0..n).map(|k| (0..n).map(|i| Float::with_val(BOUND_BITS, cols[i][k].abs_ref())).collect()).collect()
    };

    // per-row uncertainty: residual, sample tolerance, matrix rounding
    let mut slack = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = Float::with_val(p, -&u[i]);
        let mut mag = Float::with_val(BOUND_BITS, u[i].abs_ref());
        let mut dm_c = Float::with_val(BOUND_BITS, 0);
        for j in 0..n {
            let prod = Float::with_val(p, &m[i][j] * &c[j]);
            mag += Float::with_val(BOUND_BITS, prod.abs_ref());
            dm_c += Float::with_val(BOUND_BITS, &dm[i][j] * Float::with_val(BOUND_BITS, c[j].abs_ref()));
            r += prod;
        }
        let rounding = mag * ((2 * n + 2) as u32) * ulp_factor(p - 1);
        let tau = Float::with_val(BOUND_BITS, &trace.truncation_errors[i]);
        slack.push(Float::with_val(BOUND_BITS, r.abs_ref()) + rounding + tau + dm_c);
    }
    let budget = inverse
        .iter()
        .map(|row| {
            let mut s = Float::with_val(BOUND_BITS, 0);
            for (a, e) in row.iter().zip(&slack) {
                s += Float::with_val(BOUND_BITS, a * e);
            }
            // the computed inverse stands in for the exact one
            inflate(s * 1.1)
        })
        .collect();
    Ok(OracleSolution { c, budget, inverse_abs: inverse, precision: p })
}

/// `P A Q = L U` with row and column permutations.
struct FullPivotLu {
    lu: Vec<Vec<Float>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl FullPivotLu {
    fn factor(mut a: Vec<Vec<Float>>) -> Result<Self> {
        let n = a.len();
        let p = a[0][0].prec();
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..n).collect();
        // running absolute rounding bound per entry
        let mut err = vec![vec![Float::with_val(BOUND_BITS, 0); n]; n];
        for (i, row) in a.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                err[i][j] = Float::with_val(BOUND_BITS, v.abs_ref()) * ulp_factor(p - 1);
            }
        }
        for step in 0..n {
            let (mut pi, mut pj) = (step, step);
            for i in step..n {
                for j in step..n {
                    if a[i][j].clone().abs() > a[pi][pj].clone().abs() {
                        (pi, pj) = (i, j);
                    }
                }
            }
            a.swap(step, pi);
            err.swap(step, pi);
            rows.swap(step, pi);
            for (row, erow) in a.iter_mut().zip(err.iter_mut()) {
                row.swap(step, pj);
                erow.swap(step, pj);
            }
            cols.swap(step, pj);
            let pivot = a[step][step].clone();
            let pivot_abs = Float::with_val(BOUND_BITS, pivot.abs_ref());
            if pivot.is_zero() || pivot_abs <= Float::with_val(BOUND_BITS, &err[step][step] * 256u32) {
                return Err(Error::IllConditioned { step: step + 1 });
            }
            for i in step + 1..n {
                let l = Float::with_val(p, &a[i][step] / &pivot);
                let l_abs = Float::with_val(BOUND_BITS, l.abs_ref());
                for j in step + 1..n {
                    let prod = Float::with_val(p, &l * &a[step][j]);
                    let e = Float::with_val(BOUND_BITS, &l_abs * &err[step][j])
                        + (Float::with_val(BOUND_BITS, prod.abs_ref())
                            + Float::with_val(BOUND_BITS, a[i][j].abs_ref()))
                            * ulp_factor(p - 1);
                    err[i][j] += e;
                    a[i][j] -= prod;
                }
                a[i][step] = l;
            }
        }
        Ok(FullPivotLu { lu: a, rows, cols })
    }

    fn solve(&self, b: &[Float]) -> Vec<Float> {
        let n = self.lu.len();
        let p = self.lu[0][0].prec();
        let mut y: Vec<Float> = self.rows.iter().map(|&r| Float::with_val(p, &b[r])).collect();
        for i in 0..n {
            for j in 0..i {
                let t = Float::with_val(p, &self.lu[i][j] * &y[j]);
                y[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = Float::with_val(p, &self.lu[i][j] * &y[j]);
                y[i] -= t;
            }
            y[i] /= &self.lu[i][i];
        }
        let mut x = vec![Float::new(p); n];
        for (k, &c) in self.cols.iter().enumerate() {
            x[c] = y[k].clone();
        }
        x
    }
}
