//! Finite-dimensional operator assignments: verification of the operator
//! semantics (normal, order `d`, commuting within scopes, `P_R(A…) = I`),
//! simultaneous diagonalization, polynomial application and the Lemma-3 probe.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::csp::{all_tuples, ClassicalAssignment, Instance};
use crate::cyclotomic::UniPoly;
use crate::fourier::{relation_polynomial, MultiPoly};

pub type CMatrix = DMatrix<Complex64>;

/// Default tolerance, relative to the Frobenius norm of the identity.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OpError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no operator for variable {0:?}")]
    MissingVariable(String),
    #[error("expected {expected} matrices, got {got}")]
    ArgumentCount { expected: usize, got: usize },
    #[error("empty solution list")]
    EmptySolutions,
    #[error("solutions disagree on the variable set")]
    MixedSolutions,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("malformed operator document: {0}")]
    Malformed(String),
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn ensure_square(a: &CMatrix) -> Result<usize, OpError> {
    if a.nrows() != a.ncols() {
        return Err(OpError::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

pub fn mat_pow(a: &CMatrix, k: usize) -> CMatrix {
    let mut acc = identity(a.nrows());
    let mut base = a.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `(‖AA* − A*A‖_F, ‖A^d − I‖_F)`.
pub fn check_normal_order(a: &CMatrix, d: usize) -> Result<(f64, f64), OpError> {
    let n = ensure_square(a)?;
    let adj = a.adjoint();
    let normality = frobenius(&(a * &adj - &adj * a));
    let order = frobenius(&(mat_pow(a, d) - identity(n)));
    Ok((normality, order))
}

/// `Σ_b c_b ∏_j A_j^{b_j}` with exact coefficients rounded to complex doubles.
pub fn eval_multipoly_matrix(p: &MultiPoly, mats: &[&CMatrix]) -> Result<CMatrix, OpError> {
    if mats.len() != p.vars().len() {
        return Err(OpError::ArgumentCount {
            expected: p.vars().len(),
            got: mats.len(),
        });
    }
    let n = match mats.first() {
        Some(m) => ensure_square(m)?,
        None => 1,
    };
    for m in mats {
        if ensure_square(m)? != n {
            return Err(OpError::DimensionMismatch {
                expected: n,
                got: m.nrows(),
            });
        }
    }
    let d = p.d();
    let powers: Vec<Vec<CMatrix>> = mats
        .iter()
        .map(|m| {
            let mut v = vec![identity(n)];
            for k in 1..d {
                let next = &v[k - 1] * *m;
                v.push(next);
            }
            v
        })
        .collect();
    let mut acc = CMatrix::zeros(n, n);
    for (exp, c) in p.terms() {
        let mut term = identity(n) * c.to_complex();
        for (j, &k) in exp.iter().enumerate() {
            if k > 0 {
                term = &term * &powers[j][k];
            }
        }
        acc += term;
    }
    Ok(acc)
}

/// Horner evaluation of a univariate polynomial at a matrix.
pub fn apply_unipoly_matrix(p: &UniPoly, a: &CMatrix) -> Result<CMatrix, OpError> {
    let n = ensure_square(a)?;
    let mut acc = CMatrix::zeros(n, n);
    for c in p.coeffs().iter().rev() {
        acc = &acc * a + identity(n) * c.to_complex();
    }
    Ok(acc)
}

/// A finite-dimensional operator for every variable.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorAssignment {
    pub dim: usize,
    pub assign: BTreeMap<String, CMatrix>,
}

#[derive(Serialize, Deserialize)]
struct OpsDoc {
    dim: usize,
    assign: BTreeMap<String, Vec<Vec<[f64; 2]>>>,
}

impl OperatorAssignment {
    pub fn new(dim: usize) -> Self {
        OperatorAssignment {
            dim,
            assign: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, var: &str, m: CMatrix) -> Result<(), OpError> {
        let n = ensure_square(&m)?;
        if n != self.dim {
            return Err(OpError::DimensionMismatch {
                expected: self.dim,
                got: n,
            });
        }
        self.assign.insert(var.to_string(), m);
        Ok(())
    }

    pub fn get(&self, var: &str) -> Option<&CMatrix> {
        self.assign.get(var)
    }

    pub fn to_json(&self) -> String {
        let doc = OpsDoc {
            dim: self.dim,
            assign: self
                .assign
                .iter()
                .map(|(k, m)| {
                    let rows = (0..m.nrows())
                        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                        .collect();
                    (k.clone(), rows)
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("operators serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, OpError> {
        let doc: OpsDoc = serde_json::from_str(text).map_err(|e| OpError::Malformed(e.to_string()))?;
        let mut out = OperatorAssignment::new(doc.dim);
        for (var, rows) in doc.assign {
            if rows.len() != doc.dim || rows.iter().any(|r| r.len() != doc.dim) {
                return Err(OpError::Malformed(format!("matrix for {var:?} is not {0}x{0}", doc.dim)));
            }
            let entries = rows.iter().flatten().map(|[re, im]| Complex64::new(*re, *im));
            if rows.iter().flatten().any(|[re, im]| !re.is_finite() || !im.is_finite()) {
                return Err(OpError::Malformed(format!("non-finite entry for {var:?}")));
            }
            out.insert(&var, CMatrix::from_row_iterator(doc.dim, doc.dim, entries))?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableCheck {
    pub var: String,
    pub normality: f64,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub index: usize,
    pub rel: String,
    /// Largest `‖[A_u, A_w]‖_F` over pairs in the scope.
    pub commutator: f64,
    /// `‖P_R(A…) − I‖_F`.
    pub polynomial: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OpVerdict {
    Satisfying,
    Violating,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub dim: usize,
    pub tolerance: f64,
    pub variables: Vec<VariableCheck>,
    pub constraints: Vec<ConstraintCheck>,
    pub max_residual: f64,
    /// Description of the largest residual.
    pub worst: String,
    pub verdict: OpVerdict,
}

impl VerificationReport {
    pub fn is_satisfying(&self) -> bool {
        self.verdict == OpVerdict::Satisfying
    }

    /// Line-oriented residual table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for v in &self.variables {
            out.push_str(&format!("var {} normality={:.3e} order={:.3e}\n", v.var, v.normality, v.order));
        }
        for c in &self.constraints {
            out.push_str(&format!(
                "constraint {} {} commutator={:.3e} polynomial={:.3e}\n",
                c.index, c.rel, c.commutator, c.polynomial
            ));
        }
        out.push_str(&format!("max_residual {:.3e} ({})\n", self.max_residual, self.worst));
        out.push_str(match self.verdict {
            OpVerdict::Satisfying => "SATISFYING\n",
            OpVerdict::Violating => "VIOLATING\n",
        });
        out
    }
}

/// Checks every operator condition; a residual passes when it is at most `tol·√dim`.
pub fn verify_assignment(p: &Instance, ops: &OperatorAssignment, tol: f64) -> Result<VerificationReport, OpError> {
    let d = p.d();
    let mut mats = Vec::with_capacity(p.variables().len());
    for v in p.variables() {
        let m = ops.get(v).ok_or_else(|| OpError::MissingVariable(v.clone()))?;
        if ensure_square(m)? != ops.dim {
            return Err(OpError::DimensionMismatch {
                expected: ops.dim,
                got: m.nrows(),
            });
        }
        mats.push(m);
    }
    let mut worst = (0.0f64, String::from("none"));
    let mut note = |r: f64, what: String| {
        if r > worst.0 || (worst.1 == "none" && r >= worst.0) {
            worst = (r, what);
        }
    };
    let mut variables = Vec::new();
    for (v, m) in p.variables().iter().zip(&mats) {
        let (normality, order) = check_normal_order(m, d)?;
        note(normality, format!("normality of {v}"));
        note(order, format!("order of {v}"));
        variables.push(VariableCheck {
            var: v.clone(),
            normality,
            order,
        });
    }
    let mut polys: BTreeMap<&str, MultiPoly> = BTreeMap::new();
    let mut constraints = Vec::new();
    for (ci, c) in p.constraints().iter().enumerate() {
        let scope = p.scope(ci);
        let mut comm = 0.0f64;
        for i in 0..scope.len() {
            for j in i + 1..scope.len() {
                comm = comm.max(frobenius(&commutator(mats[scope[i]], mats[scope[j]])));
            }
        }
        let poly = polys
            .entry(c.rel.as_str())
            .or_insert_with(|| relation_polynomial(p.relation(ci)));
        let args: Vec<&CMatrix> = scope.iter().map(|&v| mats[v]).collect();
        let value = eval_multipoly_matrix(poly, &args)?;
        let residual = frobenius(&(value - identity(ops.dim)));
        note(comm, format!("commutator in constraint {ci}"));
        note(residual, format!("polynomial of constraint {ci}"));
        constraints.push(ConstraintCheck {
            index: ci,
            rel: c.rel.clone(),
            commutator: comm,
            polynomial: residual,
        });
    }
    let bound = tol * (ops.dim as f64).sqrt();
    let verdict = if worst.0 <= bound {
        OpVerdict::Satisfying
    } else {
        OpVerdict::Violating
    };
    Ok(VerificationReport {
        dim: ops.dim,
        tolerance: tol,
        variables,
        constraints,
        max_residual: worst.0,
        worst: worst.1,
        verdict,
    })
}

/// Diagonal direct sum of classical solutions: `A_v = diag(λ_{s_1(v)}, …, λ_{s_m(v)})`.
pub fn embed_classical(solutions: &[ClassicalAssignment], d: usize) -> Result<OperatorAssignment, OpError> {
    let first = solutions.first().ok_or(OpError::EmptySolutions)?;
    if solutions.iter().any(|s| s.keys().ne(first.keys())) {
        return Err(OpError::MixedSolutions);
    }
    let m = solutions.len();
    let mut out = OperatorAssignment::new(m);
    for var in first.keys() {
        let diag: Vec<Complex64> = solutions.iter().map(|s| root(s[var], d)).collect();
        out.insert(var, CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))?;
    }
    Ok(out)
}

/// `λ_k` as a complex double.
pub fn root(k: usize, d: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k % d) as f64 / d as f64)
}

/// Haar-like random unitary: QR of a complex Gaussian matrix with phases fixed.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `m` matrices `U·D_i·U*` sharing a random unitary, with repeated diagonal
/// entries so that the family has degenerate joint eigenspaces.
pub fn random_commuting_normal_family<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<CMatrix> {
    let u = random_unitary(n, rng);
    (0..m)
        .map(|_| {
            let pool: Vec<Complex64> = (0..rng.random_range(1..=n.max(1)))
                .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
                .collect();
            let diag: Vec<Complex64> = (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect();
            &u * CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) * u.adjoint()
        })
        .collect()
}

/// Simultaneous diagonalization with a fixed internal seed.
pub fn simultaneous_diagonalize(mats: &[CMatrix], tol: f64) -> Result<(CMatrix, Vec<CMatrix>), OpError> {
    simultaneous_diagonalize_seeded(mats, tol, 0x5eed)
}

/// Finds a unitary `U` with every `U·M_i·U*` diagonal, for pairwise commuting normal `M_i`.
///
/// A random real combination of the Hermitian and anti-Hermitian parts is
/// diagonalized; eigenvalue clusters on which some `M_i` is not scalar are
/// refined recursively with fresh combinations.
pub fn simultaneous_diagonalize_seeded(
    mats: &[CMatrix],
    tol: f64,
    seed: u64,
) -> Result<(CMatrix, Vec<CMatrix>), OpError> {
    let Some(first) = mats.first() else {
        return Err(OpError::Precondition("no matrices".into()));
    };
    let n = ensure_square(first)?;
    let scale = mats.iter().map(frobenius).fold(1.0f64, f64::max);
    for (i, m) in mats.iter().enumerate() {
        if ensure_square(m)? != n {
            return Err(OpError::DimensionMismatch {
                expected: n,
                got: m.nrows(),
            });
        }
        let adj = m.adjoint();
        if frobenius(&(m * &adj - &adj * m)) > tol * scale * scale {
            return Err(OpError::Precondition(format!("matrix {i} is not normal")));
        }
        for (j, other) in mats.iter().enumerate().skip(i + 1) {
            if frobenius(&commutator(m, other)) > tol * scale * scale {
                return Err(OpError::Precondition(format!("matrices {i} and {j} do not commute")));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = refine(mats, identity(n), scale, &mut rng, 0)?;
    let u = basis.adjoint();
    let diags = mats
        .iter()
        .map(|m| {
            let t = &u * m * &basis;
            CMatrix::from_diagonal(&t.diagonal())
        })
        .collect();
    Ok((u, diags))
}

const MAX_REFINE_DEPTH: usize = 24;

/// Orthonormal columns spanning `q`'s range, each a joint eigenvector of `mats`.
fn refine(mats: &[CMatrix], q: CMatrix, scale: f64, rng: &mut ChaCha8Rng, depth: usize) -> Result<CMatrix, OpError> {
    let k = q.ncols();
    if k <= 1 {
        return Ok(q);
    }
    if depth > MAX_REFINE_DEPTH {
        return Err(OpError::Precondition("joint eigenspaces could not be separated".into()));
    }
    let qa = q.adjoint();
    let restricted: Vec<CMatrix> = mats.iter().map(|m| &qa * m * &q).collect();
    let mut combo = CMatrix::zeros(k, k);
    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, 0.5);
    for m in &restricted {
        let adj = m.adjoint();
        let herm = (m + &adj) * half;
        let anti = (m - &adj) * (-half_i);
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        combo += herm * Complex64::new(a, 0.0) + anti * Complex64::new(b, 0.0);
    }
    // Symmetrize against rounding before the Hermitian solver.
    let combo = (&combo + combo.adjoint()) * half;
    let eig = SymmetricEigen::new(combo);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let gap = 1e-7 * scale;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match clusters.last_mut() {
            Some(c) if (eig.eigenvalues[i] - eig.eigenvalues[*c.last().unwrap()]).abs() <= gap => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let mut columns: Vec<CMatrix> = Vec::new();
    for cluster in clusters {
        let sub = CMatrix::from_fn(k, cluster.len(), |r, c| eig.eigenvectors[(r, cluster[c])]);
        let lifted = &q * &sub;
        let scalar = cluster.len() == 1 || is_scalar_on(mats, &lifted, scale);
        if scalar {
            columns.push(lifted);
        } else {
            columns.push(refine(mats, lifted, scale, rng, depth + 1)?);
        }
    }
    let total: usize = columns.iter().map(|c| c.ncols()).sum();
    let mut out = CMatrix::zeros(q.nrows(), total);
    let mut at = 0;
    for c in columns {
        out.view_mut((0, at), (c.nrows(), c.ncols())).copy_from(&c);
        at += c.ncols();
    }
    Ok(out)
}

fn is_scalar_on(mats: &[CMatrix], q: &CMatrix, scale: f64) -> bool {
    let qa = q.adjoint();
    let k = q.ncols();
    mats.iter().all(|m| {
        let block = &qa * m * q;
        let mu = block.trace() / Complex64::new(k as f64, 0.0);
        frobenius(&(m * q - q * mu)) <= 1e-9 * scale
    })
}

/// Outcome of [`lemma3_probe`].
#[derive(Debug, Clone, PartialEq)]
pub enum Lemma3Outcome {
    /// The implication fails already on `U_d`; the point is a counterexample.
    NotApplicable { counterexample: Vec<usize> },
    /// Every sampled tuple meeting the premises met the conclusion.
    Holds { trials: usize, premise_hits: usize },
    /// Trial `trial` met the premises but not the conclusion.
    Fails { trial: usize, residual: f64 },
}

impl Lemma3Outcome {
    pub fn holds(&self) -> bool {
        matches!(self, Lemma3Outcome::Holds { .. })
    }
}

/// Samples fully commuting normal order-`d` tuples `U·diag(λ…)·U*` and checks
/// that whenever every premise `Q_i(A…)` is within `tol·√n` of zero, the
/// conclusion is within `10·tol·√n`.
///
/// Diagonal slots are drawn from the common zero set of the premises, so every
/// trial exercises the implication. The premise must imply the conclusion on
/// `U_d` (checked by brute force first).
pub fn lemma3_probe<R: Rng + ?Sized>(
    premises: &[MultiPoly],
    conclusion: &MultiPoly,
    trials: usize,
    n: usize,
    tol: f64,
    rng: &mut R,
) -> Result<Lemma3Outcome, OpError> {
    let d = conclusion.d();
    let k = conclusion.vars().len();
    for q in premises {
        if q.d() != d || q.vars().len() != k {
            return Err(OpError::Precondition("premises and conclusion use different variables".into()));
        }
    }
    let mut zeros = Vec::new();
    for t in all_tuples(d, k) {
        let premise_holds = premises.iter().all(|q| q.eval_indices(&t).expect("arity matches").is_zero());
        if premise_holds {
            if !conclusion.eval_indices(&t).expect("arity matches").is_zero() {
                return Ok(Lemma3Outcome::NotApplicable { counterexample: t });
            }
            zeros.push(t);
        }
    }
    let bound = tol * (n as f64).sqrt();
    let mut hits = 0;
    for trial in 0..trials {
        let u = random_unitary(n, rng);
        let points: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                if zeros.is_empty() || rng.random_bool(0.1) {
                    (0..k).map(|_| rng.random_range(0..d)).collect()
                } else {
                    zeros[rng.random_range(0..zeros.len())].clone()
                }
            })
            .collect();
        let mats: Vec<CMatrix> = (0..k)
            .map(|j| {
                let diag: Vec<Complex64> = points.iter().map(|pt| root(pt[j], d)).collect();
                &u * CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) * u.adjoint()
            })
            .collect();
        let args: Vec<&CMatrix> = mats.iter().collect();
        let mut premise_ok = true;
        for q in premises {
            if frobenius(&eval_multipoly_matrix(q, &args)?) > bound {
                premise_ok = false;
                break;
            }
        }
        if premise_ok {
            hits += 1;
            let residual = frobenius(&eval_multipoly_matrix(conclusion, &args)?);
            if residual > 10.0 * bound {
                return Ok(Lemma3Outcome::Fails { trial, residual });
            }
        }
    }
    Ok(Lemma3Outcome::Holds {
        trials,
        premise_hits: hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{Constraint, Language, Relation};
    use crate::cyclotomic::CycNum;
    use crate::fourier::lambda;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mat(rows: &[&[Complex64]]) -> CMatrix {
        CMatrix::from_row_iterator(rows.len(), rows.len(), rows.iter().flat_map(|r| r.iter().copied()))
    }

    fn pauli_z() -> CMatrix {
        mat(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(-1., 0.)]])
    }

    fn pauli_x() -> CMatrix {
        mat(&[&[c(0., 0.), c(1., 0.)], &[c(1., 0.), c(0., 0.)]])
    }

    #[test]
    fn normal_order_examples() {
        assert_eq!(check_normal_order(&pauli_z(), 2).unwrap(), (0.0, 0.0));
        let scalar = identity(3) * c(-1.0, 0.0);
        assert_eq!(check_normal_order(&scalar, 2).unwrap(), (0.0, 0.0));
        let nil = mat(&[&[c(0., 0.), c(1., 0.)], &[c(0., 0.), c(0., 0.)]]);
        let (normality, _) = check_normal_order(&nil, 2).unwrap();
        assert!((normality - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            check_normal_order(&CMatrix::zeros(2, 3), 2),
            Err(OpError::NonSquare { .. })
        ));
    }

    #[test]
    fn multipoly_on_pauli_pair() {
        let z1 = pauli_z().kronecker(&identity(2));
        let z2 = identity(2).kronecker(&pauli_z());
        let xy = relation_polynomial(&Relation::equality(2));
        let out = eval_multipoly_matrix(&xy, &[&z1, &z2]).unwrap();
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1., 0.),
            c(-1., 0.),
            c(-1., 0.),
            c(1., 0.),
        ]));
        assert!(frobenius(&(out - expected)) < 1e-12);
        let one = MultiPoly::constant(2, MultiPoly::default_vars(2), CycNum::one());
        assert!(frobenius(&(eval_multipoly_matrix(&one, &[&z1, &z2]).unwrap() - identity(4))) < 1e-12);
    }

    #[test]
    fn unipoly_examples() {
        let z = pauli_z();
        assert!(frobenius(&(apply_unipoly_matrix(&UniPoly::x(), &z).unwrap() - &z)) < 1e-15);
        let sq = UniPoly::monomial(CycNum::one(), 2);
        assert!(frobenius(&(apply_unipoly_matrix(&sq, &z).unwrap() - identity(2))) < 1e-15);
        // Interpolant of 1 ↦ 1, -1 ↦ i: (1+i)/2 + (1-i)/2 x.
        let i = lambda(1, 4);
        let half = CycNum::from_fraction(1, 2).unwrap();
        let p = UniPoly::from_coeffs(vec![
            &(&CycNum::one() + &i) * &half,
            &(&CycNum::one() - &i) * &half,
        ]);
        let out = apply_unipoly_matrix(&p, &z).unwrap();
        let expected = mat(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(0., 1.)]]);
        assert!(frobenius(&(out - expected)) < 1e-12);
    }

    #[test]
    fn diagonalize_x_pair() {
        let x = pauli_x();
        let (u, diags) = simultaneous_diagonalize(&[x.clone(), x.clone()], DEFAULT_TOL).unwrap();
        assert!(frobenius(&(&u * u.adjoint() - identity(2))) < 1e-10);
        for dm in &diags {
            assert!(frobenius(&(&u * &x * u.adjoint() - dm)) < 1e-10);
            let mut ev: Vec<f64> = dm.diagonal().iter().map(|z| z.re).collect();
            ev.sort_by(f64::total_cmp);
            assert!((ev[0] + 1.0).abs() < 1e-10 && (ev[1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_inputs_stay_diagonal() {
        let z1 = pauli_z().kronecker(&identity(2));
        let z2 = identity(2).kronecker(&pauli_z());
        let (u, diags) = simultaneous_diagonalize(&[z1.clone(), z2.clone()], DEFAULT_TOL).unwrap();
        for (m, dm) in [z1, z2].iter().zip(&diags) {
            assert!(frobenius(&(&u * m * u.adjoint() - dm)) < 1e-10);
        }
    }

    #[test]
    fn non_commuting_inputs_are_rejected() {
        let err = simultaneous_diagonalize(&[pauli_x(), pauli_z()], DEFAULT_TOL).unwrap_err();
        assert!(matches!(err, OpError::Precondition(_)));
    }

    #[test]
    fn random_families_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 3, 8] {
            let fam = random_commuting_normal_family(n, 3, &mut rng);
            let (u, diags) = simultaneous_diagonalize(&fam, DEFAULT_TOL).unwrap();
            for (m, dm) in fam.iter().zip(&diags) {
                let err = frobenius(&(&u * m * u.adjoint() - dm)) / frobenius(m).max(1.0);
                assert!(err < 1e-8, "n={n} err={err}");
            }
        }
    }

    #[test]
    fn embedded_witness_satisfies() {
        let lang = Language::new(3).with("NE", Relation::from_predicate(3, 2, |t| t[0] != t[1])).unwrap();
        let p = Instance::build(lang, &["a", "b"], vec![Constraint::new(&["a", "b"], "NE")]).unwrap();
        let s1 = p.named_assignment(&[0, 1]);
        let s2 = p.named_assignment(&[2, 0]);
        let ops = embed_classical(std::slice::from_ref(&s1), 3).unwrap();
        assert_eq!(ops.dim, 1);
        assert!(verify_assignment(&p, &ops, DEFAULT_TOL).unwrap().is_satisfying());
        let ops = embed_classical(&[s1, s2], 3).unwrap();
        assert!(verify_assignment(&p, &ops, DEFAULT_TOL).unwrap().is_satisfying());
        let bad = embed_classical(&[p.named_assignment(&[1, 1])], 3).unwrap();
        assert!(!verify_assignment(&p, &bad, DEFAULT_TOL).unwrap().is_satisfying());
        assert_eq!(embed_classical(&[], 3), Err(OpError::EmptySolutions));
    }

    #[test]
    fn ops_json_round_trip() {
        let mut ops = OperatorAssignment::new(2);
        ops.insert("x", pauli_x()).unwrap();
        ops.insert("z", pauli_z()).unwrap();
        assert_eq!(OperatorAssignment::from_json(&ops.to_json()).unwrap(), ops);
        assert!(OperatorAssignment::from_json(r#"{"dim":2,"assign":{"x":[[[1,0]]]}}"#).is_err());
    }

    #[test]
    fn lemma3_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vars = MultiPoly::default_vars(1);
        let x = MultiPoly::variable(2, vars.clone(), 0);
        let one = MultiPoly::constant(2, vars.clone(), CycNum::one());
        let premise = x.sub(&one);
        let concl = x.mul(&x).sub(&one);
        assert!(lemma3_probe(std::slice::from_ref(&premise), &concl, 20, 4, DEFAULT_TOL, &mut rng).unwrap().holds());
        // Whole-domain product vanishes without premises.
        for d in 2..=4 {
            let vars = MultiPoly::default_vars(1);
            let whole = MultiPoly::from_unipoly(
                d,
                vars,
                0,
                &crate::fourier::vanishing_polynomial(crate::csp::ValueSet::full(d), d),
            );
            assert!(lemma3_probe(&[], &whole, 10, 5, DEFAULT_TOL, &mut rng).unwrap().holds());
        }
        // x - 1 does not follow from nothing.
        let out = lemma3_probe(&[], &premise, 5, 2, DEFAULT_TOL, &mut rng).unwrap();
        assert_eq!(out, Lemma3Outcome::NotApplicable { counterexample: vec![1] });
    }
}
