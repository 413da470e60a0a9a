//! States, sensor models and the operator primitives the other modules build on.
//!
//! Conventions: ħ = 1, `H = ω h`, and every model carries a Hermitian Lindblad
//! operator `L` with `[H, L] = 0`. Cat states live on two joint eigenvectors
//! of `H` and `L` ("branches"), ordered so that `E₁ − E₀ = δE ≥ 0`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, Operator, C64, DIM_CAP, HERMITIAN_TOL};

pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-9;
const COMMUTE_TOL: f64 = 1e-10;
const SPECTRUM_TOL: f64 = 1e-10;
const ORTHONORMAL_TOL: f64 = 1e-12;

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerances(op, TRACE_TOL, POSITIVITY_TOL)
    }

    /// Validation with caller-chosen trace and positivity slack; the
    /// integrator uses a looser positivity floor than user input does.
    pub fn with_tolerances(op: Operator, trace_tol: f64, positivity_tol: f64) -> Result<Self> {
        let op = op
            .into_hermitian("density matrix")
            .map_err(|e| Error::InvalidState(e.to_string()))?;
        let tr = op.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::InvalidState(format!("trace {:.12} differs from 1", tr.re)));
        }
        let min = eigh(&op)?.values[0];
        if min < -positivity_tol {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:.3e} is negative")));
        }
        Ok(DensityMatrix(op))
    }

    /// `|ψ⟩⟨ψ|` for a normalised `ψ`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidState(format!("state vector has norm² {norm}")));
        }
        Self::new(Operator::outer(psi, psi))
    }

    pub(crate) fn from_trusted(mut op: Operator) -> Self {
        op.symmetrize();
        DensityMatrix(op)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(Operator::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn purity(&self) -> f64 {
        self.0.trace_product(&self.0).re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eigh(&self.0)?.values[0])
    }

    /// Restriction `⟨eₐ|ρ|e_b⟩` onto the span of the given vectors.
    pub fn project(&self, basis: &[Vec<C64>]) -> Operator {
        let k = basis.len();
        let mut out = Operator::zeros(k);
        for (a, ea) in basis.iter().enumerate() {
            let rho_eb: Vec<Vec<C64>> = basis.iter().map(|eb| self.0.apply(eb)).collect();
            for (b, v) in rho_eb.iter().enumerate() {
                out[(a, b)] = ea.iter().zip(v).map(|(x, y)| x.conj() * y).sum();
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    QubitNetwork,
    PhotonicTwoMode,
    Custom,
}

#[derive(Debug, Clone)]
pub enum LindbladChoice {
    /// `L = H`.
    Energy,
    Custom(Operator),
}

/// `H = ω h` with a commuting Hermitian Lindblad operator.
#[derive(Debug, Clone)]
pub struct SensorModel {
    kind: SensorKind,
    size: usize,
    omega: f64,
    h: Operator,
    hamiltonian: Operator,
    lindblad: Operator,
    lindblad_is_energy: bool,
    spectrum: Vec<f64>,
    branches: [Vec<C64>; 2],
}

fn commutator_check(h: &Operator, l: &Operator) -> Result<()> {
    let norm = h.commutator(l).hs_norm();
    let allowed = COMMUTE_TOL * h.hs_norm() * l.hs_norm();
    if norm > allowed {
        return Err(Error::NotCommuting { norm, allowed });
    }
    Ok(())
}

fn basis_vector(dim: usize, i: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[i] = C64::new(1.0, 0.0);
    v
}

/// Eigenvalue of `op` on `v`, or `None` if `v` is not an eigenvector.
fn eigenvalue_on(op: &Operator, v: &[C64]) -> Option<f64> {
    let ov = op.apply(v);
    let lambda: C64 = v.iter().zip(&ov).map(|(a, b)| a.conj() * b).sum();
    let resid: f64 = ov
        .iter()
        .zip(v)
        .map(|(a, b)| (a - lambda * b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (resid <= SPECTRUM_TOL * op.max_abs().max(1.0)).then_some(lambda.re)
}

impl SensorModel {
    /// Generic constructor; validates every model invariant.
    pub fn new(
        kind: SensorKind,
        size: usize,
        omega: f64,
        h: Operator,
        lindblad: LindbladChoice,
        branches: [Vec<C64>; 2],
    ) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be > 0, got {omega}")));
        }
        if size == 0 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        let h = h.into_hermitian("h")?;
        let hamiltonian = h.scale_real(omega);
        let (lindblad, lindblad_is_energy) = match lindblad {
            LindbladChoice::Energy => (hamiltonian.clone(), true),
            LindbladChoice::Custom(l) => {
                if l.dim() != h.dim() {
                    return Err(Error::DimensionMismatch { expected: h.dim(), found: l.dim() });
                }
                (l.into_hermitian("Lindblad operator")?, false)
            }
        };
        commutator_check(&hamiltonian, &lindblad)?;

        let spectrum = if h.is_diagonal(0.0) {
            let mut s: Vec<f64> = h.diagonal().iter().map(|z| z.re).collect();
            s.sort_by(f64::total_cmp);
            s
        } else {
            eigh(&h)?.values
        };

        let mut model = SensorModel {
            kind,
            size,
            omega,
            h,
            hamiltonian,
            lindblad,
            lindblad_is_energy,
            spectrum,
            branches: [vec![], vec![]],
        };
        model.set_branches(branches)?;
        Ok(model)
    }

    fn set_branches(&mut self, [a, b]: [Vec<C64>; 2]) -> Result<()> {
        let dim = self.dim();
        if a.len() != dim || b.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: a.len().min(b.len()) });
        }
        check_orthonormal(&a, &b)?;
        let mut ea = None;
        let mut eb = None;
        for (v, slot) in [(&a, &mut ea), (&b, &mut eb)] {
            let e = eigenvalue_on(&self.hamiltonian, v)
                .ok_or_else(|| Error::Model("branch vector is not an eigenvector of H".into()))?;
            eigenvalue_on(&self.lindblad, v)
                .ok_or_else(|| Error::Model("branch vector is not an eigenvector of L".into()))?;
            *slot = Some(e);
        }
        self.branches = if eb.unwrap() >= ea.unwrap() { [a, b] } else { [b, a] };
        Ok(())
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }
    pub fn size(&self) -> usize {
        self.size
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn dim(&self) -> usize {
        self.h.dim()
    }
    /// Dimensionless generator `h`.
    pub fn generator(&self) -> &Operator {
        &self.h
    }
    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }
    pub fn lindblad(&self) -> &Operator {
        &self.lindblad
    }
    pub fn lindblad_is_energy(&self) -> bool {
        self.lindblad_is_energy
    }
    /// Eigenvalues `ε_j` of `h`, ascending.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }
    pub fn branches(&self) -> &[Vec<C64>; 2] {
        &self.branches
    }

    pub fn commutator_norm(&self) -> f64 {
        self.hamiltonian.commutator(&self.lindblad).hs_norm()
    }

    /// Largest energy gap `max |E_j − E_k|`.
    pub fn max_energy_gap(&self) -> f64 {
        let s = &self.spectrum;
        self.omega * (s[s.len() - 1] - s[0])
    }

    /// Largest gap of the Lindblad spectrum.
    pub fn max_lindblad_gap(&self) -> Result<f64> {
        let vals = if self.lindblad.is_diagonal(0.0) {
            self.lindblad.diagonal().iter().map(|z| z.re).collect()
        } else {
            eigh(&self.lindblad)?.values
        };
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(max - min)
    }

    pub fn cat_spec(&self) -> CatSpec {
        let e0 = eigenvalue_on(&self.hamiltonian, &self.branches[0]).unwrap_or(0.0);
        let e1 = eigenvalue_on(&self.hamiltonian, &self.branches[1]).unwrap_or(0.0);
        let delta_e = e1 - e0;
        if self.lindblad_is_energy {
            CatSpec::energy(delta_e, self.omega).expect("validated model")
        } else {
            let l0 = eigenvalue_on(&self.lindblad, &self.branches[0]).unwrap_or(0.0);
            let l1 = eigenvalue_on(&self.lindblad, &self.branches[1]).unwrap_or(0.0);
            CatSpec::new(delta_e, (l1 - l0).abs(), self.omega).expect("validated model")
        }
    }

    /// `(|E₀⟩ + |E₁⟩)/√2` on the branch pair.
    pub fn cat_state(&self) -> Result<DensityMatrix> {
        cat_initial_state(&self.branches[0], &self.branches[1])
    }

    /// Two-level model realising a cat spec on its branch subspace.
    pub fn from_cat(spec: &CatSpec) -> Result<Self> {
        let half = spec.delta_eps / 2.0;
        let h = Operator::from_real_diagonal(&[-half, half]);
        let lindblad = if spec.energy_decoherence {
            LindbladChoice::Energy
        } else {
            let l = spec.delta_l / 2.0;
            LindbladChoice::Custom(Operator::from_real_diagonal(&[-l, l]))
        };
        Self::new(SensorKind::Custom, 1, spec.omega, h, lindblad, [basis_vector(2, 0), basis_vector(2, 1)])
    }
}

fn check_orthonormal(a: &[C64], b: &[C64]) -> Result<()> {
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    let overlap: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    if (na - 1.0).abs() > ORTHONORMAL_TOL
        || (nb - 1.0).abs() > ORTHONORMAL_TOL
        || overlap.norm() > ORTHONORMAL_TOL
    {
        return Err(Error::InvalidState(format!(
            "branch vectors not orthonormal (norms² {na}, {nb}; overlap {:.3e})",
            overlap.norm()
        )));
    }
    Ok(())
}

/// Builds one of the built-in sensor families.
///
/// Qubit networks use `H = ω Σ σ_l^z / 2` on `2^N` dimensions, with qubit `l`
/// on bit `N−1−l` of the basis index and `|0⟩` the `σ^z = +1` state. Photonic
/// sensors are represented on the `{|N,0⟩, |0,N⟩}` branch subspace with
/// `h = diag(−δε/2, δε/2)`; `branch_gap` is `δε` and defaults to `N`.
pub fn build_sensor_model(
    kind: SensorKind,
    n: usize,
    omega: f64,
    lindblad: LindbladChoice,
    branch_gap: Option<f64>,
) -> Result<SensorModel> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    match kind {
        SensorKind::QubitNetwork => {
            if n > 12 || (1usize << n) > DIM_CAP {
                return Err(Error::DimensionCap { dim: 1usize.checked_shl(n as u32).unwrap_or(usize::MAX), cap: DIM_CAP });
            }
            let dim = 1usize << n;
            let diag: Vec<f64> = (0..dim)
                .map(|b| (n as f64 - 2.0 * (b as u32).count_ones() as f64) / 2.0)
                .collect();
            let h = Operator::from_real_diagonal(&diag);
            // |1…1⟩ is the low-energy branch.
            let branches = [basis_vector(dim, dim - 1), basis_vector(dim, 0)];
            SensorModel::new(kind, n, omega, h, lindblad, branches)
        }
        SensorKind::PhotonicTwoMode => {
            let gap = branch_gap.unwrap_or(n as f64);
            if !(gap >= 0.0 && gap.is_finite()) {
                return Err(Error::InvalidParameter(format!("branch gap must be >= 0, got {gap}")));
            }
            let h = Operator::from_real_diagonal(&[-gap / 2.0, gap / 2.0]);
            SensorModel::new(kind, n, omega, h, lindblad, [basis_vector(2, 0), basis_vector(2, 1)])
        }
        SensorKind::Custom => Err(Error::InvalidParameter(
            "custom models need an explicit generator; use SensorModel::new or a model file".into(),
        )),
    }
}

/// Pure cat state `(|e₀⟩ + |e₁⟩)/√2`.
pub fn cat_initial_state(e0: &[C64], e1: &[C64]) -> Result<DensityMatrix> {
    if e0.len() != e1.len() {
        return Err(Error::DimensionMismatch { expected: e0.len(), found: e1.len() });
    }
    check_orthonormal(e0, e1)?;
    // Sum of the four branch outer products; exact for basis-vector branches.
    let sum = [(e0, e0), (e0, e1), (e1, e0), (e1, e1)]
        .iter()
        .map(|(a, b)| Operator::outer(a, b))
        .reduce(|acc, o| &acc + &o)
        .expect("four terms");
    DensityMatrix::new(sum.scale_real(0.5))
}

/// Mean and variance of a Hermitian observable.
pub fn operator_expectation(o: &Operator, rho: &DensityMatrix) -> Result<(f64, f64)> {
    if o.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: o.dim() });
    }
    if !o.is_flagged_hermitian() {
        let dev = o.hermitian_deviation();
        if dev > HERMITIAN_TOL * o.max_abs().max(1.0) {
            return Err(Error::NotHermitian { what: "observable", deviation: dev });
        }
    }
    let r = rho.as_operator();
    let mean = o.trace_product(r);
    if mean.im.abs() > 1e-10 {
        return Err(Error::InvalidState(format!("⟨O⟩ has imaginary part {:.3e}", mean.im)));
    }
    let o_rho = o.matmul(r);
    let second = o.trace_product(&o_rho).re;
    let mut var = second - mean.re * mean.re;
    if var < 0.0 {
        if var >= -1e-12 {
            var = 0.0;
        } else {
            return Err(Error::InvalidState(format!("negative variance {var:.3e}")));
        }
    }
    Ok((mean.re, var))
}

/// `(‖[A,ρ]‖₂², ‖[B,[B,ρ]]‖₂²)`.
pub fn commutator_norms(a: &Operator, b: &Operator, rho: &DensityMatrix) -> Result<(f64, f64)> {
    let r = rho.as_operator();
    for op in [a, b] {
        if op.dim() != r.dim() {
            return Err(Error::DimensionMismatch { expected: r.dim(), found: op.dim() });
        }
    }
    let single = a.commutator(r).hs_norm_sq();
    let double = b.commutator(&b.commutator(r)).hs_norm_sq();
    Ok((single, double))
}

/// Gap data of a two-branch cat state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatSpec {
    /// `δE = E₁ − E₀`.
    pub delta_e: f64,
    /// `δL`, the Lindblad eigenvalue gap on the branches.
    pub delta_l: f64,
    pub omega: f64,
    /// `δε = δE / ω`.
    pub delta_eps: f64,
    /// `L = H` was declared; then `δL = δE`.
    pub energy_decoherence: bool,
}

impl CatSpec {
    pub fn new(delta_e: f64, delta_l: f64, omega: f64) -> Result<Self> {
        if !(delta_e >= 0.0 && delta_e.is_finite()) || !(delta_l >= 0.0 && delta_l.is_finite()) {
            return Err(Error::InvalidParameter(format!("gaps must be >= 0 (δE={delta_e}, δL={delta_l})")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be > 0, got {omega}")));
        }
        Ok(CatSpec { delta_e, delta_l, omega, delta_eps: delta_e / omega, energy_decoherence: false })
    }

    /// Energy decoherence, `L = H`.
    pub fn energy(delta_e: f64, omega: f64) -> Result<Self> {
        let mut s = Self::new(delta_e, delta_e, omega)?;
        s.energy_decoherence = true;
        Ok(s)
    }

    /// The 2×2 branch-basis cat state, all entries 1/2.
    pub fn initial_state(&self) -> DensityMatrix {
        DensityMatrix::from_trusted(Operator::from_vec(2, vec![C64::new(0.5, 0.0); 4]).unwrap())
    }

    pub(crate) fn require_energy(&self) -> Result<()> {
        if !self.energy_decoherence {
            return Err(Error::InvalidParameter(
                "frequency formulas require energy decoherence (L = H)".into(),
            ));
        }
        Ok(())
    }
}

// ---- model file ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixField {
    Rows(Vec<Vec<[f64; 2]>>),
    Flat(Vec<[f64; 2]>),
}

impl MatrixField {
    pub fn to_operator(&self) -> Result<Operator> {
        match self {
            MatrixField::Rows(rows) => {
                let rows: Vec<Vec<C64>> = rows
                    .iter()
                    .map(|r| r.iter().map(|[re, im]| C64::new(*re, *im)).collect())
                    .collect();
                Operator::from_rows(&rows)
            }
            MatrixField::Flat(entries) => {
                let dim = (entries.len() as f64).sqrt().round() as usize;
                if dim * dim != entries.len() {
                    return Err(Error::Model(format!("{} entries is not a square matrix", entries.len())));
                }
                Operator::from_vec(dim, entries.iter().map(|[re, im]| C64::new(*re, *im)).collect())
            }
        }
    }

    pub fn from_operator(op: &Operator) -> Self {
        let n = op.dim();
        MatrixField::Rows((0..n).map(|r| (0..n).map(|c| [op[(r, c)].re, op[(r, c)].im]).collect()).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LindbladField {
    Named(String),
    Matrix { matrix: MatrixField },
}

/// On-disk model description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: SensorKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub omega: f64,
    pub lindblad: LindbladField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_gap: Option<f64>,
    /// Generator for `custom` models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<MatrixField>,
    /// Basis indices of the two cat branches for `custom` models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<[usize; 2]>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Model(format!("malformed JSON model: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build(&self) -> Result<SensorModel> {
        let lindblad = match &self.lindblad {
            LindbladField::Named(s) if s == "energy" => LindbladChoice::Energy,
            LindbladField::Named(s) => {
                return Err(Error::Model(format!("unknown lindblad choice {s:?}; expected \"energy\" or a matrix")))
            }
            LindbladField::Matrix { matrix } => LindbladChoice::Custom(matrix.to_operator()?),
        };
        match self.kind {
            SensorKind::Custom => {
                let h = self
                    .h
                    .as_ref()
                    .ok_or_else(|| Error::Model("custom model requires \"h\"".into()))?
                    .to_operator()?;
                let dim = h.dim();
                let [i, j] = match self.branches {
                    Some(b) => b,
                    None if dim == 2 => [0, 1],
                    None => return Err(Error::Model("custom model requires \"branches\"".into())),
                };
                if i >= dim || j >= dim || i == j {
                    return Err(Error::Model(format!("invalid branch indices [{i}, {j}] for dim {dim}")));
                }
                SensorModel::new(
                    SensorKind::Custom,
                    self.n,
                    self.omega,
                    h,
                    lindblad,
                    [basis_vector(dim, i), basis_vector(dim, j)],
                )
            }
            kind => build_sensor_model(kind, self.n, self.omega, lindblad, self.branch_gap),
        }
    }
}

pub fn load_model(path: &Path) -> Result<SensorModel> {
    ModelFile::load(path)?.build()
}
