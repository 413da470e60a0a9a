//! Quantum Fisher information: numeric SLD, cat-state closed forms, lower
//! bounds and closed-system baselines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{cat_state_analytic, evolve_lindblad_detailed, EvolutionSpec};
use crate::error::{Error, Result};
use crate::hilbert::{commutator_norms, operator_expectation, CatSpec, DensityMatrix, SensorModel};
use crate::linalg::{eigh, Operator, C64};
use crate::schedule::NoiseSchedule;

/// Eigenvalue-sum cutoff below which SLD entries are dropped.
pub const SLD_CUTOFF: f64 = 1e-10;
const TRACELESS_TOL: f64 = 1e-8;
const PURITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    Time,
    Omega,
}

impl FromStr for Parameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" | "t" => Ok(Parameter::Time),
            "omega" | "w" => Ok(Parameter::Omega),
            _ => Err(Error::InvalidParameter(format!("unknown parameter `{s}` (expected time or omega)"))),
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parameter::Time => "time",
            Parameter::Omega => "omega",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QfiMethod {
    AnalyticCat,
    NumericSld,
    EigenbasisFormula,
    LowerBound,
    ClosedBaseline,
    QuadraticBound,
}

/// Symmetric logarithmic derivative in the input basis.
#[derive(Debug, Clone)]
pub struct SldResult {
    pub sld: Operator,
    /// Number of eigenvalues of ρ above the cutoff.
    pub truncated_rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct QfiReport {
    /// `+∞` serializes as `null`; check `divergent`.
    pub value: f64,
    pub method: QfiMethod,
    /// `None` when the derivative was supplied directly.
    pub parameter: Option<Parameter>,
    pub diagnostics: BTreeMap<String, f64>,
    pub divergent: bool,
    /// Set for the pure-state equality of the quadratic bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl QfiReport {
    fn new(value: f64, method: QfiMethod, parameter: Option<Parameter>) -> Self {
        QfiReport {
            value,
            method,
            parameter,
            diagnostics: BTreeMap::new(),
            divergent: value.is_infinite(),
            note: None,
        }
    }

    fn diag(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.insert(key.to_string(), v);
        self
    }
}

fn check_derivative(drho: &Operator, dim: usize) -> Result<Operator> {
    if drho.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: drho.dim() });
    }
    let scale = drho.max_abs().max(1.0);
    let dev = drho.hermitian_deviation();
    if dev > 1e-8 * scale {
        return Err(Error::NotHermitian { what: "state derivative", deviation: dev });
    }
    let tr = drho.trace();
    if tr.norm() > TRACELESS_TOL * scale {
        return Err(Error::NotTraceless { trace: tr.norm() });
    }
    let mut d = drho.clone();
    d.symmetrize();
    Ok(d)
}

/// SLD and `F = tr(ρ𝓛²)` from the eigenbasis of ρ.
pub fn sld_and_qfi(rho: &DensityMatrix, drho: &Operator) -> Result<(SldResult, QfiReport)> {
    let dim = rho.dim();
    let drho = check_derivative(drho, dim)?;
    let eig = eigh(rho.as_operator())?;
    let p = &eig.values;
    let truncated_rank = p.iter().filter(|&&x| x > SLD_CUTOFF).count();
    if truncated_rank == 0 {
        return Err(Error::InvalidState("all eigenvalues of ρ are below the SLD cutoff".into()));
    }
    let d = drho.conjugate_by(&eig.vectors);
    let mut value = 0.0;
    let l_eig = d.map(|j, k, z| {
        let s = p[j] + p[k];
        if s < SLD_CUTOFF {
            C64::new(0.0, 0.0)
        } else {
            z.scale(2.0 / s)
        }
    });
    for j in 0..dim {
        for k in 0..dim {
            let s = p[j] + p[k];
            if s >= SLD_CUTOFF {
                value += 2.0 * d[(j, k)].norm_sqr() / s;
            }
        }
    }
    let sld = l_eig.conjugate_by(&eig.vectors.dagger());
    let report = QfiReport::new(value, QfiMethod::NumericSld, None)
        .diag("truncated_rank", truncated_rank as f64)
        .diag("min_eigenvalue", p[0]);
    Ok((SldResult { sld, truncated_rank }, report))
}

/// `∂ρ/∂t = −i[H,ρ] − γ_t[L,[L,ρ]]`, with the rate taken from the right at a jump.
pub fn drho_dt(model: &SensorModel, schedule: &NoiseSchedule, rho: &DensityMatrix, t: f64) -> Result<Operator> {
    if rho.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: rho.dim() });
    }
    let r = rho.as_operator();
    let mut out = model.hamiltonian().commutator(r).scale(C64::new(0.0, -1.0));
    let g = schedule.rate_right(t);
    if g != 0.0 {
        let l = model.lindblad();
        out = &out - &l.commutator(&l.commutator(r)).scale_real(g);
    }
    out.symmetrize();
    Ok(out)
}

fn require_energy(model: &SensorModel) -> Result<()> {
    if !model.lindblad_is_energy() {
        return Err(Error::InvalidParameter(
            "frequency derivative requires energy decoherence (L = H)".into(),
        ));
    }
    Ok(())
}

/// `∂ρ/∂ω = −i(t/ω)[H,ρ_t] − (2∫γ/ω)[H,[H,ρ_t]]`; requires `L = H`.
pub fn drho_domega(model: &SensorModel, schedule: &NoiseSchedule, rho_t: &DensityMatrix, t: f64) -> Result<Operator> {
    require_energy(model)?;
    if rho_t.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: rho_t.dim() });
    }
    let w = model.omega();
    let h = model.hamiltonian();
    let r = rho_t.as_operator();
    let single = h.commutator(r);
    let mut out = single.scale(C64::new(0.0, -t / w));
    let integral = schedule.integral(t);
    if integral != 0.0 {
        out = &out - &h.commutator(&single).scale_real(2.0 * integral / w);
    }
    out.symmetrize();
    Ok(out)
}

/// `tr[(∂ρ)²]`, doubled for pure states where it equals the QFI.
pub fn qfi_quadratic_bound(rho: &DensityMatrix, drho: &Operator) -> Result<QfiReport> {
    let drho = check_derivative(drho, rho.dim())?;
    let q = drho.hs_norm_sq();
    let purity = rho.purity();
    let mut report;
    if purity >= 1.0 - PURITY_TOL {
        report = QfiReport::new(2.0 * q, QfiMethod::QuadraticBound, None);
        report.note = Some("pure state: 2 tr[(∂ρ)²] equals the QFI".into());
    } else {
        report = QfiReport::new(q, QfiMethod::QuadraticBound, None);
    }
    Ok(report.diag("purity", purity))
}

/// `‖[H,ρ_t]‖₂² + γ_t²‖[L,[L,ρ_t]]‖₂²`.
pub fn qfi_time_lower_bound(
    model: &SensorModel,
    schedule: &NoiseSchedule,
    rho: &DensityMatrix,
    t: f64,
) -> Result<QfiReport> {
    let (single, double) = commutator_norms(model.hamiltonian(), model.lindblad(), rho)?;
    let g = schedule.rate_right(t);
    let value = single + g * g * double;
    Ok(QfiReport::new(value, QfiMethod::LowerBound, Some(Parameter::Time))
        .diag("commutator_norm_sq", single)
        .diag("double_commutator_norm_sq", double)
        .diag("rate", g))
}

/// `(t²/ω²)‖[H,ρ_t]‖₂² + (4(∫γ)²/ω²)‖[H,[H,ρ_t]]‖₂²`; requires `L = H`.
pub fn qfi_freq_lower_bound(
    model: &SensorModel,
    schedule: &NoiseSchedule,
    rho: &DensityMatrix,
    t: f64,
) -> Result<QfiReport> {
    require_energy(model)?;
    let h = model.hamiltonian();
    let (single, double) = commutator_norms(h, h, rho)?;
    let w2 = model.omega() * model.omega();
    let integral = schedule.integral(t);
    let value = (t * t / w2) * single + (4.0 * integral * integral / w2) * double;
    Ok(QfiReport::new(value, QfiMethod::LowerBound, Some(Parameter::Omega))
        .diag("commutator_norm_sq", single)
        .diag("double_commutator_norm_sq", double)
        .diag("integral", integral))
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    Ok(())
}

/// Time QFI of a dephasing cat state,
/// `e^{−2δL²∫γ}(δE² + γ_t²δL⁴/(1 − e^{−2δL²∫γ}))`.
///
/// At `∫γ = 0` the second term is 0 when `γ_t = 0`, and infinite (flagged)
/// when a constant rate is switched on exactly at `t`.
pub fn qfi_time_cat(spec: &CatSpec, schedule: &NoiseSchedule, t: f64) -> Result<QfiReport> {
    check_time(t)?;
    let (de, dl) = (spec.delta_e, spec.delta_l);
    let integral = schedule.integral(t);
    let g = schedule.rate_right(t);
    let exponent = 2.0 * dl * dl * integral;
    let prefactor = (-exponent).exp();
    let dephasing = if dl == 0.0 || g == 0.0 {
        0.0
    } else if exponent == 0.0 {
        f64::INFINITY
    } else {
        g * g * dl.powi(4) / -(-exponent).exp_m1()
    };
    let value = prefactor * (de * de + dephasing);
    Ok(QfiReport::new(value, QfiMethod::AnalyticCat, Some(Parameter::Time))
        .diag("integral", integral)
        .diag("rate", g)
        .diag("exponent", exponent)
        .diag("prefactor", prefactor))
}

/// Frequency QFI of a cat state under energy decoherence,
/// `(δE²/ω²)e^{−2δE²∫γ}(4δE²(∫γ)²/(1 − e^{−2δE²∫γ}) + t²)`.
pub fn qfi_freq_cat(spec: &CatSpec, schedule: &NoiseSchedule, t: f64) -> Result<QfiReport> {
    check_time(t)?;
    spec.require_energy()?;
    let de = spec.delta_e;
    let w = spec.omega;
    let integral = schedule.integral(t);
    let exponent = 2.0 * de * de * integral;
    let prefactor = (-exponent).exp();
    let dephasing = if exponent == 0.0 {
        0.0
    } else {
        4.0 * de * de * integral * integral / -(-exponent).exp_m1()
    };
    let value = (de * de / (w * w)) * prefactor * (dephasing + t * t);
    Ok(QfiReport::new(value, QfiMethod::AnalyticCat, Some(Parameter::Omega))
        .diag("integral", integral)
        .diag("exponent", exponent)
        .diag("prefactor", prefactor))
}

/// The cat-state QFI summed term by term over the eigen-decomposition,
/// `Σ_k (∂p_k)²/p_k + 2 Σ_{k≠l} (p_k − p_l)²/(p_k + p_l) |⟨k|∂l⟩|²`,
/// keeping only eigenvalues above the cutoff.
pub fn qfi_cat_eigenbasis(spec: &CatSpec, schedule: &NoiseSchedule, t: f64, parameter: Parameter) -> Result<QfiReport> {
    check_time(t)?;
    let (_, d) = cat_state_analytic(spec, schedule, t)?;
    // derivatives of the phase δE·t and decay exponent δL²∫γ
    let (d_phase, d_decay) = match parameter {
        Parameter::Time => (spec.delta_e, spec.delta_l * spec.delta_l * schedule.rate_right(t)),
        Parameter::Omega => {
            spec.require_energy()?;
            let w = spec.omega;
            (spec.delta_e * t / w, 2.0 * spec.delta_e * spec.delta_e * schedule.integral(t) / w)
        }
    };
    let c = (-d.decay).exp();
    // p = (1 ± c)/2, so ∂p = ∓ c ∂x / 2
    let dp = 0.5 * c * d_decay;
    let mut populations = 0.0;
    for pk in [d.p, d.p_star] {
        if pk > SLD_CUTOFF {
            populations += dp * dp / pk;
        }
    }
    // eigenvectors (1, ±e^{−iφ})/√2 give |⟨±|∂∓⟩|² = (∂φ)²/4
    // both orderings of the pair (k, l)
    let coherences = 2.0 * 2.0 * (d.p - d.p_star).powi(2) / (d.p + d.p_star) * d_phase * d_phase / 4.0;
    let value = populations + coherences;
    Ok(QfiReport::new(value, QfiMethod::EigenbasisFormula, Some(parameter))
        .diag("population_term", populations)
        .diag("coherence_term", coherences)
        .diag("p", d.p)
        .diag("p_star", d.p_star))
}

/// Closed-system QFI of a pure state: `4 var(H)` for time, `4 var(H) t²/ω²` for ω.
pub fn qfi_closed(model: &SensorModel, rho_pure: &DensityMatrix, t: f64, parameter: Parameter) -> Result<QfiReport> {
    check_time(t)?;
    let purity = rho_pure.purity();
    if purity < 1.0 - PURITY_TOL {
        return Err(Error::InvalidState(format!(
            "closed baseline needs a pure state (purity {purity:.12}); use the numeric path"
        )));
    }
    let (_, var_h) = operator_expectation(model.hamiltonian(), rho_pure)?;
    let w = model.omega();
    let value = match parameter {
        Parameter::Time => 4.0 * var_h,
        Parameter::Omega => 4.0 * var_h * t * t / (w * w),
    };
    Ok(QfiReport::new(value, QfiMethod::ClosedBaseline, Some(parameter)).diag("var_h", var_h))
}

/// Closed baseline of a cat spec: `δE²` for time, `δE²t²/ω²` for ω.
pub fn qfi_closed_cat(spec: &CatSpec, t: f64, parameter: Parameter) -> Result<f64> {
    check_time(t)?;
    let de2 = spec.delta_e * spec.delta_e;
    Ok(match parameter {
        Parameter::Time => de2,
        Parameter::Omega => de2 * t * t / (spec.omega * spec.omega),
    })
}

/// The analytic derivative of an evolved state for either parameter.
pub fn drho(
    model: &SensorModel,
    schedule: &NoiseSchedule,
    rho_t: &DensityMatrix,
    t: f64,
    parameter: Parameter,
) -> Result<Operator> {
    match parameter {
        Parameter::Time => drho_dt(model, schedule, rho_t, t),
        Parameter::Omega => drho_domega(model, schedule, rho_t, t),
    }
}

/// RK4 evolution, analytic `∂ρ`, then the SLD eigenbasis formula.
pub fn qfi_numeric(spec: &EvolutionSpec, rho0: &DensityMatrix, parameter: Parameter) -> Result<QfiReport> {
    if parameter == Parameter::Omega {
        require_energy(&spec.model)?;
    }
    let evo = evolve_lindblad_detailed(spec, rho0)?;
    let t = spec.t_final;
    let d = drho(&spec.model, &spec.schedule, &evo.state, t, parameter)?;
    let (_, mut report) = sld_and_qfi(&evo.state, &d)?;
    report.parameter = Some(parameter);
    Ok(report
        .diag("steps", evo.steps as f64)
        .diag("dt", evo.dt)
        .diag("trace_error", evo.trace_error)
        .diag("integral", spec.schedule.integral(t)))
}

/// Numeric QFI for a cat spec on its two-level realisation.
pub fn qfi_numeric_cat(spec: &CatSpec, schedule: &NoiseSchedule, t: f64, parameter: Parameter) -> Result<QfiReport> {
    let model = SensorModel::from_cat(spec)?;
    let rho0 = model.cat_state()?;
    let evo = EvolutionSpec::new(model, schedule.clone(), t)?;
    qfi_numeric(&evo, &rho0, parameter)
}

/// Analytic cat QFI for either parameter.
pub fn qfi_cat(spec: &CatSpec, schedule: &NoiseSchedule, t: f64, parameter: Parameter) -> Result<QfiReport> {
    match parameter {
        Parameter::Time => qfi_time_cat(spec, schedule, t),
        Parameter::Omega => qfi_freq_cat(spec, schedule, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve_exact;
    use crate::hilbert::{build_sensor_model, LindbladChoice, SensorKind};
    use crate::linalg::pauli_z;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn plus() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap()
    }

    fn const01() -> NoiseSchedule {
        NoiseSchedule::constant(0.1, 0.0).unwrap()
    }

    #[test]
    fn plus_state_qfi_is_one() {
        let rho = plus();
        let h = pauli_z().scale_real(0.5);
        let d = h.commutator(rho.as_operator()).scale(C64::new(0.0, -1.0));
        let (sld, rep) = sld_and_qfi(&rho, &d).unwrap();
        assert!((rep.value - 1.0).abs() < 1e-12);
        assert_eq!(sld.truncated_rank, 1);
        assert!(sld.sld.trace_product(rho.as_operator()).norm() < 1e-12);
        let q = qfi_quadratic_bound(&rho, &d).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
        assert!(q.note.is_some());
    }

    #[test]
    fn maximally_mixed_zero_derivative() {
        let rho = DensityMatrix::maximally_mixed(2);
        let (_, rep) = sld_and_qfi(&rho, &Operator::zeros(2)).unwrap();
        assert_eq!(rep.value, 0.0);
        assert_eq!(qfi_quadratic_bound(&rho, &Operator::zeros(2)).unwrap().value, 0.0);
    }

    #[test]
    fn traceful_derivative_rejected() {
        let rho = DensityMatrix::maximally_mixed(2);
        let err = sld_and_qfi(&rho, &Operator::identity(2)).unwrap_err();
        assert_eq!(err.kind(), "not_traceless");
    }

    #[test]
    fn sld_reproduces_derivative() {
        let spec = CatSpec::new(2.0, 2.0, 1.0).unwrap();
        let m = SensorModel::from_cat(&spec).unwrap();
        let rho = evolve_exact(&m, &const01(), &m.cat_state().unwrap(), 1.0).unwrap();
        let d = drho_dt(&m, &const01(), &rho, 1.0).unwrap();
        let (sld, _) = sld_and_qfi(&rho, &d).unwrap();
        let back = sld.sld.anticommutator(rho.as_operator()).scale_real(0.5);
        assert!(back.max_abs_diff(&d) < 1e-12);
        assert!(sld.sld.trace_product(rho.as_operator()).norm() < 1e-12);
    }

    #[test]
    fn time_cat_values() {
        let spec = CatSpec::new(2.0, 2.0, 1.0).unwrap();
        let f = qfi_time_cat(&spec, &const01(), 1.0).unwrap();
        // independent evaluation of the closed form
        let x = 0.8_f64;
        let oracle = (-x).exp() * (4.0 + 0.01 * 16.0 / (1.0 - (-x).exp()));
        assert!(rel(f.value, oracle) < 1e-14);
        assert!((f.value - 1.92787).abs() < 5e-6);

        let f0 = qfi_time_cat(&spec, &NoiseSchedule::none(), 3.0).unwrap();
        assert_eq!(f0.value, 4.0);
    }

    #[test]
    fn time_cat_onset_divergence_flag() {
        let spec = CatSpec::new(2.0, 2.0, 1.0).unwrap();
        let s = NoiseSchedule::constant(0.1, 0.5).unwrap();
        let f = qfi_time_cat(&spec, &s, 0.5).unwrap();
        assert!(f.divergent && f.value.is_infinite());
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"value\":null"));
        // ramp onset has zero rate
        let r = NoiseSchedule::ramp(3.0, 0.5).unwrap();
        let f = qfi_time_cat(&spec, &r, 0.5).unwrap();
        assert_eq!(f.value, 4.0);
    }

    #[test]
    fn ramp_small_integral_limit() {
        // ∫γ → 0 on a ramp: second term → γ̇δL²
        let spec = CatSpec::new(1.0, 1.5, 1.0).unwrap();
        let gd = 2.0;
        let r = NoiseSchedule::ramp(gd, 0.0).unwrap();
        let limit = 1.0 + gd * 1.5 * 1.5;
        for s in [1e-4, 1e-6, 1e-8] {
            let f = qfi_time_cat(&spec, &r, s).unwrap();
            assert!(rel(f.value, limit) < 10.0 * s, "{s}: {}", f.value);
        }
    }

    #[test]
    fn freq_cat_values() {
        let spec = CatSpec::energy(2.0, 1.0).unwrap();
        let f = qfi_freq_cat(&spec, &const01(), 1.0).unwrap();
        // independent finite-difference SLD oracle: 2.3195342373
        assert!((f.value - 2.319_534_237).abs() < 1e-8, "{}", f.value);

        let spec = CatSpec::energy(1.0, 1.0).unwrap();
        let t = std::f64::consts::LN_2 / 2.0;
        let f = qfi_freq_cat(&spec, &NoiseSchedule::constant(1.0, 0.0).unwrap(), t).unwrap();
        assert!(rel(f.value, 0.5405097) < 1e-6);
        assert!(rel(f.value, 4.5 * t * t) < 1e-13);

        let f = qfi_freq_cat(&spec, &NoiseSchedule::none(), 1.5).unwrap();
        assert!(rel(f.value, 2.25) < 1e-15);
        assert!(qfi_freq_cat(&CatSpec::new(1.0, 1.0, 1.0).unwrap(), &const01(), 1.0).is_err());
    }

    #[test]
    fn eigenbasis_route_matches_closed_forms() {
        let s = CatSpec::energy(2.0, 1.3).unwrap();
        for sched in [const01(), NoiseSchedule::ramp(0.7, 0.2).unwrap()] {
            for t in [0.3, 1.0, 1.7] {
                for p in [Parameter::Time, Parameter::Omega] {
                    let a = qfi_cat(&s, &sched, t, p).unwrap().value;
                    let b = qfi_cat_eigenbasis(&s, &sched, t, p).unwrap().value;
                    assert!(rel(b, a) < 1e-12, "{p} {t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn lower_bounds_at_reference_point() {
        let spec = CatSpec::energy(2.0, 1.0).unwrap();
        let m = SensorModel::from_cat(&spec).unwrap();
        let rho = evolve_exact(&m, &const01(), &m.cat_state().unwrap(), 1.0).unwrap();
        let lt = qfi_time_lower_bound(&m, &const01(), &rho, 1.0).unwrap();
        let lw = qfi_freq_lower_bound(&m, &const01(), &rho, 1.0).unwrap();
        assert!((lt.value - 0.9346041).abs() < 5e-7, "{}", lt.value);
        assert!((lw.value - 1.0424430).abs() < 5e-7, "{}", lw.value);
        assert!(lt.value <= 1.92787);
        assert!(lw.value <= 2.319_534_2);

        let d = drho_dt(&m, &const01(), &rho, 1.0).unwrap();
        let (_, f) = sld_and_qfi(&rho, &d).unwrap();
        let q = qfi_quadratic_bound(&rho, &d).unwrap();
        assert!(q.note.is_none());
        assert!(q.value <= f.value);
        // for commuting H, L the quadratic bound is the time bound
        assert!(rel(q.value, lt.value) < 1e-12);
    }

    #[test]
    fn lower_bound_diagonal_state_vanishes() {
        let spec = CatSpec::energy(2.0, 1.0).unwrap();
        let m = SensorModel::from_cat(&spec).unwrap();
        let rho = DensityMatrix::new(Operator::from_real_diagonal(&[0.3, 0.7])).unwrap();
        assert_eq!(qfi_time_lower_bound(&m, &NoiseSchedule::none(), &rho, 1.0).unwrap().value, 0.0);
        assert_eq!(qfi_freq_lower_bound(&m, &NoiseSchedule::none(), &rho, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn drho_omega_requires_energy_decoherence() {
        let spec = CatSpec::new(2.0, 1.0, 1.0).unwrap();
        let m = SensorModel::from_cat(&spec).unwrap();
        let rho = m.cat_state().unwrap();
        assert!(drho_domega(&m, &const01(), &rho, 1.0).is_err());
        assert!(qfi_freq_lower_bound(&m, &const01(), &rho, 1.0).is_err());
    }

    #[test]
    fn drho_dt_matches_finite_difference() {
        let spec = CatSpec::new(2.0, 1.0, 1.0).unwrap();
        let m = SensorModel::from_cat(&spec).unwrap();
        let sched = NoiseSchedule::ramp(0.8, 0.1).unwrap();
        let rho0 = m.cat_state().unwrap();
        let at = |t: f64| {
            let e = EvolutionSpec::new(m.clone(), sched.clone(), t).unwrap();
            crate::dynamics::evolve_lindblad_numeric(&e, &rho0).unwrap().into_operator()
        };
        let (t, h) = (1.2, 1e-5);
        let fd = (&at(t + h) - &at(t - h)).scale_real(0.5 / h);
        let rho = DensityMatrix::from_trusted(at(t));
        let d = drho_dt(&m, &sched, &rho, t).unwrap();
        assert!(d.max_abs_diff(&fd) < 1e-6);
    }

    #[test]
    fn drho_domega_matches_finite_difference() {
        let sched = const01();
        let (t, w) = (0.9, 1.3);
        let at = |w: f64| {
            let m = SensorModel::from_cat(&CatSpec::energy(2.0 * w, w).unwrap()).unwrap();
            evolve_exact(&m, &sched, &m.cat_state().unwrap(), t).unwrap().into_operator()
        };
        let h = 1e-5 * w;
        let fd = (&at(w + h) - &at(w - h)).scale_real(0.5 / h);
        let m = SensorModel::from_cat(&CatSpec::energy(2.0 * w, w).unwrap()).unwrap();
        let rho = DensityMatrix::from_trusted(at(w));
        let d = drho_domega(&m, &sched, &rho, t).unwrap();
        assert!(d.max_abs_diff(&fd) < 1e-6);
        assert!(d.trace().norm() < 1e-10);
        // closed reduction and t = 0
        let closed = drho_domega(&m, &NoiseSchedule::none(), &rho, 0.0).unwrap();
        assert_eq!(closed.max_abs(), 0.0);
    }

    #[test]
    fn numeric_pipeline_reference_points() {
        let spec = CatSpec::energy(2.0, 1.0).unwrap();
        let ft = qfi_numeric_cat(&spec, &const01(), 1.0, Parameter::Time).unwrap();
        let fw = qfi_numeric_cat(&spec, &const01(), 1.0, Parameter::Omega).unwrap();
        assert!(rel(ft.value, qfi_time_cat(&spec, &const01(), 1.0).unwrap().value) < 1e-6);
        assert!(rel(fw.value, qfi_freq_cat(&spec, &const01(), 1.0).unwrap().value) < 1e-6);
    }

    #[test]
    fn closed_baselines() {
        let m = build_sensor_model(SensorKind::QubitNetwork, 3, 1.0, LindbladChoice::Energy, None).unwrap();
        let f = qfi_closed(&m, &m.cat_state().unwrap(), 0.0, Parameter::Time).unwrap();
        assert!((f.value - 9.0).abs() < 1e-12);

        let m = build_sensor_model(SensorKind::QubitNetwork, 2, 1.0, LindbladChoice::Energy, None).unwrap();
        let rho = m.cat_state().unwrap();
        assert!((qfi_closed(&m, &rho, 2.0, Parameter::Omega).unwrap().value - 16.0).abs() < 1e-12);
        assert_eq!(qfi_closed(&m, &rho, 0.0, Parameter::Omega).unwrap().value, 0.0);
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!(qfi_closed(&m, &mixed, 1.0, Parameter::Time).is_err());
    }
}
