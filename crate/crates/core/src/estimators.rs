//! Measurement-based estimators: parity for GHZ networks, branch swap for
//! NOON states, and linear error propagation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::evolve_exact;
use crate::error::{Error, Result};
use crate::fisher::{drho, qfi_cat, Parameter};
use crate::hilbert::{operator_expectation, CatSpec, DensityMatrix, SensorKind, SensorModel};
use crate::linalg::{pauli_x, Operator};
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// `⊗ σ_x` over all qubits.
    Parity,
    /// `|0,N⟩⟨N,0| + h.c.` on the branch subspace.
    NoonSwap,
    Custom,
}

#[derive(Debug, Clone)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub operator: Operator,
}

impl ObservableSpec {
    pub fn custom(operator: Operator) -> Result<Self> {
        let operator = operator.into_hermitian("observable")?;
        Ok(ObservableSpec { kind: ObservableKind::Custom, operator })
    }
}

/// The paper's optimal observable for a built-in sensor family.
pub fn optimal_observable(model: &SensorModel) -> Result<ObservableSpec> {
    match model.kind() {
        SensorKind::QubitNetwork => {
            let x = pauli_x();
            let mut op = x.clone();
            for _ in 1..model.size() {
                op = op.kron(&x);
            }
            Ok(ObservableSpec { kind: ObservableKind::Parity, operator: op })
        }
        SensorKind::PhotonicTwoMode => Ok(ObservableSpec { kind: ObservableKind::NoonSwap, operator: pauli_x() }),
        SensorKind::Custom => Err(Error::InvalidParameter(
            "custom models have no built-in estimator; supply an observable".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    pub mean: f64,
    pub variance_o: f64,
    pub d_mean: f64,
    /// `var(O)/(∂⟨O⟩)²`; infinite at stationary points of ⟨O⟩.
    pub variance_estimator: f64,
    pub parameter: Option<Parameter>,
    pub divergent: bool,
}

impl EstimateReport {
    fn propagate(mean: f64, variance_o: f64, d_mean: f64, parameter: Parameter) -> Self {
        let (variance_estimator, divergent) = if d_mean == 0.0 {
            (f64::INFINITY, true)
        } else {
            (variance_o / (d_mean * d_mean), false)
        };
        EstimateReport { mean, variance_o, d_mean, variance_estimator, parameter: Some(parameter), divergent }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    Ok(())
}

/// `(cos δEt, sin δEt, e^{−x}, x)` with `x = δL²∫γ`.
fn cat_terms(spec: &CatSpec, schedule: &NoiseSchedule, t: f64) -> (f64, f64, f64, f64) {
    let x = spec.delta_l * spec.delta_l * schedule.integral(t);
    let (s, c) = (spec.delta_e * t).sin_cos();
    (c, s, (-x).exp(), x)
}

/// `⟨O⟩ = cos(δE t) e^{−δL²∫γ}` and `var(O) = 1 − ⟨O⟩²`; `d_mean` is left at 0.
pub fn observable_expectation(spec: &CatSpec, schedule: &NoiseSchedule, t: f64) -> Result<EstimateReport> {
    check_time(t)?;
    let (c, s, decay, x) = cat_terms(spec, schedule, t);
    let mean = c * decay;
    // 1 − c²e^{−2x} = s² + c²(1 − e^{−2x}), without cancellation near |⟨O⟩| = 1
    let variance_o = s * s - c * c * (-2.0 * x).exp_m1();
    Ok(EstimateReport {
        mean,
        variance_o,
        d_mean: 0.0,
        variance_estimator: f64::NAN,
        parameter: None,
        divergent: false,
    })
}

/// Error-propagation variance `var(O)/(∂⟨O⟩/∂λ)²` with analytic derivatives.
pub fn estimator_variance(
    spec: &CatSpec,
    schedule: &NoiseSchedule,
    t: f64,
    parameter: Parameter,
) -> Result<EstimateReport> {
    let base = observable_expectation(spec, schedule, t)?;
    let (c, s, decay, _) = cat_terms(spec, schedule, t);
    let d_mean = match parameter {
        Parameter::Time => {
            let g = schedule.rate_right(t);
            -spec.delta_e * s * decay - g * spec.delta_l * spec.delta_l * c * decay
        }
        Parameter::Omega => {
            spec.require_energy()?;
            let w = spec.omega;
            let de = spec.delta_e;
            -(de * t / w) * s * decay - 2.0 * (de * de / w) * schedule.integral(t) * c * decay
        }
    };
    Ok(EstimateReport::propagate(base.mean, base.variance_o, d_mean, parameter))
}

/// `var(λ̂) · F_open(λ)`; at least 1 by the Cramér–Rao bound. Infinite when
/// the estimator diverges.
pub fn saturation_ratio(spec: &CatSpec, schedule: &NoiseSchedule, t: f64, parameter: Parameter) -> Result<f64> {
    let est = estimator_variance(spec, schedule, t, parameter)?;
    if est.divergent {
        return Ok(f64::INFINITY);
    }
    let f = qfi_cat(spec, schedule, t, parameter)?;
    Ok(est.variance_estimator * f.value)
}

/// Estimator statistics from the evolved state of a full model.
pub fn estimate_numeric(
    model: &SensorModel,
    observable: &ObservableSpec,
    schedule: &NoiseSchedule,
    rho0: &DensityMatrix,
    t: f64,
    parameter: Parameter,
) -> Result<EstimateReport> {
    check_time(t)?;
    let rho = evolve_exact(model, schedule, rho0, t)?;
    let (mean, variance_o) = operator_expectation(&observable.operator, &rho)?;
    let d = drho(model, schedule, &rho, t, parameter)?;
    let d_mean = observable.operator.trace_product(&d).re;
    Ok(EstimateReport::propagate(mean, variance_o, d_mean, parameter))
}

/// Ramp that switches on `Δt = √(ln2/(γ̇δL²))` before `t`.
pub fn ramp_window_schedule(spec: &CatSpec, gamma_dot: f64, t: f64) -> Result<NoiseSchedule> {
    if !(gamma_dot > 0.0) || spec.delta_l == 0.0 {
        return Err(Error::InvalidParameter("ramp window needs γ̇ > 0 and δL > 0".into()));
    }
    let window = (std::f64::consts::LN_2 / (gamma_dot * spec.delta_l * spec.delta_l)).sqrt();
    if window > t {
        return Err(Error::InvalidParameter(format!("window {window} is longer than t = {t}")));
    }
    NoiseSchedule::ramp(gamma_dot, t - window)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub mean: f64,
    pub var_o: f64,
    pub d_mean: f64,
    pub var_estimator: f64,
    pub one_over_qfi: f64,
}

/// Closed-form estimator sweep over `times`.
pub fn estimator_trajectory(
    spec: &CatSpec,
    schedule: &NoiseSchedule,
    times: &[f64],
    parameter: Parameter,
) -> Result<Vec<TrajectoryPoint>> {
    times
        .iter()
        .map(|&t| {
            let e = estimator_variance(spec, schedule, t, parameter)?;
            let f = qfi_cat(spec, schedule, t, parameter)?;
            Ok(TrajectoryPoint {
                t,
                mean: e.mean,
                var_o: e.variance_o,
                d_mean: e.d_mean,
                var_estimator: e.variance_estimator,
                one_over_qfi: 1.0 / f.value,
            })
        })
        .collect()
}

/// Estimator sweep on a full model with its evolved states.
pub fn estimator_trajectory_numeric(
    model: &SensorModel,
    observable: &ObservableSpec,
    schedule: &NoiseSchedule,
    times: &[f64],
    parameter: Parameter,
) -> Result<Vec<TrajectoryPoint>> {
    let rho0 = model.cat_state()?;
    let spec = model.cat_spec();
    times
        .iter()
        .map(|&t| {
            let e = estimate_numeric(model, observable, schedule, &rho0, t, parameter)?;
            let f = qfi_cat(&spec, schedule, t, parameter)?;
            Ok(TrajectoryPoint {
                t,
                mean: e.mean,
                var_o: e.variance_o,
                d_mean: e.d_mean,
                var_estimator: e.variance_estimator,
                one_over_qfi: 1.0 / f.value,
            })
        })
        .collect()
}

pub fn write_estimator_csv<W: Write>(points: &[TrajectoryPoint], mut out: W) -> Result<()> {
    writeln!(out, "t,mean,var_O,d_mean,var_estimator,one_over_qfi")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.t, p.mean, p.var_o, p.d_mean, p.var_estimator, p.one_over_qfi
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_lindblad_numeric, EvolutionSpec};
    use crate::hilbert::{build_sensor_model, LindbladChoice};
    use std::f64::consts::{LN_2, PI};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn built_in_observables() {
        let m = build_sensor_model(SensorKind::QubitNetwork, 2, 1.0, LindbladChoice::Energy, None).unwrap();
        let o = optimal_observable(&m).unwrap();
        assert_eq!(o.kind, ObservableKind::Parity);
        let mut ev = crate::linalg::eigh(&o.operator).unwrap().values;
        ev.iter_mut().for_each(|v| *v = v.round());
        assert_eq!(ev, vec![-1.0, -1.0, 1.0, 1.0]);
        let (mean, _) = operator_expectation(&o.operator, &m.cat_state().unwrap()).unwrap();
        assert!((mean - 1.0).abs() < 1e-14);

        let m = build_sensor_model(SensorKind::PhotonicTwoMode, 2, 1.0, LindbladChoice::Energy, None).unwrap();
        let o = optimal_observable(&m).unwrap();
        assert_eq!(o.kind, ObservableKind::NoonSwap);
        assert_eq!(o.operator, pauli_x());
        let (mean, _) = operator_expectation(&o.operator, &m.cat_state().unwrap()).unwrap();
        assert!((mean - 1.0).abs() < 1e-14);
    }

    #[test]
    fn expectation_examples() {
        let spec = CatSpec::energy(2.0, 1.0).unwrap();
        let any = NoiseSchedule::constant(0.7, 0.0).unwrap();
        let e = observable_expectation(&spec, &any, PI / 4.0).unwrap();
        assert!(e.mean.abs() < 1e-15 && (e.variance_o - 1.0).abs() < 1e-15);

        let e = observable_expectation(&spec, &NoiseSchedule::none(), 0.0).unwrap();
        assert_eq!((e.mean, e.variance_o), (1.0, 0.0));

        let sched = NoiseSchedule::constant(0.25, 0.0).unwrap();
        let e = observable_expectation(&spec, &sched, PI / 2.0).unwrap();
        // oracle: RK4 evolution followed by tr(Oρ)
        let m = SensorModel::from_cat(&spec).unwrap();
        let evo = EvolutionSpec::new(m.clone(), sched, PI / 2.0).unwrap();
        let rho = evolve_lindblad_numeric(&evo, &m.cat_state().unwrap()).unwrap();
        let (oracle, _) = operator_expectation(&pauli_x(), &rho).unwrap();
        assert!((e.mean - oracle).abs() < 1e-8);
        assert!((e.mean + 0.2078796).abs() < 5e-8);
    }

    #[test]
    fn window_variance_examples() {
        // δE = δL = 2, γ̇ = 4, δE t = π
        let spec = CatSpec::energy(2.0, 1.0).unwrap();
        let t = PI / 2.0;
        let s = ramp_window_schedule(&spec, 4.0, t).unwrap();
        let e = estimator_variance(&spec, &s, t, Parameter::Time).unwrap();
        let closed = 1.0 / (LN_2 * 4.0 * 4.0);
        assert!(rel(e.variance_estimator, closed) < 1e-12);
        assert!(rel(e.variance_estimator, 0.0901685) < 1e-6);

        let spec = CatSpec::energy(1.0, 1.0).unwrap();
        let s = ramp_window_schedule(&spec, 1.0 / LN_2, PI).unwrap();
        let e = estimator_variance(&spec, &s, PI, Parameter::Time).unwrap();
        assert!((e.variance_estimator - 1.0).abs() < 1e-12);
    }

    #[test]
    fn omega_variance_at_phase_pi() {
        let de = 2.0;
        let spec = CatSpec::energy(de, 1.0).unwrap();
        let gamma = LN_2 / (2.0 * PI * de);
        let t = PI / de;
        let s = NoiseSchedule::constant(gamma, 0.0).unwrap();
        let e = estimator_variance(&spec, &s, t, Parameter::Omega).unwrap();
        let var_cl = 1.0 / (de * de * t * t);

        // oracle: central finite difference of ⟨O⟩ in ω at fixed δε
        let mean_at = |w: f64| {
            let sp = CatSpec::energy(de * w, w).unwrap();
            observable_expectation(&sp, &s, t).unwrap().mean
        };
        let h = 1e-5;
        let fd = (mean_at(1.0 + h) - mean_at(1.0 - h)) / (2.0 * h);
        assert!((fd - e.d_mean).abs() < 1e-8);
        let ratio = e.variance_estimator / var_cl;
        assert!(rel(ratio, 1.0 / (4.0 * gamma * gamma * de * de)) < 1e-9);
        assert!((ratio - 20.54).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn stationary_point_is_flagged() {
        let spec = CatSpec::energy(2.0, 1.0).unwrap();
        let e = estimator_variance(&spec, &NoiseSchedule::none(), 0.0, Parameter::Time).unwrap();
        assert!(e.divergent && e.variance_estimator.is_infinite());
        let r = saturation_ratio(&spec, &NoiseSchedule::none(), 0.0, Parameter::Time).unwrap();
        assert!(r.is_infinite());
    }

    #[test]
    fn closed_saturation() {
        let spec = CatSpec::energy(2.0, 1.0).unwrap();
        for k in 0..4 {
            let t = (PI / 2.0 + k as f64 * PI) / 2.0;
            let r = saturation_ratio(&spec, &NoiseSchedule::none(), t, Parameter::Time).unwrap();
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn window_saturation_ratio() {
        // γ̇δL²/δE² = 10: 1 + 1/(20 ln2)
        let spec = CatSpec::energy(1.0, 1.0).unwrap();
        let t = 3.0 * PI;
        let s = ramp_window_schedule(&spec, 10.0, t).unwrap();
        let r = saturation_ratio(&spec, &s, t, Parameter::Time).unwrap();
        assert!(rel(r, 1.0 + 1.0 / (20.0 * LN_2)) < 1e-9, "{r}");
    }

    #[test]
    fn parity_and_noon_swap_agree() {
        let ghz = build_sensor_model(SensorKind::QubitNetwork, 2, 1.0, LindbladChoice::Energy, None).unwrap();
        let noon = build_sensor_model(SensorKind::PhotonicTwoMode, 2, 1.0, LindbladChoice::Energy, None).unwrap();
        let s = NoiseSchedule::constant(0.3, 0.1).unwrap();
        let times: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64).collect();
        for p in [Parameter::Time, Parameter::Omega] {
            let a = estimator_trajectory_numeric(&ghz, &optimal_observable(&ghz).unwrap(), &s, &times, p).unwrap();
            let b = estimator_trajectory_numeric(&noon, &optimal_observable(&noon).unwrap(), &s, &times, p).unwrap();
            let c = estimator_trajectory(&ghz.cat_spec(), &s, &times, p).unwrap();
            for ((x, y), z) in a.iter().zip(&b).zip(&c) {
                assert!((x.mean - y.mean).abs() < 1e-12);
                assert!((x.var_o - y.var_o).abs() < 1e-12);
                assert!((x.d_mean - y.d_mean).abs() < 1e-12);
                assert!((x.mean - z.mean).abs() < 1e-12);
                assert!((x.d_mean - z.d_mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_header() {
        let spec = CatSpec::energy(1.0, 1.0).unwrap();
        let pts = estimator_trajectory(&spec, &NoiseSchedule::none(), &[0.5, 1.0], Parameter::Time).unwrap();
        let mut buf = Vec::new();
        write_estimator_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,mean,var_O,d_mean,var_estimator,one_over_qfi");
        assert_eq!(text.lines().count(), 3);
    }
}
