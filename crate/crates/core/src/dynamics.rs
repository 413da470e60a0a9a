//! Closed and dephasing time evolution.
//!
//! The numeric path integrates `dρ/dt = −i[H,ρ] − γ_t [L,[L,ρ]]` with classical
//! fixed-step RK4, re-symmetrizing after every step. Steps never straddle a
//! schedule breakpoint, so a rate switched on at `t0` keeps fourth order.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{CatSpec, DensityMatrix, SensorModel};
use crate::linalg::{eigh, Operator, C64};
use crate::schedule::NoiseSchedule;

/// Trace drift allowed over a numeric run.
pub const TRACE_DRIFT_TOL: f64 = 1e-9;
/// Minimum eigenvalue allowed after a numeric run.
pub const POSITIVITY_FLOOR: f64 = -1e-7;
/// Entrywise change allowed when halving the step.
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EvolutionSpec {
    pub model: SensorModel,
    pub schedule: NoiseSchedule,
    /// `None` selects [`EvolutionSpec::default_dt`].
    pub dt: Option<f64>,
    pub t_final: f64,
}

impl EvolutionSpec {
    pub fn new(model: SensorModel, schedule: NoiseSchedule, t_final: f64) -> Result<Self> {
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_final must be >= 0, got {t_final}")));
        }
        Ok(EvolutionSpec { model, schedule, dt: None, t_final })
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        self.dt = Some(dt);
        Ok(self)
    }

    /// `min(0.01/ΔE_max, 0.1/(γ_max ΔL_max²), t_final/10⁴)`, skipping
    /// terms whose denominator vanishes.
    pub fn default_dt(&self) -> Result<f64> {
        let mut dt = self.t_final / 1e4;
        let de = self.model.max_energy_gap();
        if de > 0.0 {
            dt = dt.min(0.01 / de);
        }
        let g = self.schedule.max_rate(self.t_final);
        let dl = self.model.max_lindblad_gap()?;
        if g > 0.0 && dl > 0.0 {
            dt = dt.min(0.1 / (g * dl * dl));
        }
        Ok(dt)
    }

    pub fn step(&self) -> Result<f64> {
        match self.dt {
            Some(dt) => Ok(dt),
            None => self.default_dt(),
        }
    }
}

/// Right-hand side of the dephasing master equation at rate `gamma`.
pub fn lindblad_rhs(h: &Operator, l: &Operator, gamma: f64, rho: &Operator) -> Operator {
    let coherent = h.commutator(rho).scale(C64::new(0.0, -1.0));
    if gamma == 0.0 {
        return coherent;
    }
    let double = l.commutator(&l.commutator(rho));
    &coherent - &double.scale_real(gamma)
}

/// Outcome of a numeric run with its diagnostics.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: DensityMatrix,
    pub steps: usize,
    pub dt: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

/// One sampled point of a numeric trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    /// Branch-basis entries `ρ₀₀, ρ₁₁, ρ₀₁`.
    pub rho00: f64,
    pub rho11: f64,
    pub rho01: C64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

fn segments(schedule: &NoiseSchedule, t_final: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![0.0];
    cuts.extend(schedule.breakpoints(t_final));
    cuts.push(t_final);
    cuts.dedup();
    cuts.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| b > a).collect()
}

fn integrate(
    spec: &EvolutionSpec,
    rho0: &DensityMatrix,
    dt: f64,
    mut observe: impl FnMut(f64, &Operator),
) -> Result<(Operator, usize)> {
    let model = &spec.model;
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: rho0.dim() });
    }
    let h = model.hamiltonian();
    let l = model.lindblad();
    let sched = &spec.schedule;
    let mut rho = rho0.as_operator().clone();
    let mut steps = 0;
    observe(0.0, &rho);
    for (a, b) in segments(sched, spec.t_final) {
        let n = ((b - a) / dt - 1e-9).ceil().max(1.0) as usize;
        let hstep = (b - a) / n as f64;
        // Stages at the segment start take the right limit of the rate.
        let rate_at = |t: f64| if t <= a { sched.rate_right(t) } else { sched.rate(t) };
        for k in 0..n {
            let t = a + k as f64 * hstep;
            let tm = t + 0.5 * hstep;
            let te = if k + 1 == n { b } else { t + hstep };
            let (g0, gm, ge) = (rate_at(t), rate_at(tm), rate_at(te));

            let k1 = lindblad_rhs(h, l, g0, &rho);
            let k2 = lindblad_rhs(h, l, gm, &(&rho + &k1.scale_real(0.5 * hstep)));
            let k3 = lindblad_rhs(h, l, gm, &(&rho + &k2.scale_real(0.5 * hstep)));
            let k4 = lindblad_rhs(h, l, ge, &(&rho + &k3.scale_real(hstep)));
            let incr = &(&k1 + &k4) + &(&k2 + &k3).scale_real(2.0);
            rho = &rho + &incr.scale_real(hstep / 6.0);
            rho.symmetrize();
            steps += 1;
            observe(te, &rho);
        }
    }
    Ok((rho, steps))
}

fn finish(rho: Operator, steps: usize, dt: f64) -> Result<Evolution> {
    let trace_error = (rho.trace().re - 1.0).abs();
    if trace_error > TRACE_DRIFT_TOL {
        return Err(Error::TraceDrift { drift: trace_error });
    }
    let min_eigenvalue = eigh(&rho)?.values[0];
    if min_eigenvalue < POSITIVITY_FLOOR {
        return Err(Error::Positivity { min_eigenvalue, suggested_dt: dt / 2.0 });
    }
    Ok(Evolution { state: DensityMatrix::from_trusted(rho), steps, dt, trace_error, min_eigenvalue })
}

/// Numeric RK4 evolution with diagnostics.
pub fn evolve_lindblad_detailed(spec: &EvolutionSpec, rho0: &DensityMatrix) -> Result<Evolution> {
    let dt = spec.step()?;
    if spec.t_final == 0.0 {
        return finish(rho0.as_operator().clone(), 0, dt);
    }
    let (rho, steps) = integrate(spec, rho0, dt, |_, _| {})?;
    finish(rho, steps, dt)
}

/// Numeric RK4 evolution of the dephasing master equation to `spec.t_final`.
pub fn evolve_lindblad_numeric(spec: &EvolutionSpec, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    Ok(evolve_lindblad_detailed(spec, rho0)?.state)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub dt: f64,
    pub max_entry_change: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

/// Runs at `dt` and `dt/2` and enforces the step-halving contract.
/// Returns the finer solution.
pub fn evolve_checked(spec: &EvolutionSpec, rho0: &DensityMatrix) -> Result<(Evolution, ConvergenceReport)> {
    let coarse = evolve_lindblad_detailed(spec, rho0)?;
    let mut fine_spec = spec.clone();
    fine_spec.dt = Some(coarse.dt / 2.0);
    let fine = evolve_lindblad_detailed(&fine_spec, rho0)?;
    let change = coarse.state.as_operator().max_abs_diff(fine.state.as_operator());
    if change > CONVERGENCE_TOL {
        return Err(Error::Convergence { max_change: change, tolerance: CONVERGENCE_TOL, dt: coarse.dt });
    }
    let report = ConvergenceReport {
        dt: coarse.dt,
        max_entry_change: change,
        trace_error: coarse.trace_error.max(fine.trace_error),
        min_eigenvalue: coarse.min_eigenvalue.min(fine.min_eigenvalue),
    };
    Ok((fine, report))
}

/// Numeric trajectory sampled every `stride` steps (and at the end).
pub fn trajectory(spec: &EvolutionSpec, rho0: &DensityMatrix, stride: usize) -> Result<Vec<TrajectoryRow>> {
    let dt = spec.step()?;
    let branches = spec.model.branches().to_vec();
    let stride = stride.max(1);
    let mut rows = Vec::new();
    let mut counter = 0usize;
    let mut err = None;
    let mut record = |t: f64, rho: &Operator| {
        let sub = DensityMatrix::from_trusted(rho.clone()).project(&branches);
        let min_eigenvalue = match eigh(rho) {
            Ok(e) => e.values[0],
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        };
        rows.push(TrajectoryRow {
            t,
            rho00: sub[(0, 0)].re,
            rho11: sub[(1, 1)].re,
            rho01: sub[(0, 1)],
            trace: rho.trace().re,
            min_eigenvalue,
        });
    };
    let (last, _) = integrate(spec, rho0, dt, |t, rho| {
        if counter.is_multiple_of(stride) || t == spec.t_final {
            record(t, rho);
        }
        counter += 1;
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    finish(last, 0, dt)?;
    // the final point can be recorded twice when it falls on the stride
    rows.dedup_by(|a, b| a.t == b.t);
    Ok(rows)
}

pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], mut out: W) -> Result<()> {
    writeln!(out, "t,re_rho00,re_rho11,re_rho01,im_rho01,trace,min_eigenvalue")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t, r.rho00, r.rho11, r.rho01.re, r.rho01.im, r.trace, r.min_eigenvalue
        )?;
    }
    Ok(())
}

/// Exact closed evolution in the eigenbasis of `H`:
/// `ρ_jk(t) = ρ_jk(0) e^{−iω(ε_j−ε_k)t}`.
pub fn evolve_closed(model: &SensorModel, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    evolve_exact(model, &NoiseSchedule::none(), rho0, t)
}

/// Exact solution of the dephasing equation for commuting `H`, `L`:
/// in a joint eigenbasis `ρ_jk(t) = ρ_jk(0) e^{−i(E_j−E_k)t} e^{−(λ_j−λ_k)² ∫γ}`.
pub fn evolve_exact(
    model: &SensorModel,
    schedule: &NoiseSchedule,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: rho0.dim() });
    }
    let basis = JointBasis::of(model)?;
    let integral = schedule.integral(t);
    let rho = rho0.as_operator();
    let in_basis = match &basis.vectors {
        Some(v) => rho.conjugate_by(v),
        None => rho.clone(),
    };
    let evolved = in_basis.map(|j, k, z| {
        let de = basis.energies[j] - basis.energies[k];
        let dl = basis.lindblad[j] - basis.lindblad[k];
        let phase = C64::from_polar(1.0, -de * t);
        if integral == 0.0 || dl == 0.0 {
            z * phase
        } else {
            z * phase * (-dl * dl * integral).exp()
        }
    });
    let out = match &basis.vectors {
        Some(v) => evolved.conjugate_by(&v.dagger()),
        None => evolved,
    };
    Ok(DensityMatrix::from_trusted(out))
}

/// Joint eigenbasis of `H` and `L`; `vectors` is `None` when both are
/// already diagonal.
struct JointBasis {
    vectors: Option<Operator>,
    energies: Vec<f64>,
    lindblad: Vec<f64>,
}

impl JointBasis {
    fn of(model: &SensorModel) -> Result<Self> {
        let h = model.hamiltonian();
        let l = model.lindblad();
        if h.is_diagonal(0.0) && l.is_diagonal(0.0) {
            return Ok(JointBasis {
                vectors: None,
                energies: h.diagonal().iter().map(|z| z.re).collect(),
                lindblad: l.diagonal().iter().map(|z| z.re).collect(),
            });
        }
        // Eigenvectors of a generic combination of commuting Hermitian
        // operators diagonalize both.
        let hs = h.hs_norm().max(1e-300);
        let ls = l.hs_norm().max(1e-300);
        let mix = &h.scale_real(1.0 / hs) + &l.scale_real(0.577_215_664_901_532_9 / ls);
        let v = eigh(&mix)?.vectors;
        let hd = h.conjugate_by(&v);
        let ld = l.conjugate_by(&v);
        let tol = 1e-9;
        if !hd.is_diagonal(tol * h.max_abs().max(1.0)) || !ld.is_diagonal(tol * l.max_abs().max(1.0)) {
            return Err(Error::Model("could not find a joint eigenbasis of H and L".into()));
        }
        Ok(JointBasis {
            energies: hd.diagonal().iter().map(|z| z.re).collect(),
            lindblad: ld.diagonal().iter().map(|z| z.re).collect(),
            vectors: Some(v),
        })
    }
}

/// Eigen-data of the evolved cat state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CatDiagonalization {
    /// Larger eigenvalue `(1 + e^{−δL²∫γ})/2`.
    pub p: f64,
    /// Smaller eigenvalue `(1 − e^{−δL²∫γ})/2`.
    pub p_star: f64,
    /// `δE · t`.
    pub phase: f64,
    /// `δL² ∫γ`.
    pub decay: f64,
}

/// Exact branch-basis state of a cat spec at time `t`.
pub fn cat_state_analytic(
    spec: &CatSpec,
    schedule: &NoiseSchedule,
    t: f64,
) -> Result<(DensityMatrix, CatDiagonalization)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    let decay = spec.delta_l * spec.delta_l * schedule.integral(t);
    let phase = spec.delta_e * t;
    let coherence = 0.5 * (-decay).exp();
    let c01 = C64::from_polar(coherence, phase);
    let half = C64::new(0.5, 0.0);
    let rho = Operator::from_vec(2, vec![half, c01, c01.conj(), half])?;
    let p_star = -0.5 * (-decay).exp_m1();
    let diag = CatDiagonalization { p: 1.0 - p_star, p_star, phase, decay };
    Ok((DensityMatrix::from_trusted(rho), diag))
}
