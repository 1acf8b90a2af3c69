//! Canned experiments: conditional-rotation sweeps, diagonal and full
//! tomography, Bell-state preparation, nuclear Bloch trajectories and
//! speed-limit tables.

mod tomography;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{
    format_value, CleanupKind, DelayTime, InitKind, Observable, PulseElement, Sequence, ShotNoise,
    SimOptions, Simulator, SweepMetadata, SweepResult, Transition,
};
use crate::error::{Error, Result};
use crate::linalg::{
    eig_hermitian, partial_trace_electron, state_fidelity, DensityMatrix, StateVector,
};
use crate::model::{
    evolution_period, interaction_frame_hamiltonian, min_gate_time, resonance_defect, u_cr,
    BasisMap, PhysicalParams,
};

pub use tomography::{
    design_matrix, project_to_state, readout_effects, tomography_emulated,
    tomography_emulated_with, tomography_full, ReadoutGate, TomographyMethod, TomographyResult,
    DEFAULT_COND_BOUND, READOUT_RABI_MHZ, READOUT_SETTINGS,
};

/// Rabi frequency of the Bell-preparation pulse: 90 degrees in 0.125 us.
pub const BELL_RABI_MHZ: f64 = 2.0;

/// Phase of the Bell-preparation pulse, degrees.
pub const BELL_PHASE_DEG: f64 = 270.0;

/// Relative photon-counting noise of one readout.
pub const SHOT_NOISE_LEVEL: f64 = 0.03;

/// Half-width of the uniform readout-gate angle error.
pub const GATE_JITTER: f64 = 0.02;

/// Shots per readout giving `SHOT_NOISE_LEVEL` at p = 1/2.
pub fn shots_for_noise(level: f64) -> u64 {
    (0.25 / (level * level)).ceil() as u64
}

/// Readout of P(|11>): invert, evolve, invert back, empty |00>.
pub fn p11_sequence() -> Sequence {
    Sequence::new(
        "p11",
        vec![
            PulseElement::U180e,
            PulseElement::Delay(DelayTime::Tau),
            PulseElement::U180e,
            PulseElement::Cleanup(CleanupKind::V),
        ],
    )
}

/// Readout of P(|01>) from |00>: evolve, empty |00>.
pub fn p01_sequence() -> Sequence {
    Sequence::new(
        "p01",
        vec![PulseElement::Delay(DelayTime::Tau), PulseElement::Cleanup(CleanupKind::V)],
    )
}

/// Both conditional-rotation experiments, measured through fluorescence.
pub fn run_cr_sweep(sim: &Simulator, taus: &[f64]) -> Result<SweepResult> {
    if taus.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let rho0 = sim.initial_state(InitKind::Ideal)?;
    let n = taus.len() as u64;
    let (a, b) = (p01_sequence(), p11_sequence());
    let rows = taus
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let k = k as u64;
            let ra = sim.propagate(&rho0, &a.bind_tau(tau))?;
            let rb = sim.propagate(&rho0, &b.bind_tau(tau))?;
            Ok(vec![sim.measure_fluorescence(&ra, k), sim.measure_fluorescence(&rb, n + k)])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        columns: vec!["p01".into(), "p11".into()],
        taus: taus.to_vec(),
        rows,
        metadata: SweepMetadata::new(sim, "cr_sweep", Observable::Fluorescence, InitKind::Ideal),
    })
}

/// Computational populations from four fluorescence readouts:
/// plain, after `V`, after `X`, and after `X` then `V`.
pub fn diag_tomography(sim: &Simulator, rho: &DensityMatrix) -> Result<[f64; 4]> {
    let x = PulseElement::U180e;
    let v = PulseElement::Cleanup(CleanupKind::V);
    let read = |elements: Vec<PulseElement>, point: u64| -> Result<f64> {
        let out = if elements.is_empty() {
            rho.clone()
        } else {
            sim.propagate(rho, &Sequence::new("diag", elements))?
        };
        Ok(sim.measure_fluorescence(&out, point))
    };
    let m1 = read(vec![], 0)?;
    let m2 = read(vec![v.clone()], 1)?;
    let m3 = read(vec![x.clone()], 2)?;
    let m4 = read(vec![x, v], 3)?;
    Ok([m1 - m2, m2, m3 - m4, m4])
}

/// Starts in |e 0>, evolves freely for `tau`, then reads the diagonal.
pub fn run_diag_tomography(sim: &Simulator, electron: usize, tau: f64) -> Result<[f64; 4]> {
    if electron > 1 {
        return Err(Error::InvalidParams(format!("electron bit must be 0 or 1, got {electron}")));
    }
    let rho0 = DensityMatrix::basis(6, BasisMap::logical(electron, 0));
    let rho = sim.propagate(&rho0, &Sequence::new("evolve", vec![PulseElement::delay(tau)]))?;
    diag_tomography(sim, &rho)
}

/// `(|00> + i|11>) / sqrt(2)`.
pub fn bell_target() -> DensityMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    DensityMatrix::pure(
        &StateVector::new(vec![C64::new(h, 0.0), z, z, C64::new(0.0, h)]).expect("unit norm"),
    )
}

pub fn bell_sequence(params: &PhysicalParams) -> Result<Sequence> {
    Ok(Sequence::new(
        "bell",
        vec![
            PulseElement::mw(Transition::MinusOne, BELL_RABI_MHZ, BELL_PHASE_DEG, 90.0),
            PulseElement::delay(min_gate_time(PI, params)?),
        ],
    ))
}

#[derive(Clone, Debug)]
pub struct BellResult {
    /// Computational block of the final state.
    pub rho: DensityMatrix,
    pub fidelity: f64,
}

pub fn run_bell(sim: &Simulator) -> Result<BellResult> {
    let rho0 = sim.initial_state(InitKind::Ideal)?;
    let out = sim.propagate(&rho0, &bell_sequence(sim.params())?)?;
    let rho = out.restrict_normalized(&BasisMap::COMPUTATIONAL)?;
    let fidelity = state_fidelity(&rho, &bell_target())?;
    Ok(BellResult { rho, fidelity })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub shots: u64,
    pub jitter: f64,
    pub seed: u64,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub fidelities: Vec<f64>,
}

/// Full-mode Bell preparation read out by emulated tomography whose gates
/// carry a random angle error and whose readouts carry shot noise.
pub fn bell_monte_carlo(params: &PhysicalParams, trials: usize, seed: u64) -> Result<MonteCarloSummary> {
    if trials == 0 {
        return Err(Error::InvalidParams("Monte Carlo needs at least one trial".into()));
    }
    let shots = shots_for_noise(SHOT_NOISE_LEVEL);
    let nominal = Simulator::new(params.clone(), SimOptions::full())?;
    let prepared = run_bell(&nominal)?.rho;
    let target = bell_target();
    let mut fidelities = Vec::with_capacity(trials);
    for t in 0..trials {
        let trial_seed = seed.wrapping_add(t as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let scale = 1.0 + rng.gen_range(-GATE_JITTER..=GATE_JITTER);
        let device = nominal.with_options(SimOptions {
            angle_scale: scale,
            shot_noise: Some(ShotNoise { shots, seed: trial_seed.wrapping_mul(1 << 20) }),
            ..SimOptions::full()
        })?;
        let est = tomography_emulated_with(&nominal, &device, &prepared, 0, DEFAULT_COND_BOUND)?;
        fidelities.push(state_fidelity(&est.rho_est, &target)?);
    }
    let n = trials as f64;
    let mean = fidelities.iter().sum::<f64>() / n;
    let var = fidelities.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
    Ok(MonteCarloSummary {
        trials,
        shots,
        jitter: GATE_JITTER,
        seed,
        mean,
        std_dev: var.sqrt(),
        min: fidelities.iter().copied().fold(f64::INFINITY, f64::min),
        max: fidelities.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        fidelities,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochSample {
    pub tau: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochSample {
    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }
}

/// Nuclear Bloch vector with the electron held in logical `electron`.
pub fn run_bloch(sim: &Simulator, electron: usize, taus: &[f64]) -> Result<Vec<BlochSample>> {
    if electron > 1 {
        return Err(Error::InvalidParams(format!("electron bit must be 0 or 1, got {electron}")));
    }
    let rho0 = DensityMatrix::basis(6, BasisMap::logical(electron, 0));
    taus.iter()
        .map(|&tau| {
            let rho = sim.propagate(&rho0, &Sequence::new("bloch", vec![PulseElement::delay(tau)]))?;
            let n = partial_trace_electron(&rho, 3)?;
            let op = n.as_operator();
            Ok(BlochSample {
                tau,
                x: 2.0 * op[(0, 1)].re,
                y: -2.0 * op[(0, 1)].im,
                z: op[(0, 0)].re - op[(1, 1)].re,
            })
        })
        .collect()
}

pub fn bloch_csv(samples: &[BlochSample]) -> String {
    let mut out = String::from("tau_us,x,y,z\n");
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_value(s.tau),
            format_value(s.x),
            format_value(s.y),
            format_value(s.z)
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedRow {
    pub label: String,
    pub alpha: f64,
    pub tau_min_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub rows: Vec<SpeedRow>,
    pub period_us: f64,
    pub delta_mhz: f64,
    pub matching_b0_mt: f64,
}

impl SpeedReport {
    pub fn row(&self, label: &str) -> Option<&SpeedRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,alpha_rad,value\n");
        for r in &self.rows {
            out.push_str(&format!("tau_min[{}],{},{}\n", r.label, format_value(r.alpha), format_value(r.tau_min_us)));
        }
        out.push_str(&format!("t_p_us,,{}\n", format_value(self.period_us)));
        out.push_str(&format!("delta_MHz,,{}\n", format_value(self.delta_mhz)));
        out.push_str(&format!("B0_match_mT,,{}\n", format_value(self.matching_b0_mt)));
        out
    }
}

pub fn speed_report(params: &PhysicalParams) -> Result<SpeedReport> {
    let angles = [("pi/4", PI / 4.0), ("pi/2", PI / 2.0), ("pi", PI), ("2pi", 2.0 * PI)];
    let rows = angles
        .iter()
        .map(|&(label, alpha)| {
            Ok(SpeedRow { label: label.into(), alpha, tau_min_us: min_gate_time(alpha, params)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let defect = resonance_defect(params);
    Ok(SpeedReport {
        rows,
        period_us: evolution_period(params)?,
        delta_mhz: defect.delta_mhz,
        matching_b0_mt: defect.matching_b0_mt,
    })
}

/// Phase-insensitive overlap of free evolution for `tau` with `u_cr(alpha)`.
pub fn gate_overlap_at(params: &PhysicalParams, tau: f64, alpha: f64) -> Result<f64> {
    let h = interaction_frame_hamiltonian(params)?;
    let u = eig_hermitian(&h)?.propagator(tau);
    Ok(u.gate_overlap(&u_cr(alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::linspace;

    #[test]
    fn cr_sweep_matches_cosine() {
        let sim = Simulator::paper_ideal();
        let taus = linspace(0.0, 10.0, 11);
        let res = run_cr_sweep(&sim, &taus).unwrap();
        for (tau, row) in taus.iter().zip(&res.rows) {
            assert!(row[0].abs() < 1e-9);
            let want = (1.0 - (2.0 * PI * 0.110 * tau).cos()) / 2.0;
            assert!((row[1] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn cr_sweep_landmarks() {
        let sim = Simulator::paper_ideal();
        let res = run_cr_sweep(&sim, &[4.545, 1.0 / 0.110]).unwrap();
        assert!(res.rows[0][1] >= 1.0 - 1e-6);
        assert!(res.rows[1][1].abs() < 1e-9);
    }

    #[test]
    fn diagonal_tomography_cases() {
        let sim = Simulator::paper_ideal();
        let tau = min_gate_time(PI, sim.params()).unwrap();
        let a = run_diag_tomography(&sim, 0, tau).unwrap();
        let b = run_diag_tomography(&sim, 1, tau).unwrap();
        let c = run_diag_tomography(&sim, 1, 0.0).unwrap();
        for (got, want) in [(a, [1.0, 0.0, 0.0, 0.0]), (b, [0.0, 0.0, 0.0, 1.0]), (c, [0.0, 0.0, 1.0, 0.0])] {
            for k in 0..4 {
                assert!((got[k] - want[k]).abs() < 1e-9, "{got:?}");
            }
        }
    }

    #[test]
    fn ideal_bell_is_exact() {
        let res = run_bell(&Simulator::paper_ideal()).unwrap();
        assert!(1.0 - res.fidelity <= 1e-9);
    }

    #[test]
    fn bloch_branches() {
        let sim = Simulator::paper_ideal();
        let taus = linspace(0.0, 9.0, 10);
        for s in run_bloch(&sim, 0, &taus).unwrap() {
            assert!(s.x.abs() < 1e-10 && s.y.abs() < 1e-10 && (s.z - 1.0).abs() < 1e-10);
        }
        for s in run_bloch(&sim, 1, &taus).unwrap() {
            let alpha = 2.0 * PI * 0.110 * s.tau;
            assert!(s.x.abs() < 1e-10);
            assert!((s.y - alpha.sin()).abs() < 1e-9);
            assert!((s.z - alpha.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn speed_rows() {
        let r = speed_report(&PhysicalParams::default()).unwrap();
        assert!((r.row("pi").unwrap().tau_min_us - 4.5455).abs() < 5e-4);
        assert!((r.row("2pi").unwrap().tau_min_us - r.period_us).abs() < 1e-12);
        assert_eq!(r.delta_mhz, 0.0);
        assert!(r.to_csv().contains("tau_min[pi],"));
    }

    #[test]
    fn overlap_reaches_one_only_at_pi_time() {
        let p = PhysicalParams::default();
        let tau = min_gate_time(PI, &p).unwrap();
        assert!((gate_overlap_at(&p, tau, PI).unwrap() - 1.0).abs() < 1e-10);
        assert!(gate_overlap_at(&p, 0.9 * tau, PI).unwrap() < 1.0 - 1e-6);
    }

    #[test]
    fn shot_count_for_three_percent() {
        assert_eq!(shots_for_noise(0.03), 278);
    }
}
