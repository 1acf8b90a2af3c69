//! The NV electron / 13C register: parameters, Hamiltonians in the lab,
//! subspace and interaction frames, and the gate-time calculators.
//!
//! Parameters are stored in MHz (and mT); every Hamiltonian returned here is
//! in rad/us, i.e. the 2*pi factor is applied at construction.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, kron, Operator, Spectrum, I, ONE, ZERO};

const TWO_PI: f64 = 2.0 * PI;

/// Shift of the electron Larmor frequency from the 14N hyperfine coupling
/// with the nitrogen in m_N = +1, in MHz.
pub const NITROGEN_SHIFT_MHZ: f64 = 2.16;

/// Accepted mismatch between `nu_e` and `gamma_e * B0 - 2.16`, in MHz.
pub const NU_E_CONSISTENCY_MHZ: f64 = 0.1;

/// Static parameters of the secular electron / 13C Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Zero-field splitting, MHz.
    pub d_mhz: f64,
    /// Electron Larmor frequency including the 14N shift (signed), MHz.
    pub nu_e_mhz: f64,
    /// 13C Larmor frequency, MHz.
    pub nu_c_mhz: f64,
    /// Longitudinal hyperfine coupling (signed), MHz.
    pub azz_mhz: f64,
    /// Transverse hyperfine coupling, MHz.
    pub azx_mhz: f64,
    pub b0_mt: f64,
    pub gamma_c_mhz_per_mt: f64,
    pub gamma_e_mhz_per_mt: Option<f64>,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            d_mhz: 2870.0,
            nu_e_mhz: -400.110,
            nu_c_mhz: 0.152,
            azz_mhz: -0.152,
            azx_mhz: 0.110,
            b0_mt: 14.2,
            gamma_c_mhz_per_mt: 0.152 / 14.2,
            gamma_e_mhz_per_mt: None,
        }
    }
}

const PARAM_KEYS: [&str; 8] = [
    "D_MHz",
    "nu_e_MHz",
    "nu_C_MHz",
    "Azz_MHz",
    "Azx_MHz",
    "B0_mT",
    "gamma_C_MHz_per_mT",
    "gamma_e_MHz_per_mT",
];

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.d_mhz,
            self.nu_e_mhz,
            self.nu_c_mhz,
            self.azz_mhz,
            self.azx_mhz,
            self.b0_mt,
            self.gamma_c_mhz_per_mt,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if self.azx_mhz == 0.0 {
            return Err(Error::NoGate);
        }
        let larmor = self.gamma_c_mhz_per_mt * self.b0_mt;
        if (larmor - self.nu_c_mhz).abs() > 1e-6 {
            return Err(Error::InvalidParams(format!(
                "nu_C = {} MHz disagrees with gamma_C * B0 = {larmor} MHz",
                self.nu_c_mhz
            )));
        }
        if let Some(residual) = self.nu_e_residual() {
            if !(residual.abs() <= NU_E_CONSISTENCY_MHZ) {
                return Err(Error::InvalidParams(format!(
                    "nu_e = {} MHz disagrees with gamma_e * B0 - {NITROGEN_SHIFT_MHZ} by {residual} MHz",
                    self.nu_e_mhz
                )));
            }
        }
        Ok(())
    }

    /// `nu_e - (gamma_e B0 - 2.16)` in MHz, when `gamma_e` is known.
    pub fn nu_e_residual(&self) -> Option<f64> {
        self.gamma_e_mhz_per_mt
            .map(|g| self.nu_e_mhz - (g * self.b0_mt - NITROGEN_SHIFT_MHZ))
    }

    /// Reads `key = value` lines. Unlisted keys keep their default values.
    pub fn from_kv_str(src: &str) -> Result<Self> {
        let mut p = Self::default();
        for (n, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| {
                    Error::InvalidParams(format!("line {}: expected `key = value`", n + 1))
                })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::InvalidParams(format!("line {}: `{}` is not a number", n + 1, value.trim()))
            })?;
            match key {
                "D_MHz" => p.d_mhz = value,
                "nu_e_MHz" => p.nu_e_mhz = value,
                "nu_C_MHz" => p.nu_c_mhz = value,
                "Azz_MHz" => p.azz_mhz = value,
                "Azx_MHz" => p.azx_mhz = value,
                "B0_mT" => p.b0_mt = value,
                "gamma_C_MHz_per_mT" => p.gamma_c_mhz_per_mt = value,
                "gamma_e_MHz_per_mT" => p.gamma_e_mhz_per_mt = Some(value),
                other => {
                    return Err(Error::InvalidParams(format!(
                        "line {}: unknown key `{other}` (expected one of {})",
                        n + 1,
                        PARAM_KEYS.join(", ")
                    )))
                }
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = format!(
            "D_MHz = {}\nnu_e_MHz = {}\nnu_C_MHz = {}\nAzz_MHz = {}\nAzx_MHz = {}\nB0_mT = {}\ngamma_C_MHz_per_mT = {}\n",
            self.d_mhz,
            self.nu_e_mhz,
            self.nu_c_mhz,
            self.azz_mhz,
            self.azx_mhz,
            self.b0_mt,
            self.gamma_c_mhz_per_mt
        );
        if let Some(g) = self.gamma_e_mhz_per_mt {
            out.push_str(&format!("gamma_e_MHz_per_mT = {g}\n"));
        }
        out
    }
}

/// Index bookkeeping for the 6-level space `electron (x) nucleus`.
///
/// Electron levels are ordered m_S = (+1, 0, -1), nuclear levels
/// m_I = (+1/2, -1/2). Logical |0>_e is m_S = 0, |1>_e is m_S = -1,
/// |0>_n is m_I = +1/2 and |1>_n is m_I = -1/2.
pub struct BasisMap;

impl BasisMap {
    pub const DIM: usize = 6;
    pub const ELECTRON_DIM: usize = 3;
    pub const NUCLEAR_DIM: usize = 2;

    pub const MS_PLUS: usize = 0;
    pub const MS_ZERO: usize = 1;
    pub const MS_MINUS: usize = 2;

    /// |00>, |01>, |10>, |11> in the 6-level space.
    pub const COMPUTATIONAL: [usize; 4] = [2, 3, 4, 5];

    pub const fn index(electron: usize, nuclear: usize) -> usize {
        electron * 2 + nuclear
    }

    /// Index of logical state `|e n>` (e, n in {0, 1}).
    pub const fn logical(e: usize, n: usize) -> usize {
        Self::COMPUTATIONAL[e * 2 + n]
    }

    pub fn block(electron: usize) -> [usize; 2] {
        [Self::index(electron, 0), Self::index(electron, 1)]
    }
}

pub mod spin {
    use super::*;

    pub fn sz1() -> Operator {
        Operator::from_real_diag(&[1.0, 0.0, -1.0])
    }

    pub fn sz1_squared() -> Operator {
        Operator::from_real_diag(&[1.0, 0.0, 1.0])
    }

    pub fn iz() -> Operator {
        Operator::from_real_diag(&[0.5, -0.5])
    }

    pub fn ix() -> Operator {
        Operator::from_real_rows(&[0.0, 0.5, 0.5, 0.0]).unwrap()
    }

    pub fn iy() -> Operator {
        Operator::from_rows(&[ZERO, I * -0.5, I * 0.5, ZERO]).unwrap()
    }

    /// Pseudo-spin-1/2 `s_z` of the m_S = {0, -1} pair in logical order.
    pub fn pseudo_sz() -> Operator {
        Operator::from_real_diag(&[0.5, -0.5])
    }

    /// `|k><k|` on the two-level logical electron space.
    pub fn logical_projector(k: usize) -> Operator {
        Operator::ket_bra(2, k, k)
    }
}

/// Secular lab-frame Hamiltonian on the 6-level space.
pub fn lab_hamiltonian(p: &PhysicalParams) -> Operator {
    use spin::*;
    let i2 = Operator::identity(2);
    let i3 = Operator::identity(3);
    let terms = [
        kron(&sz1_squared(), &i2).scale_re(p.d_mhz),
        kron(&sz1(), &i2).scale_re(-p.nu_e_mhz),
        kron(&i3, &iz()).scale_re(-p.nu_c_mhz),
        kron(&sz1(), &iz()).scale_re(p.azz_mhz),
        kron(&sz1(), &ix()).scale_re(p.azx_mhz),
    ];
    terms
        .iter()
        .fold(Operator::zeros(6), |acc, t| &acc + t)
        .scale_re(TWO_PI)
}

/// Projection of the lab Hamiltonian on |00>, |01>, |10>, |11>.
pub fn subspace_hamiltonian(p: &PhysicalParams) -> Operator {
    lab_hamiltonian(p).restrict(&BasisMap::COMPUTATIONAL)
}

/// Generator `G` of the frame transformation `U(tau) = exp(-i G tau)`.
pub fn frame_generator(p: &PhysicalParams) -> Operator {
    use spin::*;
    let offset = p.d_mhz + p.nu_e_mhz;
    let i2 = Operator::identity(2);
    let terms = [
        kron(&logical_projector(0), &iz()).scale_re(p.nu_c_mhz),
        kron(&pseudo_sz(), &i2).scale_re(offset),
        Operator::identity(4).scale_re(-offset / 2.0),
    ];
    terms
        .iter()
        .fold(Operator::zeros(4), |acc, t| &acc + t)
        .scale_re(TWO_PI)
}

/// Times at which the frame-transformed Hamiltonian is evaluated.
pub const FRAME_PROBE_TIMES_US: [f64; 3] = [0.1, 1.0, 7.0];

/// Largest accepted tau-dependence of the interaction-frame Hamiltonian.
pub const FRAME_DRIFT_TOL: f64 = 1e-9;

/// Result of the numerical interaction-frame transformation.
#[derive(Clone, Debug)]
pub struct InteractionFrame {
    pub hamiltonian: Operator,
    /// Sign `s` in `H_I = U H_s U^dagger + s * (-i U dU^dagger/dtau)`.
    pub frame_term_sign: f64,
    /// Largest entrywise spread of `H_I` over the probe times.
    pub drift: f64,
    /// `||exp(-i H_I t) - U(t) exp(-i H_s t)||_max` at t = 1 us.
    pub consistency: f64,
}

fn transformed(
    h_s: &Operator,
    frame: &Spectrum,
    tau: f64,
    sign: f64,
) -> Operator {
    let u = frame.propagator(tau);
    // d/dtau U^dagger = V diag(i g e^{i g tau}) V^dagger
    let du_dag = frame.map(|g| I * g * C64::from_polar(1.0, g * tau));
    let frame_term = (&u * &du_dag).scale(-I);
    (&h_s.conjugate_by(&u) + &frame_term.scale_re(sign)).hermitian_part()
}

/// Interaction-frame Hamiltonian computed from the subspace Hamiltonian and
/// the frame generator.
///
/// The sign of the frame term is not taken on trust: both signs are tried,
/// candidates that drift with tau are discarded, and the remaining candidate
/// must reproduce `U(t) exp(-i H_s t)` when exponentiated.
pub fn interaction_frame(p: &PhysicalParams) -> Result<InteractionFrame> {
    let h_s = subspace_hamiltonian(p);
    let frame = eig_hermitian(&frame_generator(p))?;
    let hs_spec = eig_hermitian(&h_s)?;
    let t_check = 1.0;
    let lab_path = &frame.propagator(t_check) * &hs_spec.propagator(t_check);
    let noise_scale = h_s.max_abs().max(frame.values.iter().fold(1.0, |m, g| m.max(g.abs())));

    let mut best: Option<InteractionFrame> = None;
    for sign in [1.0, -1.0] {
        let samples: Vec<Operator> = FRAME_PROBE_TIMES_US
            .iter()
            .map(|&tau| transformed(&h_s, &frame, tau, sign))
            .collect();
        let drift = samples
            .iter()
            .flat_map(|a| samples.iter().map(move |b| a.max_abs_diff(b)))
            .fold(0.0, f64::max);
        let mut hamiltonian = samples[0].clone();
        // Entries below the cancellation noise of the large electronic terms.
        let floor = 16.0 * f64::EPSILON * noise_scale;
        for z in hamiltonian.entries_mut() {
            if z.re.abs() < floor {
                z.re = 0.0;
            }
            if z.im.abs() < floor {
                z.im = 0.0;
            }
        }
        let consistency = eig_hermitian(&hamiltonian)?
            .propagator(t_check)
            .max_abs_diff(&lab_path);
        let candidate = InteractionFrame { hamiltonian, frame_term_sign: sign, drift, consistency };
        let better = match &best {
            None => true,
            Some(b) => (candidate.drift <= FRAME_DRIFT_TOL, -candidate.consistency)
                .partial_cmp(&(b.drift <= FRAME_DRIFT_TOL, -b.consistency))
                .is_some_and(|o| o.is_gt()),
        };
        if better {
            best = Some(candidate);
        }
    }
    let best = best.expect("two candidates evaluated");
    if best.drift > FRAME_DRIFT_TOL {
        return Err(Error::FrameDrift { drift: best.drift });
    }
    if best.consistency > 1e-6 {
        return Err(Error::Model(format!(
            "no frame-term sign reproduces the subspace propagator (mismatch {:.3e})",
            best.consistency
        )));
    }
    Ok(best)
}

pub fn interaction_frame_hamiltonian(p: &PhysicalParams) -> Result<Operator> {
    Ok(interaction_frame(p)?.hamiltonian)
}

/// Conditional rotation `|0><0| (x) 1 + |1><1| (x) exp(i alpha I_x)`.
pub fn u_cr(alpha: f64) -> Operator {
    let c = C64::new((alpha / 2.0).cos(), 0.0);
    let s = I * (alpha / 2.0).sin();
    Operator::from_rows(&[
        ONE, ZERO, ZERO, ZERO,
        ZERO, ONE, ZERO, ZERO,
        ZERO, ZERO, c, s,
        ZERO, ZERO, s, c,
    ])
    .expect("4x4 literal")
}

/// Shortest free-evolution time reaching rotation angle `alpha`, in us.
pub fn min_gate_time(alpha: f64, p: &PhysicalParams) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParams(format!("rotation angle {alpha} must be >= 0")));
    }
    if p.azx_mhz == 0.0 {
        return Err(Error::NoGate);
    }
    Ok(alpha / (TWO_PI * p.azx_mhz.abs()))
}

/// Period of the free evolution, `2 pi / |E3 - E4|` = `1 / |A_zx|`, in us.
pub fn evolution_period(p: &PhysicalParams) -> Result<f64> {
    if p.azx_mhz == 0.0 {
        return Err(Error::NoGate);
    }
    Ok(1.0 / p.azx_mhz.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResonanceDefect {
    /// Residual I_z coefficient of the logical-|1> branch, MHz.
    pub delta_mhz: f64,
    /// Field at which the defect vanishes, mT.
    pub matching_b0_mt: f64,
}

pub fn resonance_defect(p: &PhysicalParams) -> ResonanceDefect {
    ResonanceDefect {
        delta_mhz: -p.nu_c_mhz - p.azz_mhz,
        matching_b0_mt: p.azz_mhz.abs() / p.gamma_c_mhz_per_mt,
    }
}

/// Delay `d = 1 / (2 |A_zz|)` inside the clean-up composites, in us.
pub fn cleanup_delay(p: &PhysicalParams) -> Result<f64> {
    if p.azz_mhz == 0.0 {
        return Err(Error::InvalidParams("clean-up delay needs A_zz != 0".into()));
    }
    Ok(1.0 / (2.0 * p.azz_mhz.abs()))
}

/// Nuclear Hamiltonian carried by the m_S = +1 branch during free evolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlusBranchModel {
    /// `2 pi A_zz I_z`, measured in the nuclear frame of the m_S = 0 branch:
    /// pure conditional phase, +-pi/2 after the clean-up delay.
    #[default]
    ConditionalPhase,
    /// `2 pi (A_zz I_z + A_zx I_x)` in the same frame.
    Tilted,
    /// `2 pi ((A_zz - nu_C) I_z + A_zx I_x)`, the lab-frame nuclear terms.
    LabNuclear,
}

impl fmt::Display for PlusBranchModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ConditionalPhase => "conditional_phase",
            Self::Tilted => "tilted",
            Self::LabNuclear => "lab_nuclear",
        })
    }
}

impl FromStr for PlusBranchModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional_phase" => Ok(Self::ConditionalPhase),
            "tilted" => Ok(Self::Tilted),
            "lab_nuclear" => Ok(Self::LabNuclear),
            other => Err(Error::InvalidParams(format!("unknown m_S=+1 branch model `{other}`"))),
        }
    }
}

/// Free-evolution Hamiltonian on all six levels, rad/us.
///
/// The m_S = {0, -1} block is the interaction-frame Hamiltonian. The m_S = +1
/// block sits in the rotating frame of the 0 <-> +1 carrier, offset by
/// `carrier_offset_mhz` from the mean of the two nuclear-split transitions.
pub fn free_evolution_hamiltonian(
    p: &PhysicalParams,
    plus_branch: PlusBranchModel,
    carrier_offset_mhz: f64,
) -> Result<Operator> {
    use spin::*;
    let h_i = interaction_frame_hamiltonian(p)?;
    let mut h = h_i.embed(6, &BasisMap::COMPUTATIONAL);
    let nuclear = match plus_branch {
        PlusBranchModel::ConditionalPhase => iz().scale_re(p.azz_mhz),
        PlusBranchModel::Tilted => &iz().scale_re(p.azz_mhz) + &ix().scale_re(p.azx_mhz),
        PlusBranchModel::LabNuclear => {
            &iz().scale_re(p.azz_mhz - p.nu_c_mhz) + &ix().scale_re(p.azx_mhz)
        }
    };
    let block = (&nuclear - &Operator::identity(2).scale_re(carrier_offset_mhz)).scale_re(TWO_PI);
    let plus = BasisMap::block(BasisMap::MS_PLUS);
    for (i, &r) in plus.iter().enumerate() {
        for (j, &c) in plus.iter().enumerate() {
            h[(r, c)] = block[(i, j)];
        }
    }
    Ok(h)
}
