//! Energy functionals along a trajectory, the auxiliary fields `psi`,
//! `Gamma`, `phi`, and the `L^inf` embedding check for the stress.
//!
//! Sup-type pieces are Chemin-Lerner norms sampled at the ledger cadence;
//! `L^1`-in-time pieces are trapezoid sums of the instantaneous Besov norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldComponents, TensorField, VectorField};
use crate::lp::{lp_norm, BesovSpec, DyadicBank, ShellRange, TildeNormTracker};
use crate::model::SimState;
use crate::ops::{fractional_lambda, lambda_inv_p_div};

/// Rejects Lebesgue indices outside `[2, 4]`.
pub fn check_lebesgue(p: f64) -> Result<()> {
    if (2.0..=4.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidLebesgue(p))
    }
}

/// Initial energy: `|u0^l|_{B^{1/2}_{2,1}} + |sigma0^l|_{B^{1/2}_{2,1}}
/// + |u0^h|_{B^{3/p-1}_{p,1}} + |sigma0^h|_{B^{3/p}_{p,1}}`.
pub fn energy_e0(bank: &DyadicBank, u0: &VectorField, sigma0: &TensorField, p: f64) -> Result<f64> {
    check_lebesgue(p)?;
    let low = BesovSpec::l1(0.5, 2.0);
    Ok(bank.besov_norm(u0, low, ShellRange::Low)
        + bank.besov_norm(sigma0, low, ShellRange::Low)
        + bank.besov_norm(u0, BesovSpec::l1(3.0 / p - 1.0, p), ShellRange::High)
        + bank.besov_norm(sigma0, BesovSpec::l1(3.0 / p, p), ShellRange::High))
}

/// `(psi, Gamma, phi)` with `psi = Lambda^{-1} P div sigma`,
/// `Gamma = u - Lambda^{-1} psi` and `phi = 2 Lambda psi - u`.
pub fn auxiliary_fields(state: &SimState) -> (VectorField, VectorField, VectorField) {
    let psi = lambda_inv_p_div(&state.sigma);
    let mut gamma = state.u.sub(&fractional_lambda(&psi, -1.0));
    gamma.solenoidal = true;
    let mut phi = fractional_lambda(&psi, 1.0).scaled(2.0).sub(&state.u);
    phi.solenoidal = true;
    (psi, gamma, phi)
}

/// Ratio of `|sigma - mean|_{L^inf}` to its Besov control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinfCheck {
    pub linf: f64,
    pub besov: f64,
    pub ratio: f64,
}

pub fn linf_bound_check(bank: &DyadicBank, sigma: &TensorField, p: f64) -> Result<LinfCheck> {
    let meanfree = sigma.map_components(|c| c.without_mean());
    let linf = lp_norm(&meanfree, f64::INFINITY);
    let besov = bank.besov_norm(sigma, BesovSpec::l1(0.5, 2.0), ShellRange::Low)
        + bank.besov_norm(sigma, BesovSpec::l1(3.0 / p, p), ShellRange::High);
    let ratio = if besov > 0.0 {
        linf / besov
    } else if linf <= f64::EPSILON * sigma.max_coeff().max(1.0) {
        0.0
    } else {
        return Err(Error::Internal(format!(
            "L^inf norm {linf:e} with vanishing Besov control"
        )));
    };
    Ok(LinfCheck { linf, besov, ratio })
}

/// One sample of the ledger. Column order is [`HistoryRow::CSV_HEADER`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub t: f64,
    pub e1_u_low: f64,
    pub e1_sigma_low: f64,
    pub e2_u_low: f64,
    pub e2_psi_low: f64,
    pub e3_u_high_sup: f64,
    pub e3_sigma_high_sup: f64,
    pub e3_u_high_int: f64,
    pub e3_psi_high_int: f64,
    pub e4_trace_low: f64,
    pub e4_trace_high: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub e_total: f64,
    /// Instantaneous `|u^l|_{B^{1/2}_{2,1}}`.
    pub u_low_b12: f64,
    pub sigma_linf: f64,
    pub max_abs_trace: f64,
}

impl HistoryRow {
    pub const CSV_HEADER: &'static str = "t,e1_u_low,e1_sigma_low,e2_u_low,e2_psi_low,e3_u_high_sup,\
e3_sigma_high_sup,e3_u_high_int,e3_psi_high_int,e4_trace_low,e4_trace_high,e1,e2,e3,e4,e_total,\
u_low_b12,sigma_linf,max_abs_trace";

    pub fn values(&self) -> [f64; 19] {
        [
            self.t,
            self.e1_u_low,
            self.e1_sigma_low,
            self.e2_u_low,
            self.e2_psi_low,
            self.e3_u_high_sup,
            self.e3_sigma_high_sup,
            self.e3_u_high_int,
            self.e3_psi_high_int,
            self.e4_trace_low,
            self.e4_trace_high,
            self.e1,
            self.e2,
            self.e3,
            self.e4,
            self.e_total,
            self.u_low_b12,
            self.sigma_linf,
            self.max_abs_trace,
        ]
    }

    /// Full-precision CSV line, stable across runs.
    pub fn to_csv(&self) -> String {
        self.values()
            .iter()
            .map(|v| format!("{v:.17e}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Integrands of the six `L^1_t` pieces.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Integrands([f64; 6]);

/// Running energies `E1..E4` for one trajectory.
#[derive(Clone, Debug)]
pub struct EnergyLedger {
    bank: DyadicBank,
    p: f64,
    e0: f64,
    u_low: TildeNormTracker,
    sigma_low: TildeNormTracker,
    u_high: TildeNormTracker,
    sigma_high: TildeNormTracker,
    integrals: [f64; 6],
    last: Option<(f64, Integrands)>,
    history: Vec<HistoryRow>,
}

struct Snapshot {
    u2: Vec<f64>,
    up: Vec<f64>,
    s2: Vec<f64>,
    sp: Vec<f64>,
    integrands: Integrands,
    sigma_linf: f64,
    max_abs_trace: f64,
}

impl EnergyLedger {
    /// Builds the ledger, fixes `E(0)` from `state` and records it as the
    /// first sample.
    pub fn new(bank: &DyadicBank, p: f64, state: &SimState) -> Result<Self> {
        check_lebesgue(p)?;
        let e0 = energy_e0(bank, &state.u, &state.sigma, p)?;
        let mut ledger = Self {
            bank: bank.clone(),
            p,
            e0,
            u_low: TildeNormTracker::new(bank, 2.0),
            sigma_low: TildeNormTracker::new(bank, 2.0),
            u_high: TildeNormTracker::new(bank, p),
            sigma_high: TildeNormTracker::new(bank, p),
            integrals: [0.0; 6],
            last: None,
            history: Vec::new(),
        };
        ledger.update(state)?;
        Ok(ledger)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn bank(&self) -> &DyadicBank {
        &self.bank
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    pub fn latest(&self) -> &HistoryRow {
        self.history.last().expect("ledger holds its initial sample")
    }

    fn snapshot(&self, state: &SimState) -> Snapshot {
        let bank = &self.bank;
        let p = self.p;
        let norms = |f: &dyn Fn(f64) -> Vec<f64>| {
            let two = f(2.0);
            let pp = if p == 2.0 { two.clone() } else { f(p) };
            (two, pp)
        };
        let (u2, up) = norms(&|q| bank.shell_norms(&state.u, q));
        let (s2, sp) = norms(&|q| bank.shell_norms(&state.sigma, q));
        let psi = lambda_inv_p_div(&state.sigma);
        let (psi2, psip) = norms(&|q| bank.shell_norms(&psi, q));
        let tr = state.sigma.trace();
        let (tr2, trp) = norms(&|q| bank.shell_norms(&tr, q));
        let low = |n: &[f64], s: f64| bank.aggregate(n, BesovSpec::l1(s, 2.0), ShellRange::Low);
        let high = |n: &[f64], s: f64| bank.aggregate(n, BesovSpec::l1(s, p), ShellRange::High);
        let integrands = Integrands([
            low(&u2, 2.5),
            low(&psi2, 2.5),
            high(&up, 3.0 / p + 1.0),
            high(&psip, 3.0 / p),
            low(&tr2, 1.5),
            high(&trp, 3.0 / p),
        ]);
        Snapshot {
            sigma_linf: lp_norm(&state.sigma, f64::INFINITY),
            max_abs_trace: lp_norm(&tr, f64::INFINITY),
            u2,
            up,
            s2,
            sp,
            integrands,
        }
    }

    /// Folds in the state at `state.t`, which must not precede the last sample.
    pub fn update(&mut self, state: &SimState) -> Result<()> {
        let t = state.t;
        if let Some((last, _)) = self.last {
            if t < last {
                return Err(Error::TimeReversed { last, got: t });
            }
        }
        let snap = self.snapshot(state);
        self.u_low.update_with_norms(&snap.u2, t)?;
        self.sigma_low.update_with_norms(&snap.s2, t)?;
        self.u_high.update_with_norms(&snap.up, t)?;
        self.sigma_high.update_with_norms(&snap.sp, t)?;
        if let Some((last, prev)) = self.last {
            let h = t - last;
            for k in 0..6 {
                self.integrals[k] += 0.5 * h * (prev.0[k] + snap.integrands.0[k]);
            }
        }
        self.last = Some((t, snap.integrands));

        let bank = &self.bank;
        let p = self.p;
        let lo = BesovSpec::l1(0.5, 2.0);
        let tilde = |tr: &TildeNormTracker, spec, range| tr.norm(bank, spec, range).expect("matching index");
        let mut row = HistoryRow {
            t,
            e1_u_low: tilde(&self.u_low, lo, ShellRange::Low),
            e1_sigma_low: tilde(&self.sigma_low, lo, ShellRange::Low),
            e2_u_low: self.integrals[0],
            e2_psi_low: self.integrals[1],
            e3_u_high_sup: tilde(&self.u_high, BesovSpec::l1(3.0 / p - 1.0, p), ShellRange::High),
            e3_sigma_high_sup: tilde(&self.sigma_high, BesovSpec::l1(3.0 / p, p), ShellRange::High),
            e3_u_high_int: self.integrals[2],
            e3_psi_high_int: self.integrals[3],
            e4_trace_low: self.integrals[4],
            e4_trace_high: self.integrals[5],
            u_low_b12: bank.aggregate(&snap.u2, lo, ShellRange::Low),
            sigma_linf: snap.sigma_linf,
            max_abs_trace: snap.max_abs_trace,
            ..Default::default()
        };
        row.e1 = row.e1_u_low + row.e1_sigma_low;
        row.e2 = row.e2_u_low + row.e2_psi_low;
        row.e3 = row.e3_u_high_sup + row.e3_sigma_high_sup + row.e3_u_high_int + row.e3_psi_high_int;
        row.e4 = row.e4_trace_low + row.e4_trace_high;
        row.e_total = row.e1 + row.e2 + row.e3 + row.e4;
        self.history.push(row);
        Ok(())
    }
}
