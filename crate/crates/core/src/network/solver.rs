use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use super::Ybus;
use crate::error::{GridError, Result};
use crate::units::Phasor;

/// A voltage source behind a series admittance, attached at a bus index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceBranch {
    pub bus: usize,
    /// Coupling admittance, system pu.
    pub admittance: Complex64,
}

impl SourceBranch {
    /// Source behind a pure reactance `x` given on the system base.
    pub fn reactance(bus: usize, x: f64) -> Self {
        Self {
            bus,
            admittance: Complex64::new(0.0, -1.0 / x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkSolution {
    /// Bus voltages, pu.
    pub v: DVector<Complex64>,
    /// Current delivered by each source into its bus, system pu.
    pub source_currents: Vec<Phasor>,
    /// Rotation applied to the fixed injections for this solve.
    pub injection_rotation: Phasor,
}

/// Factorized augmented admittance matrix for repeated solves with
/// changing source voltages.
#[derive(Debug, Clone)]
pub struct NetworkSolver {
    ybus: DMatrix<Complex64>,
    lu: LU<Complex64, Dyn, Dyn>,
    sources: Vec<SourceBranch>,
    fixed_injection: DVector<Complex64>,
}

impl NetworkSolver {
    /// `fixed_injection` holds constant current injections per bus (HVDC).
    pub fn new(ybus: &Ybus, sources: Vec<SourceBranch>, fixed_injection: DVector<Complex64>) -> Result<Self> {
        let n = ybus.len();
        if fixed_injection.len() != n {
            return Err(GridError::InvalidParameter(format!(
                "injection vector has {} entries for {n} buses",
                fixed_injection.len()
            )));
        }
        let mut aug = ybus.matrix.clone();
        for s in &sources {
            if s.bus >= n {
                return Err(GridError::InvalidParameter(format!("source at bus index {}", s.bus)));
            }
            aug[(s.bus, s.bus)] += s.admittance;
        }
        let lu = aug.lu();
        let u = lu.u();
        let scale = u.diagonal().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let smallest = u.diagonal().iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
        if !(scale > 0.0) || smallest <= 1e-12 * scale {
            return Err(GridError::SingularNetwork(format!(
                "pivot ratio {:.3e}",
                smallest / scale.max(f64::MIN_POSITIVE)
            )));
        }
        Ok(Self {
            ybus: ybus.matrix.clone(),
            lu,
            sources,
            fixed_injection,
        })
    }

    pub fn sources(&self) -> &[SourceBranch] {
        &self.sources
    }

    pub fn ybus(&self) -> &DMatrix<Complex64> {
        &self.ybus
    }

    pub fn fixed_injection(&self) -> &DVector<Complex64> {
        &self.fixed_injection
    }

    /// Solves the network for the given internal source voltages, one per
    /// source branch in construction order. The fixed injections are turned
    /// by `injection_rotation` so that they can follow a moving reference.
    pub fn solve(&self, emf: &[Phasor], injection_rotation: Phasor) -> Result<NetworkSolution> {
        if emf.len() != self.sources.len() {
            return Err(GridError::InvalidParameter(format!(
                "{} source voltages for {} sources",
                emf.len(),
                self.sources.len()
            )));
        }
        let mut rhs = &self.fixed_injection * injection_rotation;
        for (s, e) in self.sources.iter().zip(emf) {
            rhs[s.bus] += s.admittance * e;
        }
        let v = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| GridError::SingularNetwork("network solve".into()))?;
        let source_currents = self
            .sources
            .iter()
            .zip(emf)
            .map(|(s, e)| s.admittance * (e - v[s.bus]))
            .collect();
        Ok(NetworkSolution {
            v,
            source_currents,
            injection_rotation,
        })
    }

    /// Rate of change of the bus voltages for given source-voltage rates and
    /// rotation rate of the fixed injections.
    pub fn voltage_rate(&self, emf_rate: &[Phasor], rotation_rate: Phasor) -> Result<DVector<Complex64>> {
        if emf_rate.len() != self.sources.len() {
            return Err(GridError::InvalidParameter(format!(
                "{} source rates for {} sources",
                emf_rate.len(),
                self.sources.len()
            )));
        }
        let mut rhs = &self.fixed_injection * rotation_rate;
        for (s, de) in self.sources.iter().zip(emf_rate) {
            rhs[s.bus] += s.admittance * de;
        }
        self.lu
            .solve(&rhs)
            .ok_or_else(|| GridError::SingularNetwork("network solve".into()))
    }

    /// Largest Kirchhoff current-law violation `|Y V - I_sources - I_fixed|`.
    pub fn kcl_residual(&self, sol: &NetworkSolution) -> f64 {
        let mut r = &self.ybus * &sol.v - &self.fixed_injection * sol.injection_rotation;
        for (s, i) in self.sources.iter().zip(&sol.source_currents) {
            r[s.bus] -= i;
        }
        r.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}
