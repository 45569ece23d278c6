use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Load, NetworkModel};
use crate::error::{GridError, Result};
use crate::units::{BaseSystem, Phasor};

/// Bus admittance matrix on the system base, indexed in bus-list order.
#[derive(Debug, Clone)]
pub struct Ybus {
    pub matrix: DMatrix<Complex64>,
    pub bus_ids: Vec<usize>,
}

impl Ybus {
    pub fn len(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bus_ids.is_empty()
    }

    pub fn index_of(&self, bus: usize) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == bus)
    }
}

/// Series admittance and half shunt susceptance of one line, system pu.
#[derive(Debug, Clone, Copy)]
pub struct LineAdmittance {
    pub from: usize,
    pub to: usize,
    pub series: Complex64,
    pub half_shunt: Complex64,
}

pub fn line_admittances(net: &NetworkModel, base: &BaseSystem) -> Result<Vec<LineAdmittance>> {
    let index = net.bus_index();
    net.lines
        .iter()
        .map(|l| {
            let from = *index
                .get(&l.from_bus)
                .ok_or_else(|| GridError::InvalidTopology(format!("unknown bus {}", l.from_bus)))?;
            let to = *index
                .get(&l.to_bus)
                .ok_or_else(|| GridError::InvalidTopology(format!("unknown bus {}", l.to_bus)))?;
            let zb = base.z_base(net.buses[from].v_nom);
            let z = Complex64::new(l.r_per_km, l.x_per_km) * l.length / zb;
            if z.norm() == 0.0 {
                return Err(GridError::InvalidTopology(format!(
                    "zero-impedance line {}-{}",
                    l.from_bus, l.to_bus
                )));
            }
            Ok(LineAdmittance {
                from,
                to,
                series: z.inv(),
                half_shunt: Complex64::new(0.0, 0.5 * l.b_per_km * l.length * zb),
            })
        })
        .collect()
}

/// Shunt admittance (system pu) that consumes the load's nominal power at
/// voltage `v_set`.
pub fn fold_load(load: &Load, v_set: Phasor, base: &BaseSystem) -> Result<Complex64> {
    let v2 = v_set.norm_sqr();
    if !(v2 > 0.0) {
        return Err(GridError::InvalidParameter(format!(
            "cannot fold load at bus {} at zero voltage",
            load.bus
        )));
    }
    Ok(Complex64::new(load.p_nom, -load.q_nom) / (base.s_base * v2))
}

/// Builds the bus admittance matrix with pi-line shunts and constant-impedance
/// loads folded in at nominal voltage.
pub fn build_ybus(net: &NetworkModel, base: &BaseSystem) -> Result<Ybus> {
    net.validate()?;
    let n = net.buses.len();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for la in line_admittances(net, base)? {
        let (i, j) = (la.from, la.to);
        y[(i, i)] += la.series + la.half_shunt;
        y[(j, j)] += la.series + la.half_shunt;
        y[(i, j)] -= la.series;
        y[(j, i)] -= la.series;
    }
    let index = net.bus_index();
    for load in &net.loads {
        let k = index[&load.bus];
        y[(k, k)] += fold_load(load, Phasor::new(1.0, 0.0), base)?;
    }
    Ok(Ybus {
        matrix: y,
        bus_ids: net.buses.iter().map(|b| b.id).collect(),
    })
}
