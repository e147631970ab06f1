use super::{network::CoupledBranch, Phasor};
use nalgebra::Matrix3;

/// Per-km parameters of a three-phase overhead line, represented by nominal
/// pi sections.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSectionModel {
    /// Series impedance matrix, ohm/km, phase order A, B, C.
    pub z_per_km: Matrix3<Phasor>,
    /// Total shunt admittance matrix, S/km.
    pub y_per_km: Matrix3<Phasor>,
    pub length_km: f64,
}

fn sequence_matrix(positive: Phasor, zero: Phasor) -> Matrix3<Phasor> {
    let s = (zero + positive * 2.0) / 3.0;
    let m = (zero - positive) / 3.0;
    Matrix3::from_fn(|i, j| if i == j { s } else { m })
}

impl LineSectionModel {
    /// Ideally transposed line from sequence parameters.
    pub fn from_sequence(z1: Phasor, z0: Phasor, y1: Phasor, y0: Phasor, length_km: f64) -> Self {
        Self {
            z_per_km: sequence_matrix(z1, z0),
            y_per_km: sequence_matrix(y1, y0),
            length_km,
        }
    }

    /// Untransposed flat-configuration 400 kV single-circuit line.
    ///
    /// Configuration, not measured data: a triple-bundle conductor (0.03 ohm/km),
    /// 11 m phase spacing, 100 ohm-m earth and 50 Hz, reduced through Carson's
    /// earth-return approximation. The outer phases sit 22 m apart, so the A-C
    /// mutual impedance is smaller than A-B and B-C and the line is not
    /// rotation-symmetric. Shunt admittance uses sequence values
    /// (3.6 / 2.4 uS/km).
    pub fn default_400kv(length_km: f64) -> Self {
        let self_z = Phasor::new(0.08, 0.548);
        let adjacent = Phasor::new(0.05, 0.279);
        let outer = Phasor::new(0.05, 0.235);
        let z = Matrix3::new(
            self_z, adjacent, outer, //
            adjacent, self_z, adjacent, //
            outer, adjacent, self_z,
        );
        Self {
            z_per_km: z,
            y_per_km: sequence_matrix(Phasor::new(0.0, 3.6e-6), Phasor::new(0.0, 2.4e-6)),
            length_km,
        }
    }

    /// Transposed counterpart of [`Self::default_400kv`] with the same sequence impedances.
    pub fn transposed_400kv(length_km: f64) -> Self {
        let untransposed = Self::default_400kv(length_km);
        let s = untransposed.z_per_km.diagonal().sum() / 3.0;
        let m = (untransposed.z_per_km[(0, 1)]
            + untransposed.z_per_km[(1, 2)]
            + untransposed.z_per_km[(0, 2)])
            / 3.0;
        Self {
            z_per_km: Matrix3::from_fn(|i, j| if i == j { s } else { m }),
            ..untransposed
        }
    }

    /// Nominal pi section of `length_km` between two phase triplets.
    pub fn section(&self, from: [usize; 3], to: [usize; 3], length_km: f64) -> CoupledBranch {
        CoupledBranch {
            from,
            to,
            series_impedance: self.z_per_km * Phasor::new(length_km, 0.0),
            shunt_admittance_per_end: self.y_per_km * Phasor::new(length_km / 2.0, 0.0),
        }
    }
}
