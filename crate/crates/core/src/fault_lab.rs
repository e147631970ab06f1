//! Fault datasets for a 400 kV, 100 km line fed from both ends.
//!
//! Faults are placed every 5 km (19 positions) and of every type (11 codes).
//! Each row holds the phase-to-ground RMS voltages, in per unit of the rated
//! phase voltage, at the sending bus, the receiving ("load") bus and the
//! fault point.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ml::{Dataset, MlError};
use crate::phasor::{
    apply_fault, solve_steady_state, FaultSpec, FaultType, LineSectionModel, Phasor, PhasorError,
    PhasorNetwork,
};

/// Rated phase-to-ground RMS voltage of the 400 kV line.
pub const PU_BASE_VOLTS: f64 = 400e3 / 1.732_050_807_568_877_2;
pub const POSITIONS: u32 = 19;
pub const POSITION_SPACING_KM: f64 = 5.0;

pub const DATASET_HEADER: [&str; 12] = [
    "VbusA", "VbusB", "VbusC", "VloadA", "VloadB", "VloadC", "VfaultA", "VfaultB", "VfaultC",
    "Distance", "Type", "Code",
];

#[derive(Debug, Error)]
pub enum FaultLabError {
    #[error(transparent)]
    Phasor(#[from] PhasorError),
    #[error("dataset is empty (no header row)")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("r_max must be positive, got {0}")]
    ResistanceRange(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One fault scenario on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultCase {
    /// 1..=19; the fault sits `5·position_index` km from the sending end.
    pub position_index: u32,
    pub fault_type: FaultType,
    pub phase_resistances: [f64; 3],
    pub ground_resistance: f64,
}

impl FaultCase {
    pub fn distance_km(&self) -> f64 {
        POSITION_SPACING_KM * self.position_index as f64
    }

    pub fn code(&self) -> u32 {
        100 * self.position_index + self.fault_type.code()
    }

    pub fn spec(&self) -> FaultSpec {
        FaultSpec {
            fault_type: self.fault_type,
            distance_km: self.distance_km(),
            phase_resistances: self.phase_resistances,
            ground_resistance: self.ground_resistance,
        }
    }
}

/// Splits a code back into (position index, fault type code).
pub fn decode(code: u32) -> (u32, u32) {
    (code / 100, code % 100)
}

/// All 19 × 11 bolted cases ordered by position, then type.
pub fn enumerate_train_cases() -> Vec<FaultCase> {
    (1..=POSITIONS)
        .flat_map(|position_index| {
            FaultType::ALL.into_iter().map(move |fault_type| FaultCase {
                position_index,
                fault_type,
                phase_resistances: [0.0; 3],
                ground_resistance: 0.0,
            })
        })
        .collect()
}

/// 209 cases with uniformly drawn position, type and resistances in
/// `[0, r_max)`.
pub fn sample_test_cases(seed: u64, r_max: f64) -> Result<Vec<FaultCase>, FaultLabError> {
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(FaultLabError::ResistanceRange(r_max));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = POSITIONS as usize * FaultType::ALL.len();
    Ok((0..count)
        .map(|_| {
            let position_index = rng.random_range(1..=POSITIONS);
            let fault_type = FaultType::ALL[rng.random_range(0..FaultType::ALL.len())];
            let phase_resistances = [
                rng.random_range(0.0..r_max),
                rng.random_range(0.0..r_max),
                rng.random_range(0.0..r_max),
            ];
            FaultCase {
                position_index,
                fault_type,
                phase_resistances,
                ground_resistance: rng.random_range(0.0..r_max),
            }
        })
        .collect())
}

/// Test-system parameters. The line constants and equivalent impedances are
/// configuration choices, not measured data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Case1Config {
    /// Sending-end equivalent impedance, ohms [re, im].
    pub source_z: [f64; 2],
    /// Receiving-end equivalent impedance, ohms [re, im].
    pub remote_z: [f64; 2],
    /// Receiving-end EMF magnitude in per unit and angle in degrees.
    pub remote_emf_pu: f64,
    pub remote_angle_deg: f64,
    pub line_length_km: f64,
    /// Use the ideally transposed line instead of the flat untransposed one.
    pub transposed: bool,
}

impl Default for Case1Config {
    fn default() -> Self {
        Self {
            source_z: [1.0, 10.0],
            remote_z: [1.0, 10.0],
            remote_emf_pu: 1.0,
            remote_angle_deg: 0.0,
            line_length_km: 100.0,
            transposed: false,
        }
    }
}

/// Nine per-unit voltages plus distance, type and code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub v_bus: [f64; 3],
    pub v_load: [f64; 3],
    pub v_fault: [f64; 3],
    pub distance_km: f64,
    pub fault_type: u32,
    pub code: u32,
}

impl DatasetRow {
    pub fn voltages(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        out[..3].copy_from_slice(&self.v_bus);
        out[3..6].copy_from_slice(&self.v_load);
        out[6..].copy_from_slice(&self.v_fault);
        out
    }
}

/// Which voltages become classifier features. `BusAndFault` drops the
/// receiving-end columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    #[default]
    All,
    BusAndFault,
}

/// Feature table labelled by fault code.
pub fn to_ml_dataset(rows: &[DatasetRow], set: FeatureSet) -> Result<Dataset, MlError> {
    let (names, features): (Vec<&str>, Vec<Vec<f64>>) = match set {
        FeatureSet::All => (
            DATASET_HEADER[..9].to_vec(),
            rows.iter().map(|r| r.voltages().to_vec()).collect(),
        ),
        FeatureSet::BusAndFault => (
            [&DATASET_HEADER[..3], &DATASET_HEADER[6..9]].concat(),
            rows.iter()
                .map(|r| r.v_bus.iter().chain(&r.v_fault).copied().collect())
                .collect(),
        ),
    };
    Dataset::new(
        features,
        rows.iter().map(|r| r.code).collect(),
        names.into_iter().map(String::from).collect(),
        "Code",
    )
}

pub fn to_pu(volts: f64) -> f64 {
    volts / PU_BASE_VOLTS
}

/// The two-source test system with its line model.
#[derive(Debug, Clone)]
pub struct Case1System {
    pub config: Case1Config,
    net: PhasorNetwork,
    send: [usize; 3],
    recv: [usize; 3],
    line: LineSectionModel,
}

impl Case1System {
    pub fn new(config: Case1Config) -> Self {
        let len = config.line_length_km;
        let line = if config.transposed {
            LineSectionModel::transposed_400kv(len)
        } else {
            LineSectionModel::default_400kv(len)
        };
        let mut net = PhasorNetwork::new(0);
        let send = net.add_bus("bus");
        let recv = net.add_bus("load");
        let zs = Phasor::new(config.source_z[0], config.source_z[1]);
        let zr = Phasor::new(config.remote_z[0], config.remote_z[1]);
        for k in 0..3 {
            let shift = -120.0 * k as f64;
            net.add_source(
                send[k],
                Phasor::from_polar(PU_BASE_VOLTS, shift.to_radians()),
                zs,
            );
            let remote = Phasor::from_polar(
                PU_BASE_VOLTS * config.remote_emf_pu,
                (shift + config.remote_angle_deg).to_radians(),
            );
            net.add_source(recv[k], remote, zr);
        }
        Self {
            config,
            net,
            send,
            recv,
            line,
        }
    }

    pub fn line(&self) -> &LineSectionModel {
        &self.line
    }

    /// Network with the fault applied, plus the fault-bus node ids.
    pub fn faulted_network(
        &self,
        case: &FaultCase,
    ) -> Result<(PhasorNetwork, [usize; 3]), PhasorError> {
        apply_fault(&self.net, &case.spec(), &self.line, self.send, self.recv)
    }

    fn pu(sol: &crate::phasor::PhasorSolution, nodes: [usize; 3]) -> [f64; 3] {
        nodes.map(|n| to_pu(sol.voltage(n).norm()))
    }

    pub fn build_row(&self, case: &FaultCase) -> Result<DatasetRow, FaultLabError> {
        let (net, fault_bus) = self.faulted_network(case)?;
        let sol = solve_steady_state(&net)?;
        Ok(DatasetRow {
            v_bus: Self::pu(&sol, self.send),
            v_load: Self::pu(&sol, self.recv),
            v_fault: Self::pu(&sol, fault_bus),
            distance_km: case.distance_km(),
            fault_type: case.fault_type.code(),
            code: case.code(),
        })
    }

    /// Healthy system with the line split at `distance_km` and no fault.
    pub fn unfaulted_row(&self, distance_km: f64) -> Result<DatasetRow, FaultLabError> {
        let mut net = self.net.clone();
        let mid = net.add_bus("fault");
        net.coupled
            .push(self.line.section(self.send, mid, distance_km));
        net.coupled.push(
            self.line
                .section(mid, self.recv, self.line.length_km - distance_km),
        );
        let sol = solve_steady_state(&net)?;
        Ok(DatasetRow {
            v_bus: Self::pu(&sol, self.send),
            v_load: Self::pu(&sol, self.recv),
            v_fault: Self::pu(&sol, mid),
            distance_km,
            fault_type: 0,
            code: 0,
        })
    }

    /// Rows in case order; cases are solved in parallel.
    pub fn build_dataset(&self, cases: &[FaultCase]) -> Result<Vec<DatasetRow>, FaultLabError> {
        cases.par_iter().map(|c| self.build_row(c)).collect()
    }
}

pub fn write_dataset<W: Write>(rows: &[DatasetRow], out: W) -> Result<(), FaultLabError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER)?;
    for r in rows {
        let mut rec: Vec<String> = r.voltages().iter().map(|v| format!("{v:e}")).collect();
        rec.push(format!("{}", r.distance_km));
        rec.push(r.fault_type.to_string());
        rec.push(r.code.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Vec<DatasetRow>, FaultLabError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(FaultLabError::Empty),
        Some(h) => h?,
    };
    if header.iter().ne(DATASET_HEADER) {
        return Err(FaultLabError::Parse {
            line: 1,
            message: format!(
                "expected header {}, found {}",
                DATASET_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| FaultLabError::Parse { line, message };
        if rec.len() != DATASET_HEADER.len() {
            return Err(err(format!(
                "expected {} fields, found {}",
                DATASET_HEADER.len(),
                rec.len()
            )));
        }
        let mut v = [0.0; 10];
        for (k, slot) in v.iter_mut().enumerate() {
            let field = &rec[k];
            *slot = field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    err(format!(
                        "{}: not a finite number: {field:?}",
                        DATASET_HEADER[k]
                    ))
                })?;
        }
        let int = |k: usize| {
            rec[k].trim().parse::<u32>().map_err(|_| {
                err(format!(
                    "{}: not an integer: {:?}",
                    DATASET_HEADER[k], &rec[k]
                ))
            })
        };
        rows.push(DatasetRow {
            v_bus: [v[0], v[1], v[2]],
            v_load: [v[3], v[4], v[5]],
            v_fault: [v[6], v[7], v[8]],
            distance_km: v[9],
            fault_type: int(10)?,
            code: int(11)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_grid() {
        let cases = enumerate_train_cases();
        assert_eq!(cases.len(), 209);
        assert_eq!(cases[0].code(), 101);
        assert_eq!(cases[0].ground_resistance, 0.0);
        assert_eq!(cases[199].position_index, 19);
        assert_eq!(cases[199].fault_type, FaultType::Abc);
        assert_eq!(cases[199].code(), 1902);
        assert_eq!(cases[208].code(), 1911);
    }

    #[test]
    fn test_cases_respect_range_and_seed() {
        for r_max in [1.0, 5.0] {
            let cases = sample_test_cases(7, r_max).unwrap();
            assert_eq!(cases.len(), 209);
            for c in &cases {
                assert!((1..=19).contains(&c.position_index));
                assert!(c
                    .phase_resistances
                    .iter()
                    .chain([&c.ground_resistance])
                    .all(|r| (0.0..r_max).contains(r)));
            }
        }
        assert_eq!(
            sample_test_cases(3, 1.0).unwrap(),
            sample_test_cases(3, 1.0).unwrap()
        );
        assert_ne!(
            sample_test_cases(3, 1.0).unwrap(),
            sample_test_cases(4, 1.0).unwrap()
        );
        assert!(sample_test_cases(3, 0.0).is_err());
    }

    #[test]
    fn pu_conversion() {
        assert!((to_pu(43555.65) - 0.1886015).abs() < 5e-8);
        assert!((PU_BASE_VOLTS - 230940.1).abs() < 0.01);
    }

    #[test]
    fn empty_and_header_only() {
        assert!(matches!(read_dataset(&b""[..]), Err(FaultLabError::Empty)));
        let header = DATASET_HEADER.join(",") + "\n";
        assert!(read_dataset(header.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn malformed_row_names_its_line() {
        let text =
            DATASET_HEADER.join(",") + "\n1,1,1,1,1,1,1,1,1,5,1,501\n1,x,1,1,1,1,1,1,1,5,1,501\n";
        match read_dataset(text.as_bytes()) {
            Err(FaultLabError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("VbusB"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }
}
