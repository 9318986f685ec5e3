//! Loading of the files a config refers to.

use std::fs;

use dynrisk::dynamics::{OneStepSpec, OneStepStructure};
use dynrisk::fixtures;
use dynrisk::lattice::{coordinate_process, LatticeSpec};
use dynrisk::measures::MeasureSpec;
use dynrisk::risk::DualRepSpec;
use dynrisk::{DualRep, Measure, RandomVariable, ScenarioLattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

use crate::config::{json_diagnostic, LoadedConfig, VariableSpec, DEFAULT_MAX_NODES};
use crate::RunError;

/// Reads referenced files and accumulates the digest of every input.
pub struct Inputs<'a> {
    pub loaded: &'a LoadedConfig,
    hasher: Sha256,
}

impl<'a> Inputs<'a> {
    pub fn new(loaded: &'a LoadedConfig) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"config\0");
        hasher.update(loaded.text.as_bytes());
        Self { loaded, hasher }
    }

    pub fn digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }

    fn read<T: DeserializeOwned>(&mut self, key: &str, reference: &str) -> Result<T, RunError> {
        let path = self.loaded.resolve(reference);
        let text = fs::read_to_string(&path)
            .map_err(|e| RunError::config(self.loaded, key, format!("cannot read {}: {e}", path.display())))?;
        self.hasher.update(b"\0file\0");
        self.hasher.update(reference.as_bytes());
        self.hasher.update(b"\0");
        self.hasher.update(text.as_bytes());
        serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {}", path.display(), json_diagnostic(&e))))
    }

    fn builtin(&mut self, reference: &str) {
        self.hasher.update(b"\0builtin\0");
        self.hasher.update(reference.as_bytes());
    }

    pub fn lattice(&mut self) -> Result<ScenarioLattice, RunError> {
        let reference = self.loaded.config.lattice.clone().ok_or_else(|| RunError::missing(self.loaded, "lattice"))?;
        if let Some(l) = fixtures::lattice_by_name(&reference) {
            self.builtin(&reference);
            return Ok(l);
        }
        let spec: LatticeSpec = self.read("lattice", &reference)?;
        let limit = self.loaded.config.max_nodes.unwrap_or(DEFAULT_MAX_NODES);
        ScenarioLattice::from_spec_with_limit(&spec, limit).map_err(|e| RunError::input(self.loaded, "lattice", e))
    }

    pub fn measure(&mut self, lattice: &ScenarioLattice, key: &str, reference: &str) -> Result<Measure, RunError> {
        let wrong_lattice = |loaded| RunError::config(loaded, key, format!("{reference} is defined on FIX-A"));
        match reference {
            "FIX-A/Q1" | "FIX-A/Q2" => {
                self.builtin(reference);
                if lattice.shape() != fixtures::fix_a_lattice().shape() {
                    return Err(wrong_lattice(self.loaded));
                }
                Ok(if reference.ends_with("Q1") {
                    fixtures::fix_a_q1()
                } else {
                    fixtures::fix_a_q2()
                })
            }
            _ => {
                let spec: MeasureSpec = self.read(key, reference)?;
                Measure::from_spec(lattice, &spec).map_err(|e| RunError::input(self.loaded, key, e))
            }
        }
    }

    pub fn measures(&mut self, lattice: &ScenarioLattice) -> Result<Vec<Measure>, RunError> {
        let refs = self.loaded.config.measures.clone();
        refs.iter().map(|r| self.measure(lattice, "measures", r)).collect()
    }

    pub fn queries(&mut self, lattice: &ScenarioLattice) -> Result<Vec<Measure>, RunError> {
        let refs = self.loaded.config.queries.clone();
        refs.iter().map(|r| self.measure(lattice, "queries", r)).collect()
    }

    /// The `dual` file, or the zero-penalty representation over `measures`.
    pub fn dual(&mut self, lattice: &ScenarioLattice) -> Result<DualRep, RunError> {
        let c = &self.loaded.config;
        if let Some(reference) = c.dual.clone() {
            let spec: DualRepSpec = self.read("dual", &reference)?;
            return DualRep::from_spec(lattice, &spec).map_err(|e| RunError::input(self.loaded, "dual", e));
        }
        let h = c.sublinear.ok_or_else(|| RunError::missing(self.loaded, "dual or sublinear"))?;
        let ms = self.measures(lattice)?;
        DualRep::sublinear(lattice, h.s, h.t, ms).map_err(|e| RunError::input(self.loaded, "sublinear", e))
    }

    pub fn structure(&mut self, lattice: &ScenarioLattice) -> Result<OneStepStructure, RunError> {
        let reference = self.loaded.config.structure.clone().ok_or_else(|| RunError::missing(self.loaded, "structure"))?;
        if reference == fixtures::FIX_A {
            self.builtin(&reference);
            if lattice.shape() != fixtures::fix_a_lattice().shape() {
                return Err(RunError::config(self.loaded, "structure", "FIX-A structure needs the FIX-A lattice".into()));
            }
            return Ok(fixtures::fix_a_structure(0.0, 0.0));
        }
        let spec: OneStepSpec = self.read("structure", &reference)?;
        OneStepStructure::from_spec(lattice, &spec).map_err(|e| RunError::input(self.loaded, "structure", e))
    }
}

pub fn fixture_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Test variables described by a [`VariableSpec`].
pub fn variables(
    loaded: &LoadedConfig,
    lattice: &ScenarioLattice,
    spec: &VariableSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<RandomVariable>, RunError> {
    let err = |e| RunError::input(loaded, "variable", e);
    match spec {
        VariableSpec::Coordinate { time } => {
            lattice.check_time(*time).map_err(err)?;
            Ok(vec![coordinate_process(lattice, *time).map_err(err)?.remove(0)])
        }
        VariableSpec::Values { time, values } => {
            Ok(vec![RandomVariable::new(lattice, *time, values.clone()).map_err(err)?])
        }
        VariableSpec::Random { time, count, scale } => {
            lattice.check_time(*time).map_err(err)?;
            (0..*count)
                .map(|_| RandomVariable::from_fn(lattice, *time, |_, _| rng.gen_range(-*scale..=*scale)).map_err(err))
                .collect()
        }
    }
}
