//! Bundled scenarios: financial services, tele-healthcare, and smart-home
//! IoT. Each ships a schema, a desk-scale policy excerpt, grounded
//! oracles, and a replay cassette that reproduces the oracles offline.
//!
//! The tool specifications are faithful-in-spirit reconstructions written
//! for this sandbox, not copies of any published toolset. The three
//! safety-subset sizes are 4, 7, and 10.

use crate::ingest::Cassette;
use crate::ltl::{parse_oracle_file, LtlError, SafetyOracle};
use crate::schema::{load_toolset, SchemaError, Toolset};

/// One bundled scenario's assets, embedded as text.
#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub schema_text: &'static str,
    pub policy_text: &'static str,
    pub oracles_text: &'static str,
    pub cassette_text: &'static str,
}

impl Fixture {
    pub fn toolset(&self) -> Result<Toolset, SchemaError> {
        load_toolset(self.schema_text)
    }

    pub fn oracles(&self) -> Result<Vec<SafetyOracle>, LtlError> {
        parse_oracle_file(self.oracles_text)
    }

    pub fn cassette(&self) -> Cassette {
        serde_json::from_str(self.cassette_text).expect("bundled cassette is valid JSON")
    }
}

pub const FINANCIAL: Fixture = Fixture {
    name: "financial",
    schema_text: include_str!("../fixtures/financial.schema"),
    policy_text: include_str!("../fixtures/financial.policy"),
    oracles_text: include_str!("../fixtures/financial.oracles.jsonl"),
    cassette_text: include_str!("../fixtures/financial.cassette.json"),
};

pub const HEALTHCARE: Fixture = Fixture {
    name: "healthcare",
    schema_text: include_str!("../fixtures/healthcare.schema"),
    policy_text: include_str!("../fixtures/healthcare.policy"),
    oracles_text: include_str!("../fixtures/healthcare.oracles.jsonl"),
    cassette_text: include_str!("../fixtures/healthcare.cassette.json"),
};

pub const SMARTHOME: Fixture = Fixture {
    name: "smarthome",
    schema_text: include_str!("../fixtures/smarthome.schema"),
    policy_text: include_str!("../fixtures/smarthome.policy"),
    oracles_text: include_str!("../fixtures/smarthome.oracles.jsonl"),
    cassette_text: include_str!("../fixtures/smarthome.cassette.json"),
};

pub const ALL: [Fixture; 3] = [FINANCIAL, HEALTHCARE, SMARTHOME];
