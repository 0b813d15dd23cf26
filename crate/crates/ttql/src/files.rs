//! On-disk JSON formats for MDPs and Q-tables.
//!
//! Both formats are flat row-major arrays with explicit dimensions, written
//! pretty-printed with fields in declaration order, so regenerating the same
//! object reproduces the file byte for byte.

use crate::error::{Error, Result};
use crate::mdp::{Mdp, QTable};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Serialized MDP: `reward[s * n_actions + a]`,
/// `transition[(s * n_actions + a) * n_states + next]`.
#[derive(Debug, Serialize, Deserialize)]
pub struct MdpFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub reward: Vec<f64>,
    pub transition: Vec<f64>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &Mdp) -> MdpFile {
        MdpFile {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            gamma: mdp.gamma(),
            reward: mdp.reward_table().to_vec(),
            transition: mdp.transition_table().to_vec(),
        }
    }

    pub fn into_mdp(self) -> Result<Mdp> {
        Mdp::new(self.n_states, self.n_actions, self.gamma, self.reward, self.transition)
    }
}

/// Serialized Q-table: `values[s * n_actions + a]`.
#[derive(Debug, Serialize, Deserialize)]
pub struct QTableFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl QTableFile {
    pub fn from_q_table(q: &QTable) -> QTableFile {
        QTableFile {
            n_states: q.n_states(),
            n_actions: q.n_actions(),
            values: q.values().to_vec(),
        }
    }

    pub fn into_q_table(self) -> Result<QTable> {
        QTable::from_values(self.n_states, self.n_actions, self.values)
    }
}

fn parse_error(path: &Path, err: serde_json::Error) -> Error {
    Error::Config(format!("{}: {err}", path.display()))
}

pub fn save_mdp(path: &Path, mdp: &Mdp) -> Result<()> {
    let body = serde_json::to_string_pretty(&MdpFile::from_mdp(mdp)).map_err(|e| parse_error(path, e))?;
    std::fs::write(path, body + "\n")?;
    Ok(())
}

pub fn load_mdp(path: &Path) -> Result<Mdp> {
    let body = std::fs::read_to_string(path)?;
    let file: MdpFile = serde_json::from_str(&body).map_err(|e| parse_error(path, e))?;
    file.into_mdp()
}

pub fn save_q_table(path: &Path, q: &QTable) -> Result<()> {
    let body =
        serde_json::to_string_pretty(&QTableFile::from_q_table(q)).map_err(|e| parse_error(path, e))?;
    std::fs::write(path, body + "\n")?;
    Ok(())
}

pub fn load_q_table(path: &Path) -> Result<QTable> {
    let body = std::fs::read_to_string(path)?;
    let file: QTableFile = serde_json::from_str(&body).map_err(|e| parse_error(path, e))?;
    file.into_q_table()
}
