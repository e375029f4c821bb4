use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HeadModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_SCHEMA: &str = "reward-uq/checkpoint/v1";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    schema: String,
    model: HeadModel,
}

/// Writes the architecture tag, hyperparameters, every parameter tensor and
/// the init snapshots (or H and λ for the Bayesian head).
pub fn save_checkpoint(model: &HeadModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ckpt = Checkpoint {
        schema: CHECKPOINT_SCHEMA.to_string(),
        model: model.clone(),
    };
    let text = serde_json::to_string(&ckpt).map_err(|e| Error::json("checkpoint", e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<HeadModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    if ckpt.schema != CHECKPOINT_SCHEMA {
        return Err(Error::InvalidInput(format!("unsupported checkpoint schema {:?}", ckpt.schema)));
    }
    Ok(ckpt.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::{model_init, Architecture, HeadConfig};

    #[test]
    fn every_architecture_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        for arch in [Architecture::EnsMlp, Architecture::EnsLora, Architecture::McDropout, Architecture::BayLin] {
            let cfg = match arch {
                Architecture::EnsMlp => HeadConfig::EnsMlp { members: 3, hidden: 4 },
                Architecture::EnsLora => HeadConfig::EnsLora { members: 2, rank: 2, alpha_lora: 4.0 },
                Architecture::McDropout => HeadConfig::McDropout { hidden: 4, dropout: 0.2, masks: 5 },
                Architecture::BayLin => HeadConfig::default_for(arch),
            };
            let model = model_init(&cfg, 3, 17).unwrap();
            let p = dir.path().join(format!("{arch}.json"));
            save_checkpoint(&model, &p).unwrap();
            assert_eq!(load_checkpoint(&p).unwrap(), model);
        }
    }

    #[test]
    fn missing_checkpoint_is_io_error() {
        assert!(matches!(load_checkpoint("/nonexistent/ckpt.json"), Err(Error::Io { .. })));
    }
}
