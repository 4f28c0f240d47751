//! Configuration, experiment orchestration and metric output for the
//! `congestion-bandit` command-line tool.

pub mod adversary;
pub mod config;
pub mod error;
pub mod experiment;

pub use config::{load_config, parse_config, ExperimentConfig, Resolved};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, Summary};

/// Parses a flow point: a JSON array of finite numbers.
pub fn parse_point(text: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = serde_json::from_str(text)
        .map_err(|e| HarnessError::Input(format!("point must be a JSON array of numbers: {e}")))?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(HarnessError::Input(format!("point[{i}] is not finite")));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points() {
        assert_eq!(parse_point("[0.5, 1, 0]").unwrap(), vec![0.5, 1.0, 0.0]);
        assert_eq!(parse_point("[]").unwrap(), Vec::<f64>::new());
        assert!(parse_point("{\"a\": 1}").is_err());
        assert!(parse_point("[1, \"x\"]").is_err());
        assert!(parse_point("[1e999]").is_err());
    }
}
