use super::{ExperimentConfig, HarnessError};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../../../presets/", $name, ".json")))),*
        ];
    };
}

presets!(
    "c01_underestimation",
    "c02_depth_monotonicity",
    "c03_depth_limit",
    "c04_highway_equation",
    "c05_contraction",
    "c06_broken_gate_random",
    "c06_broken_gate_three_fork",
    "c07_distances",
    "c08_softmax",
    "c09_is_baselines",
    "c09_retrace_profile",
    "c10_multiroom",
    "c11_toy_tasks",
    "c12_gate_trace",
    "fig_convergence",
    "fig_fixed_point",
    "fig_gate_trace",
    "fig_multiroom",
    "fig_retrace_profile",
    "fig_toy_tasks",
);

/// Names of the shipped presets, sorted.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// Parses the named preset.
pub fn preset(name: &str) -> Result<ExperimentConfig, HarnessError> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| HarnessError::Validation {
        path: "preset".into(),
        message: format!("unknown preset {name:?}"),
    })?;
    ExperimentConfig::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_is_named_by_its_id() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.id, name);
        }
    }

    #[test]
    fn hyperparameter_defaults_match_code_defaults() {
        use crate::algorithms::{AgentParams, HqlParams, HviParams};
        let toy = preset("c11_toy_tasks").unwrap();
        let agents = toy.agents.unwrap();
        assert_eq!(agents.hql, HqlParams::default());
        assert_eq!(agents.classical, AgentParams::default());
        let hvi = preset("c10_multiroom").unwrap().planner.unwrap().hvi;
        let defaults = HviParams::multiroom_defaults();
        assert_eq!(hvi.lookahead.depths(), defaults.lookahead.depths());
        assert_eq!((hvi.capacity, hvi.add_interval, hvi.error_bound), (5, 7, 1e-10));
    }
}
