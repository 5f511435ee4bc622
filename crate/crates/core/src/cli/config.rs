//! Run settings from defaults, an optional INI-style file and command-line
//! flags, applied in that order.
//!
//! ```text
//! # comment
//! [scenario]
//! name = planar_gripper
//! mu = 0.2
//!
//! [solver]
//! integrator = tamsi
//! h = 3e-3
//!
//! [bench]
//! horizon = 5
//!
//! [output]
//! out = gripper.csv
//! ```

use std::path::PathBuf;

use crate::bench::{MethodSpec, DEFAULT_REFERENCE_STEP, DEFAULT_WINDOW};
use crate::solver::{IntegratorKind, JacobianMode, SolverConfig};

pub const SECTIONS: [&str; 4] = ["scenario", "solver", "bench", "output"];

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses the file format above. Duplicate keys and unknown sections are
/// errors.
pub fn parse(text: &str) -> Result<Vec<Entry>, String> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut section: Option<String> = None;
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| format!("line {line_no}: unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(format!(
                    "line {line_no}: unknown section [{name}] (expected one of: {})",
                    SECTIONS.join(", ")
                ));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {line_no}: expected `key = value`"))?;
        let section = section
            .clone()
            .ok_or_else(|| format!("line {line_no}: `{}` appears before any section", key.trim()))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(format!("line {line_no}: empty key"));
        }
        if let Some(first) = entries.iter().find(|e| e.section == section && e.key == key) {
            return Err(format!(
                "line {line_no}: duplicate key `{key}` in [{section}] (first set on line {})",
                first.line
            ));
        }
        entries.push(Entry { section, key, value: value.trim().to_string(), line: line_no });
    }
    Ok(entries)
}

/// Everything a subcommand may need.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub scenario: String,
    pub scenario_overrides: Vec<(String, f64)>,
    pub integrator: Option<IntegratorKind>,
    pub solver: SolverConfig,
    pub horizon: Option<f64>,
    pub window: f64,
    pub reference_step: f64,
    pub sample_interval: Option<f64>,
    pub methods: Option<Vec<MethodSpec>>,
    pub knobs: Option<Vec<f64>>,
    pub accuracies: Option<Vec<f64>>,
    pub steps: Option<Vec<f64>>,
    pub samples: usize,
    pub seed: u64,
    pub perturb_jacobian: f64,
    pub out: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            scenario: "box_slide".to_string(),
            scenario_overrides: Vec::new(),
            integrator: None,
            solver: SolverConfig::default(),
            horizon: None,
            window: DEFAULT_WINDOW,
            reference_step: DEFAULT_REFERENCE_STEP,
            sample_interval: None,
            methods: None,
            knobs: None,
            accuracies: None,
            steps: None,
            samples: 1000,
            seed: 0,
            perturb_jacobian: 0.0,
            out: None,
        }
    }
}

fn number(key: &str, value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("`{key}` expects a finite number, got `{value}`"))
}

fn count<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("`{key}` expects a non-negative integer, got `{value}`"))
}

fn switch(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{key}` expects on or off, got `{value}`")),
    }
}

fn numbers(key: &str, value: &str) -> Result<Vec<f64>, String> {
    value.split(',').map(|s| number(key, s.trim())).collect()
}

impl Settings {
    /// Applies one setting. Errors name the offending key.
    pub fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<(), String> {
        let s = &mut self.solver;
        match (section, key) {
            ("scenario", "name") => self.scenario = value.to_string(),
            ("scenario", _) => {
                let x = number(key, value)?;
                self.scenario_overrides.retain(|(k, _)| k != key);
                self.scenario_overrides.push((key.to_string(), x));
            }
            ("solver", "integrator") => {
                self.integrator = Some(value.parse().map_err(|e: crate::solver::SolverError| e.to_string())?)
            }
            ("solver", "newton") => {
                s.jacobian_mode = value.parse::<JacobianMode>().map_err(|e| e.to_string())?
            }
            ("solver", "tals") => s.tals_enabled = switch(key, value)?,
            ("solver", "h") => s.h = number(key, value)?,
            ("solver", "accuracy") => s.accuracy = number(key, value)?,
            ("solver", "newton_rtol") => s.newton_rtol = number(key, value)?,
            ("solver", "newton_atol") => s.newton_atol = number(key, value)?,
            ("solver", "max_newton_iters") => s.max_newton_iters = count(key, value)?,
            ("solver", "theta_max") => s.theta_max = number(key, value)?,
            ("solver", "h_min_factor") => s.h_min_factor = number(key, value)?,
            ("solver", "min_step") => s.min_step = number(key, value)?,
            ("solver", "max_jacobian_reuses") => s.max_jacobian_reuses = count(key, value)?,
            ("solver", "divergence_check") => s.divergence_check = switch(key, value)?,
            ("bench", "horizon") => {
                let x = number(key, value)?;
                if x < 0.0 {
                    return Err(format!("`horizon` must be non-negative, got {x}"));
                }
                self.horizon = Some(x);
            }
            ("bench", "window") => self.window = number(key, value)?,
            ("bench", "reference_step") => self.reference_step = number(key, value)?,
            ("bench", "sample_interval") => self.sample_interval = Some(number(key, value)?),
            ("bench", "methods") => {
                let methods = value
                    .split(',')
                    .map(|m| m.trim().parse::<MethodSpec>().map_err(|e| e.to_string()))
                    .collect::<Result<Vec<_>, _>>()?;
                self.methods = Some(methods);
            }
            ("bench", "knobs") => self.knobs = Some(numbers(key, value)?),
            ("bench", "accuracies") => self.accuracies = Some(numbers(key, value)?),
            ("bench", "steps") => self.steps = Some(numbers(key, value)?),
            ("bench", "samples") => self.samples = count(key, value)?,
            ("bench", "seed") => self.seed = count(key, value)?,
            ("bench", "perturb_jacobian") => self.perturb_jacobian = number(key, value)?,
            ("output", "out") => self.out = Some(PathBuf::from(value)),
            _ => return Err(format!("unknown setting `{key}` in [{section}]")),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for entry in parse(text)? {
            self.apply(&entry.section, &entry.key, &entry.value)
                .map_err(|e| format!("line {}: {e}", entry.line))?;
        }
        Ok(())
    }

    pub fn integrator_or(&self, default: IntegratorKind) -> IntegratorKind {
        self.integrator.unwrap_or(default)
    }
}
