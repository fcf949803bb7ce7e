use std::hash::BuildHasher;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bootmi::simlab::{default_battery, run_study, MethodSpec, ScenarioConfig};
use bootmi::{
    pool, pool_rubin, run_mi, run_plan, Method, Orientation, ResampleOrder, ResamplePlan,
    RubinInputs,
};
use serde_json::json;

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::io;

pub fn fresh_seed() -> u64 {
    std::collections::hash_map::RandomState::new().hash_one(std::time::SystemTime::now())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
}

pub fn execute(config: &RunConfig, save_grid: Option<&Path>) -> Result<(), CliError> {
    let started = Instant::now();
    let output = match config.command {
        Command::Analyze => analyze(config, save_grid)?,
        Command::Simulate => simulate(config)?,
        Command::Pool => pool_grid(config)?,
    };
    let meta = json!({
        "command": config.command.as_str(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.settings.seed,
        "config_sha256": config.hash(),
        "config": config,
        "runtime_seconds": started.elapsed().as_secs_f64(),
    });
    match &config.settings.out {
        Some(out) => {
            write_text(out, &output)?;
            let mut meta_path = out.clone().into_os_string();
            meta_path.push(".meta.json");
            let text = serde_json::to_string_pretty(&meta).expect("serializable") + "\n";
            write_text(&PathBuf::from(meta_path), &text)
        }
        None => {
            print!("{output}");
            eprintln!("{meta}");
            Ok(())
        }
    }
}

fn order_for(method: Method) -> ResampleOrder {
    match method.orientation() {
        Orientation::ImputationOuter => ResampleOrder::MiThenBoot,
        Orientation::BootstrapOuter => ResampleOrder::BootThenMi,
    }
}

fn analyze(config: &RunConfig, save_grid: Option<&Path>) -> Result<String, CliError> {
    let s = &config.settings;
    let path = config.require(&s.data, "data")?;
    let imputer = config.require(&s.imputer, "imputer")?;
    let analyzer = config.require(&s.analyzer, "analyzer")?;
    let method = *config.require(&s.method, "method")?;
    let m = *config.require(&s.m, "m")?;
    let seed = *config.require(&s.seed, "seed")?;
    let alpha = s.alpha()?;
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let data = io::read_dataset(file)?;

    let result = if method == Method::MiRubin {
        if save_grid.is_some() {
            return Err(CliError::Config("mi-rubin does not resample, so there is no grid to save".into()));
        }
        let estimates = run_mi(&data, imputer, analyzer, m, seed)?;
        pool_rubin(&RubinInputs::from_estimates(&estimates, alpha))?
    } else {
        let b = *config.require(&s.b, "b")?;
        let plan = ResamplePlan { m, b, seed, order: order_for(method) };
        let grid = run_plan(&data, imputer, analyzer, &plan)?;
        if let Some(p) = save_grid {
            write_text(p, &io::write_grid(&grid))?;
        }
        pool(method, &grid, alpha)?
    };
    Ok(io::format_result(&result, s.format()))
}

fn load_scenario(name: &str) -> Result<ScenarioConfig, CliError> {
    if ScenarioConfig::builtin_ids().any(|id| id == name) {
        return Ok(ScenarioConfig::builtin(name)?);
    }
    let path = Path::new(name);
    if path.is_file() {
        return Ok(ScenarioConfig::from_json(&read_text(path)?)?);
    }
    let known: Vec<_> = ScenarioConfig::builtin_ids().collect();
    Err(CliError::Config(format!(
        "unknown scenario `{name}` (built-in: {}; or a path to a scenario JSON file)",
        known.join(", ")
    )))
}

/// `m` replaces every imputation count above 2 and `b` every bootstrap count,
/// so the one- and two-imputation entries keep their meaning.
fn battery(config: &RunConfig) -> Vec<MethodSpec> {
    let s = &config.settings;
    let mut battery = s.battery.clone().unwrap_or_else(default_battery);
    for spec in &mut battery {
        if let Some(m) = s.m.filter(|_| spec.m > 2) {
            spec.m = m;
        }
        if let Some(b) = s.b.filter(|_| spec.b > 0) {
            spec.b = b;
        }
    }
    battery
}

fn simulate(config: &RunConfig) -> Result<String, CliError> {
    let s = &config.settings;
    let scenario = load_scenario(config.require(&s.scenario, "scenario")?)?;
    let nsim = *config.require(&s.nsim, "nsim")?;
    let seed = *config.require(&s.seed, "seed")?;
    let report = run_study(&scenario, &battery(config), nsim, seed, s.alpha()?)?;
    Ok(io::format_report(&report, s.format()))
}

fn pool_grid(config: &RunConfig) -> Result<String, CliError> {
    let s = &config.settings;
    let grid = io::read_grid(&read_text(config.require(&s.grid, "grid")?)?)?;
    let method = *config.require(&s.method, "method")?;
    let result = pool(method, &grid, s.alpha()?)?;
    Ok(io::format_result(&result, s.format()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Settings;

    fn simulate_config(m: Option<usize>, b: Option<usize>) -> RunConfig {
        RunConfig {
            command: Command::Simulate,
            settings: Settings { m, b, ..Settings::default() },
        }
    }

    #[test]
    fn overrides_touch_only_the_large_counts() {
        let got = battery(&simulate_config(Some(4), Some(30)));
        let want: Vec<(usize, usize)> = vec![(4, 0), (4, 30), (4, 30), (4, 30), (1, 30), (2, 30)];
        assert_eq!(got.iter().map(|s| (s.m, s.b)).collect::<Vec<_>>(), want);
        assert_eq!(battery(&simulate_config(None, None)), default_battery());
    }

    #[test]
    fn orders_follow_method_orientation() {
        for method in Method::ALL {
            assert_eq!(order_for(method).orientation(), method.orientation());
        }
    }

    #[test]
    fn unknown_scenarios_are_config_errors() {
        assert_eq!(load_scenario("no-such-scenario").unwrap_err().exit_code(), 2);
        assert_eq!(load_scenario("trial-mar").unwrap().id, "trial-mar");
    }
}
