//! Commands behind the `cei-sim` binary. Each returns a report and writes
//! its artefacts; printing is left to the caller.

pub mod plot;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use cei_core::analysis::{self, SweepReport};
use cei_core::engine::{self, SimOutcome};
use cei_core::exec::{self, Execution};
use cei_core::output;
use cei_core::scenario::{self, ScenarioConfig, PRESET_NAMES};
use cei_core::verify::{self, Suite};

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: SimOutcome,
    pub trace_path: PathBuf,
    pub outcome_path: PathBuf,
    pub replans_path: PathBuf,
    pub plot_paths: Vec<PathBuf>,
    pub wall_seconds: f64,
}

/// A preset name, or a path to a config file. `config` layers a file over
/// the named preset.
pub fn resolve_scenario(scenario: &str, config: Option<&Path>) -> Result<ScenarioConfig> {
    let is_preset = PRESET_NAMES.iter().any(|p| p.eq_ignore_ascii_case(scenario))
        || scenario == "car-following";
    match (is_preset, config) {
        (true, None) => Ok(scenario::preset(scenario)?),
        (true, Some(path)) => {
            let text = read(path)?;
            scenario::parse_config_over(&text, Some(scenario))
                .with_context(|| format!("in config {}", path.display()))
        }
        (false, extra) => {
            if extra.is_some() {
                anyhow::bail!("--config can only be combined with a preset name, got `{scenario}`");
            }
            let path = Path::new(scenario);
            if !path.exists() {
                anyhow::bail!(
                    "`{scenario}` is neither a preset ({}) nor an existing config file",
                    PRESET_NAMES.join(", ")
                );
            }
            let text = read(path)?;
            scenario::parse_config(&text).with_context(|| format!("in config {}", path.display()))
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn cmd_run(config: &ScenarioConfig, out_dir: &Path, plot: bool) -> Result<RunReport> {
    ensure_dir(out_dir)?;
    let started = Instant::now();
    let run = engine::run(config)?;
    let wall_seconds = started.elapsed().as_secs_f64();

    let stem = file_stem(&config.name);
    let trace_path = out_dir.join(format!("{stem}_trace.csv"));
    let outcome_path = out_dir.join(format!("{stem}_outcome.json"));
    let replans_path = out_dir.join(format!("{stem}_replans.json"));
    output::write_trace_csv(create(&trace_path)?, &run.trace)?;
    output::write_outcome_json(create(&outcome_path)?, &run.outcome)?;
    output::write_replans_json(create(&replans_path)?, &run.replans)?;

    let mut plot_paths = Vec::new();
    if plot {
        for (panel, svg) in plot::run_panels(config, &run)? {
            let path = out_dir.join(format!("{stem}_{panel}.svg"));
            fs::write(&path, svg).with_context(|| format!("cannot write {}", path.display()))?;
            plot_paths.push(path);
        }
    }
    Ok(RunReport {
        outcome: run.outcome,
        trace_path,
        outcome_path,
        replans_path,
        plot_paths,
        wall_seconds,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub report: SweepReport,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    pub plot_path: PathBuf,
}

/// Parallelism is capped by `CEI_SIM_THREADS` when set.
pub fn cmd_sweep(velocities: &[f64], out_dir: &Path) -> Result<SweepOutput> {
    ensure_dir(out_dir)?;
    let report = analysis::sweep(velocities, Execution::default(), exec::thread_cap_from_env())?;

    let csv_path = out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&csv_path)?);
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let json_path = out_dir.join("sweep.json");
    serde_json::to_writer_pretty(create(&json_path)?, &report)?;
    let plot_path = out_dir.join("sweep.svg");
    fs::write(&plot_path, plot::sweep_panel(&report))
        .with_context(|| format!("cannot write {}", plot_path.display()))?;
    Ok(SweepOutput {
        report,
        csv_path,
        json_path,
        plot_path,
    })
}

pub fn cmd_verify(suite: Suite) -> Result<verify::Report> {
    Ok(verify::run_suite(suite, Execution::default())?)
}

/// One line per preset: name and a short description.
pub fn list_scenarios() -> Vec<(&'static str, &'static str)> {
    PRESET_NAMES
        .iter()
        .map(|&name| {
            let about = match name {
                "A" => "merge, no projected conflict; left faster (10 vs 9 m/s)",
                "B" => "merge, projected overlap; right starts 1.2 m ahead",
                "C" => "merge, equal speeds; left has the lower upper threshold",
                "D" => "as C with the left lower threshold raised to 0.3",
                "car_following" => "400 m straight road; follower 10 m/s behind leader 9 m/s",
                _ => "",
            };
            (name, about)
        })
        .collect()
}

pub fn describe_outcome(o: &SimOutcome) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    format!(
        "{}: collided={} termination={:?} first_through_merge={} headway_at_merge={} \
         upper_replans(left/right)={}/{} final_time={:.2}",
        o.scenario,
        o.collided,
        o.termination,
        o.first_through_merge.map_or("-", |s| s.as_str()),
        opt(o.headway_at_merge),
        o.replans_upper_left,
        o.replans_upper_right,
        o.final_time
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_filesystem_safe() {
        assert_eq!(file_stem("sweep_10.5"), "sweep_10_5");
        assert_eq!(file_stem("a b/c"), "a_b_c");
        assert_eq!(file_stem("car_following"), "car_following");
    }

    #[test]
    fn presets_resolve_without_a_file() {
        assert_eq!(resolve_scenario("D", None).unwrap().name, "D");
        assert_eq!(resolve_scenario("car-following", None).unwrap().name, "car_following");
        assert!(resolve_scenario("no_such_thing", None).is_err());
    }

    #[test]
    fn every_preset_has_a_description() {
        assert!(list_scenarios().iter().all(|(_, about)| !about.is_empty()));
    }
}
